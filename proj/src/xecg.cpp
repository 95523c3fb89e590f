#include "provscan/xecg.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace provscan::xecg {

using nlohmann::json;

CallGraph load_call_graph(const json& doc) {
  CallGraph g;
  if (!doc.is_object()) throw SchemaError("/: document must be an object");
  if (!doc.contains("unit") || !doc["unit"].is_string())
    throw SchemaError("/unit: required string");
  g.unit = doc["unit"].get<std::string>();
  std::string kind = doc.value("kind", "python");
  if (kind != "python" && kind != "binary")
    throw SchemaError("/kind: must be \"python\" or \"binary\"");
  g.is_python = kind == "python";

  if (!doc.contains("nodes") || !doc["nodes"].is_array())
    throw SchemaError("/nodes: required array");
  std::set<std::string> declared;
  size_t i = 0;
  for (const auto& n : doc["nodes"]) {
    if (!n.is_string())
      throw SchemaError("/nodes/" + std::to_string(i) + ": must be a string");
    std::string name = n.get<std::string>();
    if (!declared.insert(name).second)
      throw SchemaError("/nodes/" + std::to_string(i) + ": duplicate node id '" + name + "'");
    g.nodes.push_back(std::move(name));
    ++i;
  }
  i = 0;
  for (const auto& e : doc.value("edges", json::array())) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string())
      throw SchemaError("/edges/" + std::to_string(i) + ": must be [caller, callee]");
    std::string caller = e[0].get<std::string>();
    std::string callee = e[1].get<std::string>();
    if (!declared.count(caller))
      throw SchemaError("/edges/" + std::to_string(i) + "/0: undeclared node '" + caller + "'");
    if (!declared.count(callee))
      throw SchemaError("/edges/" + std::to_string(i) + "/1: undeclared node '" + callee + "'");
    g.edges.emplace_back(std::move(caller), std::move(callee));
    ++i;
  }
  i = 0;
  for (const auto& x : doc.value("exports", json::array())) {
    if (!x.is_string())
      throw SchemaError("/exports/" + std::to_string(i) + ": must be a string");
    std::string name = x.get<std::string>();
    if (!declared.count(name))
      throw SchemaError("/exports/" + std::to_string(i) + ": undeclared node '" + name + "'");
    g.exports.insert(std::move(name));
    ++i;
  }
  return g;
}

CallGraph load_call_graph_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open " + file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
  return load_call_graph(doc);
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

size_t Graph::add_node(const FunctionId& id) {
  auto it = index.find(id);
  if (it != index.end()) return it->second;
  nodes.push_back(id);
  out.emplace_back();
  index[id] = nodes.size() - 1;
  return nodes.size() - 1;
}

bool Graph::add_edge(size_t from, size_t to) { return out[from].insert(to).second; }

bool Graph::has_edge(size_t from, size_t to) const { return out[from].count(to) > 0; }

size_t Graph::edge_count() const {
  size_t n = 0;
  for (const auto& s : out) n += s.size();
  return n;
}

Graph disjoint_union(const std::vector<CallGraph>& graphs) {
  Graph g;
  for (const CallGraph& cg : graphs) {
    for (const std::string& n : cg.nodes) g.add_node({cg.unit, n});
    for (const auto& [caller, callee] : cg.edges)
      g.add_edge(g.index.at({cg.unit, caller}), g.index.at({cg.unit, callee}));
    g.exports[cg.unit].insert(cg.exports.begin(), cg.exports.end());
  }
  return g;
}

namespace {

// Unresolved cross-unit reference: a leaf that its own unit does not export.
bool is_unresolved_ref(const Graph& g, size_t node) {
  if (!g.out[node].empty()) return false;
  auto it = g.exports.find(g.nodes[node].unit);
  return it == g.exports.end() || !it->second.count(g.nodes[node].name);
}

}  // namespace

Graph stitch_python(Graph g, const std::vector<UnitDeps>& deps) {
  std::map<std::string, const std::vector<std::string>*> dep_map;
  for (const auto& d : deps) dep_map[d.unit] = &d.deps;

  size_t node_count = g.nodes.size();
  for (size_t i = 0; i < node_count; ++i) {
    if (!is_unresolved_ref(g, i)) continue;
    auto dit = dep_map.find(g.nodes[i].unit);
    if (dit == dep_map.end()) continue;
    std::vector<size_t> matches;
    for (const std::string& dep : *dit->second) {
      auto eit = g.exports.find(dep);
      if (eit == g.exports.end() || !eit->second.count(g.nodes[i].name)) continue;
      auto target = g.index.find({dep, g.nodes[i].name});
      if (target != g.index.end()) matches.push_back(target->second);
    }
    if (matches.size() == 1) {
      g.add_edge(i, matches[0]);
    } else if (matches.size() > 1) {
      g.diagnostics.push_back("ambiguous callee " + g.nodes[i].name + " from unit " +
                              g.nodes[i].unit + ": exported by " +
                              std::to_string(matches.size()) + " dependencies, no edge added");
    }
  }
  return g;
}

Graph stitch_binary(Graph g, const std::vector<UnitDeps>& deps) {
  std::map<std::string, const std::vector<std::string>*> dep_map;
  for (const auto& d : deps) dep_map[d.unit] = &d.deps;

  size_t node_count = g.nodes.size();
  for (size_t i = 0; i < node_count; ++i) {
    if (!is_unresolved_ref(g, i)) continue;
    auto dit = dep_map.find(g.nodes[i].unit);
    if (dit == dep_map.end()) {
      g.synthetic.insert(i);
      continue;
    }
    std::vector<size_t> matches;  // in DT_NEEDED declaration order
    for (const std::string& dep : *dit->second) {
      auto eit = g.exports.find(dep);
      if (eit == g.exports.end() || !eit->second.count(g.nodes[i].name)) continue;
      auto target = g.index.find({dep, g.nodes[i].name});
      if (target != g.index.end()) matches.push_back(target->second);
    }
    if (matches.empty()) {
      g.synthetic.insert(i);
      continue;
    }
    if (matches.size() > 1)
      g.diagnostics.push_back("symbol " + g.nodes[i].name + " defined by " +
                              std::to_string(matches.size()) +
                              " dependencies; first declaration order wins");
    g.add_edge(i, matches[0]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bridges and merge
// ---------------------------------------------------------------------------

BridgeMap BridgeMap::from_json(const json& doc) {
  BridgeMap map;
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
    throw SchemaError("/entries: required array");
  size_t i = 0;
  for (const auto& e : doc["entries"]) {
    if (!e.is_array() || e.size() != 4)
      throw SchemaError("/entries/" + std::to_string(i) +
                        ": must be [pyUnit, pyFn, binUnit, binSym]");
    for (int k = 0; k < 4; ++k)
      if (!e[k].is_string())
        throw SchemaError("/entries/" + std::to_string(i) + "/" + std::to_string(k) +
                          ": must be a string");
    map.entries.push_back({e[0].get<std::string>(), e[1].get<std::string>(),
                           e[2].get<std::string>(), e[3].get<std::string>()});
    ++i;
  }
  return map;
}

BridgeMap BridgeMap::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw SchemaError("cannot open " + file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(file.string() + ": " + e.what());
  }
  return from_json(doc);
}

XECG merge(const Graph& python_graph, const Graph& binary_graph, const BridgeMap& bridges,
           const std::string& root_unit) {
  XECG x;
  Graph& g = x.graph;
  auto absorb = [&](const Graph& src) {
    for (size_t i = 0; i < src.nodes.size(); ++i) {
      size_t n = g.add_node(src.nodes[i]);
      if (src.synthetic.count(i)) g.synthetic.insert(n);
    }
    for (size_t i = 0; i < src.nodes.size(); ++i)
      for (size_t j : src.out[i])
        g.add_edge(g.index.at(src.nodes[i]), g.index.at(src.nodes[j]));
    for (const auto& [unit, ex] : src.exports) g.exports[unit].insert(ex.begin(), ex.end());
    g.diagnostics.insert(g.diagnostics.end(), src.diagnostics.begin(), src.diagnostics.end());
  };
  absorb(python_graph);
  absorb(binary_graph);

  for (const BridgeEntry& e : bridges.entries) {
    auto from = g.index.find({e.py_unit, e.py_fn});
    auto to = g.index.find({e.bin_unit, e.bin_sym});
    if (from == g.index.end() || to == g.index.end()) {
      g.diagnostics.push_back("dangling bridge " + e.py_unit + ":" + e.py_fn + " -> " +
                              e.bin_unit + ":" + e.bin_sym);
      continue;
    }
    g.add_edge(from->second, to->second);
  }

  for (size_t i = 0; i < g.nodes.size(); ++i)
    if (g.nodes[i].unit == root_unit) x.roots.insert(i);
  return x;
}

}  // namespace provscan::xecg
