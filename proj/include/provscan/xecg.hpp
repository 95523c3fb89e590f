#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace provscan::xecg {

struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FunctionId {
  std::string unit;
  std::string name;

  bool operator==(const FunctionId&) const = default;
  auto operator<=>(const FunctionId&) const = default;
  std::string str() const { return unit + ":" + name; }
};

/// One unit's call graph in the interchange format:
///   {"unit": id, "kind": "python"|"binary",
///    "nodes": [...], "edges": [[caller, callee]], "exports": [...]}
/// Every edge endpoint must be declared in "nodes"; unresolved callees are
/// declared as leaf nodes carrying the bare target name.
struct CallGraph {
  std::string unit;
  bool is_python = true;
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::set<std::string> exports;
};

CallGraph load_call_graph(const nlohmann::json& doc);
CallGraph load_call_graph_file(const std::filesystem::path& file);

/// Multi-unit graph over interned function ids. Stitching only ever adds
/// edges; the input graphs stay subgraphs of the output.
struct Graph {
  std::vector<FunctionId> nodes;
  std::map<FunctionId, size_t> index;
  std::vector<std::set<size_t>> out;                      // adjacency
  std::map<std::string, std::set<std::string>> exports;   // per unit
  std::set<size_t> synthetic;                             // unresolved reference leaves
  std::vector<std::string> diagnostics;

  size_t add_node(const FunctionId& id);
  bool add_edge(size_t from, size_t to);
  bool has_edge(size_t from, size_t to) const;
  size_t edge_count() const;
  const FunctionId& id(size_t i) const { return nodes[i]; }
};

Graph disjoint_union(const std::vector<CallGraph>& graphs);

/// Per-unit dependency lists, in declaration order (DT_NEEDED order for
/// binaries).
struct UnitDeps {
  std::string unit;
  std::vector<std::string> deps;
};

/// Match unresolved cross-unit callee names (leaves not exported by their
/// own unit) against exported names of direct dependencies. A name exported
/// by several dependencies yields no edge and a diagnostic.
Graph stitch_python(Graph g, const std::vector<UnitDeps>& deps);

/// Same matching, but the first dependency in declaration order wins when
/// several export the symbol (mirrors dynamic-linker lookup). Unmatched
/// references are marked synthetic.
Graph stitch_binary(Graph g, const std::vector<UnitDeps>& deps);

struct BridgeEntry {
  std::string py_unit, py_fn;
  std::string bin_unit, bin_sym;
};

struct BridgeMap {
  std::vector<BridgeEntry> entries;

  static BridgeMap from_json(const nlohmann::json& doc);
  static BridgeMap load(const std::filesystem::path& file);
};

struct XECG {
  Graph graph;
  std::set<size_t> roots;  // all functions of the scanned package's unit
};

/// Union the stitched Python and binary graphs and add one edge per bridge
/// entry. Bridge entries referencing absent nodes become diagnostics.
XECG merge(const Graph& python_graph, const Graph& binary_graph, const BridgeMap& bridges,
           const std::string& root_unit);

}  // namespace provscan::xecg
