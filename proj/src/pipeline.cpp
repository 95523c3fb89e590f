#include "provscan/pipeline.hpp"

#include <fstream>

namespace provscan::pipeline {

namespace {

std::vector<uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void require(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string(what) + " not set");
  if (!std::filesystem::exists(p)) throw ConfigError(std::string(what) + " missing: " + p.string());
}

struct LoadedInputs {
  provdb::HashDb db;
  upstream::UpstreamMetaTable meta;
  upstream::ExtractorRegistry registry;
  upstream::HostInventory inventory;
  upstream::ProbeAdapter probe;
  elfscan::ExpandOptions expand;
  elfscan::SearchPathResolver resolver{std::vector<std::filesystem::path>{}};
};

LoadedInputs load_common(const ScanConfig& config) {
  LoadedInputs in;
  in.db = provdb::HashDb::load(config.hashdb);
  in.meta = config.upstream_meta.empty() ? upstream::UpstreamMetaTable::builtin()
                                         : upstream::UpstreamMetaTable::load(config.upstream_meta);
  in.registry = config.extractor_registry.empty()
                    ? upstream::ExtractorRegistry::builtin()
                    : upstream::ExtractorRegistry::load(config.extractor_registry);
  if (!config.host_inventory.empty())
    in.inventory = upstream::HostInventory::load(config.host_inventory);
  in.probe.enabled = config.probe_enabled;
  in.probe.command = config.probe_command;
  in.expand.max_system_depth = config.max_system_depth;
  if (!config.substitutions.empty())
    in.expand.substitutions = load_substitutions(config.substitutions);
  std::vector<std::filesystem::path> paths(config.system_paths.begin(),
                                           config.system_paths.end());
  in.resolver = elfscan::SearchPathResolver(std::move(paths));
  return in;
}

}  // namespace

std::map<std::string, std::filesystem::path> load_substitutions(
    const std::filesystem::path& file) {
  std::map<std::string, std::filesystem::path> map;
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open substitution map " + file.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError("substitution map line " + std::to_string(line_no) +
                        ": expected stripped\\tunstripped");
    map[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return map;
}

void validate_paths(const ScanConfig& config) {
  require(config.wheel, "wheel");
  require(config.repo_dir, "wheel repository");
  require(config.hashdb, "hash database");
  require(config.vulndb_dir, "vulnerability database directory");
  require(config.callgraph_dir, "call graph directory");
  require(config.bridge_map, "bridge map");
  for (const auto* opt : {&config.host_inventory, &config.extractor_registry,
                          &config.upstream_meta, &config.substitutions})
    if (!opt->empty() && !std::filesystem::exists(*opt))
      throw ConfigError("missing input: " + opt->string());
}

ScanResult run_scan(const ScanConfig& config) {
  validate_paths(config);
  ScanResult result;
  std::vector<std::string> diagnostics;

  pkgmeta::ParseOptions popts;
  popts.mode = config.strict ? pkgmeta::ParseMode::Strict : pkgmeta::ParseMode::Lenient;
  for (const auto& e : config.extras) popts.requested_extras.insert(pkgmeta::normalize_name(e));

  // step 1: Python dependency tree
  std::vector<uint8_t> root_wheel = read_file(config.wheel);
  pkgmeta::DirRepository repo(config.repo_dir);
  result.dep_tree = pkgmeta::resolve_python_dep_tree(root_wheel, repo, popts);
  diagnostics.insert(diagnostics.end(), result.dep_tree.diagnostics.begin(),
                     result.dep_tree.diagnostics.end());

  // steps 2-3: binary trees, annotated with provenance
  LoadedInputs in = load_common(config);
  for (const pkgmeta::PackageId& pkg : result.dep_tree.nodes) {
    if (pkg.version.empty()) continue;  // unresolved leaf
    std::vector<uint8_t> wheel =
        pkg == result.dep_tree.root ? root_wheel : repo.fetch(pkg.name, pkg.version);
    elfscan::BinaryDepTree btree =
        elfscan::expand_binary_tree(pkg, wheel, in.resolver, in.expand);
    result.trees.push_back(upstream::annotate_provenance(btree, pkg, in.db, in.meta,
                                                         in.registry, in.inventory, in.probe));
    for (const auto& d : result.trees.back().diagnostics)
      diagnostics.push_back(pkg.name + ": " + d);
  }

  // step 4: cross-ecosystem call graph
  std::vector<xecg::CallGraph> python_graphs, binary_graphs;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(config.callgraph_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    xecg::CallGraph g = xecg::load_call_graph_file(f);
    (g.is_python ? python_graphs : binary_graphs).push_back(std::move(g));
  }
  std::set<std::string> python_units;
  for (const auto& g : python_graphs) python_units.insert(g.unit);
  for (const pkgmeta::PackageId& pkg : result.dep_tree.nodes)
    if (!pkg.version.empty() && !python_units.count(pkg.name))
      diagnostics.push_back("no call graph for package " + pkg.name + "; treated as opaque");

  std::vector<xecg::UnitDeps> py_deps;
  {
    std::map<std::string, std::vector<std::string>> by_unit;
    for (const auto& [from, to] : result.dep_tree.edges) by_unit[from].push_back(to);
    for (auto& [unit, deps] : by_unit) py_deps.push_back({unit, std::move(deps)});
  }
  std::vector<xecg::UnitDeps> bin_deps;
  for (const upstream::AnnotatedTree& tree : result.trees) {
    std::map<size_t, std::vector<std::string>> by_node;
    for (const auto& [from, to] : tree.edges)
      by_node[from].push_back(tree.nodes[to].node.path);
    for (auto& [idx, deps] : by_node)
      bin_deps.push_back({tree.nodes[idx].node.path, std::move(deps)});
  }

  xecg::Graph py_graph = xecg::stitch_python(xecg::disjoint_union(python_graphs), py_deps);
  xecg::Graph bin_graph = xecg::stitch_binary(xecg::disjoint_union(binary_graphs), bin_deps);
  xecg::BridgeMap bridges = xecg::BridgeMap::load(config.bridge_map);
  result.xecg = xecg::merge(py_graph, bin_graph, bridges, result.dep_tree.root.name);
  diagnostics.insert(diagnostics.end(), result.xecg.graph.diagnostics.begin(),
                     result.xecg.graph.diagnostics.end());

  // step 5: verdicts, reachability, report
  vulnreach::VulnDb vulndb = vulnreach::VulnDb::load_dir(config.vulndb_dir);
  std::vector<vulnreach::CveAssessment> assessments = vulnreach::assess(result.trees, vulndb);
  std::vector<vulnreach::Finding> findings =
      vulnreach::reachable_findings(result.xecg, assessments, result.dep_tree.root,
                                    config.kchains);
  result.report =
      vulnreach::emit_report(result.dep_tree.root, assessments, findings, std::move(diagnostics));
  return result;
}

ProvenanceResult run_provenance(const ScanConfig& config) {
  require(config.wheel, "wheel");
  require(config.hashdb, "hash database");
  ProvenanceResult result;

  std::vector<uint8_t> wheel = read_file(config.wheel);
  pkgmeta::WheelMetadata meta_wheel = pkgmeta::parse_wheel_metadata(wheel);
  LoadedInputs in = load_common(config);
  elfscan::BinaryDepTree btree =
      elfscan::expand_binary_tree(meta_wheel.id, wheel, in.resolver, in.expand);
  upstream::AnnotatedTree tree = upstream::annotate_provenance(
      btree, meta_wheel.id, in.db, in.meta, in.registry, in.inventory, in.probe);
  result.diagnostics = tree.diagnostics;

  for (const upstream::AnnotatedNode& node : tree.nodes) {
    result.lines.push_back({node.node.path, elfscan::kind_str(node.node.kind), node.tag.str()});
    if (node.node.kind != elfscan::BinaryKind::Vendored) continue;
    ++result.vendored_total;
    switch (node.tag.kind) {
      case upstream::ProvenanceTag::Kind::OsPackage: ++result.hash_matched; break;
      case upstream::ProvenanceTag::Kind::Upstream: ++result.version_matched; break;
      default: ++result.unknown; break;
    }
  }
  return result;
}

}  // namespace provscan::pipeline
