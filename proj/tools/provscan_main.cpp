#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "provscan/archive.hpp"
#include "provscan/hashdb.hpp"
#include "provscan/ingest.hpp"
#include "provscan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace provscan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

std::vector<uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_db_ingest(const std::string& os, const std::string& package, const std::string& version,
                  const std::vector<fs::path>& artifacts, const fs::path& out) {
  provdb::ArtifactId id{os, package, version};
  std::vector<provdb::HashDbEntry> entries;
  for (const fs::path& artifact : artifacts) {
    std::vector<provdb::HashDbEntry> batch;
    try {
      if (fs::is_directory(artifact)) {
        batch = provdb::ingest_tree(artifact, id);
      } else {
        std::vector<uint8_t> bytes = read_file(artifact);
        std::string name = artifact.filename().string();
        if (name.ends_with(".deb"))
          batch = provdb::ingest_deb(bytes, id);
        else if (name.ends_with(".rpm"))
          batch = provdb::ingest_rpm(bytes, id);
        else
          throw std::runtime_error("unrecognized artifact type: " + name);
      }
    } catch (const archive::UnsupportedCompression& e) {
      std::cerr << artifact.string() << ": skipped (" << e.what() << ")\n";
      continue;
    }
    entries.insert(entries.end(), batch.begin(), batch.end());
    std::cerr << artifact.string() << ": " << batch.size() << " entries\n";
  }
  provdb::HashDb db = provdb::HashDb::from_entries(std::move(entries));
  if (fs::exists(out)) db.merge(provdb::HashDb::load(out));
  db.save(out);
  std::cerr << out.string() << ": " << db.size() << " entries total\n";
  return kExitOk;
}

int cmd_db_merge(const std::vector<fs::path>& inputs, const fs::path& out) {
  provdb::HashDb merged;
  for (const fs::path& in : inputs) merged.merge(provdb::HashDb::load(in));
  merged.save(out);
  std::cerr << out.string() << ": " << merged.size() << " entries\n";
  return kExitOk;
}

int cmd_db_query(const fs::path& db_path, const std::string& libname, const std::string& hash8) {
  provdb::HashDb db = provdb::HashDb::load(db_path);
  auto hits = db.query(libname, hash8);
  for (const auto& e : hits)
    std::cout << e.os << "\t" << e.package << "\t" << e.version << "\t" << e.libname << "\t"
              << e.hash8 << "\n";
  if (hits.size() > 1) std::cerr << "ambiguous: " << hits.size() << " origins\n";
  return hits.empty() ? kExitFindings : kExitOk;
}

int cmd_db_check_collisions(const fs::path& db_path) {
  provdb::HashDb db = provdb::HashDb::load(db_path);
  auto warnings = db.detect_collisions();
  for (const auto& w : warnings) std::cout << w << "\n";
  return kExitOk;
}

// Flat key=value configuration mirroring ScanConfig; command-line flags win.
void apply_flat_config(CLI::App* cmd, pipeline::ScanConfig& config, const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config file " + file.string());
  bool clear_paths = true;  // first system-path line replaces the defaults
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                               ": expected key=value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto given = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (key == "wheel" && !given("wheel")) config.wheel = value;
    else if (key == "repo" && !given("--repo")) config.repo_dir = value;
    else if (key == "hash-db" && !given("--hash-db")) config.hashdb = value;
    else if (key == "vuln-db" && !given("--vuln-db")) config.vulndb_dir = value;
    else if (key == "call-graphs" && !given("--call-graphs")) config.callgraph_dir = value;
    else if (key == "bridges" && !given("--bridges")) config.bridge_map = value;
    else if (key == "host-inventory" && !given("--host-inventory"))
      config.host_inventory = value;
    else if (key == "registry" && !given("--registry")) config.extractor_registry = value;
    else if (key == "upstream-meta" && !given("--upstream-meta")) config.upstream_meta = value;
    else if (key == "substitutions" && !given("--substitutions")) config.substitutions = value;
    else if (key == "strict" && !given("--strict")) config.strict = value == "true";
    else if (key == "enable-probe" && !given("--enable-probe"))
      config.probe_enabled = value == "true";
    else if (key == "probe-command" && !given("--probe-command")) config.probe_command = value;
    else if (key == "chains" && !given("--chains")) config.kchains = std::stoi(value);
    else if (key == "system-depth" && !given("--system-depth"))
      config.max_system_depth = std::stoi(value);
    else if (key == "system-path" && !given("--system-path")) {
      if (clear_paths) config.system_paths.clear();
      clear_paths = false;
      config.system_paths.push_back(value);
    } else if (key == "extra" && !given("--extra")) {
      config.extras.push_back(value);
    } else if (key != "wheel" && key != "repo" && key != "hash-db" && key != "vuln-db" &&
               key != "call-graphs" && key != "bridges" && key != "host-inventory" &&
               key != "registry" && key != "upstream-meta" && key != "substitutions" &&
               key != "strict" && key != "enable-probe" && key != "probe-command" &&
               key != "chains" && key != "system-depth" && key != "system-path" &&
               key != "extra") {
      throw std::runtime_error(file.string() + ":" + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    }
  }
}

void add_scan_options(CLI::App* cmd, pipeline::ScanConfig& config) {
  cmd->add_option("wheel", config.wheel, "wheel file to scan");
  cmd->add_option("--repo", config.repo_dir, "wheel repository directory");
  cmd->add_option("--hash-db", config.hashdb, "hash database file");
  cmd->add_option("--vuln-db", config.vulndb_dir, "vulnerability database directory");
  cmd->add_option("--call-graphs", config.callgraph_dir, "call graph directory");
  cmd->add_option("--bridges", config.bridge_map, "bridge map file");
  cmd->add_option("--host-inventory", config.host_inventory, "host inventory file");
  cmd->add_option("--registry", config.extractor_registry, "extractor registry file");
  cmd->add_option("--upstream-meta", config.upstream_meta, "upstream metadata table");
  cmd->add_option("--substitutions", config.substitutions,
                  "stripped-to-unstripped substitution map");
  cmd->add_flag("--strict", config.strict, "fail on malformed metadata lines");
  cmd->add_flag("--enable-probe", config.probe_enabled, "allow the external probe adapter");
  cmd->add_option("--probe-command", config.probe_command, "probe adapter command");
  cmd->add_option("--chains", config.kchains, "max call chains per finding");
  cmd->add_option("--system-path", config.system_paths, "system library search path");
  cmd->add_option("--extra", config.extras, "enabled extras for marker evaluation");
  cmd->add_option("--system-depth", config.max_system_depth,
                  "system library recursion depth");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-ecosystem vulnerability scanner for Python wheels"};
  app.require_subcommand(1);

  // db
  CLI::App* db = app.add_subcommand("db", "hash database maintenance");
  db->require_subcommand(1);

  std::string os_id, package, version;
  std::vector<fs::path> artifacts;
  fs::path db_out = "hashdb.tsv";
  CLI::App* ingest = db->add_subcommand("ingest", "extract hash entries from OS artifacts");
  ingest->add_option("--os", os_id, "os family/distro id, e.g. debian/debian")->required();
  ingest->add_option("--package", package, "OS package name")->required();
  ingest->add_option("--version", version, "OS package version")->required();
  ingest->add_option("--out", db_out, "database file to update");
  ingest->add_option("artifacts", artifacts, ".deb/.rpm files or extracted trees")
      ->required()
      ->expected(-1);

  std::vector<fs::path> merge_inputs;
  fs::path merge_out = "hashdb.tsv";
  CLI::App* merge = db->add_subcommand("merge", "merge database files");
  merge->add_option("--out", merge_out, "output database file");
  merge->add_option("inputs", merge_inputs, "database files")->required()->expected(-1);

  fs::path query_db;
  std::string query_lib, query_hash;
  CLI::App* query = db->add_subcommand("query", "look up a (libname, hash8) pair");
  query->add_option("--db", query_db, "database file")->required();
  query->add_option("libname", query_lib, "library base name")->required();
  query->add_option("hash8", query_hash, "8 hex digit hash prefix")->required();

  fs::path check_db;
  CLI::App* check = db->add_subcommand("check-collisions", "report versions sharing a hash");
  check->add_option("--db", check_db, "database file")->required();

  // scan
  pipeline::ScanConfig scan_config;
  bool scan_json = false;
  fs::path scan_out, scan_config_file;
  CLI::App* scan = app.add_subcommand("scan", "full reachability scan of a wheel");
  add_scan_options(scan, scan_config);
  scan->add_option("--config", scan_config_file, "flat key=value configuration file");
  scan->add_flag("--json", scan_json, "emit the machine-readable report");
  scan->add_option("--out", scan_out, "write the report to a file");

  // provenance
  pipeline::ScanConfig prov_config;
  bool prov_stats = false;
  CLI::App* prov = app.add_subcommand("provenance", "list per-binary provenance for a wheel");
  prov->add_option("wheel", prov_config.wheel, "wheel file")->required();
  prov->add_option("--hash-db", prov_config.hashdb, "hash database file");
  prov->add_option("--registry", prov_config.extractor_registry, "extractor registry file");
  prov->add_option("--upstream-meta", prov_config.upstream_meta, "upstream metadata table");
  prov->add_option("--host-inventory", prov_config.host_inventory, "host inventory file");
  prov->add_option("--system-path", prov_config.system_paths, "system library search path");
  prov->add_flag("--enable-probe", prov_config.probe_enabled, "allow the probe adapter");
  prov->add_option("--probe-command", prov_config.probe_command, "probe adapter command");
  prov->add_flag("--stats", prov_stats, "print identification coverage fractions");

  // report
  fs::path report_in;
  bool report_json = false;
  CLI::App* report_cmd = app.add_subcommand("report", "re-render a saved JSON report");
  report_cmd->add_option("report", report_in, "report JSON file")->required();
  report_cmd->add_flag("--json", report_json, "re-emit canonical JSON instead of text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? kExitError : kExitOk;
  }

  try {
    if (ingest->parsed()) return cmd_db_ingest(os_id, package, version, artifacts, db_out);
    if (merge->parsed()) return cmd_db_merge(merge_inputs, merge_out);
    if (query->parsed()) return cmd_db_query(query_db, query_lib, query_hash);
    if (check->parsed()) return cmd_db_check_collisions(check_db);

    if (scan->parsed()) {
      if (!scan_config_file.empty()) apply_flat_config(scan, scan_config, scan_config_file);
      pipeline::ScanResult result = pipeline::run_scan(scan_config);
      std::string rendered = scan_json ? result.report.to_json().dump(2) + "\n"
                                       : result.report.to_text();
      if (!scan_out.empty()) {
        std::ofstream out(scan_out, std::ios::binary | std::ios::trunc);
        out << rendered;
      } else {
        std::cout << rendered;
      }
      return result.report.findings.empty() ? kExitOk : kExitFindings;
    }

    if (prov->parsed()) {
      pipeline::ProvenanceResult result = pipeline::run_provenance(prov_config);
      for (const auto& line : result.lines)
        std::cout << line.path << "\t" << line.kind << "\t" << line.tag << "\n";
      if (prov_stats) {
        auto frac = [&](int n) {
          char buf[16];
          double f = result.vendored_total
                         ? static_cast<double>(n) / result.vendored_total
                         : 0.0;
          std::snprintf(buf, sizeof buf, "%.3f", f);
          return std::string(buf);
        };
        std::cout << "vendored: " << result.vendored_total
                  << "  hash-matched: " << frac(result.hash_matched)
                  << "  version-matched: " << frac(result.version_matched)
                  << "  unknown: " << frac(result.unknown) << "\n";
      }
      return kExitOk;
    }

    if (report_cmd->parsed()) {
      std::ifstream in(report_in);
      if (!in) throw std::runtime_error("cannot open " + report_in.string());
      nlohmann::json doc = nlohmann::json::parse(in);
      if (report_json) {
        std::cout << doc.dump(2) << "\n";
      } else {
        std::cout << "scan report for " << doc["package"]["name"].get<std::string>() << " "
                  << doc["package"]["version"].get<std::string>() << "\n";
        for (const auto& f : doc["findings"])
          std::cout << "  " << f["cve"].get<std::string>() << "  "
                    << f["binary"].get<std::string>() << "\n";
        for (const auto& c : doc["counts"])
          std::cout << "  " << c["cve"].get<std::string>() << ": "
                    << c["vuln_provenance"].get<int>() << "/" << c["vuln_upstream"].get<int>()
                    << " provenance/upstream, fp reduction "
                    << c["fp_reduction_pct"].get<int>() << "%\n";
      }
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
