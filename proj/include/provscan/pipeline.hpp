#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "provscan/elfscan.hpp"
#include "provscan/upstream.hpp"
#include "provscan/vulnreach.hpp"
#include "provscan/xecg.hpp"

namespace provscan::pipeline {

struct ScanConfig {
  std::filesystem::path wheel;
  std::filesystem::path repo_dir;
  std::filesystem::path hashdb;
  std::filesystem::path vulndb_dir;
  std::filesystem::path callgraph_dir;
  std::filesystem::path bridge_map;
  std::filesystem::path host_inventory;      // optional
  std::filesystem::path extractor_registry;  // optional, builtin when empty
  std::filesystem::path upstream_meta;       // optional, builtin when empty
  std::filesystem::path substitutions;       // optional stripped->unstripped map
  bool strict = false;
  bool probe_enabled = false;
  std::string probe_command;
  int kchains = 5;
  std::vector<std::string> system_paths = {"/lib64", "/usr/lib64", "/lib", "/usr/lib"};
  std::vector<std::string> extras;
  int max_system_depth = 8;
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fails before any work when a referenced path is missing.
void validate_paths(const ScanConfig& config);

struct ScanResult {
  pkgmeta::PythonDepTree dep_tree;
  std::vector<upstream::AnnotatedTree> trees;
  xecg::XECG xecg;
  vulnreach::ScanReport report;
};

ScanResult run_scan(const ScanConfig& config);

struct ProvenanceLine {
  std::string path;
  std::string kind;
  std::string tag;
};

struct ProvenanceResult {
  std::vector<ProvenanceLine> lines;
  int vendored_total = 0;
  int hash_matched = 0;
  int version_matched = 0;
  int unknown = 0;
  std::vector<std::string> diagnostics;
};

ProvenanceResult run_provenance(const ScanConfig& config);

/// Parse a substitution map file: `stripped-path<TAB>unstripped-path` lines.
std::map<std::string, std::filesystem::path> load_substitutions(
    const std::filesystem::path& file);

}  // namespace provscan::pipeline
