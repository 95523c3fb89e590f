#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "provscan/elfscan.hpp"
#include "provscan/hashdb.hpp"
#include "provscan/pkgmeta.hpp"

namespace provscan::upstream {

/// Curated mapping from a library base name to the OS package shipping it
/// and the upstream project the package is built from.
struct UpstreamMetaRecord {
  std::string libname;
  std::string os_family;
  std::string os_package;
  std::string project;      // canonical project id, e.g. "openssl"
  std::string source_url;
};

class UpstreamMetaTable {
 public:
  static UpstreamMetaTable builtin();
  static UpstreamMetaTable load(const std::filesystem::path& file);
  static UpstreamMetaTable parse(std::string_view text);

  void add(UpstreamMetaRecord rec);
  std::vector<UpstreamMetaRecord> lookup(std::string_view libname) const;
  std::optional<std::string> project_of(std::string_view libname) const;
  size_t size() const { return records_.size(); }

 private:
  std::vector<UpstreamMetaRecord> records_;
};

enum class Strategy { StringPattern, SymbolProbe };

struct ExtractorSpec {
  std::string libname;
  Strategy strategy = Strategy::StringPattern;
  std::string pattern;  // regex; first capture group is the version
  std::string symbol;   // probe: exported symbol to invoke
  std::string decode;   // probe: result decoding rule
};

/// Registry file format: one record per line, `libname<TAB>strategy<TAB>payload`.
/// strategy `string`: payload is the regex. strategy `probe`: payload is
/// `symbol:decode`.
class ExtractorRegistry {
 public:
  static ExtractorRegistry builtin();
  static ExtractorRegistry load(const std::filesystem::path& file);
  static ExtractorRegistry parse(std::string_view text);

  void add(ExtractorSpec spec);
  std::optional<ExtractorSpec> find(std::string_view libname) const;
  size_t size() const { return specs_.size(); }
  std::string serialize() const;

 private:
  std::vector<ExtractorSpec> specs_;
};

/// External probe process contract: invoked as
///   <command> <object-path> <symbol> <decode-rule>
/// and must print the version on a single line (nonzero exit on failure).
/// Disabled by default; loading vendored code in-process is never done.
struct ProbeAdapter {
  bool enabled = false;
  std::string command;
  int timeout_sec = 20;
};

struct ProvenanceTag {
  enum class Kind { OsPackage, Upstream, OwningPythonPackage, HostSystem, Unknown };
  Kind kind = Kind::Unknown;
  // OsPackage / HostSystem
  std::string os, package, version;
  // additional (os, package, version) candidates when a hash query is ambiguous
  std::vector<std::array<std::string, 3>> other_candidates;
  // Upstream
  std::string project, upstream_version;
  // OwningPythonPackage
  pkgmeta::PackageId owner;
  // Unknown
  std::string reason;  // NoHashMatch, NoMetadata, NoExtractor, ExtractionFailed, ...

  static ProvenanceTag os_package(std::string os, std::string package, std::string version);
  static ProvenanceTag upstream(std::string project, std::string version);
  static ProvenanceTag owning_package(pkgmeta::PackageId owner);
  static ProvenanceTag host_system(std::string os, std::string package, std::string version);
  static ProvenanceTag unknown(std::string reason);

  std::string str() const;
};

struct ExtractionDiagnostics {
  std::vector<std::string> candidates;  // conflicting versions, when any
  std::string error;
};

/// Look up the curated table; a miss is reported, not thrown.
std::optional<std::string> resolve_upstream_project(std::string_view libname,
                                                    const UpstreamMetaTable& table);

/// Run one extractor over a binary. StringPattern scans printable ASCII runs
/// (length >= 4) and applies the regex; all distinct captures must agree.
/// SymbolProbe shells out through the adapter.
std::optional<std::string> extract_upstream_version(std::span<const uint8_t> binary,
                                                    const ExtractorSpec& spec,
                                                    const ProbeAdapter& probe,
                                                    ExtractionDiagnostics& diag);

/// Host inventory file: `path\tos\tpackage\tversion` per line.
class HostInventory {
 public:
  static HostInventory load(const std::filesystem::path& file);
  static HostInventory parse(std::string_view text);
  void add(const std::string& path, std::string os, std::string package, std::string version);
  std::optional<std::array<std::string, 3>> lookup(const std::string& path) const;

 private:
  std::map<std::string, std::array<std::string, 3>> map_;
};

struct AnnotatedNode {
  elfscan::BinaryNode node;
  ProvenanceTag tag;
  // project affiliation usable for vulnerability matching even when the tag
  // is an OS package or unknown (derived from the meta table)
  std::optional<std::string> project_hint;
};

struct AnnotatedTree {
  pkgmeta::PackageId owner;
  std::vector<AnnotatedNode> nodes;
  std::vector<std::pair<size_t, size_t>> edges;
  std::vector<std::string> diagnostics;
};

/// Tag every node of a binary dependency tree: native extensions belong to
/// the owning Python package, system binaries resolve through the host
/// inventory, vendored binaries try the hash database first and fall back to
/// upstream version extraction. Total: per-node failures become Unknown tags.
AnnotatedTree annotate_provenance(const elfscan::BinaryDepTree& tree,
                                  const pkgmeta::PackageId& owner, const provdb::HashDb& db,
                                  const UpstreamMetaTable& meta, const ExtractorRegistry& registry,
                                  const HostInventory& inventory, const ProbeAdapter& probe = {});

}  // namespace provscan::upstream
