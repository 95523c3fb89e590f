#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "provscan/pkgmeta.hpp"
#include "provscan/upstream.hpp"
#include "provscan/versioncmp.hpp"
#include "provscan/xecg.hpp"

namespace provscan::vulnreach {

struct PredicateParseError : std::runtime_error {
  explicit PredicateParseError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Verdict { Vulnerable, Fixed, NotAffected, Unknown };
std::string verdict_str(Verdict v);

struct RangeClause {
  versioncmp::Comparator op;
  std::string version;
};
// clauses conjoin within a group; groups disjoin
using RangeGroup = std::vector<RangeClause>;

struct OsFix {
  std::string os;       // family or family/distro
  std::string package;
  std::string fixed;    // first fixed version; empty when not_affected
  bool not_affected = false;
};

struct VulnRecord {
  std::string cve;
  std::string project;
  std::vector<std::string> symbols;  // glob patterns allowed (e.g. sqlite3_*printf)
  std::vector<RangeGroup> upstream_ranges;
  std::vector<OsFix> os_fixes;

  static VulnRecord from_json(const nlohmann::json& doc);
  static VulnRecord load(const std::filesystem::path& file);
};

/// Directory of CVE-*.json documents.
class VulnDb {
 public:
  static VulnDb load_dir(const std::filesystem::path& dir);
  void add(VulnRecord rec) { records_.push_back(std::move(rec)); }
  const std::vector<VulnRecord>& records() const { return records_; }

 private:
  std::vector<VulnRecord> records_;
};

/// Parse a range group string like ">=1.8.3 && <1.9.4".
RangeGroup parse_range_group(std::string_view text);

/// True when the version falls into any group. Versions compare under the
/// deb upstream string algorithm (letter-suffixed versions like 1.1.0l order
/// correctly).
bool in_upstream_ranges(std::string_view version, const std::vector<RangeGroup>& ranges);

/// Upstream component of the version carried by an OS package tag: the deb
/// upstream part up to the first `+`/`~` mangle, or the rpm version part.
std::string upstream_component(const upstream::ProvenanceTag& tag);

/// Shell-style glob match (`*`, `?`) for vulnerable symbol patterns.
bool symbol_matches(std::string_view pattern, std::string_view name);

/// Backport-aware verdict for one provenance tag.
Verdict is_vulnerable(const upstream::ProvenanceTag& tag, const VulnRecord& rec);

/// Baseline that ignores OS package versions and backported fixes: the
/// upstream ranges applied to the upstream version component alone.
Verdict baseline_upstream_only(const upstream::ProvenanceTag& tag, const VulnRecord& rec);

// ---------------------------------------------------------------------------
// Assessment and findings
// ---------------------------------------------------------------------------

struct InstanceAssessment {
  std::string binary;              // binary node id (path)
  pkgmeta::PackageId owner;
  upstream::ProvenanceTag tag;
  elfscan::BinaryKind kind = elfscan::BinaryKind::Vendored;
  Verdict provenance = Verdict::Unknown;
  Verdict baseline = Verdict::Unknown;
};

struct CveAssessment {
  VulnRecord record;
  std::vector<InstanceAssessment> instances;
};

/// Match every annotated binary against every record. A record applies to a
/// binary when the binary's project affiliation equals the record's project
/// or its (os, package) provenance appears in the record's fixes. Unknown
/// provenance yields Unknown verdicts, reported separately, never dropped.
std::vector<CveAssessment> assess(const std::vector<upstream::AnnotatedTree>& trees,
                                  const VulnDb& db);

struct Finding {
  pkgmeta::PackageId package;  // scanned package
  std::string cve;
  std::string binary;
  upstream::ProvenanceTag tag;
  enum class Basis { ProvenanceMatch, UpstreamOnlyMatch } basis = Basis::ProvenanceMatch;
  // alternating Python/binary function ids, root first, vulnerable symbol last
  std::vector<std::vector<xecg::FunctionId>> chains;
};

/// Plain forward reachability from the root set.
std::set<size_t> reachable_set(const xecg::XECG& x);

/// Up to k shortest chains from any root to the target node, shortest first,
/// ties broken lexicographically; chains are simple paths.
std::vector<std::vector<xecg::FunctionId>> shortest_chains(const xecg::XECG& x, size_t target,
                                                           int k);

/// For every provenance-vulnerable instance, find its vulnerable symbols in
/// the XECG and emit a finding per reachable one.
std::vector<Finding> reachable_findings(const xecg::XECG& x,
                                        const std::vector<CveAssessment>& assessments,
                                        const pkgmeta::PackageId& scanned, int kchains = 5);

struct CveCounts {
  std::string cve;
  int instances = 0;        // native-library binaries the record applies to
  int hash_matched = 0;     // provenance via hash database
  int version_matched = 0;  // provenance via upstream version extraction
  int vuln_upstream = 0;    // baseline criterion
  int vuln_provenance = 0;  // backport-aware criterion
  int reachable = 0;
  int unassessed = 0;       // unknown provenance

  /// 1 - provenance/upstream; 0/0 -> 0.
  double fp_reduction() const;
  int fp_reduction_pct() const;  // rounded to whole percent
};

struct UnassessedEntry {
  std::string cve;
  std::string binary;
  std::string reason;
};

struct ScanReport {
  pkgmeta::PackageId package;
  std::vector<Finding> findings;
  std::vector<CveCounts> counts;
  std::vector<UnassessedEntry> unassessed;
  std::vector<std::string> diagnostics;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

ScanReport emit_report(const pkgmeta::PackageId& scanned,
                       const std::vector<CveAssessment>& assessments,
                       const std::vector<Finding>& findings,
                       std::vector<std::string> diagnostics);

/// True iff the client wheel names the target and every repository version
/// satisfying the predicate is vulnerable (resolution is forced onto a
/// vulnerable version).
bool pinned_dependents(std::span<const uint8_t> client_wheel, const std::string& target,
                       const std::set<std::string>& vulnerable_versions,
                       const pkgmeta::WheelRepository& repo);

}  // namespace provscan::vulnreach
