#include "provscan/vulnreach.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

namespace provscan::vulnreach {

using nlohmann::json;
using upstream::ProvenanceTag;

std::string verdict_str(Verdict v) {
  switch (v) {
    case Verdict::Vulnerable: return "vulnerable";
    case Verdict::Fixed: return "fixed";
    case Verdict::NotAffected: return "not-affected";
    case Verdict::Unknown: return "unknown";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

RangeGroup parse_range_group(std::string_view text) {
  RangeGroup group;
  size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '&'))
      ++pos;
    if (pos >= text.size()) break;
    size_t oplen = 0;
    while (pos + oplen < text.size() &&
           (text[pos + oplen] == '<' || text[pos + oplen] == '>' || text[pos + oplen] == '=' ||
            text[pos + oplen] == '!'))
      ++oplen;
    auto op = versioncmp::parse_comparator(text.substr(pos, oplen));
    if (!op || *op == versioncmp::Comparator::Compatible)
      throw PredicateParseError("bad comparator in range '" + std::string(text) + "'");
    pos += oplen;
    size_t start = pos;
    while (pos < text.size() && text[pos] != ' ' && text[pos] != '&' && text[pos] != '\t') ++pos;
    if (start == pos)
      throw PredicateParseError("missing version in range '" + std::string(text) + "'");
    group.push_back({*op, std::string(text.substr(start, pos - start))});
  }
  if (group.empty()) throw PredicateParseError("empty range group");
  return group;
}

VulnRecord VulnRecord::from_json(const json& doc) {
  VulnRecord rec;
  if (!doc.is_object()) throw PredicateParseError("record must be an object");
  rec.cve = doc.value("cve", "");
  rec.project = doc.value("project", "");
  if (rec.cve.empty()) throw PredicateParseError("missing cve id");
  if (rec.project.empty()) throw PredicateParseError(rec.cve + ": missing project");
  for (const auto& s : doc.value("symbols", json::array()))
    rec.symbols.push_back(s.get<std::string>());
  if (rec.symbols.empty()) throw PredicateParseError(rec.cve + ": symbols must be non-empty");
  for (const auto& r : doc.value("upstream_ranges", json::array()))
    rec.upstream_ranges.push_back(parse_range_group(r.get<std::string>()));
  for (const auto& f : doc.value("os_fixes", json::array())) {
    OsFix fix;
    fix.os = f.value("os", "");
    fix.package = f.value("package", "");
    fix.not_affected = f.value("not_affected", false);
    fix.fixed = f.value("fixed", "");
    if (fix.os.empty() || fix.package.empty())
      throw PredicateParseError(rec.cve + ": os fix needs os and package");
    if (!fix.not_affected && fix.fixed.empty())
      throw PredicateParseError(rec.cve + ": os fix needs a fixed version or not_affected");
    if (!fix.not_affected) {
      // fail at load time when the fix version does not parse
      try {
        if (provdb::os_family(fix.os) == "redhat")
          versioncmp::RpmVersion::parse(fix.fixed);
        else
          versioncmp::DebVersion::parse(fix.fixed);
      } catch (const versioncmp::ParseError& e) {
        throw PredicateParseError(rec.cve + ": bad fix version: " + e.what());
      }
    }
    rec.os_fixes.push_back(std::move(fix));
  }
  return rec;
}

VulnRecord VulnRecord::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw PredicateParseError("cannot open " + file.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw PredicateParseError(file.string() + ": " + e.what());
  }
  return from_json(doc);
}

VulnDb VulnDb::load_dir(const std::filesystem::path& dir) {
  VulnDb db;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename().string().starts_with("CVE-") &&
        entry.path().extension() == ".json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) db.add(VulnRecord::load(f));
  return db;
}

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

bool in_upstream_ranges(std::string_view version, const std::vector<RangeGroup>& ranges) {
  for (const RangeGroup& group : ranges) {
    bool all = true;
    for (const RangeClause& clause : group) {
      int c = versioncmp::compare_deb_fragment(version, clause.version);
      bool ok = false;
      switch (clause.op) {
        case versioncmp::Comparator::Eq: ok = c == 0; break;
        case versioncmp::Comparator::Ne: ok = c != 0; break;
        case versioncmp::Comparator::Le: ok = c <= 0; break;
        case versioncmp::Comparator::Ge: ok = c >= 0; break;
        case versioncmp::Comparator::Lt: ok = c < 0; break;
        case versioncmp::Comparator::Gt: ok = c > 0; break;
        case versioncmp::Comparator::Compatible: ok = false; break;
      }
      if (!ok) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

std::string upstream_component(const ProvenanceTag& tag) {
  std::string family = provdb::os_family(tag.os);
  if (family == "redhat") {
    try {
      return versioncmp::RpmVersion::parse(tag.version).version;
    } catch (const versioncmp::ParseError&) {
      return tag.version;
    }
  }
  std::string up;
  try {
    up = versioncmp::DebVersion::parse(tag.version).upstream;
  } catch (const versioncmp::ParseError&) {
    up = tag.version;
  }
  // distro mangles (+dfsg, +deb9u1, ~deb9u4) are not part of the upstream
  // release number
  auto cut = up.find_first_of("+~");
  if (cut != std::string::npos) up = up.substr(0, cut);
  return up;
}

bool symbol_matches(std::string_view pattern, std::string_view name) {
  size_t p = 0, n = 0;
  size_t star = std::string_view::npos, star_n = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      star_n = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++star_n;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

namespace {

const OsFix* find_fix(const ProvenanceTag& tag, const VulnRecord& rec) {
  std::string family = provdb::os_family(tag.os);
  for (const OsFix& fix : rec.os_fixes)
    if (provdb::os_family(fix.os) == family && fix.package == tag.package) return &fix;
  return nullptr;
}

bool version_before_fix(const ProvenanceTag& tag, const OsFix& fix) {
  std::string family = provdb::os_family(tag.os);
  if (family == "redhat") {
    auto a = versioncmp::RpmVersion::parse(tag.version);
    auto b = versioncmp::RpmVersion::parse(fix.fixed);
    return versioncmp::compare_rpm(a, b) == versioncmp::Ordering::LT;
  }
  // deb ordering doubles as the permissive default for unknown families
  auto a = versioncmp::DebVersion::parse(tag.version);
  auto b = versioncmp::DebVersion::parse(fix.fixed);
  return versioncmp::compare_deb(a, b) == versioncmp::Ordering::LT;
}

}  // namespace

Verdict is_vulnerable(const ProvenanceTag& tag, const VulnRecord& rec) {
  switch (tag.kind) {
    case ProvenanceTag::Kind::OsPackage:
    case ProvenanceTag::Kind::HostSystem: {
      if (const OsFix* fix = find_fix(tag, rec)) {
        if (fix->not_affected) return Verdict::NotAffected;
        return version_before_fix(tag, *fix) ? Verdict::Vulnerable : Verdict::Fixed;
      }
      // no distro entry: fall back to the upstream ranges over the upstream
      // component of the OS version
      return in_upstream_ranges(upstream_component(tag), rec.upstream_ranges)
                 ? Verdict::Vulnerable
                 : Verdict::NotAffected;
    }
    case ProvenanceTag::Kind::Upstream:
      return in_upstream_ranges(tag.upstream_version, rec.upstream_ranges)
                 ? Verdict::Vulnerable
                 : Verdict::NotAffected;
    case ProvenanceTag::Kind::OwningPythonPackage:
      // native extensions are the package's own code; records describe
      // third-party native libraries
      return Verdict::NotAffected;
    case ProvenanceTag::Kind::Unknown:
      return Verdict::Unknown;
  }
  return Verdict::Unknown;
}

Verdict baseline_upstream_only(const ProvenanceTag& tag, const VulnRecord& rec) {
  switch (tag.kind) {
    case ProvenanceTag::Kind::OsPackage:
    case ProvenanceTag::Kind::HostSystem:
      return in_upstream_ranges(upstream_component(tag), rec.upstream_ranges)
                 ? Verdict::Vulnerable
                 : Verdict::NotAffected;
    case ProvenanceTag::Kind::Upstream:
      return in_upstream_ranges(tag.upstream_version, rec.upstream_ranges)
                 ? Verdict::Vulnerable
                 : Verdict::NotAffected;
    case ProvenanceTag::Kind::OwningPythonPackage:
      return Verdict::NotAffected;
    case ProvenanceTag::Kind::Unknown:
      return Verdict::Unknown;
  }
  return Verdict::Unknown;
}

// ---------------------------------------------------------------------------
// Assessment
// ---------------------------------------------------------------------------

namespace {

// Fold a verdict over the primary tag and any ambiguous hash candidates:
// conservative union.
Verdict folded_verdict(const ProvenanceTag& tag, const VulnRecord& rec,
                       Verdict (*eval)(const ProvenanceTag&, const VulnRecord&)) {
  std::vector<Verdict> verdicts{eval(tag, rec)};
  for (const auto& cand : tag.other_candidates) {
    ProvenanceTag alt = ProvenanceTag::os_package(cand[0], cand[1], cand[2]);
    verdicts.push_back(eval(alt, rec));
  }
  if (std::count(verdicts.begin(), verdicts.end(), Verdict::Vulnerable)) return Verdict::Vulnerable;
  if (std::count(verdicts.begin(), verdicts.end(), Verdict::Unknown)) return Verdict::Unknown;
  if (std::count(verdicts.begin(), verdicts.end(), Verdict::Fixed)) return Verdict::Fixed;
  return Verdict::NotAffected;
}

bool record_applies(const upstream::AnnotatedNode& node, const VulnRecord& rec) {
  if (node.node.kind == elfscan::BinaryKind::NativeExtension) return false;
  if (node.project_hint && *node.project_hint == rec.project) return true;
  if (node.tag.kind == ProvenanceTag::Kind::Upstream && node.tag.project == rec.project)
    return true;
  if (node.tag.kind == ProvenanceTag::Kind::OsPackage ||
      node.tag.kind == ProvenanceTag::Kind::HostSystem)
    return find_fix(node.tag, rec) != nullptr;
  return false;
}

}  // namespace

std::vector<CveAssessment> assess(const std::vector<upstream::AnnotatedTree>& trees,
                                  const VulnDb& db) {
  std::vector<CveAssessment> out;
  for (const VulnRecord& rec : db.records()) {
    CveAssessment ca;
    ca.record = rec;
    for (const upstream::AnnotatedTree& tree : trees) {
      for (const upstream::AnnotatedNode& node : tree.nodes) {
        if (!record_applies(node, rec)) continue;
        InstanceAssessment ia;
        ia.binary = node.node.path;
        ia.owner = tree.owner;
        ia.tag = node.tag;
        ia.kind = node.node.kind;
        ia.provenance = folded_verdict(node.tag, rec, is_vulnerable);
        ia.baseline = folded_verdict(node.tag, rec, baseline_upstream_only);
        ca.instances.push_back(std::move(ia));
      }
    }
    out.push_back(std::move(ca));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reachability
// ---------------------------------------------------------------------------

std::set<size_t> reachable_set(const xecg::XECG& x) {
  std::set<size_t> seen(x.roots.begin(), x.roots.end());
  std::deque<size_t> queue(x.roots.begin(), x.roots.end());
  while (!queue.empty()) {
    size_t n = queue.front();
    queue.pop_front();
    for (size_t m : x.graph.out[n])
      if (seen.insert(m).second) queue.push_back(m);
  }
  return seen;
}

std::vector<std::vector<xecg::FunctionId>> shortest_chains(const xecg::XECG& x, size_t target,
                                                           int k) {
  struct Path {
    std::vector<size_t> nodes;
    std::vector<std::string> names;  // for deterministic tie-breaking
  };
  auto cmp = [](const Path& a, const Path& b) {
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() > b.nodes.size();
    return a.names > b.names;  // min-heap: lexicographically smaller first
  };
  std::priority_queue<Path, std::vector<Path>, decltype(cmp)> queue(cmp);
  for (size_t r : x.roots) queue.push({{r}, {x.graph.id(r).str()}});

  std::vector<std::vector<xecg::FunctionId>> chains;
  size_t expansions = 0;
  constexpr size_t kMaxExpansions = 200000;
  while (!queue.empty() && chains.size() < static_cast<size_t>(k) &&
         expansions < kMaxExpansions) {
    Path p = queue.top();
    queue.pop();
    ++expansions;
    size_t last = p.nodes.back();
    if (last == target) {
      std::vector<xecg::FunctionId> chain;
      for (size_t n : p.nodes) chain.push_back(x.graph.id(n));
      chains.push_back(std::move(chain));
      continue;
    }
    for (size_t next : x.graph.out[last]) {
      if (std::find(p.nodes.begin(), p.nodes.end(), next) != p.nodes.end())
        continue;  // simple paths only
      Path q = p;
      q.nodes.push_back(next);
      q.names.push_back(x.graph.id(next).str());
      queue.push(std::move(q));
    }
  }
  return chains;
}

std::vector<Finding> reachable_findings(const xecg::XECG& x,
                                        const std::vector<CveAssessment>& assessments,
                                        const pkgmeta::PackageId& scanned, int kchains) {
  std::vector<Finding> findings;
  std::set<size_t> reachable = reachable_set(x);
  for (const CveAssessment& ca : assessments) {
    for (const InstanceAssessment& ia : ca.instances) {
      if (ia.provenance != Verdict::Vulnerable) continue;
      // the binary's unit id is its node path; vulnerable symbols are the
      // record's patterns matched against that unit's function names
      std::vector<size_t> targets;
      for (size_t n = 0; n < x.graph.nodes.size(); ++n) {
        if (x.graph.nodes[n].unit != ia.binary) continue;
        for (const std::string& pattern : ca.record.symbols)
          if (symbol_matches(pattern, x.graph.nodes[n].name)) {
            targets.push_back(n);
            break;
          }
      }
      Finding f;
      f.package = scanned;
      f.cve = ca.record.cve;
      f.binary = ia.binary;
      f.tag = ia.tag;
      f.basis = ia.tag.kind == ProvenanceTag::Kind::Upstream
                    ? Finding::Basis::UpstreamOnlyMatch
                    : Finding::Basis::ProvenanceMatch;
      for (size_t t : targets) {
        if (!reachable.count(t)) continue;
        auto chains = shortest_chains(x, t, kchains);
        f.chains.insert(f.chains.end(), chains.begin(), chains.end());
      }
      // the finding carries at most k chains overall, shortest first
      std::sort(f.chains.begin(), f.chains.end(),
                [](const auto& a, const auto& b) {
                  if (a.size() != b.size()) return a.size() < b.size();
                  return a < b;
                });
      if (f.chains.size() > static_cast<size_t>(kchains))
        f.chains.resize(static_cast<size_t>(kchains));
      if (!f.chains.empty()) findings.push_back(std::move(f));
    }
  }
  std::sort(findings.begin(), findings.end(), [](const Finding& a, const Finding& b) {
    return std::tie(a.cve, a.binary) < std::tie(b.cve, b.binary);
  });
  return findings;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

double CveCounts::fp_reduction() const {
  if (vuln_upstream == 0) return 0.0;
  return 1.0 - static_cast<double>(vuln_provenance) / static_cast<double>(vuln_upstream);
}

int CveCounts::fp_reduction_pct() const {
  return static_cast<int>(std::lround(fp_reduction() * 100.0));
}

ScanReport emit_report(const pkgmeta::PackageId& scanned,
                       const std::vector<CveAssessment>& assessments,
                       const std::vector<Finding>& findings,
                       std::vector<std::string> diagnostics) {
  ScanReport report;
  report.package = scanned;
  report.findings = findings;
  report.diagnostics = std::move(diagnostics);

  for (const CveAssessment& ca : assessments) {
    CveCounts counts;
    counts.cve = ca.record.cve;
    for (const InstanceAssessment& ia : ca.instances) {
      ++counts.instances;
      if (ia.tag.kind == ProvenanceTag::Kind::OsPackage) ++counts.hash_matched;
      if (ia.tag.kind == ProvenanceTag::Kind::Upstream) ++counts.version_matched;
      if (ia.baseline == Verdict::Vulnerable) ++counts.vuln_upstream;
      if (ia.provenance == Verdict::Vulnerable) ++counts.vuln_provenance;
      if (ia.provenance == Verdict::Unknown) {
        ++counts.unassessed;
        report.unassessed.push_back({ca.record.cve, ia.binary, ia.tag.reason});
      }
    }
    for (const Finding& f : findings)
      if (f.cve == ca.record.cve) ++counts.reachable;
    report.counts.push_back(std::move(counts));
  }
  std::sort(report.counts.begin(), report.counts.end(),
            [](const CveCounts& a, const CveCounts& b) { return a.cve < b.cve; });
  return report;
}

json ScanReport::to_json() const {
  json doc;
  doc["package"] = {{"name", package.name}, {"version", package.version}};
  json jfindings = json::array();
  for (const Finding& f : findings) {
    json jf;
    jf["cve"] = f.cve;
    jf["binary"] = f.binary;
    jf["provenance"] = f.tag.str();
    jf["basis"] =
        f.basis == Finding::Basis::ProvenanceMatch ? "provenance-match" : "upstream-only-match";
    json jchains = json::array();
    for (const auto& chain : f.chains) {
      json jc = json::array();
      for (const auto& fn : chain) jc.push_back(fn.str());
      jchains.push_back(jc);
    }
    jf["chains"] = jchains;
    jfindings.push_back(jf);
  }
  doc["findings"] = jfindings;
  json jcounts = json::array();
  for (const CveCounts& c : counts) {
    jcounts.push_back({{"cve", c.cve},
                       {"instances", c.instances},
                       {"hash_matched", c.hash_matched},
                       {"version_matched", c.version_matched},
                       {"vuln_upstream", c.vuln_upstream},
                       {"vuln_provenance", c.vuln_provenance},
                       {"reachable", c.reachable},
                       {"unassessed", c.unassessed},
                       {"fp_reduction", c.fp_reduction()},
                       {"fp_reduction_pct", c.fp_reduction_pct()}});
  }
  doc["counts"] = jcounts;
  json junassessed = json::array();
  for (const UnassessedEntry& u : unassessed)
    junassessed.push_back({{"cve", u.cve}, {"binary", u.binary}, {"reason", u.reason}});
  doc["unassessed"] = junassessed;
  doc["diagnostics"] = diagnostics;
  return doc;
}

std::string ScanReport::to_text() const {
  std::ostringstream out;
  out << "scan report for " << package.name << " " << package.version << "\n\n";
  if (findings.empty()) {
    out << "no reachable vulnerable symbols\n";
  } else {
    for (const Finding& f : findings) {
      out << f.cve << "  " << f.binary << "  [" << f.tag.str() << "]\n";
      for (const auto& chain : f.chains) {
        out << "    ";
        for (size_t i = 0; i < chain.size(); ++i) {
          if (i) out << " -> ";
          out << chain[i].str();
        }
        out << "\n";
      }
    }
  }
  out << "\nper-CVE counts (instances / hash / version / vuln-upstream / vuln-provenance"
         " / reachable / fp-reduction)\n";
  for (const CveCounts& c : counts) {
    out << "  " << c.cve << "  " << c.instances << " / " << c.hash_matched << " / "
        << c.version_matched << " / " << c.vuln_upstream << " / " << c.vuln_provenance << " / "
        << c.reachable << " / " << c.fp_reduction_pct() << "%\n";
  }
  if (!unassessed.empty()) {
    out << "\nunassessed (unknown provenance)\n";
    for (const UnassessedEntry& u : unassessed)
      out << "  " << u.cve << "  " << u.binary << "  (" << u.reason << ")\n";
  }
  if (!diagnostics.empty()) {
    out << "\ndiagnostics\n";
    for (const std::string& d : diagnostics) out << "  " << d << "\n";
  }
  return out.str();
}

bool pinned_dependents(std::span<const uint8_t> client_wheel, const std::string& target,
                       const std::set<std::string>& vulnerable_versions,
                       const pkgmeta::WheelRepository& repo) {
  pkgmeta::WheelMetadata meta = pkgmeta::parse_wheel_metadata(client_wheel);
  std::string norm_target = pkgmeta::normalize_name(target);
  for (const pkgmeta::DependencySpec& dep : meta.requires_dist) {
    if (dep.name != norm_target) continue;
    std::vector<std::string> satisfying;
    for (const std::string& v : repo.versions(norm_target)) {
      try {
        if (versioncmp::satisfies(v, dep.predicate)) satisfying.push_back(v);
      } catch (const versioncmp::ParseError&) {
      }
    }
    if (satisfying.empty()) continue;
    bool all_vulnerable = std::all_of(satisfying.begin(), satisfying.end(),
                                      [&](const std::string& v) {
                                        return vulnerable_versions.count(v) > 0;
                                      });
    if (all_vulnerable) return true;
  }
  return false;
}

}  // namespace provscan::vulnreach
