#include "provscan/upstream.hpp"

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace provscan::upstream {

namespace {

std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos
                                                                      : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    fn(line, line_no);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Curated tables
// ---------------------------------------------------------------------------

UpstreamMetaTable UpstreamMetaTable::builtin() {
  UpstreamMetaTable t;
  // libname, os family, os package, project, source
  t.add({"libcrypto.so", "redhat", "openssl-libs", "openssl", "https://www.openssl.org"});
  t.add({"libcrypto.so", "debian", "libssl1.1", "openssl", "https://www.openssl.org"});
  t.add({"libssl.so", "redhat", "openssl-libs", "openssl", "https://www.openssl.org"});
  t.add({"libssl.so", "debian", "libssl1.1", "openssl", "https://www.openssl.org"});
  t.add({"libxml2.so", "redhat", "libxml2", "libxml2", "https://gitlab.gnome.org/GNOME/libxml2"});
  t.add({"libxml2.so", "debian", "libxml2", "libxml2", "https://gitlab.gnome.org/GNOME/libxml2"});
  t.add({"libcurl.so", "redhat", "libcurl", "curl", "https://curl.se"});
  t.add({"libcurl.so", "debian", "libcurl4", "curl", "https://curl.se"});
  t.add({"libpcre2-8.so", "redhat", "pcre2", "pcre2", "https://github.com/PCRE2Project/pcre2"});
  t.add({"libpcre2-8.so", "debian", "libpcre2-8-0", "pcre2",
         "https://github.com/PCRE2Project/pcre2"});
  t.add({"libsqlite3.so", "redhat", "sqlite-libs", "sqlite", "https://sqlite.org"});
  t.add({"libsqlite3.so", "debian", "libsqlite3-0", "sqlite", "https://sqlite.org"});
  t.add({"libz.so", "redhat", "zlib", "zlib", "https://zlib.net"});
  t.add({"libz.so", "debian", "zlib1g", "zlib", "https://zlib.net"});
  t.add({"liblz4.so", "redhat", "lz4-libs", "lz4", "https://github.com/lz4/lz4"});
  t.add({"liblz4.so", "debian", "liblz4-1", "lz4", "https://github.com/lz4/lz4"});
  t.add({"libfreetype.so", "redhat", "freetype", "freetype", "https://freetype.org"});
  t.add({"libfreetype.so", "debian", "libfreetype6", "freetype", "https://freetype.org"});
  t.add({"libicui18n.so", "redhat", "libicu", "icu", "https://icu.unicode.org"});
  t.add({"libicui18n.so", "debian", "libicu72", "icu", "https://icu.unicode.org"});
  t.add({"libhdf5.so", "redhat", "hdf5", "hdf5", "https://github.com/HDFGroup/hdf5"});
  t.add({"libhdf5.so", "debian", "libhdf5-103", "hdf5", "https://github.com/HDFGroup/hdf5"});
  t.add({"libavcodec.so", "debian", "libavcodec59", "ffmpeg", "https://ffmpeg.org"});
  t.add({"libcairo.so", "debian", "cairo", "cairo", "https://www.cairographics.org"});
  t.add({"libcairo.so", "redhat", "cairo", "cairo", "https://www.cairographics.org"});
  return t;
}

UpstreamMetaTable UpstreamMetaTable::parse(std::string_view text) {
  UpstreamMetaTable t;
  for_each_line(text, [&](std::string_view line, int line_no) {
    auto fields = split_tabs(line);
    if (fields.size() < 4)
      throw std::runtime_error("meta table line " + std::to_string(line_no) +
                               ": expected libname\\tfamily\\tpackage\\tproject[\\turl]");
    t.add({fields[0], fields[1], fields[2], fields[3], fields.size() > 4 ? fields[4] : ""});
  });
  return t;
}

UpstreamMetaTable UpstreamMetaTable::load(const std::filesystem::path& file) {
  return parse(slurp(file));
}

void UpstreamMetaTable::add(UpstreamMetaRecord rec) { records_.push_back(std::move(rec)); }

std::vector<UpstreamMetaRecord> UpstreamMetaTable::lookup(std::string_view libname) const {
  std::vector<UpstreamMetaRecord> out;
  for (const auto& r : records_)
    if (r.libname == libname) out.push_back(r);
  return out;
}

std::optional<std::string> UpstreamMetaTable::project_of(std::string_view libname) const {
  for (const auto& r : records_)
    if (r.libname == libname) return r.project;
  return std::nullopt;
}

ExtractorRegistry ExtractorRegistry::builtin() {
  ExtractorRegistry r;
  auto pat = [&](std::string lib, std::string rx) {
    ExtractorSpec s;
    s.libname = std::move(lib);
    s.strategy = Strategy::StringPattern;
    s.pattern = std::move(rx);
    r.add(std::move(s));
  };
  // patterns below are checked against real distribution binaries; several
  // libraries embed only a bare version run, which the ^...$ anchors pin to
  // a whole printable string
  pat("libcrypto.so", R"(OpenSSL (\d+\.\d+\.\d+[a-z]{0,2}))");
  pat("libssl.so", R"(OpenSSL (\d+\.\d+\.\d+[a-z]{0,2}))");
  // xmlParserVersion: MNNPP digits, e.g. 20913 for 2.9.13
  pat("libxml2.so", R"(^(2)(\d{2})(\d{2})$)");
  pat("libcurl.so", R"(libcurl[/ ](\d+\.\d+\.\d+))");
  pat("libpcre2-8.so", R"((\d+\.\d+) \d{4}-\d{2}-\d{2})");
  pat("libsqlite3.so", R"((3\.\d+\.\d+(?:\.\d+)?))");
  pat("libz.so", R"(^(1\.\d+(?:\.\d+){1,2})$)");
  pat("liblz4.so", R"(^(\d+\.\d+\.\d+)$)");
  // the major version lives in the mangled symbol namespace (icu_70)
  pat("libicui18n.so", R"(_ZNK?6icu_(\d{2})\D)");
  pat("libhdf5.so", R"(HDF5 library version: (\d+\.\d+\.\d+))");
  pat("libavcodec.so", R"(FFmpeg version (\d+\.\d+(?:\.\d+)?))");
  pat("libcairo.so", R"(cairo (\d+\.\d+\.\d+))");
  // freetype keeps its version in three integers; no reliable string form
  ExtractorSpec ft;
  ft.libname = "libfreetype.so";
  ft.strategy = Strategy::SymbolProbe;
  ft.symbol = "FT_Library_Version";
  ft.decode = "int3";
  r.add(std::move(ft));
  return r;
}

ExtractorRegistry ExtractorRegistry::parse(std::string_view text) {
  ExtractorRegistry r;
  for_each_line(text, [&](std::string_view line, int line_no) {
    auto fields = split_tabs(line);
    if (fields.size() != 3)
      throw std::runtime_error("registry line " + std::to_string(line_no) +
                               ": expected libname\\tstrategy\\tpayload");
    ExtractorSpec s;
    s.libname = fields[0];
    if (fields[1] == "string") {
      s.strategy = Strategy::StringPattern;
      s.pattern = fields[2];
    } else if (fields[1] == "probe") {
      s.strategy = Strategy::SymbolProbe;
      auto colon = fields[2].find(':');
      s.symbol = fields[2].substr(0, colon);
      if (colon != std::string::npos) s.decode = fields[2].substr(colon + 1);
    } else {
      throw std::runtime_error("registry line " + std::to_string(line_no) +
                               ": unknown strategy '" + fields[1] + "'");
    }
    r.add(std::move(s));
  });
  return r;
}

ExtractorRegistry ExtractorRegistry::load(const std::filesystem::path& file) {
  return parse(slurp(file));
}

void ExtractorRegistry::add(ExtractorSpec spec) { specs_.push_back(std::move(spec)); }

std::optional<ExtractorSpec> ExtractorRegistry::find(std::string_view libname) const {
  for (const auto& s : specs_)
    if (s.libname == libname) return s;
  return std::nullopt;
}

std::string ExtractorRegistry::serialize() const {
  std::string out;
  for (const auto& s : specs_) {
    out += s.libname;
    out += '\t';
    if (s.strategy == Strategy::StringPattern) {
      out += "string\t" + s.pattern;
    } else {
      out += "probe\t" + s.symbol + ":" + s.decode;
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Provenance tags
// ---------------------------------------------------------------------------

ProvenanceTag ProvenanceTag::os_package(std::string os, std::string package,
                                        std::string version) {
  ProvenanceTag t;
  t.kind = Kind::OsPackage;
  t.os = std::move(os);
  t.package = std::move(package);
  t.version = std::move(version);
  return t;
}

ProvenanceTag ProvenanceTag::upstream(std::string project, std::string version) {
  ProvenanceTag t;
  t.kind = Kind::Upstream;
  t.project = std::move(project);
  t.upstream_version = std::move(version);
  return t;
}

ProvenanceTag ProvenanceTag::owning_package(pkgmeta::PackageId owner) {
  ProvenanceTag t;
  t.kind = Kind::OwningPythonPackage;
  t.owner = std::move(owner);
  return t;
}

ProvenanceTag ProvenanceTag::host_system(std::string os, std::string package,
                                         std::string version) {
  ProvenanceTag t;
  t.kind = Kind::HostSystem;
  t.os = std::move(os);
  t.package = std::move(package);
  t.version = std::move(version);
  return t;
}

ProvenanceTag ProvenanceTag::unknown(std::string reason) {
  ProvenanceTag t;
  t.kind = Kind::Unknown;
  t.reason = std::move(reason);
  return t;
}

std::string ProvenanceTag::str() const {
  switch (kind) {
    case Kind::OsPackage: {
      std::string s = "os:" + os + ":" + package + "/" + version;
      for (const auto& c : other_candidates) s += " | os:" + c[0] + ":" + c[1] + "/" + c[2];
      return s;
    }
    case Kind::Upstream:
      return "upstream:" + project + "/" + upstream_version;
    case Kind::OwningPythonPackage:
      return "python:" + owner.name + "/" + owner.version;
    case Kind::HostSystem:
      return "host:" + os + ":" + package + "/" + version;
    case Kind::Unknown:
      return "unknown(" + reason + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Version extraction
// ---------------------------------------------------------------------------

std::optional<std::string> resolve_upstream_project(std::string_view libname,
                                                    const UpstreamMetaTable& table) {
  return table.project_of(libname);
}

namespace {

// Printable ASCII runs of length >= 4, like strings(1).
std::vector<std::string> printable_runs(std::span<const uint8_t> binary) {
  std::vector<std::string> runs;
  std::string current;
  for (uint8_t b : binary) {
    if (b >= 0x20 && b < 0x7f) {
      current += static_cast<char>(b);
    } else {
      if (current.size() >= 4) runs.push_back(current);
      current.clear();
    }
  }
  if (current.size() >= 4) runs.push_back(current);
  return runs;
}

std::optional<std::string> run_probe(const ExtractorSpec& spec, const ProbeAdapter& probe,
                                     ExtractionDiagnostics& diag,
                                     std::span<const uint8_t> binary) {
  if (!probe.enabled) {
    diag.error = "ProbeDisabled";
    return std::nullopt;
  }
  // The object must live on disk for the probe process.
  std::filesystem::path tmp =
      std::filesystem::temp_directory_path() /
      ("provscan-probe-" + std::to_string(::getpid()) + "-" + spec.libname);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(binary.data()),
              static_cast<std::streamsize>(binary.size()));
  }
  std::string cmd = "timeout " + std::to_string(probe.timeout_sec) + " " + probe.command +
                    " '" + tmp.string() + "' '" + spec.symbol + "' '" + spec.decode +
                    "' 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(tmp);
    diag.error = "ExtractionFailed: probe spawn failed";
    return std::nullopt;
  }
  char buf[256];
  std::string output;
  while (fgets(buf, sizeof buf, pipe)) output += buf;
  int status = ::pclose(pipe);
  std::filesystem::remove(tmp);
  if (status != 0) {
    diag.error = "ExtractionFailed: probe exited " + std::to_string(status);
    return std::nullopt;
  }
  while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) output.pop_back();
  if (output.empty()) {
    diag.error = "ExtractionFailed: probe printed nothing";
    return std::nullopt;
  }
  return output;
}

}  // namespace

std::optional<std::string> extract_upstream_version(std::span<const uint8_t> binary,
                                                    const ExtractorSpec& spec,
                                                    const ProbeAdapter& probe,
                                                    ExtractionDiagnostics& diag) {
  if (spec.strategy == Strategy::SymbolProbe) return run_probe(spec, probe, diag, binary);

  std::regex re;
  try {
    re.assign(spec.pattern, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    diag.error = std::string("ExtractionFailed: bad pattern: ") + e.what();
    return std::nullopt;
  }
  std::optional<std::string> first;
  std::set<std::string> distinct;
  for (const std::string& run : printable_runs(binary)) {
    for (auto it = std::sregex_iterator(run.begin(), run.end(), re);
         it != std::sregex_iterator(); ++it) {
      // several digit groups form a dotted version, leading zeros trimmed
      // per group (the encoded-number case, e.g. 20913 -> 2.9.13)
      std::string captured;
      if (it->size() > 2) {
        for (size_t g = 1; g < it->size(); ++g) {
          if (!(*it)[g].matched) continue;
          std::string part = (*it)[g].str();
          size_t nonzero = part.find_first_not_of('0');
          part = nonzero == std::string::npos ? "0" : part.substr(nonzero);
          if (!captured.empty()) captured += '.';
          captured += part;
        }
      } else {
        captured = it->size() > 1 ? (*it)[1].str() : (*it)[0].str();
      }
      if (!first) first = captured;
      distinct.insert(captured);
    }
  }
  if (!first) {
    diag.error = "ExtractionFailed: no match";
    return std::nullopt;
  }
  if (distinct.size() > 1) {
    diag.candidates.assign(distinct.begin(), distinct.end());
    diag.error = "ExtractionFailed: conflicting version strings";
    return std::nullopt;
  }
  return first;
}

// ---------------------------------------------------------------------------
// Host inventory
// ---------------------------------------------------------------------------

HostInventory HostInventory::parse(std::string_view text) {
  HostInventory inv;
  for_each_line(text, [&](std::string_view line, int line_no) {
    auto fields = split_tabs(line);
    if (fields.size() != 4)
      throw std::runtime_error("host inventory line " + std::to_string(line_no) +
                               ": expected path\\tos\\tpackage\\tversion");
    inv.add(fields[0], fields[1], fields[2], fields[3]);
  });
  return inv;
}

HostInventory HostInventory::load(const std::filesystem::path& file) {
  return parse(slurp(file));
}

void HostInventory::add(const std::string& path, std::string os, std::string package,
                        std::string version) {
  map_[path] = {std::move(os), std::move(package), std::move(version)};
}

std::optional<std::array<std::string, 3>> HostInventory::lookup(const std::string& path) const {
  auto it = map_.find(path);
  return it == map_.end() ? std::nullopt : std::make_optional(it->second);
}

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

namespace {

ProvenanceTag tag_vendored(const elfscan::BinaryNode& node, const provdb::HashDb& db,
                           const UpstreamMetaTable& meta, const ExtractorRegistry& registry,
                           const ProbeAdapter& probe, std::vector<std::string>& diagnostics) {
  provdb::NormalizedLibName norm;
  try {
    norm = provdb::normalize_libname(node.filename());
  } catch (const provdb::NotALibraryName&) {
    return ProvenanceTag::unknown("NotALibraryName");
  }
  auto key = provdb::extract_query_key(norm, [&]() -> std::span<const uint8_t> {
    if (!node.content) return {};
    return *node.content;
  });
  auto hits = db.query(key.first, key.second);
  if (!hits.empty()) {
    ProvenanceTag tag =
        ProvenanceTag::os_package(hits[0].os, hits[0].package, hits[0].version);
    for (size_t i = 1; i < hits.size(); ++i)
      tag.other_candidates.push_back({hits[i].os, hits[i].package, hits[i].version});
    if (hits.size() > 1)
      diagnostics.push_back("ambiguous hash match for " + node.path + ": " +
                            std::to_string(hits.size()) + " origins");
    return tag;
  }
  // hash miss: the library was likely built from upstream source
  auto project = resolve_upstream_project(norm.basename, meta);
  if (!project) return ProvenanceTag::unknown("NoMetadata");
  auto spec = registry.find(norm.basename);
  if (!spec) return ProvenanceTag::unknown("NoExtractor");
  if (!node.content) return ProvenanceTag::unknown("ExtractionFailed");
  ExtractionDiagnostics ediag;
  auto version = extract_upstream_version(*node.content, *spec, probe, ediag);
  if (!version) {
    if (!ediag.candidates.empty()) {
      std::string joined;
      for (const auto& c : ediag.candidates) joined += (joined.empty() ? "" : ", ") + c;
      diagnostics.push_back("conflicting versions in " + node.path + ": " + joined);
    }
    if (!ediag.error.empty()) diagnostics.push_back(node.path + ": " + ediag.error);
    return ProvenanceTag::unknown(ediag.error.starts_with("ProbeDisabled") ? "ProbeDisabled"
                                                                           : "ExtractionFailed");
  }
  return ProvenanceTag::upstream(*project, *version);
}

}  // namespace

AnnotatedTree annotate_provenance(const elfscan::BinaryDepTree& tree,
                                  const pkgmeta::PackageId& owner, const provdb::HashDb& db,
                                  const UpstreamMetaTable& meta, const ExtractorRegistry& registry,
                                  const HostInventory& inventory, const ProbeAdapter& probe) {
  AnnotatedTree out;
  out.owner = owner;
  out.edges = tree.edges;
  out.diagnostics = tree.diagnostics;
  for (const elfscan::BinaryNode& node : tree.nodes) {
    AnnotatedNode an;
    an.node = node;
    try {
      switch (node.kind) {
        case elfscan::BinaryKind::NativeExtension:
          an.tag = ProvenanceTag::owning_package(owner);
          break;
        case elfscan::BinaryKind::System: {
          auto hit = inventory.lookup(node.path);
          an.tag = hit ? ProvenanceTag::host_system((*hit)[0], (*hit)[1], (*hit)[2])
                       : ProvenanceTag::unknown("NoInventory");
          break;
        }
        case elfscan::BinaryKind::Vendored:
          an.tag = tag_vendored(node, db, meta, registry, probe, out.diagnostics);
          break;
      }
    } catch (const std::exception& e) {
      an.tag = ProvenanceTag::unknown("InternalError");
      out.diagnostics.push_back("annotation failed for " + node.path + ": " + e.what());
    }
    if (node.kind != elfscan::BinaryKind::NativeExtension) {
      try {
        an.project_hint = meta.project_of(provdb::normalize_libname(node.filename()).basename);
      } catch (const provdb::NotALibraryName&) {
      }
      if (an.tag.kind == ProvenanceTag::Kind::Upstream) an.project_hint = an.tag.project;
    }
    out.nodes.push_back(std::move(an));
  }
  return out;
}

}  // namespace provscan::upstream
