#include "provscan/hashdb.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace provscan::provdb {

namespace {

bool is_hex8(std::string_view s) {
  if (s.size() != 8) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
  });
}

bool is_numeric_suffix(std::string_view s) {
  // `.N(.N)*` without the leading dot
  if (s.empty()) return false;
  bool in_run = false;
  for (char c : s) {
    if (c == '.') {
      if (!in_run) return false;
      in_run = false;
    } else if (c >= '0' && c <= '9') {
      in_run = true;
    } else {
      return false;
    }
  }
  return in_run;
}

}  // namespace

NormalizedLibName normalize_libname(std::string_view filename) {
  if (filename.empty()) throw NotALibraryName("empty filename");
  // only the final path component matters
  if (auto slash = filename.rfind('/'); slash != std::string_view::npos)
    filename = filename.substr(slash + 1);

  // locate the `.so` component: at the end, or followed by `.N(.N)*`
  NormalizedLibName out;
  size_t so = std::string_view::npos;
  size_t search = 0;
  while (true) {
    size_t cand = filename.find(".so", search);
    if (cand == std::string_view::npos) break;
    std::string_view after = filename.substr(cand + 3);
    if (after.empty()) {
      so = cand;
      break;
    }
    if (after.front() == '.' && is_numeric_suffix(after.substr(1))) {
      so = cand;
      out.version_suffix = std::string(after.substr(1));
      break;
    }
    search = cand + 1;
  }
  if (so == std::string_view::npos)
    throw NotALibraryName("no .so component in '" + std::string(filename) + "'");

  std::string_view stem = filename.substr(0, so);
  if (stem.size() > 9 && stem[stem.size() - 9] == '-' && is_hex8(stem.substr(stem.size() - 8))) {
    out.embedded_hash = std::string(stem.substr(stem.size() - 8));
    stem = stem.substr(0, stem.size() - 9);
  }
  if (stem.empty()) throw NotALibraryName("empty library stem in '" + std::string(filename) + "'");
  out.basename = std::string(stem) + ".so";
  return out;
}

std::string content_hash8(std::span<const uint8_t> data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(8);
  for (int i = 0; i < 4; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::pair<std::string, std::string> extract_query_key(
    const NormalizedLibName& name,
    const std::function<std::span<const uint8_t>()>& content) {
  if (name.embedded_hash) return {name.basename, *name.embedded_hash};
  return {name.basename, content_hash8(content())};
}

std::string os_family(std::string_view os) {
  auto slash = os.find('/');
  return std::string(slash == std::string_view::npos ? os : os.substr(0, slash));
}

// ---------------------------------------------------------------------------
// HashDb
// ---------------------------------------------------------------------------

HashDb HashDb::from_entries(std::vector<HashDbEntry> entries) {
  HashDb db;
  db.entries_ = std::move(entries);
  db.reindex();
  return db;
}

HashDb HashDb::parse(std::string_view text) {
  std::vector<HashDbEntry> entries;
  size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    HashDbEntry e;
    std::string* fields[5] = {&e.os, &e.package, &e.version, &e.libname, &e.hash8};
    size_t start = 0;
    for (int f = 0; f < 5; ++f) {
      size_t tab = line.find('\t', start);
      if (f < 4 && tab == std::string_view::npos)
        throw std::runtime_error("hash db line " + std::to_string(line_no) + ": expected 5 fields");
      *fields[f] = std::string(
          line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      start = tab + 1;
    }
    if (!is_hex8(e.hash8))
      throw std::runtime_error("hash db line " + std::to_string(line_no) + ": bad hash8 '" +
                               e.hash8 + "'");
    entries.push_back(std::move(e));
  }
  return from_entries(std::move(entries));
}

HashDb HashDb::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open hash db " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string HashDb::serialize() const {
  std::string out;
  for (const HashDbEntry& e : entries_) {
    out += e.os;
    out += '\t';
    out += e.package;
    out += '\t';
    out += e.version;
    out += '\t';
    out += e.libname;
    out += '\t';
    out += e.hash8;
    out += '\n';
  }
  return out;
}

void HashDb::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write hash db " + file.string());
  out << serialize();
}

void HashDb::merge(const HashDb& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
  reindex();
}

void HashDb::reindex() {
  std::sort(entries_.begin(), entries_.end());
  entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
  index_.clear();
  for (size_t i = 0; i < entries_.size(); ++i)
    index_[{entries_[i].libname, entries_[i].hash8}].push_back(i);
}

std::vector<HashDbEntry> HashDb::query(std::string_view libname, std::string_view hash8) const {
  std::vector<HashDbEntry> out;
  auto it = index_.find({std::string(libname), std::string(hash8)});
  if (it == index_.end()) return out;
  for (size_t i : it->second) out.push_back(entries_[i]);
  return out;
}

std::vector<std::string> HashDb::detect_collisions() const {
  std::vector<std::string> warnings;
  // entries are sorted by (os, package, version, libname, hash8); group on
  // (os, package, libname, hash8) and flag groups with >1 distinct version
  std::map<std::tuple<std::string, std::string, std::string, std::string>,
           std::set<std::string>>
      groups;
  for (const HashDbEntry& e : entries_)
    groups[{e.os, e.package, e.libname, e.hash8}].insert(e.version);
  for (const auto& [key, versions] : groups) {
    if (versions.size() < 2) continue;
    const auto& [os, pkg, lib, hash] = key;
    std::string list;
    for (const auto& v : versions) {
      if (!list.empty()) list += ", ";
      list += v;
    }
    warnings.push_back("hash collision: " + os + " " + pkg + " " + lib + " " + hash +
                       " maps to versions {" + list + "}");
  }
  return warnings;
}

double collision_probability(uint64_t n) {
  if (n < 2) return 0.0;
  long double pairs = static_cast<long double>(n) * (n - 1) / 2.0L;
  long double space = 4294967296.0L;  // 2^32
  return static_cast<double>(-std::expm1l(-pairs / space));
}

}  // namespace provscan::provdb
