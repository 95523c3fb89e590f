#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace provscan::provdb {

struct NotALibraryName : std::runtime_error {
  explicit NotALibraryName(const std::string& msg) : std::runtime_error(msg) {}
};

/// A vendored-library filename decomposed into its stable parts.
/// `basename` + `.` + `version_suffix` (without the embedded hash)
/// reproduces the pre-vendoring filename.
struct NormalizedLibName {
  std::string basename;  // ends in `.so`
  std::optional<std::string> embedded_hash;   // 8 hex chars inserted by auditwheel
  std::optional<std::string> version_suffix;  // dotted numeric suffix after `.so`
};

/// Strip an auditwheel `-xxxxxxxx` hash infix (8 hex chars immediately before
/// `.so`) and a trailing dotted numeric version suffix.
/// `libxml2-3998bec4.so.2.9.1` -> { libxml2.so, 3998bec4, 2.9.1 }.
NormalizedLibName normalize_libname(std::string_view filename);

/// First 8 hex digits (lowercase) of the SHA-256 of the contents.
std::string content_hash8(std::span<const uint8_t> data);

/// The (libname, hash8) pair used to query the hash database. When the
/// filename carries an auditwheel hash, that hash is used and `content` is
/// never invoked — the file bytes were mutated after copying and must not be
/// hashed.
std::pair<std::string, std::string> extract_query_key(
    const NormalizedLibName& name,
    const std::function<std::span<const uint8_t>()>& content);

struct HashDbEntry {
  std::string os;       // family or family/distro, e.g. "redhat" or "debian/ubuntu"
  std::string package;
  std::string version;
  std::string libname;  // base name, e.g. "libxml2.so"
  std::string hash8;

  bool operator==(const HashDbEntry&) const = default;
  auto operator<=>(const HashDbEntry&) const = default;
};

/// OS family component of an os id ("redhat/centos" -> "redhat").
std::string os_family(std::string_view os);

/// Immutable-after-load index over (libname, hash8). Persisted as sorted
/// tab-separated lines `os\tpackage\tversion\tlibname\thash8`; exact
/// duplicates are removed on load and save.
class HashDb {
 public:
  HashDb() = default;
  static HashDb from_entries(std::vector<HashDbEntry> entries);
  static HashDb load(const std::filesystem::path& file);
  static HashDb parse(std::string_view text);

  void save(const std::filesystem::path& file) const;
  std::string serialize() const;

  void merge(const HashDb& other);

  /// Entries whose libname AND hash8 both match. The hash is never used in
  /// isolation.
  std::vector<HashDbEntry> query(std::string_view libname, std::string_view hash8) const;

  /// One warning per (os, package, libname, hash8) group that contains two
  /// or more distinct versions.
  std::vector<std::string> detect_collisions() const;

  const std::vector<HashDbEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  void reindex();
  std::vector<HashDbEntry> entries_;  // sorted, deduplicated
  std::map<std::pair<std::string, std::string>, std::vector<size_t>> index_;
};

/// Birthday bound over the 32-bit hash space: the probability that n samples
/// contain at least one colliding pair.
double collision_probability(uint64_t n);

}  // namespace provscan::provdb
