#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "provscan/versioncmp.hpp"

namespace provscan::pkgmeta {

struct NotAWheel : std::runtime_error {
  explicit NotAWheel(const std::string& msg) : std::runtime_error(msg) {}
};
struct MalformedMetadata : std::runtime_error {
  explicit MalformedMetadata(const std::string& msg) : std::runtime_error(msg) {}
};
struct MalformedSpecifier : std::runtime_error {
  MalformedSpecifier(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};
struct RepositoryError : std::runtime_error {
  explicit RepositoryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Lowercase and collapse runs of `-`, `_`, `.` into a single `-`.
std::string normalize_name(std::string_view name);

struct PackageId {
  std::string name;     // normalized
  std::string version;  // empty for unresolved placeholder nodes

  bool operator==(const PackageId&) const = default;
  auto operator<=>(const PackageId&) const = default;
  std::string str() const { return name + " " + version; }
};

struct DependencySpec {
  std::string name;  // normalized
  std::vector<versioncmp::Clause> predicate;
};

enum class ParseMode { Lenient, Strict };

struct ParseOptions {
  ParseMode mode = ParseMode::Lenient;
  std::set<std::string> requested_extras;
};

struct MetadataDiagnostics {
  int skipped_marker_lines = 0;   // marker evaluated false or not evaluable
  int assumed_marker_lines = 0;   // non-extra marker assumed true (lenient)
  int skipped_malformed_lines = 0;
  std::vector<std::string> notes;
};

struct WheelMetadata {
  PackageId id;
  std::vector<DependencySpec> requires_dist;
  MetadataDiagnostics diag;
};

WheelMetadata parse_wheel_metadata(std::span<const uint8_t> wheel,
                                   const ParseOptions& opts = {});

/// Parse a METADATA header block directly (text already extracted).
WheelMetadata parse_metadata_text(std::string_view text, const ParseOptions& opts = {});

struct PythonDepTree {
  PackageId root;
  std::vector<PackageId> nodes;                            // one entry per name
  std::vector<std::pair<std::string, std::string>> edges;  // dependent -> dependency, by name
  std::set<std::string> unresolved;                        // names with no wheel in the repo
  std::vector<std::string> diagnostics;

  bool has_node(std::string_view name) const;
  const PackageId* find(std::string_view name) const;
};

/// Source of wheels, keyed by normalized name.
class WheelRepository {
 public:
  virtual ~WheelRepository() = default;
  virtual std::vector<std::string> versions(const std::string& name) const = 0;
  virtual std::vector<uint8_t> fetch(const std::string& name, const std::string& version) const = 0;
};

/// Directory of `.whl` files; filenames encode `name-version-...whl`.
class DirRepository : public WheelRepository {
 public:
  explicit DirRepository(const std::filesystem::path& dir);
  std::vector<std::string> versions(const std::string& name) const override;
  std::vector<uint8_t> fetch(const std::string& name, const std::string& version) const override;

 private:
  std::map<std::string, std::map<std::string, std::filesystem::path>> index_;
};

/// In-memory repository for tests.
class MemoryRepository : public WheelRepository {
 public:
  void add(const std::string& name, const std::string& version, std::vector<uint8_t> wheel);
  std::vector<std::string> versions(const std::string& name) const override;
  std::vector<uint8_t> fetch(const std::string& name, const std::string& version) const override;

 private:
  std::map<std::string, std::map<std::string, std::vector<uint8_t>>> wheels_;
};

/// Breadth-first recursive expansion of the Python dependency tree. For each
/// dependency the highest repository version satisfying the predicate is
/// selected; names already resolved are not re-expanded (this also breaks
/// cycles); missing dependencies become unresolved leaf nodes.
PythonDepTree resolve_python_dep_tree(std::span<const uint8_t> root_wheel,
                                      const WheelRepository& repo,
                                      const ParseOptions& opts = {});

}  // namespace provscan::pkgmeta
