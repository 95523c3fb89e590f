#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "provscan/pkgmeta.hpp"

namespace provscan::elfscan {

enum class BinaryKind { NativeExtension, Vendored, System };

std::string kind_str(BinaryKind kind);

struct BinaryNode {
  std::string path;  // wheel-relative for bundled binaries, absolute for system
  std::optional<std::string> soname;
  BinaryKind kind = BinaryKind::Vendored;
  std::vector<std::string> needed;
  std::set<std::string> dynsyms;
  // bundled binaries keep their bytes for hashing and version extraction
  std::shared_ptr<const std::vector<uint8_t>> content;

  std::string filename() const;
};

struct BinaryDepTree {
  pkgmeta::PackageId owner;
  std::vector<BinaryNode> nodes;
  // dependent -> dependency node indices, emitted in DT_NEEDED order
  std::vector<std::pair<size_t, size_t>> edges;
  std::vector<std::string> diagnostics;
};

/// Total classification: outside the wheel root -> System; exporting a
/// `PyInit_*` symbol -> NativeExtension; otherwise Vendored.
BinaryKind classify_binary(bool inside_wheel, const std::set<std::string>& dynsyms);

class SystemResolver {
 public:
  virtual ~SystemResolver() = default;
  virtual std::optional<std::filesystem::path> resolve(const std::string& soname) const = 0;
};

/// Looks for the soname as a filename under a list of directories.
class SearchPathResolver : public SystemResolver {
 public:
  explicit SearchPathResolver(std::vector<std::filesystem::path> paths);
  static SearchPathResolver host_default();
  std::optional<std::filesystem::path> resolve(const std::string& soname) const override;

 private:
  std::vector<std::filesystem::path> paths_;
};

/// Fixed soname -> path mapping for hermetic tests.
class MapResolver : public SystemResolver {
 public:
  explicit MapResolver(std::map<std::string, std::filesystem::path> map) : map_(std::move(map)) {}
  std::optional<std::filesystem::path> resolve(const std::string& soname) const override {
    auto it = map_.find(soname);
    return it == map_.end() ? std::nullopt : std::make_optional(it->second);
  }

 private:
  std::map<std::string, std::filesystem::path> map_;
};

struct ExpandOptions {
  int max_system_depth = 8;
  // stripped path -> unstripped replacement; soname must match to apply
  std::map<std::string, std::filesystem::path> substitutions;
};

struct WheelExtractionError : std::runtime_error {
  explicit WheelExtractionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Expand a package into its binary dependency tree: every bundled ELF
/// becomes a node; DT_NEEDED entries resolve against bundled sonames and
/// filenames first (vendored copies shadow the host), then through the
/// system resolver, recursing through system libraries up to the depth limit.
BinaryDepTree expand_binary_tree(const pkgmeta::PackageId& owner,
                                 std::span<const uint8_t> wheel,
                                 const SystemResolver& sysresolver,
                                 const ExpandOptions& opts = {});

}  // namespace provscan::elfscan
