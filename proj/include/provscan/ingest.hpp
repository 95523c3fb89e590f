#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "provscan/hashdb.hpp"

namespace provscan::provdb {

/// Provenance coordinates of the artifact being ingested.
struct ArtifactId {
  std::string os;       // e.g. "debian/debian", "redhat/centos"
  std::string package;
  std::string version;
};

/// Shared libraries from the data tarball of a `.deb` (ar archive). Symlinks
/// are skipped; one entry per regular `*.so*` file under a lib directory.
std::vector<HashDbEntry> ingest_deb(std::span<const uint8_t> artifact, const ArtifactId& id);

/// Shared libraries from the cpio payload of an `.rpm`.
std::vector<HashDbEntry> ingest_rpm(std::span<const uint8_t> artifact, const ArtifactId& id);

/// Same extraction rule over an already-extracted filesystem tree.
std::vector<HashDbEntry> ingest_tree(const std::filesystem::path& root, const ArtifactId& id);

/// True when the path points into one of the library subtrees considered
/// during ingestion (lib, lib64, usr/lib, usr/lib64; recursive).
bool in_library_subtree(std::string_view path);

}  // namespace provscan::provdb
