#include "provscan/ingest.hpp"

#include <algorithm>
#include <fstream>

#include "provscan/archive.hpp"

namespace provscan::provdb {

namespace {

std::string_view strip_dot_slash(std::string_view path) {
  while (path.starts_with("./")) path.remove_prefix(2);
  while (path.starts_with("/")) path.remove_prefix(1);
  return path;
}

std::optional<HashDbEntry> entry_for(const archive::FileEntry& file, const ArtifactId& id) {
  if (file.type != archive::FileType::Regular) return std::nullopt;
  std::string_view path = strip_dot_slash(file.name);
  if (!in_library_subtree(path)) return std::nullopt;
  auto slash = path.rfind('/');
  std::string_view fname = slash == std::string_view::npos ? path : path.substr(slash + 1);
  NormalizedLibName norm;
  try {
    norm = normalize_libname(fname);
  } catch (const NotALibraryName&) {
    return std::nullopt;
  }
  // plugin-style .so files without the lib prefix are not linkable shared
  // libraries; hand-curated rows in an existing database may still carry them
  if (!norm.basename.starts_with("lib")) return std::nullopt;
  return HashDbEntry{id.os, id.package, id.version, norm.basename, content_hash8(file.data)};
}

std::vector<HashDbEntry> from_files(const std::vector<archive::FileEntry>& files,
                                    const ArtifactId& id) {
  std::vector<HashDbEntry> entries;
  for (const auto& f : files)
    if (auto e = entry_for(f, id)) entries.push_back(std::move(*e));
  std::sort(entries.begin(), entries.end());
  return entries;
}

}  // namespace

bool in_library_subtree(std::string_view path) {
  std::string_view p = strip_dot_slash(path);
  for (std::string_view root : {"lib/", "lib64/", "usr/lib/", "usr/lib64/"})
    if (p.starts_with(root)) return true;
  return false;
}

std::vector<HashDbEntry> ingest_deb(std::span<const uint8_t> artifact, const ArtifactId& id) {
  auto members = archive::read_ar(artifact);
  for (const auto& m : members) {
    if (!m.name.starts_with("data.tar")) continue;
    archive::Codec codec = archive::sniff_codec(m.data);
    if (!archive::codec_supported(codec))
      throw archive::UnsupportedCompression("data tarball uses unsupported compression");
    auto tarball = archive::decompress(m.data, codec);
    return from_files(archive::read_tar(tarball), id);
  }
  throw archive::MalformedArchive("no data.tar member in .deb");
}

std::vector<HashDbEntry> ingest_rpm(std::span<const uint8_t> artifact, const ArtifactId& id) {
  archive::RpmPayload payload = archive::rpm_extract_payload(artifact);
  if (!archive::codec_supported(payload.codec))
    throw archive::UnsupportedCompression("rpm payload uses unsupported compression");
  auto cpio = archive::decompress(payload.compressed, payload.codec);
  return from_files(archive::read_cpio_newc(cpio), id);
}

std::vector<HashDbEntry> ingest_tree(const std::filesystem::path& root, const ArtifactId& id) {
  std::vector<archive::FileEntry> files;
  std::error_code ec;
  for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    if (it->is_symlink()) continue;
    if (!it->is_regular_file()) continue;
    archive::FileEntry e;
    e.name = std::filesystem::relative(it->path(), root).generic_string();
    e.type = archive::FileType::Regular;
    std::ifstream in(it->path(), std::ios::binary);
    if (!in) throw archive::MalformedArchive("cannot read " + it->path().string());
    e.data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    files.push_back(std::move(e));
  }
  if (ec) throw archive::MalformedArchive("cannot walk " + root.string() + ": " + ec.message());
  return from_files(files, id);
}

}  // namespace provscan::provdb
