#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace provscan::archive {

struct MalformedArchive : std::runtime_error {
  explicit MalformedArchive(const std::string& msg) : std::runtime_error(msg) {}
};
struct UnsupportedCompression : std::runtime_error {
  explicit UnsupportedCompression(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Codec { None, Gzip, Xz, Zstd };

Codec sniff_codec(std::span<const uint8_t> data);
bool codec_supported(Codec codec);
std::vector<uint8_t> decompress(std::span<const uint8_t> data, Codec codec);

struct ArMember {
  std::string name;
  std::vector<uint8_t> data;
};

/// Unix `ar` archive (the .deb container format).
std::vector<ArMember> read_ar(std::span<const uint8_t> data);

enum class FileType { Regular, Symlink, Directory, Other };

struct FileEntry {
  std::string name;
  FileType type = FileType::Other;
  std::vector<uint8_t> data;
};

/// ustar/GNU tar stream (uncompressed).
std::vector<FileEntry> read_tar(std::span<const uint8_t> data);

/// cpio "newc" stream (the .rpm payload format).
std::vector<FileEntry> read_cpio_newc(std::span<const uint8_t> data);

struct RpmPayload {
  std::vector<uint8_t> compressed;
  Codec codec;
};

/// Skip the RPM lead, signature header, and main header; return the
/// compressed cpio payload.
RpmPayload rpm_extract_payload(std::span<const uint8_t> data);

}  // namespace provscan::archive
