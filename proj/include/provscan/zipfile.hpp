#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace provscan::zipfile {

struct ZipError : std::runtime_error {
  explicit ZipError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Entry {
  std::string name;
  uint16_t method = 0;  // 0 = stored, 8 = deflate
  uint32_t compressed_size = 0;
  uint32_t uncompressed_size = 0;
  uint32_t local_header_offset = 0;
};

/// Read-only view over a ZIP archive in memory. Entries come from the
/// central directory; zip64 archives are rejected.
class ZipReader {
 public:
  explicit ZipReader(std::span<const uint8_t> data);

  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(std::string_view name) const;
  std::vector<uint8_t> read(const Entry& entry) const;
  std::vector<uint8_t> read(std::string_view name) const;

 private:
  std::span<const uint8_t> data_;
  std::vector<Entry> entries_;
};

}  // namespace provscan::zipfile
