#include "provscan/zipfile.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>

namespace provscan::zipfile {

namespace {

constexpr uint32_t kEocdSig = 0x06054b50;
constexpr uint32_t kCentralSig = 0x02014b50;
constexpr uint32_t kLocalSig = 0x04034b50;

uint16_t rd16(std::span<const uint8_t> d, size_t off) {
  return static_cast<uint16_t>(d[off] | d[off + 1] << 8);
}
uint32_t rd32(std::span<const uint8_t> d, size_t off) {
  return static_cast<uint32_t>(d[off]) | static_cast<uint32_t>(d[off + 1]) << 8 |
         static_cast<uint32_t>(d[off + 2]) << 16 | static_cast<uint32_t>(d[off + 3]) << 24;
}

std::vector<uint8_t> inflate_raw(std::span<const uint8_t> in, size_t out_size) {
  std::vector<uint8_t> out(out_size);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw ZipError("inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != out_size)
    throw ZipError("deflate stream corrupt");
  return out;
}

}  // namespace

ZipReader::ZipReader(std::span<const uint8_t> data) : data_(data) {
  if (data.size() < 22) throw ZipError("too small for a ZIP archive");
  // EOCD: scan backwards, allowing a trailing comment
  size_t scan_limit = std::min<size_t>(data.size(), 22 + 65535);
  size_t eocd = SIZE_MAX;
  for (size_t back = 22; back <= scan_limit; ++back) {
    size_t pos = data.size() - back;
    if (rd32(data, pos) == kEocdSig) {
      eocd = pos;
      break;
    }
  }
  if (eocd == SIZE_MAX) throw ZipError("end-of-central-directory not found");

  uint16_t count = rd16(data, eocd + 10);
  uint32_t cd_size = rd32(data, eocd + 12);
  uint32_t cd_offset = rd32(data, eocd + 16);
  if (count == 0xffff || cd_offset == 0xffffffff)
    throw ZipError("zip64 archives are not supported");
  if (static_cast<uint64_t>(cd_offset) + cd_size > data.size())
    throw ZipError("central directory out of bounds");

  size_t pos = cd_offset;
  for (uint16_t i = 0; i < count; ++i) {
    if (pos + 46 > data.size() || rd32(data, pos) != kCentralSig)
      throw ZipError("central directory entry corrupt");
    Entry e;
    e.method = rd16(data, pos + 10);
    e.compressed_size = rd32(data, pos + 20);
    e.uncompressed_size = rd32(data, pos + 24);
    uint16_t name_len = rd16(data, pos + 28);
    uint16_t extra_len = rd16(data, pos + 30);
    uint16_t comment_len = rd16(data, pos + 32);
    e.local_header_offset = rd32(data, pos + 42);
    if (pos + 46 + name_len > data.size()) throw ZipError("entry name out of bounds");
    e.name.assign(reinterpret_cast<const char*>(data.data() + pos + 46), name_len);
    if (e.compressed_size == 0xffffffff || e.uncompressed_size == 0xffffffff)
      throw ZipError("zip64 entry not supported");
    entries_.push_back(std::move(e));
    pos += 46u + name_len + extra_len + comment_len;
  }
}

bool ZipReader::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

std::vector<uint8_t> ZipReader::read(const Entry& entry) const {
  size_t pos = entry.local_header_offset;
  if (pos + 30 > data_.size() || rd32(data_, pos) != kLocalSig)
    throw ZipError("local header corrupt for " + entry.name);
  uint16_t name_len = rd16(data_, pos + 26);
  uint16_t extra_len = rd16(data_, pos + 28);
  size_t start = pos + 30 + name_len + extra_len;
  if (start + entry.compressed_size > data_.size())
    throw ZipError("entry data out of bounds for " + entry.name);
  std::span<const uint8_t> raw = data_.subspan(start, entry.compressed_size);
  switch (entry.method) {
    case 0:
      if (entry.compressed_size != entry.uncompressed_size)
        throw ZipError("stored entry size mismatch for " + entry.name);
      return {raw.begin(), raw.end()};
    case 8:
      return inflate_raw(raw, entry.uncompressed_size);
    default:
      throw ZipError("unsupported compression method " + std::to_string(entry.method));
  }
}

std::vector<uint8_t> ZipReader::read(std::string_view name) const {
  for (const Entry& e : entries_)
    if (e.name == name) return read(e);
  throw ZipError("no such entry: " + std::string(name));
}

}  // namespace provscan::zipfile
