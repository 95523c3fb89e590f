#include "provscan/archive.hpp"

#include <lzma.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>

#ifdef PROVSCAN_HAVE_ZSTD
#include <zstd.h>
#endif

namespace provscan::archive {

Codec sniff_codec(std::span<const uint8_t> data) {
  static const uint8_t xz_magic[6] = {0xfd, '7', 'z', 'X', 'Z', 0x00};
  if (data.size() >= 2 && data[0] == 0x1f && data[1] == 0x8b) return Codec::Gzip;
  if (data.size() >= 6 && std::memcmp(data.data(), xz_magic, 6) == 0) return Codec::Xz;
  if (data.size() >= 4 && data[0] == 0x28 && data[1] == 0xb5 && data[2] == 0x2f &&
      data[3] == 0xfd)
    return Codec::Zstd;
  return Codec::None;
}

bool codec_supported(Codec codec) {
#ifdef PROVSCAN_HAVE_ZSTD
  return true;
#else
  return codec != Codec::Zstd;
#endif
}

namespace {

std::vector<uint8_t> gunzip(std::span<const uint8_t> data) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw MalformedArchive("inflateInit failed");
  std::vector<uint8_t> out;
  out.reserve(data.size() * 3);
  uint8_t buf[1 << 16];
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  int rc = Z_OK;
  do {
    zs.next_out = buf;
    zs.avail_out = sizeof buf;
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw MalformedArchive("gzip stream corrupt");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) throw MalformedArchive("gzip stream truncated");
  return out;
}

std::vector<uint8_t> unxz(std::span<const uint8_t> data) {
  lzma_stream strm = LZMA_STREAM_INIT;
  if (lzma_stream_decoder(&strm, UINT64_MAX, LZMA_CONCATENATED) != LZMA_OK)
    throw MalformedArchive("lzma decoder init failed");
  std::vector<uint8_t> out;
  out.reserve(data.size() * 3);
  uint8_t buf[1 << 16];
  strm.next_in = data.data();
  strm.avail_in = data.size();
  lzma_ret rc = LZMA_OK;
  do {
    strm.next_out = buf;
    strm.avail_out = sizeof buf;
    rc = lzma_code(&strm, strm.avail_in ? LZMA_RUN : LZMA_FINISH);
    if (rc != LZMA_OK && rc != LZMA_STREAM_END) {
      lzma_end(&strm);
      throw MalformedArchive("xz stream corrupt");
    }
    out.insert(out.end(), buf, buf + (sizeof buf - strm.avail_out));
  } while (rc != LZMA_STREAM_END);
  lzma_end(&strm);
  return out;
}

#ifdef PROVSCAN_HAVE_ZSTD
std::vector<uint8_t> unzstd(std::span<const uint8_t> data) {
  unsigned long long size = ZSTD_getFrameContentSize(data.data(), data.size());
  if (size == ZSTD_CONTENTSIZE_ERROR) throw MalformedArchive("zstd frame corrupt");
  if (size == ZSTD_CONTENTSIZE_UNKNOWN) size = data.size() * 8ULL + (1 << 16);
  std::vector<uint8_t> out(size);
  size_t rc = ZSTD_decompress(out.data(), out.size(), data.data(), data.size());
  if (ZSTD_isError(rc)) throw MalformedArchive("zstd stream corrupt");
  out.resize(rc);
  return out;
}
#endif

}  // namespace

std::vector<uint8_t> decompress(std::span<const uint8_t> data, Codec codec) {
  switch (codec) {
    case Codec::None:
      return {data.begin(), data.end()};
    case Codec::Gzip:
      return gunzip(data);
    case Codec::Xz:
      return unxz(data);
    case Codec::Zstd:
#ifdef PROVSCAN_HAVE_ZSTD
      return unzstd(data);
#else
      throw UnsupportedCompression("zstd support not built in");
#endif
  }
  throw MalformedArchive("unknown codec");
}

// ---------------------------------------------------------------------------
// ar
// ---------------------------------------------------------------------------

std::vector<ArMember> read_ar(std::span<const uint8_t> data) {
  static const char magic[8] = {'!', '<', 'a', 'r', 'c', 'h', '>', '\n'};
  if (data.size() < 8 || std::memcmp(data.data(), magic, 8) != 0)
    throw MalformedArchive("not an ar archive");
  std::vector<ArMember> members;
  size_t pos = 8;
  while (pos + 60 <= data.size()) {
    const char* hdr = reinterpret_cast<const char*>(data.data() + pos);
    if (hdr[58] != 0x60 || hdr[59] != '\n') throw MalformedArchive("ar member header corrupt");
    std::string name(hdr, 16);
    while (!name.empty() && (name.back() == ' ' || name.back() == '/')) name.pop_back();
    std::string size_str(hdr + 48, 10);
    size_t size = 0;
    try {
      size = std::stoul(size_str);
    } catch (...) {
      throw MalformedArchive("ar member size corrupt");
    }
    pos += 60;
    if (pos + size > data.size()) throw MalformedArchive("ar member data out of bounds");
    members.push_back({std::move(name), {data.begin() + pos, data.begin() + pos + size}});
    pos += size + (size & 1);  // members are 2-byte aligned
  }
  return members;
}

// ---------------------------------------------------------------------------
// tar
// ---------------------------------------------------------------------------

namespace {

uint64_t parse_octal(const char* p, size_t n) {
  uint64_t v = 0;
  for (size_t i = 0; i < n; ++i) {
    char c = p[i];
    if (c == '\0' || c == ' ') break;
    if (c < '0' || c > '7') throw MalformedArchive("bad octal field in tar header");
    v = v * 8 + static_cast<uint64_t>(c - '0');
  }
  return v;
}

bool all_zero(std::span<const uint8_t> block) {
  return std::all_of(block.begin(), block.end(), [](uint8_t b) { return b == 0; });
}

}  // namespace

std::vector<FileEntry> read_tar(std::span<const uint8_t> data) {
  std::vector<FileEntry> entries;
  size_t pos = 0;
  std::string pending_longname;
  while (pos + 512 <= data.size()) {
    std::span<const uint8_t> block = data.subspan(pos, 512);
    if (all_zero(block)) break;  // end-of-archive marker
    const char* hdr = reinterpret_cast<const char*>(block.data());
    uint64_t size = parse_octal(hdr + 124, 12);
    char type = hdr[156];
    std::string name(hdr, strnlen(hdr, 100));
    if (std::memcmp(hdr + 257, "ustar", 5) == 0) {
      std::string prefix(hdr + 345, strnlen(hdr + 345, 155));
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    pos += 512;
    size_t padded = (size + 511) & ~size_t{511};
    if (pos + padded > data.size() && pos + size > data.size())
      throw MalformedArchive("tar entry data out of bounds");

    if (type == 'L') {  // GNU long name: payload holds the real name
      pending_longname.assign(reinterpret_cast<const char*>(data.data() + pos),
                              strnlen(reinterpret_cast<const char*>(data.data() + pos), size));
      pos += padded;
      continue;
    }
    if (!pending_longname.empty()) {
      name = std::move(pending_longname);
      pending_longname.clear();
    }
    if (type == 'x' || type == 'g') {  // pax headers: skip payload
      pos += padded;
      continue;
    }
    FileEntry e;
    e.name = std::move(name);
    switch (type) {
      case '0':
      case '\0':
        e.type = FileType::Regular;
        e.data.assign(data.begin() + pos, data.begin() + pos + size);
        break;
      case '2':
      case '1':
        e.type = FileType::Symlink;
        break;
      case '5':
        e.type = FileType::Directory;
        break;
      default:
        e.type = FileType::Other;
        break;
    }
    entries.push_back(std::move(e));
    pos += padded;
  }
  return entries;
}

// ---------------------------------------------------------------------------
// cpio (newc)
// ---------------------------------------------------------------------------

namespace {

uint32_t parse_hex8_field(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 8; ++i) {
    char c = p[i];
    uint32_t d;
    if (c >= '0' && c <= '9')
      d = static_cast<uint32_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      d = static_cast<uint32_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F')
      d = static_cast<uint32_t>(c - 'A' + 10);
    else
      throw MalformedArchive("bad hex field in cpio header");
    v = (v << 4) | d;
  }
  return v;
}

}  // namespace

std::vector<FileEntry> read_cpio_newc(std::span<const uint8_t> data) {
  std::vector<FileEntry> entries;
  size_t pos = 0;
  while (pos + 110 <= data.size()) {
    const char* hdr = reinterpret_cast<const char*>(data.data() + pos);
    if (std::memcmp(hdr, "070701", 6) != 0 && std::memcmp(hdr, "070702", 6) != 0)
      throw MalformedArchive("cpio entry magic corrupt");
    uint32_t mode = parse_hex8_field(hdr + 6 + size_t{8} * 1);       // c_mode
    uint32_t filesize = parse_hex8_field(hdr + 6 + size_t{8} * 6);   // c_filesize
    uint32_t namesize = parse_hex8_field(hdr + 6 + size_t{8} * 11);  // c_namesize
    size_t name_start = pos + 110;
    if (name_start + namesize > data.size()) throw MalformedArchive("cpio name out of bounds");
    std::string name(reinterpret_cast<const char*>(data.data() + name_start),
                     namesize ? namesize - 1 : 0);  // includes trailing NUL
    size_t data_start = (name_start + namesize + 3) & ~size_t{3};
    if (name == "TRAILER!!!") break;
    if (data_start + filesize > data.size()) throw MalformedArchive("cpio data out of bounds");
    FileEntry e;
    e.name = std::move(name);
    uint32_t fmt = mode & 0170000;
    if (fmt == 0100000) {
      e.type = FileType::Regular;
      e.data.assign(data.begin() + data_start, data.begin() + data_start + filesize);
    } else if (fmt == 0120000) {
      e.type = FileType::Symlink;
    } else if (fmt == 0040000) {
      e.type = FileType::Directory;
    } else {
      e.type = FileType::Other;
    }
    entries.push_back(std::move(e));
    pos = (data_start + filesize + 3) & ~size_t{3};
  }
  return entries;
}

// ---------------------------------------------------------------------------
// rpm container
// ---------------------------------------------------------------------------

namespace {

// An rpm header structure: magic(3) version(1) reserved(4) nindex(4) hsize(4),
// then nindex * 16-byte index entries, then the hsize-byte store.
size_t rpm_header_size(std::span<const uint8_t> data, size_t pos) {
  if (pos + 16 > data.size()) throw MalformedArchive("rpm header truncated");
  if (!(data[pos] == 0x8e && data[pos + 1] == 0xad && data[pos + 2] == 0xe8))
    throw MalformedArchive("rpm header magic corrupt");
  auto be32 = [&](size_t off) {
    return static_cast<uint32_t>(data[off]) << 24 | static_cast<uint32_t>(data[off + 1]) << 16 |
           static_cast<uint32_t>(data[off + 2]) << 8 | static_cast<uint32_t>(data[off + 3]);
  };
  uint32_t nindex = be32(pos + 8);
  uint32_t hsize = be32(pos + 12);
  return 16 + static_cast<size_t>(nindex) * 16 + hsize;
}

}  // namespace

RpmPayload rpm_extract_payload(std::span<const uint8_t> data) {
  if (data.size() < 96 || !(data[0] == 0xed && data[1] == 0xab && data[2] == 0xee &&
                            data[3] == 0xdb))
    throw MalformedArchive("not an rpm file");
  size_t pos = 96;  // fixed-size lead
  size_t sig_size = rpm_header_size(data, pos);
  pos += sig_size;
  pos = (pos + 7) & ~size_t{7};  // signature header is padded to 8 bytes
  size_t hdr_size = rpm_header_size(data, pos);
  pos += hdr_size;
  if (pos >= data.size()) throw MalformedArchive("rpm payload missing");
  std::span<const uint8_t> payload = data.subspan(pos);
  Codec codec = sniff_codec(payload);
  if (codec == Codec::None) throw MalformedArchive("rpm payload compression not recognized");
  return {{payload.begin(), payload.end()}, codec};
}

}  // namespace provscan::archive
