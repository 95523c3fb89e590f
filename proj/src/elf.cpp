#include "provscan/elf.hpp"

namespace provscan::elf {

namespace {

constexpr uint8_t kMagic[4] = {0x7f, 'E', 'L', 'F'};
constexpr uint8_t kClass64 = 2;
constexpr uint8_t kData2Lsb = 1;

constexpr uint32_t SHT_DYNSYM = 11;
constexpr uint32_t SHT_DYNAMIC = 6;
constexpr uint32_t SHT_STRTAB = 3;

constexpr int64_t DT_NULL = 0;
constexpr int64_t DT_NEEDED = 1;
constexpr int64_t DT_SONAME = 14;

constexpr uint16_t SHN_UNDEF = 0;

struct Reader {
  std::span<const uint8_t> d;

  bool in_bounds(uint64_t off, uint64_t len) const {
    return off <= d.size() && len <= d.size() - off;
  }
  uint16_t u16(uint64_t off) const {
    return static_cast<uint16_t>(d[off] | d[off + 1] << 8);
  }
  uint32_t u32(uint64_t off) const {
    return static_cast<uint32_t>(d[off]) | static_cast<uint32_t>(d[off + 1]) << 8 |
           static_cast<uint32_t>(d[off + 2]) << 16 | static_cast<uint32_t>(d[off + 3]) << 24;
  }
  uint64_t u64(uint64_t off) const {
    return static_cast<uint64_t>(u32(off)) | static_cast<uint64_t>(u32(off + 4)) << 32;
  }
};

struct Section {
  uint32_t type = 0;
  uint64_t offset = 0;
  uint64_t size = 0;
  uint32_t link = 0;
  uint64_t entsize = 0;
};

struct SectionTable {
  std::vector<Section> sections;
};

SectionTable read_sections(const Reader& r) {
  SectionTable t;
  if (!r.in_bounds(0, 64)) throw MalformedElf("truncated ELF header");
  uint64_t shoff = r.u64(0x28);
  uint16_t shentsize = r.u16(0x3a);
  uint16_t shnum = r.u16(0x3c);
  if (shnum == 0 || shoff == 0) return t;  // no section table
  if (shentsize < 64) throw MalformedElf("bad section header entry size");
  if (!r.in_bounds(shoff, static_cast<uint64_t>(shentsize) * shnum))
    throw MalformedElf("section header table out of bounds");
  t.sections.reserve(shnum);
  for (uint16_t i = 0; i < shnum; ++i) {
    uint64_t base = shoff + static_cast<uint64_t>(i) * shentsize;
    Section s;
    s.type = r.u32(base + 0x04);
    s.offset = r.u64(base + 0x18);
    s.size = r.u64(base + 0x20);
    s.link = r.u32(base + 0x28);
    s.entsize = r.u64(base + 0x38);
    t.sections.push_back(s);
  }
  return t;
}

// Read a NUL-terminated string from a string-table section.
std::string strtab_get(const Reader& r, const Section& strtab, uint64_t index) {
  if (strtab.type != SHT_STRTAB) throw MalformedElf("linked section is not a string table");
  if (index >= strtab.size) throw MalformedElf("string table index overflow");
  if (!r.in_bounds(strtab.offset, strtab.size)) throw MalformedElf("string table out of bounds");
  uint64_t start = strtab.offset + index;
  uint64_t end = strtab.offset + strtab.size;
  uint64_t p = start;
  while (p < end && r.d[p] != 0) ++p;
  if (p == end) throw MalformedElf("unterminated string in string table");
  return std::string(reinterpret_cast<const char*>(r.d.data() + start), p - start);
}

}  // namespace

bool detect_elf(std::span<const uint8_t> file) {
  if (file.size() < 6) return false;
  for (int i = 0; i < 4; ++i)
    if (file[i] != kMagic[i]) return false;
  return file[4] == kClass64 && file[5] == kData2Lsb;
}

DynInfo read_needed(std::span<const uint8_t> file) {
  DynInfo info;
  if (!detect_elf(file)) throw MalformedElf("not a supported ELF object");
  Reader r{file};
  SectionTable tab = read_sections(r);
  for (const Section& s : tab.sections) {
    if (s.type != SHT_DYNAMIC) continue;
    if (s.link >= tab.sections.size()) throw MalformedElf("dynamic section link out of range");
    const Section& strtab = tab.sections[s.link];
    uint64_t entsize = s.entsize ? s.entsize : 16;
    if (entsize < 16) throw MalformedElf("bad dynamic entry size");
    if (!r.in_bounds(s.offset, s.size)) throw MalformedElf("dynamic section out of bounds");
    for (uint64_t off = 0; off + entsize <= s.size; off += entsize) {
      int64_t tag = static_cast<int64_t>(r.u64(s.offset + off));
      uint64_t val = r.u64(s.offset + off + 8);
      if (tag == DT_NULL) break;
      if (tag == DT_NEEDED) info.needed.push_back(strtab_get(r, strtab, val));
      if (tag == DT_SONAME) info.soname = strtab_get(r, strtab, val);
    }
    break;
  }
  return info;
}

std::vector<std::string> exported_dynsyms(std::span<const uint8_t> file) {
  std::vector<std::string> out;
  if (!detect_elf(file)) throw MalformedElf("not a supported ELF object");
  Reader r{file};
  SectionTable tab = read_sections(r);
  for (const Section& s : tab.sections) {
    if (s.type != SHT_DYNSYM) continue;
    if (s.link >= tab.sections.size()) throw MalformedElf("dynsym link out of range");
    const Section& strtab = tab.sections[s.link];
    uint64_t entsize = s.entsize ? s.entsize : 24;
    if (entsize < 24) throw MalformedElf("bad symbol entry size");
    if (!r.in_bounds(s.offset, s.size)) throw MalformedElf("dynsym out of bounds");
    for (uint64_t off = 0; off + entsize <= s.size; off += entsize) {
      uint64_t base = s.offset + off;
      uint32_t name = r.u32(base);
      uint8_t info = r.d[base + 4];
      uint16_t shndx = r.u16(base + 6);
      if (name == 0 || shndx == SHN_UNDEF) continue;
      uint8_t bind = info >> 4;
      if (bind != 1 && bind != 2) continue;  // STB_GLOBAL, STB_WEAK
      out.push_back(strtab_get(r, strtab, name));
    }
    break;
  }
  return out;
}

}  // namespace provscan::elf
