#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace provscan::elf {

struct MalformedElf : std::runtime_error {
  explicit MalformedElf(const std::string& msg) : std::runtime_error(msg) {}
};

/// True iff the buffer starts with the ELF magic and declares the supported
/// class/encoding (64-bit little-endian). Malformed input returns false.
bool detect_elf(std::span<const uint8_t> file);

struct DynInfo {
  std::optional<std::string> soname;   // DT_SONAME
  std::vector<std::string> needed;     // DT_NEEDED, in file order
};

/// Read DT_SONAME / DT_NEEDED from the `.dynamic` section, resolving strings
/// through the linked dynamic string table. A file without a `.dynamic`
/// section yields an empty result. Out-of-bounds offsets or string-table
/// overflows raise MalformedElf; hostile input never crashes.
DynInfo read_needed(std::span<const uint8_t> file);

/// Names of defined (exported) symbols in `.dynsym` with global or weak
/// binding. `.symtab` is intentionally not consulted.
std::vector<std::string> exported_dynsyms(std::span<const uint8_t> file);

}  // namespace provscan::elf
