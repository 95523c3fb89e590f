#include "provscan/elfscan.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "provscan/elf.hpp"
#include "provscan/hashdb.hpp"
#include "provscan/zipfile.hpp"

namespace provscan::elfscan {

std::string kind_str(BinaryKind kind) {
  switch (kind) {
    case BinaryKind::NativeExtension: return "native-extension";
    case BinaryKind::Vendored: return "vendored";
    case BinaryKind::System: return "system";
  }
  return "?";
}

std::string BinaryNode::filename() const {
  auto slash = path.rfind('/');
  return slash == std::string::npos ? path : path.substr(slash + 1);
}

BinaryKind classify_binary(bool inside_wheel, const std::set<std::string>& dynsyms) {
  if (!inside_wheel) return BinaryKind::System;
  for (const std::string& sym : dynsyms)
    if (sym.starts_with("PyInit_")) return BinaryKind::NativeExtension;
  return BinaryKind::Vendored;
}

SearchPathResolver::SearchPathResolver(std::vector<std::filesystem::path> paths)
    : paths_(std::move(paths)) {}

SearchPathResolver SearchPathResolver::host_default() {
  return SearchPathResolver({"/lib64", "/usr/lib64", "/lib", "/usr/lib"});
}

std::optional<std::filesystem::path> SearchPathResolver::resolve(const std::string& soname) const {
  for (const auto& dir : paths_) {
    std::filesystem::path cand = dir / soname;
    std::error_code ec;
    if (std::filesystem::exists(cand, ec)) return cand;
  }
  return std::nullopt;
}

namespace {

std::vector<uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw WheelExtractionError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Node name keys a DT_NEEDED entry can match: the declared soname, the exact
// filename, and the normalized base name (so auditwheel-renamed files still
// shadow the host library they replaced).
std::optional<std::string> normalized_base(const std::string& filename) {
  try {
    return provdb::normalize_libname(filename).basename;
  } catch (const provdb::NotALibraryName&) {
    return std::nullopt;
  }
}

struct Expander {
  const SystemResolver& sysresolver;
  const ExpandOptions& opts;
  BinaryDepTree& tree;
  std::map<std::string, size_t> by_path;

  // Apply the stripped->unstripped substitution map; the replacement must
  // declare the same soname as the original.
  std::vector<uint8_t> maybe_substitute(const std::string& path, std::vector<uint8_t> bytes) {
    auto it = opts.substitutions.find(path);
    if (it == opts.substitutions.end()) return bytes;
    std::vector<uint8_t> repl;
    try {
      repl = read_file(it->second);
      auto orig_dyn = elf::read_needed(bytes);
      auto repl_dyn = elf::read_needed(repl);
      if (orig_dyn.soname != repl_dyn.soname) {
        tree.diagnostics.push_back("substitution rejected for " + path + ": soname mismatch");
        return bytes;
      }
    } catch (const std::exception& e) {
      tree.diagnostics.push_back("substitution rejected for " + path + ": " +
                                 std::string(e.what()));
      return bytes;
    }
    tree.diagnostics.push_back("substituted " + path + " with " + it->second.string());
    return repl;
  }

  size_t add_node(const std::string& path, bool inside_wheel, std::vector<uint8_t> bytes) {
    BinaryNode node;
    node.path = path;
    try {
      auto dyn = elf::read_needed(bytes);
      node.soname = dyn.soname;
      for (std::string& n : dyn.needed)
        if (!n.empty()) node.needed.push_back(std::move(n));
      auto syms = elf::exported_dynsyms(bytes);
      node.dynsyms.insert(syms.begin(), syms.end());
    } catch (const elf::MalformedElf& e) {
      tree.diagnostics.push_back("malformed ELF " + path + ": " + e.what());
    }
    node.kind = classify_binary(inside_wheel, node.dynsyms);
    if (inside_wheel)
      node.content = std::make_shared<const std::vector<uint8_t>>(std::move(bytes));
    tree.nodes.push_back(std::move(node));
    by_path[path] = tree.nodes.size() - 1;
    return tree.nodes.size() - 1;
  }

  // In-wheel match for a needed entry: exact soname, exact filename, or
  // equal normalized base name.
  std::optional<size_t> match_bundled(const std::string& needed) {
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
      const BinaryNode& n = tree.nodes[i];
      if (n.kind == BinaryKind::System) continue;
      if (n.soname && *n.soname == needed) return i;
      if (n.filename() == needed) return i;
    }
    auto want = normalized_base(needed);
    if (!want) return std::nullopt;
    for (size_t i = 0; i < tree.nodes.size(); ++i) {
      const BinaryNode& n = tree.nodes[i];
      if (n.kind == BinaryKind::System) continue;
      if (normalized_base(n.filename()) == want) return i;
    }
    return std::nullopt;
  }

  void run(std::span<const uint8_t> wheel) {
    zipfile::ZipReader zip(wheel);
    for (const auto& entry : zip.entries()) {
      if (entry.name.ends_with("/")) continue;
      std::vector<uint8_t> bytes = zip.read(entry);
      if (!elf::detect_elf(bytes)) {
        // reject other ELF classes explicitly so the skip is visible
        if (bytes.size() >= 4 && bytes[0] == 0x7f && bytes[1] == 'E' && bytes[2] == 'L' &&
            bytes[3] == 'F')
          tree.diagnostics.push_back("unsupported ELF class/encoding: " + entry.name);
        continue;
      }
      bytes = maybe_substitute(entry.name, std::move(bytes));
      add_node(entry.name, true, std::move(bytes));
    }

    // resolve needed entries breadth-first; system libraries recurse up to
    // the configured depth
    std::deque<std::pair<size_t, int>> queue;  // node index, depth
    for (size_t i = 0; i < tree.nodes.size(); ++i) queue.push_back({i, 0});
    std::set<std::pair<size_t, size_t>> seen_edges;

    while (!queue.empty()) {
      auto [idx, depth] = queue.front();
      queue.pop_front();
      std::vector<std::string> needed = tree.nodes[idx].needed;
      for (const std::string& want : needed) {
        std::optional<size_t> dep = match_bundled(want);
        if (!dep) {
          if (auto existing = by_path.find(want); existing != by_path.end()) {
            dep = existing->second;  // system node keyed by soname already added
          } else if (auto path = sysresolver.resolve(want)) {
            if (auto by = by_path.find(path->string()); by != by_path.end()) {
              dep = by->second;
            } else if (depth >= opts.max_system_depth) {
              tree.diagnostics.push_back("system recursion depth exhausted at " + want);
              continue;
            } else {
              std::vector<uint8_t> bytes;
              try {
                bytes = read_file(*path);
              } catch (const std::exception& e) {
                tree.diagnostics.push_back(std::string(e.what()));
                continue;
              }
              if (!elf::detect_elf(bytes)) {
                tree.diagnostics.push_back("resolved non-ELF for " + want + ": " +
                                           path->string());
                continue;
              }
              bytes = maybe_substitute(path->string(), std::move(bytes));
              dep = add_node(path->string(), false, std::move(bytes));
              queue.push_back({*dep, depth + 1});
            }
          } else {
            tree.diagnostics.push_back("unresolved needed entry: " + want + " (wanted by " +
                                       tree.nodes[idx].path + ")");
            continue;
          }
        }
        if (seen_edges.insert({idx, *dep}).second) tree.edges.emplace_back(idx, *dep);
      }
    }
  }
};

}  // namespace

BinaryDepTree expand_binary_tree(const pkgmeta::PackageId& owner,
                                 std::span<const uint8_t> wheel,
                                 const SystemResolver& sysresolver, const ExpandOptions& opts) {
  BinaryDepTree tree;
  tree.owner = owner;
  try {
    Expander ex{sysresolver, opts, tree, {}};
    ex.run(wheel);
  } catch (const zipfile::ZipError& e) {
    throw WheelExtractionError(e.what());
  }
  return tree;
}

}  // namespace provscan::elfscan
