#include "provscan/pkgmeta.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <fstream>

#include "provscan/zipfile.hpp"

namespace provscan::pkgmeta {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
}

}  // namespace

std::string normalize_name(std::string_view name) {
  std::string out;
  out.reserve(name.size());
  bool pending_sep = false;
  for (char c : name) {
    if (c == '-' || c == '_' || c == '.') {
      pending_sep = !out.empty();
      continue;
    }
    if (pending_sep) {
      out += '-';
      pending_sep = false;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

namespace {

// Parse one Requires-Dist value: name [extras] [(spec)] [; marker].
// Returns false when the line is to be skipped (marker excluded it).
bool parse_requires_dist(std::string_view value, int line_no, const ParseOptions& opts,
                         MetadataDiagnostics& diag, DependencySpec& out) {
  std::string_view marker;
  if (auto semi = value.find(';'); semi != std::string_view::npos) {
    marker = trim(value.substr(semi + 1));
    value = value.substr(0, semi);
  }
  value = trim(value);

  size_t pos = 0;
  while (pos < value.size() && is_name_char(value[pos])) ++pos;
  if (pos == 0) throw MalformedSpecifier(line_no, "missing dependency name");
  out.name = normalize_name(value.substr(0, pos));

  std::string_view rest = trim(value.substr(pos));
  if (!rest.empty() && rest.front() == '[') {
    auto close = rest.find(']');
    if (close == std::string_view::npos)
      throw MalformedSpecifier(line_no, "unterminated extras bracket");
    rest = trim(rest.substr(close + 1));
  }
  if (!rest.empty() && rest.front() == '@')
    throw MalformedSpecifier(line_no, "URL requirements are not supported");
  if (!rest.empty() && rest.front() == '(') {
    if (rest.back() != ')')
      throw MalformedSpecifier(line_no, "unterminated parenthesized specifier");
    rest = trim(rest.substr(1, rest.size() - 2));
  }

  if (!rest.empty()) {
    size_t p = 0;
    while (p < rest.size()) {
      size_t comma = rest.find(',', p);
      std::string_view clause = trim(rest.substr(p, comma == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : comma - p));
      p = comma == std::string_view::npos ? rest.size() : comma + 1;
      if (clause.empty()) continue;
      size_t oplen = 0;
      while (oplen < clause.size() && !std::isalnum(static_cast<unsigned char>(clause[oplen])) &&
             clause[oplen] != '*' && clause[oplen] != '.')
        ++oplen;
      std::string_view op_text = clause.substr(0, oplen);
      if (op_text == "===") op_text = "==";  // arbitrary equality, closest supported meaning
      auto op = versioncmp::parse_comparator(op_text);
      if (!op) throw MalformedSpecifier(line_no, "bad comparator in '" + std::string(clause) + "'");
      std::string version(trim(clause.substr(oplen)));
      if (version.empty()) throw MalformedSpecifier(line_no, "missing version in clause");
      try {
        std::string_view check = version;
        if (check.ends_with(".*")) check.remove_suffix(2);
        versioncmp::PyVersion::parse(check);
      } catch (const versioncmp::ParseError& e) {
        throw MalformedSpecifier(line_no, e.what());
      }
      out.predicate.push_back({*op, std::move(version)});
    }
  }

  if (!marker.empty()) {
    // Only `extra == "..."` is evaluated. Anything else is assumed true in
    // lenient mode and skipped (with a tally) in strict mode.
    auto extra_pos = marker.find("extra");
    if (extra_pos != std::string_view::npos) {
      auto eq = marker.find("==", extra_pos);
      if (eq == std::string_view::npos) {
        ++diag.skipped_marker_lines;
        diag.notes.push_back("line " + std::to_string(line_no) + ": unevaluable extra marker");
        return false;
      }
      std::string_view tail = trim(marker.substr(eq + 2));
      if (tail.size() >= 2 && (tail.front() == '"' || tail.front() == '\'')) {
        char quote = tail.front();
        auto end = tail.find(quote, 1);
        if (end != std::string_view::npos) {
          std::string extra = normalize_name(tail.substr(1, end - 1));
          if (opts.requested_extras.count(extra)) return true;
          ++diag.skipped_marker_lines;
          return false;
        }
      }
      ++diag.skipped_marker_lines;
      return false;
    }
    if (opts.mode == ParseMode::Lenient) {
      ++diag.assumed_marker_lines;
      return true;
    }
    ++diag.skipped_marker_lines;
    diag.notes.push_back("line " + std::to_string(line_no) + ": marker not evaluable: " +
                         std::string(marker));
    return false;
  }
  return true;
}

}  // namespace

WheelMetadata parse_metadata_text(std::string_view text, const ParseOptions& opts) {
  WheelMetadata meta;
  std::string name, version;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                           : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) break;  // header block ends at the first blank line
    if (line.front() == ' ' || line.front() == '\t') continue;  // continuation of a prior field
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key = to_lower(trim(line.substr(0, colon)));
    std::string_view value = trim(line.substr(colon + 1));
    if (key == "name") {
      name = std::string(value);
    } else if (key == "version") {
      version = std::string(value);
    } else if (key == "requires-dist") {
      DependencySpec dep;
      try {
        if (parse_requires_dist(value, line_no, opts, meta.diag, dep))
          meta.requires_dist.push_back(std::move(dep));
      } catch (const MalformedSpecifier& e) {
        if (opts.mode == ParseMode::Strict) throw;
        ++meta.diag.skipped_malformed_lines;
        meta.diag.notes.push_back(e.what());
      }
    }
  }
  if (name.empty()) throw MalformedMetadata("missing Name header");
  if (version.empty()) throw MalformedMetadata("missing Version header");
  meta.id = {normalize_name(name), version};
  return meta;
}

WheelMetadata parse_wheel_metadata(std::span<const uint8_t> wheel, const ParseOptions& opts) {
  std::vector<uint8_t> metadata;
  try {
    zipfile::ZipReader zip(wheel);
    const zipfile::Entry* found = nullptr;
    for (const auto& e : zip.entries()) {
      if (e.name.ends_with(".dist-info/METADATA") &&
          e.name.find('/') == e.name.size() - std::string_view("METADATA").size() - 1) {
        if (found) throw NotAWheel("multiple .dist-info/METADATA members");
        found = &e;
      }
    }
    if (!found) throw NotAWheel("no .dist-info/METADATA member");
    metadata = zip.read(*found);
  } catch (const zipfile::ZipError& e) {
    throw NotAWheel(e.what());
  }
  return parse_metadata_text(
      std::string_view(reinterpret_cast<const char*>(metadata.data()), metadata.size()), opts);
}

bool PythonDepTree::has_node(std::string_view name) const {
  return find(name) != nullptr;
}

const PackageId* PythonDepTree::find(std::string_view name) const {
  for (const auto& n : nodes)
    if (n.name == name) return &n;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Repositories
// ---------------------------------------------------------------------------

DirRepository::DirRepository(const std::filesystem::path& dir) {
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    std::string fname = entry.path().filename().string();
    if (!fname.ends_with(".whl")) continue;
    // name-version-(build-)?pytag-abitag-platform.whl
    auto first = fname.find('-');
    if (first == std::string::npos) continue;
    auto second = fname.find('-', first + 1);
    if (second == std::string::npos) continue;
    std::string name = normalize_name(fname.substr(0, first));
    std::string version = fname.substr(first + 1, second - first - 1);
    index_[name][version] = entry.path();
  }
  if (ec) throw RepositoryError("cannot scan repository " + dir.string() + ": " + ec.message());
}

std::vector<std::string> DirRepository::versions(const std::string& name) const {
  std::vector<std::string> out;
  if (auto it = index_.find(name); it != index_.end())
    for (const auto& [v, _] : it->second) out.push_back(v);
  return out;
}

std::vector<uint8_t> DirRepository::fetch(const std::string& name,
                                          const std::string& version) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw RepositoryError("no such package: " + name);
  auto vit = it->second.find(version);
  if (vit == it->second.end()) throw RepositoryError("no such version: " + name + " " + version);
  std::ifstream in(vit->second, std::ios::binary);
  if (!in) throw RepositoryError("cannot open " + vit->second.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void MemoryRepository::add(const std::string& name, const std::string& version,
                           std::vector<uint8_t> wheel) {
  wheels_[normalize_name(name)][version] = std::move(wheel);
}

std::vector<std::string> MemoryRepository::versions(const std::string& name) const {
  std::vector<std::string> out;
  if (auto it = wheels_.find(name); it != wheels_.end())
    for (const auto& [v, _] : it->second) out.push_back(v);
  return out;
}

std::vector<uint8_t> MemoryRepository::fetch(const std::string& name,
                                             const std::string& version) const {
  auto it = wheels_.find(name);
  if (it == wheels_.end()) throw RepositoryError("no such package: " + name);
  auto vit = it->second.find(version);
  if (vit == it->second.end()) throw RepositoryError("no such version: " + name + " " + version);
  return vit->second;
}

// ---------------------------------------------------------------------------
// Dependency tree resolution
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> select_version(const WheelRepository& repo, const DependencySpec& dep,
                                          std::vector<std::string>& diagnostics) {
  std::optional<std::string> best;
  std::optional<versioncmp::PyVersion> best_parsed;
  for (const std::string& v : repo.versions(dep.name)) {
    versioncmp::PyVersion parsed;
    try {
      parsed = versioncmp::PyVersion::parse(v);
      if (!versioncmp::satisfies(parsed, dep.predicate)) continue;
    } catch (const versioncmp::ParseError&) {
      diagnostics.push_back("unparseable repository version " + dep.name + " " + v);
      continue;
    }
    if (!best || versioncmp::compare_py(parsed, *best_parsed) == versioncmp::Ordering::GT) {
      best = v;
      best_parsed = parsed;
    }
  }
  return best;
}

}  // namespace

PythonDepTree resolve_python_dep_tree(std::span<const uint8_t> root_wheel,
                                      const WheelRepository& repo, const ParseOptions& opts) {
  PythonDepTree tree;
  WheelMetadata root_meta = parse_wheel_metadata(root_wheel, opts);
  tree.root = root_meta.id;
  tree.nodes.push_back(root_meta.id);

  struct Pending {
    std::string dependent;
    std::vector<DependencySpec> deps;
  };
  std::deque<Pending> queue;
  queue.push_back({root_meta.id.name, root_meta.requires_dist});

  std::set<std::pair<std::string, std::string>> edge_set;

  while (!queue.empty()) {
    Pending item = std::move(queue.front());
    queue.pop_front();
    for (const DependencySpec& dep : item.deps) {
      if (!edge_set.insert({item.dependent, dep.name}).second) continue;
      tree.edges.emplace_back(item.dependent, dep.name);
      if (const PackageId* existing = tree.find(dep.name)) {
        // already resolved; warn when the chosen version violates this predicate
        if (!existing->version.empty()) {
          try {
            if (!versioncmp::satisfies(existing->version, dep.predicate))
              tree.diagnostics.push_back("constraint conflict: " + item.dependent +
                                         " wants " + dep.name + " outside resolved " +
                                         existing->version);
          } catch (const versioncmp::ParseError&) {
          }
        }
        continue;
      }
      auto version = select_version(repo, dep, tree.diagnostics);
      if (!version) {
        tree.nodes.push_back({dep.name, ""});
        tree.unresolved.insert(dep.name);
        tree.diagnostics.push_back("unresolved dependency: " + dep.name);
        continue;
      }
      tree.nodes.push_back({dep.name, *version});
      WheelMetadata meta = parse_wheel_metadata(repo.fetch(dep.name, *version), opts);
      queue.push_back({dep.name, meta.requires_dist});
    }
  }
  return tree;
}

}  // namespace provscan::pkgmeta
