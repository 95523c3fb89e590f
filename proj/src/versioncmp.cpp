#include "provscan/versioncmp.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace provscan::versioncmp {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

Ordering from_int(int c) {
  if (c < 0) return Ordering::LT;
  if (c > 0) return Ordering::GT;
  return Ordering::EQ;
}

unsigned long parse_epoch(std::string_view& text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) return 0;
  std::string_view head = text.substr(0, colon);
  if (head.empty()) throw ParseError("empty epoch");
  unsigned long epoch = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), epoch);
  if (ec != std::errc{} || ptr != head.data() + head.size())
    throw ParseError("non-numeric epoch: '" + std::string(head) + "'");
  text.remove_prefix(colon + 1);
  return epoch;
}

// dpkg character order: digits are segment breaks, letters sort before
// non-letters, '~' before everything including end-of-string.
int deb_order(char c) {
  if (is_digit(c)) return 0;
  if (is_alpha(c)) return c;
  if (c == '~') return -1;
  if (c) return static_cast<int>(static_cast<unsigned char>(c)) + 256;
  return 0;
}

}  // namespace

int compare_deb_fragment(std::string_view a, std::string_view b) {
  size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    int first_diff = 0;
    while ((i < a.size() && !is_digit(a[i])) || (j < b.size() && !is_digit(b[j]))) {
      int ac = i < a.size() ? deb_order(a[i]) : 0;
      int bc = j < b.size() ? deb_order(b[j]) : 0;
      if (ac != bc) return ac - bc;
      ++i;
      ++j;
    }
    while (i < a.size() && a[i] == '0') ++i;
    while (j < b.size() && b[j] == '0') ++j;
    while (i < a.size() && j < b.size() && is_digit(a[i]) && is_digit(b[j])) {
      if (!first_diff) first_diff = a[i] - b[j];
      ++i;
      ++j;
    }
    if (i < a.size() && is_digit(a[i])) return 1;
    if (j < b.size() && is_digit(b[j])) return -1;
    if (first_diff) return first_diff;
  }
  return 0;
}

DebVersion DebVersion::parse(std::string_view text) {
  DebVersion v;
  v.epoch = parse_epoch(text);
  auto dash = text.rfind('-');
  if (dash != std::string_view::npos) {
    v.upstream = std::string(text.substr(0, dash));
    v.revision = std::string(text.substr(dash + 1));
  } else {
    v.upstream = std::string(text);
  }
  if (v.upstream.empty()) throw ParseError("empty upstream version");
  return v;
}

std::string DebVersion::str() const {
  std::string out;
  if (epoch) out += std::to_string(epoch) + ":";
  out += upstream;
  if (!revision.empty()) out += "-" + revision;
  return out;
}

Ordering compare_deb(const DebVersion& a, const DebVersion& b) {
  if (a.epoch != b.epoch) return a.epoch < b.epoch ? Ordering::LT : Ordering::GT;
  if (int c = compare_deb_fragment(a.upstream, b.upstream)) return from_int(c);
  return from_int(compare_deb_fragment(a.revision, b.revision));
}

int compare_rpm_fragment(std::string_view a, std::string_view b) {
  size_t i = 0, j = 0;
  auto is_sep = [](char c) {
    return !is_digit(c) && !is_alpha(c) && c != '~' && c != '^';
  };
  while (i < a.size() || j < b.size()) {
    while (i < a.size() && is_sep(a[i])) ++i;
    while (j < b.size() && is_sep(b[j])) ++j;
    // tilde sorts before everything, including end of string
    bool ta = i < a.size() && a[i] == '~';
    bool tb = j < b.size() && b[j] == '~';
    if (ta || tb) {
      if (!ta) return 1;
      if (!tb) return -1;
      ++i;
      ++j;
      continue;
    }
    // caret sorts after end of string but before any other suffix
    bool ca = i < a.size() && a[i] == '^';
    bool cb = j < b.size() && b[j] == '^';
    if (ca || cb) {
      if (i == a.size()) return -1;
      if (j == b.size()) return 1;
      if (!ca) return 1;
      if (!cb) return -1;
      ++i;
      ++j;
      continue;
    }
    if (i == a.size() || j == b.size()) break;

    size_t si = i, sj = j;
    bool numeric = is_digit(a[i]);
    if (numeric) {
      while (si < a.size() && is_digit(a[si])) ++si;
      while (sj < b.size() && is_digit(b[sj])) ++sj;
    } else {
      while (si < a.size() && is_alpha(a[si])) ++si;
      while (sj < b.size() && is_alpha(b[sj])) ++sj;
    }
    std::string_view sa = a.substr(i, si - i);
    std::string_view sb = b.substr(j, sj - j);
    // different segment types: the numeric one is newer
    if (sb.empty()) return numeric ? 1 : -1;
    if (numeric) {
      while (!sa.empty() && sa.front() == '0') sa.remove_prefix(1);
      while (!sb.empty() && sb.front() == '0') sb.remove_prefix(1);
      if (sa.size() != sb.size()) return sa.size() < sb.size() ? -1 : 1;
    }
    if (int c = sa.compare(sb)) return c < 0 ? -1 : 1;
    i = si;
    j = sj;
  }
  if (i == a.size() && j == b.size()) return 0;
  return i < a.size() ? 1 : -1;
}

RpmVersion RpmVersion::parse(std::string_view text) {
  RpmVersion v;
  v.epoch = parse_epoch(text);
  auto dash = text.rfind('-');
  if (dash != std::string_view::npos) {
    v.version = std::string(text.substr(0, dash));
    v.release = std::string(text.substr(dash + 1));
  } else {
    v.version = std::string(text);
  }
  if (v.version.empty()) throw ParseError("empty rpm version");
  return v;
}

std::string RpmVersion::str() const {
  std::string out;
  if (epoch) out += std::to_string(epoch) + ":";
  out += version;
  if (!release.empty()) out += "-" + release;
  return out;
}

Ordering compare_rpm(const RpmVersion& a, const RpmVersion& b) {
  if (a.epoch != b.epoch) return a.epoch < b.epoch ? Ordering::LT : Ordering::GT;
  if (int c = compare_rpm_fragment(a.version, b.version)) return from_int(c);
  return from_int(compare_rpm_fragment(a.release, b.release));
}

// ---------------------------------------------------------------------------
// Python versions
// ---------------------------------------------------------------------------

namespace {

struct PyCursor {
  std::string_view s;
  size_t pos = 0;

  bool done() const { return pos >= s.size(); }
  char peek() const { return pos < s.size() ? s[pos] : '\0'; }
  void skip_sep() {
    if (!done() && (s[pos] == '.' || s[pos] == '-' || s[pos] == '_')) ++pos;
  }
  std::optional<unsigned long> number() {
    size_t start = pos;
    while (pos < s.size() && is_digit(s[pos])) ++pos;
    if (pos == start) return std::nullopt;
    unsigned long n = 0;
    std::from_chars(s.data() + start, s.data() + pos, n);
    return n;
  }
  bool word(std::string_view w) {
    if (s.size() - pos < w.size()) return false;
    for (size_t k = 0; k < w.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(s[pos + k])) != w[k]) return false;
    // must not be a prefix of a longer alphabetic token
    size_t end = pos + w.size();
    if (end < s.size() && is_alpha(s[end])) return false;
    pos = end;
    return true;
  }
};

}  // namespace

PyVersion PyVersion::parse(std::string_view text) {
  // trim, drop a leading 'v'
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  if (!text.empty() && (text.front() == 'v' || text.front() == 'V'))
    text.remove_prefix(1);
  if (text.empty()) throw ParseError("empty version");

  PyVersion v;
  PyCursor c{text};

  auto bang = text.find('!');
  if (bang != std::string_view::npos) {
    std::string_view head = text.substr(0, bang);
    unsigned long epoch = 0;
    auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), epoch);
    if (ec != std::errc{} || ptr != head.data() + head.size())
      throw ParseError("bad epoch in '" + std::string(text) + "'");
    v.epoch = epoch;
    c.pos = bang + 1;
  }

  auto first = c.number();
  if (!first) throw ParseError("version must start with a number: '" + std::string(text) + "'");
  v.release.push_back(*first);
  while (c.peek() == '.') {
    size_t save = c.pos;
    ++c.pos;
    auto n = c.number();
    if (!n) {
      c.pos = save;
      break;
    }
    v.release.push_back(*n);
  }

  // pre-release marker
  {
    size_t save = c.pos;
    c.skip_sep();
    int phase = -1;
    if (c.word("alpha") || c.word("a"))
      phase = 0;
    else if (c.word("beta") || c.word("b"))
      phase = 1;
    else if (c.word("rc") || c.word("preview") || c.word("pre") || c.word("c"))
      phase = 2;
    if (phase >= 0) {
      c.skip_sep();
      v.pre = {phase, c.number().value_or(0)};
    } else {
      c.pos = save;
    }
  }

  // post-release marker
  {
    size_t save = c.pos;
    if (c.peek() == '-' && c.pos + 1 < text.size() && is_digit(text[c.pos + 1])) {
      ++c.pos;
      v.post = c.number().value_or(0);
    } else {
      c.skip_sep();
      if (c.word("post") || c.word("rev") || c.word("r")) {
        c.skip_sep();
        v.post = c.number().value_or(0);
      } else {
        c.pos = save;
      }
    }
  }

  // dev marker
  {
    size_t save = c.pos;
    c.skip_sep();
    if (c.word("dev")) {
      c.skip_sep();
      v.dev = c.number().value_or(0);
    } else {
      c.pos = save;
    }
  }

  if (c.peek() == '+') {
    v.local = std::string(text.substr(c.pos + 1));
    c.pos = text.size();
  }

  if (!c.done())
    throw ParseError("trailing garbage in version '" + std::string(text) + "'");
  return v;
}

std::string PyVersion::str() const {
  std::ostringstream out;
  if (epoch) out << epoch << "!";
  for (size_t i = 0; i < release.size(); ++i) {
    if (i) out << ".";
    out << release[i];
  }
  if (pre) out << (pre->first == 0 ? "a" : pre->first == 1 ? "b" : "rc") << pre->second;
  if (post) out << ".post" << *post;
  if (dev) out << ".dev" << *dev;
  if (!local.empty()) out << "+" << local;
  return out.str();
}

namespace {

// Sort key component with -inf / value / +inf classes.
struct Rank {
  int cls;  // -1, 0, 1
  unsigned long a = 0, b = 0;
};

int cmp_rank(const Rank& x, const Rank& y) {
  if (x.cls != y.cls) return x.cls < y.cls ? -1 : 1;
  if (x.a != y.a) return x.a < y.a ? -1 : 1;
  if (x.b != y.b) return x.b < y.b ? -1 : 1;
  return 0;
}

int cmp_release(const std::vector<unsigned long>& a, const std::vector<unsigned long>& b) {
  size_t n = std::max(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    unsigned long x = i < a.size() ? a[i] : 0;  // trailing zeros compare equal
    unsigned long y = i < b.size() ? b[i] : 0;
    if (x != y) return x < y ? -1 : 1;
  }
  return 0;
}

Rank pre_rank(const PyVersion& v) {
  if (v.pre) return {0, static_cast<unsigned long>(v.pre->first), v.pre->second};
  if (!v.post && v.dev) return {-1};  // bare dev release sorts before pre-releases
  return {1};
}

Rank post_rank(const PyVersion& v) { return v.post ? Rank{0, *v.post} : Rank{-1}; }
Rank dev_rank(const PyVersion& v) { return v.dev ? Rank{0, *v.dev} : Rank{1}; }

}  // namespace

Ordering compare_py(const PyVersion& a, const PyVersion& b) {
  if (a.epoch != b.epoch) return a.epoch < b.epoch ? Ordering::LT : Ordering::GT;
  if (int c = cmp_release(a.release, b.release)) return from_int(c);
  if (int c = cmp_rank(pre_rank(a), pre_rank(b))) return from_int(c);
  if (int c = cmp_rank(post_rank(a), post_rank(b))) return from_int(c);
  return from_int(cmp_rank(dev_rank(a), dev_rank(b)));
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

std::optional<Comparator> parse_comparator(std::string_view token) {
  if (token == "==") return Comparator::Eq;
  if (token == "!=") return Comparator::Ne;
  if (token == "<=") return Comparator::Le;
  if (token == ">=") return Comparator::Ge;
  if (token == "<") return Comparator::Lt;
  if (token == ">") return Comparator::Gt;
  if (token == "~=") return Comparator::Compatible;
  return std::nullopt;
}

std::string comparator_str(Comparator op) {
  switch (op) {
    case Comparator::Eq: return "==";
    case Comparator::Ne: return "!=";
    case Comparator::Le: return "<=";
    case Comparator::Ge: return ">=";
    case Comparator::Lt: return "<";
    case Comparator::Gt: return ">";
    case Comparator::Compatible: return "~=";
  }
  return "?";
}

namespace {

bool release_prefix_match(const PyVersion& v, const PyVersion& prefix, size_t count) {
  for (size_t i = 0; i < count; ++i) {
    unsigned long want = i < prefix.release.size() ? prefix.release[i] : 0;
    unsigned long got = i < v.release.size() ? v.release[i] : 0;
    if (want != got) return false;
  }
  return true;
}

bool same_base(const PyVersion& a, const PyVersion& b) {
  return a.epoch == b.epoch && cmp_release(a.release, b.release) == 0;
}

bool clause_holds(const PyVersion& v, const Clause& clause) {
  std::string_view spec = clause.version;
  bool wildcard = false;
  if (spec.size() > 2 && spec.ends_with(".*") &&
      (clause.op == Comparator::Eq || clause.op == Comparator::Ne)) {
    wildcard = true;
    spec.remove_suffix(2);
  }
  PyVersion w = PyVersion::parse(spec);
  if (wildcard) {
    bool match = v.epoch == w.epoch && release_prefix_match(v, w, w.release.size());
    return clause.op == Comparator::Eq ? match : !match;
  }
  if (clause.op == Comparator::Compatible) {
    // ~= X.Y.Z  ==>  >= X.Y.Z and == X.Y.*
    if (w.release.size() < 2)
      throw ParseError("~= requires at least two release segments: '" + clause.version + "'");
    if (compare_py(v, w) == Ordering::LT) return false;
    return v.epoch == w.epoch && release_prefix_match(v, w, w.release.size() - 1);
  }
  Ordering ord = compare_py(v, w);
  switch (clause.op) {
    case Comparator::Eq: return ord == Ordering::EQ;
    case Comparator::Ne: return ord != Ordering::EQ;
    case Comparator::Le: return ord != Ordering::GT;
    case Comparator::Ge: return ord != Ordering::LT;
    case Comparator::Lt:
      // exclusive ordered comparison: a pre-release of the boundary release
      // does not satisfy < unless the boundary is itself a pre-release
      if (ord != Ordering::LT) return false;
      if (!w.pre && !w.dev && (v.pre || v.dev) && same_base(v, w)) return false;
      return true;
    case Comparator::Gt:
      // symmetric rule: post-releases of the boundary do not satisfy >
      if (ord != Ordering::GT) return false;
      if (!w.post && v.post && same_base(v, w)) return false;
      if (!v.local.empty() && same_base(v, w)) return false;
      return true;
    case Comparator::Compatible: break;
  }
  return false;
}

}  // namespace

bool satisfies(const PyVersion& v, const std::vector<Clause>& predicate) {
  return std::all_of(predicate.begin(), predicate.end(),
                     [&](const Clause& c) { return clause_holds(v, c); });
}

bool satisfies(std::string_view version, const std::vector<Clause>& predicate) {
  return satisfies(PyVersion::parse(version), predicate);
}

}  // namespace provscan::versioncmp
