#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace provscan::versioncmp {

enum class Ordering { LT, EQ, GT };

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Debian package version: [epoch:]upstream[-revision].
/// The revision is everything after the last hyphen.
struct DebVersion {
  unsigned long epoch = 0;
  std::string upstream;
  std::string revision;

  static DebVersion parse(std::string_view text);
  std::string str() const;
};

/// RPM package version: [epoch:]version-release.
struct RpmVersion {
  unsigned long epoch = 0;
  std::string version;
  std::string release;

  static RpmVersion parse(std::string_view text);
  std::string str() const;
};

/// Python package version, pragmatic subset: epoch, release segments,
/// pre/post/dev markers. A local tag (`+...`) is parsed but ignored for
/// ordering; callers that care can inspect `local`.
struct PyVersion {
  unsigned long epoch = 0;
  std::vector<unsigned long> release;
  // phase: 0 = a, 1 = b, 2 = rc
  std::optional<std::pair<int, unsigned long>> pre;
  std::optional<unsigned long> post;
  std::optional<unsigned long> dev;
  std::string local;

  static PyVersion parse(std::string_view text);
  std::string str() const;
};

Ordering compare_deb(const DebVersion& a, const DebVersion& b);
Ordering compare_rpm(const RpmVersion& a, const RpmVersion& b);
Ordering compare_py(const PyVersion& a, const PyVersion& b);

/// dpkg's string ordering for a single version fragment (upstream or
/// revision): digit runs compare numerically, `~` sorts before everything
/// including end-of-string. Also used for upstream version ranges of C
/// projects (letter-suffixed versions like 1.1.0l order correctly).
int compare_deb_fragment(std::string_view a, std::string_view b);

/// rpm's segment ordering for a version or release fragment.
int compare_rpm_fragment(std::string_view a, std::string_view b);

enum class Comparator { Eq, Ne, Le, Ge, Lt, Gt, Compatible };

std::optional<Comparator> parse_comparator(std::string_view token);
std::string comparator_str(Comparator op);

/// One clause of a version predicate; clauses conjoin.
struct Clause {
  Comparator op;
  std::string version;
};

/// Evaluate a conjunctive predicate against a Python version. `~=` expands
/// to the compatible-release pair, `==`/`!=` accept a trailing `.*` wildcard.
/// An empty predicate means "any version".
bool satisfies(const PyVersion& v, const std::vector<Clause>& predicate);
bool satisfies(std::string_view version, const std::vector<Clause>& predicate);

}  // namespace provscan::versioncmp
