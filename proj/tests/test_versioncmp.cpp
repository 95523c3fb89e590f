#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "provscan/versioncmp.hpp"

using namespace provscan::versioncmp;

namespace {

int sign(Ordering o) { return o == Ordering::LT ? -1 : o == Ordering::GT ? 1 : 0; }

struct CorpusRow {
  std::string a, b;
  int expected;
};

std::vector<CorpusRow> load_corpus(const std::string& name) {
  std::ifstream in(std::string(PROVSCAN_FIXTURE_DIR) + "/" + name);
  REQUIRE(in.good());
  std::vector<CorpusRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    rows.push_back({line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1),
                    std::stoi(line.substr(t2 + 1))});
  }
  return rows;
}

}  // namespace

TEST_CASE("deb version parsing") {
  auto v = DebVersion::parse("1:1.1.0l-1~deb9u4");
  CHECK(v.epoch == 1);
  CHECK(v.upstream == "1.1.0l");
  CHECK(v.revision == "1~deb9u4");

  auto plain = DebVersion::parse("2.9.1");
  CHECK(plain.epoch == 0);
  CHECK(plain.revision.empty());

  // the last hyphen splits the revision
  auto multi = DebVersion::parse("4.10-1.1+deb9u1");
  CHECK(multi.upstream == "4.10");
  CHECK(multi.revision == "1.1+deb9u1");
  auto multi2 = DebVersion::parse("1.0-2-3");
  CHECK(multi2.upstream == "1.0-2");
  CHECK(multi2.revision == "3");

  CHECK_THROWS_AS(DebVersion::parse(""), ParseError);
  CHECK_THROWS_AS(DebVersion::parse("a:1.0"), ParseError);
}

TEST_CASE("deb ordering on the backport chain") {
  auto cmp = [](const char* a, const char* b) {
    return sign(compare_deb(DebVersion::parse(a), DebVersion::parse(b)));
  };
  CHECK(cmp("1.1.0l-1~deb9u4", "1.1.0l-1~deb9u11") == -1);  // u4 < u11 numerically
  CHECK(cmp("1.1.0l-1~deb9u4", "1.1.0l-1~deb9u4") == 0);
  CHECK(cmp("1.0~rc1", "1.0") == -1);
  CHECK(cmp("1.0~", "1.0~~") == 1);
  CHECK(cmp("1:0.1", "2:0.1") == -1);
}

TEST_CASE("deb corpus agrees with dpkg") {
  auto rows = load_corpus("deb_corpus.tsv");
  REQUIRE(rows.size() >= 200);
  size_t mismatches = 0;
  for (const auto& row : rows) {
    int got = sign(compare_deb(DebVersion::parse(row.a), DebVersion::parse(row.b)));
    if (got != row.expected) {
      ++mismatches;
      CAPTURE(row.a);
      CAPTURE(row.b);
      CHECK(got == row.expected);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("rpm ordering") {
  auto cmp = [](const char* a, const char* b) {
    return sign(compare_rpm(RpmVersion::parse(a), RpmVersion::parse(b)));
  };
  CHECK(cmp("2.9.1-6.el7_9.6", "2.9.1-6.el7_9.7") == -1);
  CHECK(cmp("2.9.1-6.el7_9.6", "2.9.1-6.el7_9.6") == 0);
  CHECK(cmp("1.15.1-54.el7_9", "1.15.1-55.el7_9") == -1);
  CHECK(cmp("1.0~rc1-1", "1.0-1") == -1);   // tilde sorts before release
  CHECK(cmp("1.0^git1-1", "1.0-1") == 1);   // caret sorts after release
  CHECK(cmp("1.0a-1", "1.0.1-1") == -1);    // numeric segment beats alphabetic
  CHECK(cmp("1:1.0-1", "2:0.5-1") == -1);
}

TEST_CASE("rpm corpus agrees with the reference algorithm") {
  auto rows = load_corpus("rpm_corpus.tsv");
  REQUIRE(rows.size() >= 200);
  size_t mismatches = 0;
  for (const auto& row : rows) {
    int got = sign(compare_rpm(RpmVersion::parse(row.a), RpmVersion::parse(row.b)));
    if (got != row.expected) {
      ++mismatches;
      CAPTURE(row.a);
      CAPTURE(row.b);
      CHECK(got == row.expected);
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("python version ordering matches the packaging oracle") {
  auto rows = load_corpus("py_order_oracle.tsv");
  for (const auto& row : rows) {
    int got = sign(compare_py(PyVersion::parse(row.a), PyVersion::parse(row.b)));
    CAPTURE(row.a);
    CAPTURE(row.b);
    CHECK(got == row.expected);
  }
}

TEST_CASE("python version basics") {
  CHECK(sign(compare_py(PyVersion::parse("1.3"), PyVersion::parse("1.3.0"))) == 0);
  CHECK(sign(compare_py(PyVersion::parse("2.0a1"), PyVersion::parse("2.0"))) == -1);
  CHECK(sign(compare_py(PyVersion::parse("2.0.dev3"), PyVersion::parse("2.0a1"))) == -1);
  CHECK(sign(compare_py(PyVersion::parse("2.0"), PyVersion::parse("2.0.post1"))) == -1);
  CHECK(PyVersion::parse("1.2.3+local.tag").local == "local.tag");
  CHECK_THROWS_AS(PyVersion::parse("not-a-version"), ParseError);
  CHECK_THROWS_AS(PyVersion::parse(""), ParseError);
}

TEST_CASE("specifier satisfaction matches the packaging oracle") {
  std::ifstream in(std::string(PROVSCAN_FIXTURE_DIR) + "/py_specifier_oracle.tsv");
  REQUIRE(in.good());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto t1 = line.find('\t');
    auto t2 = line.find('\t', t1 + 1);
    std::string version = line.substr(0, t1);
    std::string spec_text = line.substr(t1 + 1, t2 - t1 - 1);
    bool expected = line.substr(t2 + 1) == "1";

    std::vector<Clause> clauses;
    size_t pos = 0;
    while (pos < spec_text.size()) {
      auto comma = spec_text.find(',', pos);
      std::string one = spec_text.substr(pos, comma == std::string::npos ? std::string::npos
                                                                         : comma - pos);
      pos = comma == std::string::npos ? spec_text.size() : comma + 1;
      size_t oplen = 0;
      while (oplen < one.size() && !isalnum(static_cast<unsigned char>(one[oplen]))) ++oplen;
      auto op = parse_comparator(one.substr(0, oplen));
      REQUIRE(op.has_value());
      clauses.push_back({*op, one.substr(oplen)});
    }
    CAPTURE(version);
    CAPTURE(spec_text);
    CHECK(satisfies(version, clauses) == expected);
    ++rows;
  }
  CHECK(rows >= 400);
}

TEST_CASE("satisfies named cases") {
  std::vector<Clause> ge{{Comparator::Ge, "0.11.0"}};
  CHECK(satisfies("0.11.9", ge));
  CHECK(satisfies("0.11.9", {}));  // empty predicate: any version
  std::vector<Clause> eq{{Comparator::Eq, "1.3.0"}};
  CHECK(satisfies("1.3", eq));  // zero padding
}

TEST_CASE("orderings are total and consistent under random versions") {
  std::mt19937 rng(42);
  auto random_deb = [&]() {
    static const char* atoms[] = {"1", "2", "10", "0", "a", "b", "~", ".", "+", "l", "u", "-"};
    std::string s = std::to_string(rng() % 10);
    int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) s += atoms[rng() % 12];
    return s;
  };
  for (int trial = 0; trial < 2000; ++trial) {
    DebVersion a, b, c;
    try {
      a = DebVersion::parse(random_deb());
      b = DebVersion::parse(random_deb());
      c = DebVersion::parse(random_deb());
    } catch (const ParseError&) {
      continue;
    }
    int ab = sign(compare_deb(a, b));
    int ba = sign(compare_deb(b, a));
    CHECK(ab == -ba);  // antisymmetry
    CHECK(sign(compare_deb(a, a)) == 0);
    // transitivity: a<=b and b<=c imply a<=c
    int bc = sign(compare_deb(b, c));
    int ac = sign(compare_deb(a, c));
    if (ab <= 0 && bc <= 0) CHECK(ac <= 0);
  }
}

TEST_CASE("deb fragment: tilde sorts before empty for any prefix") {
  std::mt19937 rng(7);
  static const char* atoms[] = {"1", "9", "a", "z", ".", "+", "u", "deb"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string p;
    int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) p += atoms[rng() % 8];
    CHECK(compare_deb_fragment(p + "~x", p) < 0);
  }
}

TEST_CASE("parse-serialize-reparse round trip compares equal") {
  for (const char* text : {"1:1.1.0l-1~deb9u4", "2.9.1", "1.0~rc1-2", "4.10-1.1+deb9u1"}) {
    auto v = DebVersion::parse(text);
    auto w = DebVersion::parse(v.str());
    CHECK(sign(compare_deb(v, w)) == 0);
  }
  for (const char* text : {"2.9.1-6.el7_9.6", "1:1.0-1", "5.9-14.20130511.el7_4"}) {
    auto v = RpmVersion::parse(text);
    auto w = RpmVersion::parse(v.str());
    CHECK(sign(compare_rpm(v, w)) == 0);
  }
  for (const char* text : {"1.3", "2.0a1", "1!1.0.post2", "2.0.dev3"}) {
    auto v = PyVersion::parse(text);
    auto w = PyVersion::parse(v.str());
    CHECK(sign(compare_py(v, w)) == 0);
  }
}
