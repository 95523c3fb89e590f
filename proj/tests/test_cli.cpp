#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "builders.hpp"
#include "scenario.hpp"
#include "provscan/pipeline.hpp"

using namespace provscan;
using nlohmann::json;

namespace {

std::string provscan_bin() {
  if (const char* env = std::getenv("PROVSCAN_BIN")) return env;
  // fall back to the sibling tools directory inside the build tree
  std::error_code ec;
  auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    auto candidate = self.parent_path().parent_path() / "tools" / "provscan";
    if (std::filesystem::exists(candidate)) return candidate.string();
  }
  REQUIRE_MESSAGE(false, "PROVSCAN_BIN must point at the CLI binary");
  return "";
}

struct CommandResult {
  int exit_code;
  std::string out;
  std::string err;
};

CommandResult run(const std::string& args) {
  testutil::TempDir tmp;
  auto out_path = tmp.path() / "out";
  auto err_path = tmp.path() / "err";
  std::string cmd =
      provscan_bin() + " " + args + " > " + out_path.string() + " 2> " + err_path.string();
  int status = std::system(cmd.c_str());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  return {WEXITSTATUS(status), slurp(out_path), slurp(err_path)};
}

}  // namespace

TEST_CASE("db ingest, query and check-collisions") {
  testutil::TempDir tmp;
  testutil::Bytes deb = testutil::build_deb({
      {"./usr/lib/x86_64-linux-gnu/libz.so.1.2.11", testutil::to_bytes("zlib bytes"), '0'},
  });
  auto deb_path = tmp.write("zlib1g.deb", deb);
  auto db_path = (tmp.path() / "db.tsv").string();

  auto ingest = run("db ingest --os debian/debian --package zlib1g --version 1:1.2.11-1 --out " +
                    db_path + " " + deb_path.string());
  CHECK(ingest.exit_code == 0);

  std::string hash = provdb::content_hash8(testutil::to_bytes("zlib bytes"));
  auto query = run("db query --db " + db_path + " libz.so " + hash);
  CHECK(query.exit_code == 0);
  CHECK(query.out.find("zlib1g") != std::string::npos);
  CHECK(query.out.find("1:1.2.11-1") != std::string::npos);

  auto miss = run("db query --db " + db_path + " libz.so 00000000");
  CHECK(miss.exit_code == 1);
  CHECK(miss.out.empty());

  auto clean = run("db check-collisions --db " + db_path);
  CHECK(clean.exit_code == 0);
  CHECK(clean.out.empty());
}

TEST_CASE("db ingest is idempotent through merge") {
  testutil::TempDir tmp;
  testutil::Bytes deb = testutil::build_deb({
      {"./usr/lib/liba.so.1", testutil::to_bytes("aaa"), '0'},
      {"./usr/lib/libb.so.2", testutil::to_bytes("bbb"), '0'},
  });
  auto deb_path = tmp.write("ab.deb", deb);
  auto db1 = (tmp.path() / "db1.tsv").string();
  auto db2 = (tmp.path() / "db2.tsv").string();
  auto merged = (tmp.path() / "merged.tsv").string();

  std::string flags = "db ingest --os debian/debian --package ab --version 1.0-1 --out ";
  CHECK(run(flags + db1 + " " + deb_path.string()).exit_code == 0);
  CHECK(run(flags + db2 + " " + deb_path.string()).exit_code == 0);
  CHECK(run("db merge --out " + merged + " " + db1 + " " + db2).exit_code == 0);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(merged) == slurp(db1));  // byte-identical database files
}

TEST_CASE("db query prints the provenance fixture row exactly") {
  testutil::TempDir tmp;
  auto db_path =
      tmp.write("db.tsv", std::string("redhat\tlibxml2\t2.9.1-6.el7_9.6\tlibxml2.so\t3998bec4\n"));
  auto result = run("db query --db " + db_path.string() + " libxml2.so 3998bec4");
  CHECK(result.exit_code == 0);
  CHECK(result.out == "redhat\tlibxml2\t2.9.1-6.el7_9.6\tlibxml2.so\t3998bec4\n");
}

TEST_CASE("scan finds the vendored vulnerability end to end") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  const auto& c = bundle.config;
  std::string args = "scan " + c.wheel.string() + " --repo " + c.repo_dir.string() +
                     " --hash-db " + c.hashdb.string() + " --vuln-db " +
                     c.vulndb_dir.string() + " --call-graphs " + c.callgraph_dir.string() +
                     " --bridges " + c.bridge_map.string() + " --host-inventory " +
                     c.host_inventory.string() + " --system-path " + c.system_paths[0];

  auto text = run(args);
  CHECK(text.exit_code == 1);  // findings present
  CHECK(text.out.find("CVE-2025-6021") != std::string::npos);
  CHECK(text.out.find("scPPIN.load_network") != std::string::npos);
  CHECK(text.out.find("xmlBuildQName") != std::string::npos);

  auto as_json = run(args + " --json");
  CHECK(as_json.exit_code == 1);
  json doc = json::parse(as_json.out);
  REQUIRE(doc["findings"].size() == 1);
  CHECK(doc["findings"][0]["cve"] == "CVE-2025-6021");
  // the cairo CVE is vulnerable but unreachable
  for (const auto& counts : doc["counts"]) {
    if (counts["cve"] == "CVE-2025-50422") {
      CHECK(counts["vuln_provenance"] == 1);
      CHECK(counts["reachable"] == 0);
    }
  }
  // exit codes depend on findings, not on the output format
  CHECK(text.exit_code == as_json.exit_code);
}

TEST_CASE("scan of a pure-python wheel reports nothing and exits zero") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  const auto& c = bundle.config;
  std::string wheel = (bundle.dir.path() / "repo/pandas-2.1.0-py3-none-any.whl").string();
  auto result = run("scan " + wheel + " --repo " + c.repo_dir.string() + " --hash-db " +
                    c.hashdb.string() + " --vuln-db " + c.vulndb_dir.string() +
                    " --call-graphs " + c.callgraph_dir.string() + " --bridges " +
                    c.bridge_map.string());
  CHECK(result.exit_code == 0);
}

TEST_CASE("scan fails before any work when an input is missing") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  const auto& c = bundle.config;
  auto result = run("scan " + c.wheel.string() + " --repo " + c.repo_dir.string() +
                    " --hash-db " + c.hashdb.string() + " --vuln-db /nonexistent/vulndb" +
                    " --call-graphs " + c.callgraph_dir.string() + " --bridges " +
                    c.bridge_map.string());
  CHECK(result.exit_code == 2);
  CHECK(result.err.find("missing") != std::string::npos);
}

TEST_CASE("json report round-trips byte-identically through the report command") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  const auto& c = bundle.config;
  auto report_path = (bundle.dir.path() / "report.json").string();
  std::string args = "scan " + c.wheel.string() + " --repo " + c.repo_dir.string() +
                     " --hash-db " + c.hashdb.string() + " --vuln-db " +
                     c.vulndb_dir.string() + " --call-graphs " + c.callgraph_dir.string() +
                     " --bridges " + c.bridge_map.string() + " --host-inventory " +
                     c.host_inventory.string() + " --system-path " + c.system_paths[0] +
                     " --json --out " + report_path;
  CHECK(run(args).exit_code == 1);

  auto rendered = run("report " + report_path + " --json");
  CHECK(rendered.exit_code == 0);
  std::ifstream in(report_path, std::ios::binary);
  std::stringstream saved;
  saved << in.rdbuf();
  CHECK(rendered.out == saved.str());

  auto text = run("report " + report_path);
  CHECK(text.exit_code == 0);
  CHECK(text.out.find("CVE-2025-6021") != std::string::npos);
}

TEST_CASE("provenance listing matches the annotated tree") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  std::string wheel =
      (bundle.dir.path() / "repo/igraph-0.11.9-cp39-abi3-manylinux2014_x86_64.whl").string();
  auto result = run("provenance " + wheel + " --hash-db " + bundle.config.hashdb.string() +
                    " --host-inventory " + bundle.config.host_inventory.string() +
                    " --system-path " + bundle.config.system_paths[0] + " --stats");
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("igraph/_igraph.abi3.so\tnative-extension\tpython:igraph/0.11.9") !=
        std::string::npos);
  CHECK(result.out.find("igraph.libs/libxml2-3998bec4.so.2.9.1\tvendored\tos:redhat:"
                        "libxml2/2.9.1-6.el7_9.6") != std::string::npos);
  CHECK(result.out.find("\tsystem\thost:debian/debian:zlib1g/1:1.2.13.dfsg-1") !=
        std::string::npos);
  CHECK(result.out.find("vendored: 1") != std::string::npos);
  CHECK(result.out.find("hash-matched: 1.000") != std::string::npos);

  // a wheel with an unknown vendored library reports the reason code
  testutil::WheelSpec mystery;
  mystery.name = "mystery";
  mystery.version = "1.0";
  mystery.files["mystery.libs/libwhoknows.so.5"] =
      testutil::build_elf({.soname = "libwhoknows.so.5",
                           .needed = {},
                           .exported = {"who_knows"},
                           .undefined = {},
                           .rodata = {}});
  testutil::TempDir tmp;
  auto mystery_path = tmp.write("mystery-1.0-py3-none-any.whl", testutil::build_wheel(mystery));
  auto unknown = run("provenance " + mystery_path.string() + " --hash-db " +
                     bundle.config.hashdb.string());
  CHECK(unknown.exit_code == 0);
  CHECK(unknown.out.find("unknown(NoMetadata)") != std::string::npos);
}

TEST_CASE("scan reads a flat key=value config file, flags override") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  const auto& c = bundle.config;
  std::string conf = "wheel=" + c.wheel.string() + "\nrepo=" + c.repo_dir.string() +
                     "\nhash-db=" + c.hashdb.string() + "\nvuln-db=" + c.vulndb_dir.string() +
                     "\ncall-graphs=" + c.callgraph_dir.string() +
                     "\nbridges=" + c.bridge_map.string() +
                     "\nhost-inventory=" + c.host_inventory.string() +
                     "\nsystem-path=" + c.system_paths[0] + "\nchains=2\n";
  auto conf_path = bundle.dir.write("scan.conf", conf);

  auto result = run("scan --config " + conf_path.string() + " --json");
  CHECK(result.exit_code == 1);
  json doc = json::parse(result.out);
  REQUIRE(doc["findings"].size() == 1);

  // a flag overrides the file: pointing --vuln-db at an empty dir clears findings
  testutil::TempDir empty;
  std::filesystem::create_directories(empty.path() / "vulndb");
  auto overridden = run("scan --config " + conf_path.string() + " --vuln-db " +
                        (empty.path() / "vulndb").string() + " --json");
  CHECK(overridden.exit_code == 0);
  CHECK(json::parse(overridden.out)["findings"].empty());

  // unknown keys are rejected
  auto bad_path = bundle.dir.write("bad.conf", std::string("no-such-key=1\n"));
  CHECK(run("scan --config " + bad_path.string()).exit_code == 2);
}

TEST_CASE("run_scan API surface mirrors the CLI") {
  testutil::ScenarioBundle bundle;
  testutil::build_scenario(bundle);
  auto result = pipeline::run_scan(bundle.config);

  // python tree: scppin -> {igraph, pandas}, igraph -> pycairo
  CHECK(result.dep_tree.nodes.size() == 4);
  CHECK(result.dep_tree.find("igraph")->version == "0.11.9");

  REQUIRE(result.report.findings.size() == 1);
  const auto& finding = result.report.findings[0];
  CHECK(finding.cve == "CVE-2025-6021");
  CHECK(finding.binary == "igraph.libs/libxml2-3998bec4.so.2.9.1");
  CHECK(finding.tag.version == "2.9.1-6.el7_9.6");
  REQUIRE_FALSE(finding.chains.empty());
  bool chain_hits_both = false;
  for (const auto& chain : finding.chains) {
    bool has_load_network = false, has_symbol = false;
    for (const auto& fn : chain) {
      if (fn.name == "scPPIN.load_network") has_load_network = true;
      if (fn.name == "xmlBuildQName") has_symbol = true;
    }
    chain_hits_both |= has_load_network && has_symbol;
  }
  CHECK(chain_hits_both);
}
