#include <doctest.h>

#include <chrono>

#include "builders.hpp"
#include "provscan/upstream.hpp"

using namespace provscan;
using namespace provscan::upstream;
using testutil::Bytes;
using testutil::to_bytes;

namespace {

// NUL-separated string table, the way .rodata carries string literals
Bytes rodata_strings(std::initializer_list<std::string_view> strings) {
  Bytes out;
  for (std::string_view s : strings) {
    out.insert(out.end(), s.begin(), s.end());
    out.push_back(0);
  }
  return out;
}

}  // namespace

TEST_CASE("curated metadata table resolves upstream projects") {
  auto table = UpstreamMetaTable::builtin();
  CHECK(table.size() >= 10);
  CHECK(resolve_upstream_project("libcrypto.so", table) == "openssl");
  CHECK(resolve_upstream_project("libxml2.so", table) == "libxml2");
  CHECK_FALSE(resolve_upstream_project("libnothing.so", table).has_value());

  auto records = table.lookup("libcrypto.so");
  REQUIRE(records.size() >= 2);
  bool redhat = false;
  for (const auto& r : records)
    if (r.os_family == "redhat" && r.os_package == "openssl-libs") redhat = true;
  CHECK(redhat);
}

TEST_CASE("shipped data files stay in sync with the builtin tables") {
  std::string data_dir = std::string(PROVSCAN_FIXTURE_DIR) + "/../../data";
  auto table = UpstreamMetaTable::load(data_dir + "/upstream_meta.tsv");
  CHECK(table.size() == UpstreamMetaTable::builtin().size());
  CHECK(table.project_of("libcrypto.so") == "openssl");

  auto registry = ExtractorRegistry::load(data_dir + "/extractor_registry.tsv");
  CHECK(registry.serialize() == ExtractorRegistry::builtin().serialize());
}

TEST_CASE("meta table and registry round-trip their file formats") {
  auto table = UpstreamMetaTable::parse(
      "# comment\n"
      "libfoo.so\tdebian\tlibfoo1\tfoo\thttps://foo.example\n"
      "libbar.so\tredhat\tbar-libs\tbar\n");
  CHECK(table.size() == 2);
  CHECK(table.project_of("libbar.so") == "bar");

  auto registry = ExtractorRegistry::builtin();
  CHECK(registry.size() >= 10);
  auto reparsed = ExtractorRegistry::parse(registry.serialize());
  CHECK(reparsed.size() == registry.size());
  auto ft = reparsed.find("libfreetype.so");
  REQUIRE(ft.has_value());
  CHECK(ft->strategy == Strategy::SymbolProbe);
  CHECK(ft->symbol == "FT_Library_Version");
  CHECK(ft->decode == "int3");
}

TEST_CASE("string pattern extraction over printable runs") {
  auto registry = ExtractorRegistry::builtin();
  ProbeAdapter probe;  // disabled
  ExtractionDiagnostics diag;

  SUBCASE("openssl marker string") {
    Bytes obj = testutil::build_elf({.soname = "libcrypto.so.3",
                                     .needed = {},
                                     .exported = {"OpenSSL_version"},
                                     .undefined = {},
                                     .rodata = rodata_strings({"junk", "OpenSSL 3.3.0 9 Apr 2024", "x"})});
    auto v = extract_upstream_version(obj, *registry.find("libcrypto.so"), probe, diag);
    CHECK(v == "3.3.0");
  }

  SUBCASE("letter-suffixed openssl version") {
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = to_bytes("OpenSSL 1.1.1g  21 Apr 2020")});
    auto v = extract_upstream_version(obj, *registry.find("libcrypto.so"), probe, diag);
    CHECK(v == "1.1.1g");
  }

  SUBCASE("pcre2 date-stamped version") {
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"PCRE2 version 10.39 2021-10-29", "other"})});
    auto v = extract_upstream_version(obj, *registry.find("libpcre2-8.so"), probe, diag);
    CHECK(v == "10.39");
  }

  SUBCASE("encoded numeric versions decode through digit groups") {
    // xmlParserVersion embeds MNNPP digits, zero-padded per component
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"junk", "20913", "more"})});
    auto v = extract_upstream_version(obj, *registry.find("libxml2.so"), probe, diag);
    CHECK(v == "2.9.13");

    Bytes old = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"20901"})});
    auto v2 = extract_upstream_version(old, *registry.find("libxml2.so"), probe, diag);
    CHECK(v2 == "2.9.1");
  }

  SUBCASE("anchored bare-run patterns ignore embedded substrings") {
    // GLIBC version tags must not satisfy the zlib pattern
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"GLIBC_2.2.5", "1.2.11", "trailing"})});
    auto v = extract_upstream_version(obj, *registry.find("libz.so"), probe, diag);
    CHECK(v == "1.2.11");
  }

  SUBCASE("no match fails extraction") {
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = to_bytes("nothing to see")});
    auto v = extract_upstream_version(obj, *registry.find("libcrypto.so"), probe, diag);
    CHECK_FALSE(v.has_value());
    CHECK(diag.error.find("no match") != std::string::npos);
  }

  SUBCASE("repeated identical matches are fine") {
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"OpenSSL 3.0.13", "OpenSSL 3.0.13 build"})});
    auto v = extract_upstream_version(obj, *registry.find("libcrypto.so"), probe, diag);
    CHECK(v == "3.0.13");
  }

  SUBCASE("conflicting versions never guess") {
    Bytes obj = testutil::build_elf(
        {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
         .rodata = rodata_strings({"OpenSSL 3.0.13", "OpenSSL 1.1.1w"})});
    ExtractionDiagnostics d2;
    auto v = extract_upstream_version(obj, *registry.find("libcrypto.so"), probe, d2);
    CHECK_FALSE(v.has_value());
    CHECK(d2.candidates.size() == 2);
  }
}

TEST_CASE("extraction is deterministic") {
  auto registry = ExtractorRegistry::builtin();
  ProbeAdapter probe;
  Bytes obj = testutil::build_elf(
      {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
       .rodata = to_bytes("HDF5 library version: 1.10.4 junk")});
  for (int i = 0; i < 5; ++i) {
    ExtractionDiagnostics diag;
    auto v = extract_upstream_version(obj, *registry.find("libhdf5.so"), probe, diag);
    CHECK(v == "1.10.4");
  }
}

TEST_CASE("probe strategy is inert unless enabled") {
  ExtractorSpec spec;
  spec.libname = "libfreetype.so";
  spec.strategy = Strategy::SymbolProbe;
  spec.symbol = "FT_Library_Version";
  spec.decode = "int3";

  ExtractionDiagnostics diag;
  ProbeAdapter disabled;
  auto v = extract_upstream_version(to_bytes("irrelevant"), spec, disabled, diag);
  CHECK_FALSE(v.has_value());
  CHECK(diag.error == "ProbeDisabled");

  // the adapter is an external process contract: version on one line
  ProbeAdapter fake;
  fake.enabled = true;
  fake.command = "echo 2.13.2 #";
  ExtractionDiagnostics diag2;
  auto v2 = extract_upstream_version(to_bytes("object bytes"), spec, fake, diag2);
  CHECK(v2 == "2.13.2");

  ProbeAdapter failing;
  failing.enabled = true;
  failing.command = "false";
  ExtractionDiagnostics diag3;
  auto v3 = extract_upstream_version(to_bytes("object bytes"), spec, failing, diag3);
  CHECK_FALSE(v3.has_value());
  CHECK(diag3.error.find("probe exited") != std::string::npos);

  // a hung probe is cut off by the wall-clock timeout
  ProbeAdapter hung;
  hung.enabled = true;
  hung.command = "sh -c 'sleep 30'";
  hung.timeout_sec = 1;
  ExtractionDiagnostics diag4;
  auto t0 = std::chrono::steady_clock::now();
  auto v4 = extract_upstream_version(to_bytes("object bytes"), spec, hung, diag4);
  auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK_FALSE(v4.has_value());
  CHECK(elapsed < 10.0);
}

TEST_CASE("host inventory lookup") {
  auto inv = HostInventory::parse(
      "/lib64/libcairo.so.2\tdebian/debian\tcairo\t1.18.4-1\n"
      "/lib64/libcap.so.2\tdebian/debian\tlibcap2\t1:2.66-4\n");
  auto hit = inv.lookup("/lib64/libcairo.so.2");
  REQUIRE(hit.has_value());
  CHECK((*hit)[1] == "cairo");
  CHECK_FALSE(inv.lookup("/lib64/other.so").has_value());
}

// ---------------------------------------------------------------------------
// annotate_provenance
// ---------------------------------------------------------------------------

namespace {

elfscan::BinaryDepTree make_tree() {
  elfscan::BinaryDepTree tree;
  tree.owner = {"igraph", "0.11.9"};

  elfscan::BinaryNode ext;
  ext.path = "igraph/_igraph.abi3.so";
  ext.kind = elfscan::BinaryKind::NativeExtension;
  ext.dynsyms = {"PyInit__igraph"};
  ext.content = std::make_shared<const std::vector<uint8_t>>(to_bytes("ext"));
  tree.nodes.push_back(ext);

  elfscan::BinaryNode xml;
  xml.path = "igraph.libs/libxml2-3998bec4.so.2.9.1";
  xml.kind = elfscan::BinaryKind::Vendored;
  xml.content = std::make_shared<const std::vector<uint8_t>>(to_bytes("patched libxml2"));
  tree.nodes.push_back(xml);

  elfscan::BinaryNode sys;
  sys.path = "/lib64/libcairo.so.2";
  sys.kind = elfscan::BinaryKind::System;
  tree.nodes.push_back(sys);

  tree.edges = {{0, 1}, {0, 2}};
  return tree;
}

}  // namespace

TEST_CASE("annotate_provenance tags every node exactly once") {
  auto db = provdb::HashDb::from_entries(
      {{"redhat", "libxml2", "2.9.1-6.el7_9.6", "libxml2.so", "3998bec4"}});
  auto meta = UpstreamMetaTable::builtin();
  auto registry = ExtractorRegistry::builtin();
  HostInventory inv;
  inv.add("/lib64/libcairo.so.2", "debian/debian", "cairo", "1.18.4-1");

  auto annotated = annotate_provenance(make_tree(), {"igraph", "0.11.9"}, db, meta, registry, inv);
  REQUIRE(annotated.nodes.size() == 3);

  CHECK(annotated.nodes[0].tag.kind == ProvenanceTag::Kind::OwningPythonPackage);
  CHECK(annotated.nodes[0].tag.owner.name == "igraph");
  CHECK(annotated.nodes[0].tag.owner.version == "0.11.9");

  // auditwheel name: the embedded hash drives the db hit even though the
  // content differs (contents were mutated after vendoring)
  CHECK(annotated.nodes[1].tag.kind == ProvenanceTag::Kind::OsPackage);
  CHECK(annotated.nodes[1].tag.os == "redhat");
  CHECK(annotated.nodes[1].tag.package == "libxml2");
  CHECK(annotated.nodes[1].tag.version == "2.9.1-6.el7_9.6");
  CHECK(annotated.nodes[1].project_hint == "libxml2");

  CHECK(annotated.nodes[2].tag.kind == ProvenanceTag::Kind::HostSystem);
  CHECK(annotated.nodes[2].tag.package == "cairo");
  CHECK(annotated.nodes[2].tag.version == "1.18.4-1");
}

TEST_CASE("hash match strictly precedes upstream fallback") {
  // content carries an extractable OpenSSL string AND the db knows the hash;
  // the db must win and the extractor must not run
  Bytes content = testutil::build_elf(
      {.soname = {}, .needed = {}, .exported = {}, .undefined = {},
       .rodata = to_bytes("OpenSSL 9.9.9")});
  elfscan::BinaryDepTree tree;
  tree.owner = {"p", "1"};
  elfscan::BinaryNode node;
  node.path = "p.libs/libcrypto.so.3";
  node.kind = elfscan::BinaryKind::Vendored;
  node.content = std::make_shared<const std::vector<uint8_t>>(content);
  tree.nodes.push_back(node);

  auto hash = provdb::content_hash8(content);
  auto db = provdb::HashDb::from_entries(
      {{"debian/debian", "libssl1.1", "1.1.0l-1~deb9u4", "libcrypto.so", hash}});
  auto annotated = annotate_provenance(tree, {"p", "1"}, db, UpstreamMetaTable::builtin(),
                                       ExtractorRegistry::builtin(), HostInventory{});
  REQUIRE(annotated.nodes.size() == 1);
  CHECK(annotated.nodes[0].tag.kind == ProvenanceTag::Kind::OsPackage);
  CHECK(annotated.nodes[0].tag.version == "1.1.0l-1~deb9u4");

  // with an empty db the same node falls through to the extractor
  auto fallback = annotate_provenance(tree, {"p", "1"}, provdb::HashDb{},
                                      UpstreamMetaTable::builtin(),
                                      ExtractorRegistry::builtin(), HostInventory{});
  CHECK(fallback.nodes[0].tag.kind == ProvenanceTag::Kind::Upstream);
  CHECK(fallback.nodes[0].tag.project == "openssl");
  CHECK(fallback.nodes[0].tag.upstream_version == "9.9.9");
}

TEST_CASE("fallback failure reasons are machine readable") {
  elfscan::BinaryDepTree tree;
  tree.owner = {"p", "1"};

  elfscan::BinaryNode unknown_lib;
  unknown_lib.path = "p.libs/libobscure.so.7";
  unknown_lib.kind = elfscan::BinaryKind::Vendored;
  unknown_lib.content = std::make_shared<const std::vector<uint8_t>>(to_bytes("x"));
  tree.nodes.push_back(unknown_lib);

  elfscan::BinaryNode no_extractor;
  no_extractor.path = "p.libs/libavcodec.so.60";  // in meta, registry string may miss
  no_extractor.kind = elfscan::BinaryKind::Vendored;
  no_extractor.content = std::make_shared<const std::vector<uint8_t>>(to_bytes("no strings"));
  tree.nodes.push_back(no_extractor);

  elfscan::BinaryNode sys;
  sys.path = "/lib64/libuninventoried.so.1";
  sys.kind = elfscan::BinaryKind::System;
  tree.nodes.push_back(sys);

  auto annotated = annotate_provenance(tree, {"p", "1"}, provdb::HashDb{},
                                       UpstreamMetaTable::builtin(),
                                       ExtractorRegistry::builtin(), HostInventory{});
  CHECK(annotated.nodes[0].tag.kind == ProvenanceTag::Kind::Unknown);
  CHECK(annotated.nodes[0].tag.reason == "NoMetadata");
  CHECK(annotated.nodes[1].tag.kind == ProvenanceTag::Kind::Unknown);
  CHECK(annotated.nodes[1].tag.reason == "ExtractionFailed");
  CHECK(annotated.nodes[2].tag.kind == ProvenanceTag::Kind::Unknown);
  CHECK(annotated.nodes[2].tag.reason == "NoInventory");

  // totality: node count preserved, every node tagged
  CHECK(annotated.nodes.size() == tree.nodes.size());
}

TEST_CASE("a known library without an extractor is Unknown(NoExtractor)") {
  UpstreamMetaTable meta;
  meta.add({"libobscure.so", "debian", "libobscure1", "obscure", ""});
  ExtractorRegistry registry;  // deliberately empty

  elfscan::BinaryDepTree tree;
  tree.owner = {"p", "1"};
  elfscan::BinaryNode node;
  node.path = "p.libs/libobscure.so.7";
  node.kind = elfscan::BinaryKind::Vendored;
  node.content = std::make_shared<const std::vector<uint8_t>>(to_bytes("bytes"));
  tree.nodes.push_back(node);

  auto annotated =
      annotate_provenance(tree, {"p", "1"}, provdb::HashDb{}, meta, registry, HostInventory{});
  CHECK(annotated.nodes[0].tag.kind == ProvenanceTag::Kind::Unknown);
  CHECK(annotated.nodes[0].tag.reason == "NoExtractor");
}

TEST_CASE("ambiguous hash hits surface the full candidate set") {
  Bytes content = to_bytes("identical bytes across distros");
  auto hash = provdb::content_hash8(content);
  auto db = provdb::HashDb::from_entries({
      {"debian/debian", "zlib1g", "1:1.2.11-1", "libz.so", hash},
      {"redhat/centos", "zlib", "1.2.11-1.el8", "libz.so", hash},
  });
  elfscan::BinaryDepTree tree;
  tree.owner = {"p", "1"};
  elfscan::BinaryNode node;
  node.path = "p.libs/libz.so.1";
  node.kind = elfscan::BinaryKind::Vendored;
  node.content = std::make_shared<const std::vector<uint8_t>>(content);
  tree.nodes.push_back(node);

  auto annotated = annotate_provenance(tree, {"p", "1"}, db, UpstreamMetaTable::builtin(),
                                       ExtractorRegistry::builtin(), HostInventory{});
  const auto& tag = annotated.nodes[0].tag;
  CHECK(tag.kind == ProvenanceTag::Kind::OsPackage);
  CHECK(tag.other_candidates.size() == 1);
  bool flagged = false;
  for (const auto& d : annotated.diagnostics)
    if (d.find("ambiguous") != std::string::npos) flagged = true;
  CHECK(flagged);
}
