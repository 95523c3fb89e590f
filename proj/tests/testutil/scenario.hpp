#pragma once

// Full end-to-end fixture bundle: the scppin -> igraph -> vendored libxml2
// scenario, with pycairo linking the system cairo. Produces a directory
// holding wheels, a hash database, vulnerability records, call graphs,
// bridge maps and a fake system root.

#include <string>

#include <nlohmann/json.hpp>

#include "builders.hpp"
#include "provscan/pipeline.hpp"

namespace testutil {

struct ScenarioBundle {
  TempDir dir;
  provscan::pipeline::ScanConfig config;
  std::string sys_cairo_path;
  std::string sys_zlib_path;
};

inline void build_scenario(ScenarioBundle& b) {
  using nlohmann::json;
  const auto& root = b.dir.path();

  // --- wheels -------------------------------------------------------------
  Bytes scppin = build_wheel({"scppin",
                              "0.3.1",
                              {"igraph>=0.11.0", "pandas>=1.3.0"},
                              {{"scPPIN/__init__.py", to_bytes("import igraph\n")}}});
  b.dir.write("repo/scppin-0.3.1-py3-none-any.whl", scppin);

  WheelSpec igraph_spec;
  igraph_spec.name = "igraph";
  igraph_spec.version = "0.11.9";
  igraph_spec.requires_dist = {"pycairo"};
  igraph_spec.files["igraph/_igraph.abi3.so"] =
      build_elf({.soname = std::nullopt,
                 .needed = {"libxml2-3998bec4.so.2.9.1", "libz.so.1"},
                 .exported = {"PyInit__igraph", "igraphmodule_Graph_Read_Ncol"},
                 .undefined = {"xmlBuildQName"},
                 .rodata = {}});
  igraph_spec.files["igraph.libs/libxml2-3998bec4.so.2.9.1"] =
      build_elf({.soname = "libxml2.so.2",
                 .needed = {"libz.so.1"},
                 .exported = {"xmlBuildQName", "xmlFreeDoc"},
                 .undefined = {},
                 .rodata = {}});
  b.dir.write("repo/igraph-0.11.9-cp39-abi3-manylinux2014_x86_64.whl",
              build_wheel(igraph_spec));

  WheelSpec pycairo_spec;
  pycairo_spec.name = "pycairo";
  pycairo_spec.version = "1.26.0";
  pycairo_spec.files["cairo/_cairo.abi3.so"] =
      build_elf({.soname = std::nullopt,
                 .needed = {"libcairo.so.2"},
                 .exported = {"PyInit__cairo", "context_new"},
                 .undefined = {"cairo_show_text"},
                 .rodata = {}});
  b.dir.write("repo/pycairo-1.26.0-cp39-abi3-manylinux2014_x86_64.whl",
              build_wheel(pycairo_spec));

  b.dir.write("repo/pandas-2.1.0-py3-none-any.whl",
              build_wheel({"pandas", "2.1.0", {}, {}}));

  // --- fake system root ----------------------------------------------------
  auto cairo_path = b.dir.write(
      "sysroot/lib64/libcairo.so.2",
      build_elf({.soname = "libcairo.so.2",
                 .needed = {},
                 .exported = {"cairo_show_text", "cairo_fill"},
                 .undefined = {},
                 .rodata = {}}));
  auto zlib_path = b.dir.write("sysroot/lib64/libz.so.1",
                               build_elf({.soname = "libz.so.1",
                                          .needed = {},
                                          .exported = {"inflate", "deflate"},
                                          .undefined = {},
                                          .rodata = {}}));
  b.sys_cairo_path = cairo_path.string();
  b.sys_zlib_path = zlib_path.string();

  // --- hash database ---------------------------------------------------
  b.dir.write("hashdb.tsv",
              std::string("redhat\tlibxml2\t2.9.1-6.el7_9.6\tlibxml2.so\t3998bec4\n"));

  // --- host inventory -------------------------------------------------------
  b.dir.write("inventory.tsv", b.sys_cairo_path + "\tdebian/debian\tcairo\t1.18.4-1\n" +
                                   b.sys_zlib_path +
                                   "\tdebian/debian\tzlib1g\t1:1.2.13.dfsg-1\n");

  // --- vulnerability records -------------------------------------------------
  json xml_cve = {
      {"cve", "CVE-2025-6021"},
      {"project", "libxml2"},
      {"symbols", {"xmlBuildQName"}},
      {"upstream_ranges", {"<2.14.4"}},
      {"os_fixes", json::array({{{"os", "debian"},
                                 {"package", "libxml2"},
                                 {"fixed", "2.9.4+dfsg1-7+deb10u6"}}})}};
  b.dir.write("vulndb/CVE-2025-6021.json", xml_cve.dump(2));
  json cairo_cve = {{"cve", "CVE-2025-50422"},
                    {"project", "cairo"},
                    {"symbols", {"cairo_show_text"}},
                    {"upstream_ranges", {"<=1.18.4"}}};
  b.dir.write("vulndb/CVE-2025-50422.json", cairo_cve.dump(2));

  // --- call graphs ------------------------------------------------------------
  auto write_graph = [&](const std::string& file, json doc) {
    b.dir.write("callgraphs/" + file, doc.dump(2));
  };
  write_graph("scppin.json",
              {{"unit", "scppin"},
               {"kind", "python"},
               {"nodes", {"scPPIN.load_network", "scPPIN.detect_modules",
                          "igraph.Graph.Read_Ncol"}},
               {"edges", json::array({json::array(
                             {"scPPIN.load_network", "igraph.Graph.Read_Ncol"})})},
               {"exports", {"scPPIN.load_network", "scPPIN.detect_modules"}}});
  write_graph("igraph.json",
              {{"unit", "igraph"},
               {"kind", "python"},
               {"nodes", {"igraph.Graph.Read_Ncol", "igraph.plot", "cairo.Context"}},
               {"edges", json::array({json::array({"igraph.plot", "cairo.Context"})})},
               {"exports", {"igraph.Graph.Read_Ncol", "igraph.plot"}}});
  write_graph("pycairo.json", {{"unit", "pycairo"},
                               {"kind", "python"},
                               {"nodes", {"cairo.Context"}},
                               {"edges", json::array()},
                               {"exports", {"cairo.Context"}}});
  write_graph("pandas.json", {{"unit", "pandas"},
                              {"kind", "python"},
                              {"nodes", {"pandas.read_csv"}},
                              {"edges", json::array()},
                              {"exports", {"pandas.read_csv"}}});
  write_graph("igraph_ext.json",
              {{"unit", "igraph/_igraph.abi3.so"},
               {"kind", "binary"},
               {"nodes", {"igraphmodule_Graph_Read_Ncol", "xmlBuildQName"}},
               {"edges", json::array({json::array(
                             {"igraphmodule_Graph_Read_Ncol", "xmlBuildQName"})})},
               {"exports", {"igraphmodule_Graph_Read_Ncol"}}});
  write_graph("libxml2.json",
              {{"unit", "igraph.libs/libxml2-3998bec4.so.2.9.1"},
               {"kind", "binary"},
               {"nodes", {"xmlBuildQName", "xmlStrdup", "xmlFreeDoc"}},
               {"edges", json::array({json::array({"xmlBuildQName", "xmlStrdup"})})},
               {"exports", {"xmlBuildQName", "xmlFreeDoc"}}});
  write_graph("cairo_ext.json",
              {{"unit", "cairo/_cairo.abi3.so"},
               {"kind", "binary"},
               {"nodes", {"context_new", "cairo_show_text"}},
               {"edges", json::array({json::array({"context_new", "cairo_show_text"})})},
               {"exports", {"context_new"}}});
  write_graph("libcairo.json",
              {{"unit", b.sys_cairo_path},
               {"kind", "binary"},
               {"nodes", {"cairo_show_text", "cairo_fill"}},
               {"edges", json::array()},
               {"exports", {"cairo_show_text", "cairo_fill"}}});

  // --- bridges ----------------------------------------------------------------
  json bridges = {{"entries",
                   json::array({json::array({"igraph", "igraph.Graph.Read_Ncol",
                                             "igraph/_igraph.abi3.so",
                                             "igraphmodule_Graph_Read_Ncol"}),
                                json::array({"pycairo", "cairo.Context",
                                             "cairo/_cairo.abi3.so", "context_new"})})}};
  b.dir.write("bridges.json", bridges.dump(2));

  // --- config -------------------------------------------------------------------
  b.config.wheel = root / "repo/scppin-0.3.1-py3-none-any.whl";
  b.config.repo_dir = root / "repo";
  b.config.hashdb = root / "hashdb.tsv";
  b.config.vulndb_dir = root / "vulndb";
  b.config.callgraph_dir = root / "callgraphs";
  b.config.bridge_map = root / "bridges.json";
  b.config.host_inventory = root / "inventory.tsv";
  b.config.system_paths = {(root / "sysroot/lib64").string()};
}

}  // namespace testutil
