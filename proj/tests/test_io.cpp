#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "floydwalk/config.hpp"
#include "floydwalk/error.hpp"
#include "floydwalk/green.hpp"
#include "floydwalk/report.hpp"

#include "helpers.hpp"

using namespace floydwalk;
using testutil::thrown_kind;
using testutil::thrown_message;

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("floydwalk_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("empty config takes the documented defaults") {
  auto c = parse_config("{}");
  CHECK(c.graph.family == GraphFamily::RegularTree);
  CHECK(c.graph.q == 2);
  CHECK(c.graph.dim == 2);
  CHECK(c.kernel.rule == KernelRule::SimpleRw);
  CHECK(c.floyd.family == FloydFamily::Geometric);
  CHECK(c.floyd.a == 0.5);
  CHECK(c.floyd.s == 3.0);
  CHECK(c.floyd.n_max == 40);
  CHECK(c.operation.empty());
  CHECK(c.params.radius == 20);
  CHECK(c.params.trials == 200);
  CHECK(c.params.steps == 2000);
  CHECK(c.params.paths == 2000);
  CHECK(c.params.horizon == 4000);
  CHECK(c.params.n_max == 40);
  CHECK(c.params.pairs == 0);
  CHECK(c.params.rho_radii.empty());
  CHECK(c.params.ray_levels == std::vector<std::uint32_t>{2, 4, 8, 16});
  CHECK(c.params.r_list.empty());
  CHECK(c.params.skeleton_trials == 400);
  CHECK(c.params.event_trials == 2000);
  CHECK(c.params.event_levels == std::vector<std::uint32_t>{2, 4, 8});
  CHECK(c.params.event_horizon == 1000);
  CHECK(c.params.mc_paths == 0);
  CHECK(c.params.measured_tails == 24);
  CHECK_FALSE(c.params.speed_tail);
  CHECK(c.seed == 0);
  CHECK(c.out_dir == "out");
  CHECK(c.threads == 0);
}

TEST_CASE("unknown fields are rejected by name at every level") {
  auto top = thrown_message([] { parse_config(R"({"bogus": 1})"); });
  CHECK(top.find("unknown field 'bogus'") != std::string::npos);

  auto nested = thrown_message([] { parse_config(R"({"graph": {"branching": 3}})"); });
  CHECK(nested.find("config.graph") != std::string::npos);
  CHECK(nested.find("branching") != std::string::npos);

  auto par = thrown_message([] { parse_config(R"({"params": {"speed": true}})"); });
  CHECK(par.find("config.params") != std::string::npos);

  CHECK(thrown_kind([] { parse_config(R"({"bogus": 1})"); }) == ErrKind::Config);
}

TEST_CASE("range and type errors name the offending field") {
  auto check_names = [](const std::string& text, const std::string& field) {
    auto msg = thrown_message([&] { parse_config(text); });
    CHECK(msg.find(field) != std::string::npos);
  };
  check_names(R"({"params": {"radius": 0}})", "config.params.radius");
  check_names(R"({"params": {"trials": 0}})", "config.params.trials");
  check_names(R"({"params": {"ray_levels": [4, 2]}})", "config.params.ray_levels");
  check_names(R"({"params": {"r_list": [-1.0]}})", "config.params.r_list");
  check_names(R"({"kernel": {"hold": 1.5}})", "config.kernel.hold");
  check_names(R"({"kernel": {"rule": "warp"}})", "config.kernel.rule");
  check_names(R"({"floyd": {"s": 1.0}})", "config.floyd.s");
  check_names(R"({"floyd": {"a": 0.0}})", "config.floyd.a");
  check_names(R"({"floyd": {"family": "custom_table"}})", "config.floyd.table");
  check_names(R"({"graph": {"dim": 5}})", "config.graph.dim");
  check_names(R"({"graph": {"q": 1}})", "config.graph.q");
  check_names(R"({"graph": {"family": "explicit_finite"}})", "config.graph.adjacency");
  check_names(R"({"graph": {"family": "donut"}})", "config.graph.family");
  check_names(R"({"seed": -4})", "config.seed");
  check_names(R"({"threads": -1})", "config.threads");
  check_names(R"({"out_dir": ""})", "config.out_dir");

  CHECK(thrown_kind([] { parse_config("{"); }) == ErrKind::Config);
  CHECK(thrown_kind([] { parse_config(R"({"params": {"radius": 0}})"); }) == ErrKind::Config);
}

TEST_CASE("serialization round trips byte for byte") {
  ExperimentConfig c1;
  c1.graph.family = GraphFamily::Lattice;
  c1.graph.dim = 3;
  c1.kernel.rule = KernelRule::LazyRw;
  c1.kernel.hold = 0.25;
  c1.floyd.family = FloydFamily::Polynomial;
  c1.floyd.s = 2.5;
  c1.operation = "green";
  c1.params.radius = 9;
  c1.params.rho_radii = {10, 20};
  c1.params.r_list = {0.25, 0.5};
  c1.params.speed_tail = true;
  c1.params.mc_paths = 5000;
  c1.params.table_file = "tab.txt";
  c1.seed = 42;
  c1.out_dir = "results";
  c1.threads = 2;

  ExperimentConfig c2;
  c2.graph.family = GraphFamily::ExplicitFinite;
  c2.graph.adjacency = {{1, 3}, {0, 2}, {1, 3}, {2, 0}};
  c2.graph.base = 1;
  c2.kernel.rule = KernelRule::BoundedRangeMixture;
  c2.kernel.step_weights = {0.6, 0.4};
  c2.floyd.family = FloydFamily::CustomTable;
  c2.floyd.table = {1.0, 0.5, 0.25};
  c2.floyd.lambda = 0.5;

  ExperimentConfig c3;
  c3.graph.family = GraphFamily::RegularTree;
  c3.graph.q = 3;
  c3.kernel.rule = KernelRule::TreeDrift;
  c3.kernel.outward = 0.7;
  c3.floyd.family = FloydFamily::GreenScaledTable;
  c3.floyd.table_file = "t.txt";
  c3.floyd.n_max = 30;

  for (const auto& c : {c1, c2, c3}) {
    auto text = serialize_config(c);
    auto back = serialize_config(parse_config(text));
    CHECK(back == text);
    CHECK(config_hash(parse_config(text)) == config_hash(c));
  }

  // key order in the input must not matter
  auto scrambled = parse_config(R"({"seed": 7, "graph": {"q": 3, "family": "regular_tree"}})");
  ExperimentConfig plain;
  plain.graph.q = 3;
  plain.seed = 7;
  CHECK(serialize_config(scrambled) == serialize_config(plain));
}

TEST_CASE("config hash is FNV-1a of the canonical form") {
  ExperimentConfig c;
  c.seed = 123;
  auto text = serialize_config(c);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  CHECK(config_hash(c) == h);

  ExperimentConfig d = c;
  d.seed = 124;
  CHECK(config_hash(c) != config_hash(d));

  auto hex = config_hash_hex(c);
  CHECK(hex.size() == 16);
  CHECK(hex.find_first_not_of("0123456789abcdef") == std::string::npos);
  CHECK(std::stoull(hex, nullptr, 16) == h);
}

TEST_CASE("doubles format as shortest round-trip decimals") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  for (double v : {1.0 / 3.0, 2.0 / 7.0, 1e-9, 6.02e23, 0.3333333333333333, 152.0})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("CSV writer produces commented headers and exact rows") {
  TempDir tmp;
  auto path = tmp.file("table.csv");
  {
    CsvWriter w(path);
    w.comment("values are probabilities");
    w.header({"n", "p"});
    w.row({"1", CsvWriter::num(0.5)});
    w.row({CsvWriter::num(2.0), CsvWriter::num(0.25)});
    w.close();
  }
  CHECK(slurp(path) == "# values are probabilities\nn,p\n1,0.5\n2,0.25\n");

  auto path2 = tmp.file("bad.csv");
  auto kind = thrown_kind([&] {
    CsvWriter w(path2);
    w.header({"a", "b"});
    w.row({"1"});
  });
  CHECK(kind == ErrKind::Config);
  auto msg = thrown_message([&] {
    CsvWriter w(path2);
    w.header({"a", "b"});
    w.row({"1"});
  });
  CHECK(msg.find("width mismatch") != std::string::npos);

  CHECK(thrown_kind([] { CsvWriter w("/nonexistent_dir_xyz/file.csv"); }) == ErrKind::Config);
}

TEST_CASE("report JSON carries verb, hash, conventions, and results") {
  TempDir tmp;
  ExperimentReport rep;
  rep.verb = "green";
  rep.config_hash = "00ff00ff00ff00ff";
  rep.version = "1.2.3";
  rep.green_convention = kGreenConvention;
  rep.rng = kRngDescription;
  rep.wall_seconds = 1.5;
  rep.warnings = {"short horizon"};
  rep.results["rho_hat"] = 0.5;

  auto path = tmp.file("report.json");
  write_report(path, rep);
  auto text = slurp(path);
  REQUIRE(!text.empty());
  CHECK(text.back() == '\n');

  auto j = nlohmann::json::parse(text);
  CHECK(j["verb"] == "green");
  CHECK(j["config_hash"] == "00ff00ff00ff00ff");
  CHECK(j["version"] == "1.2.3");
  CHECK(j["conventions"]["green"] == kGreenConvention);
  CHECK(j["conventions"]["rng"] == kRngDescription);
  CHECK(j["wall_seconds"] == 1.5);
  CHECK(j["warnings"][0] == "short horizon");
  CHECK(j["results"]["rho_hat"] == 0.5);
}

TEST_CASE("config files load from disk and report open failures") {
  TempDir tmp;
  CHECK(thrown_kind([&] { load_config_file(tmp.file("missing.json")); }) == ErrKind::Config);

  ExperimentConfig c;
  c.graph.family = GraphFamily::HalfLine;
  c.seed = 9;
  auto path = tmp.file("conf.json");
  write_text_file(path, serialize_config(c));
  auto loaded = load_config_file(path);
  CHECK(serialize_config(loaded) == serialize_config(c));
}

TEST_CASE("spec builders dispatch to the right families") {
  GraphSpec gs;
  gs.family = GraphFamily::Lattice;
  gs.dim = 3;
  auto g = gs.build();
  CHECK(g.family() == GraphFamily::Lattice);
  CHECK(g.neighbors(g.base()).size() == 6);

  KernelSpec ks;
  ks.rule = KernelRule::LazyRw;
  ks.hold = 0.25;
  auto k = ks.build();
  CHECK(k.rule() == KernelRule::LazyRw);

  FloydSpec fsp;
  fsp.family = FloydFamily::CustomTable;
  fsp.table = {1.0, 0.5, 0.25};
  fsp.lambda = 0.5;
  auto f = fsp.build();
  CHECK(f.family() == FloydFamily::CustomTable);
  CHECK(f.eval(2) == 0.25);

  FloydSpec green_scaled;
  green_scaled.family = FloydFamily::GreenScaledTable;
  auto msg = thrown_message([&] { green_scaled.build(); });
  CHECK(msg.find("lemma1 verb") != std::string::npos);

  TempDir tmp;
  auto tab = tmp.file("scale.txt");
  write_text_file(tab,
                  "# n f(n) M=1 eps0=0.5 K=1 lambda_star=0.1\n"
                  "1 1.0\n2 0.5\n3 0.25\n");
  green_scaled.table_file = tab;
  auto gf = green_scaled.build();
  CHECK(gf.family() == FloydFamily::GreenScaledTable);
  CHECK(gf.eval(0) == 1.0);
  CHECK(gf.eval(2) == 0.5);
}

TEST_CASE("enum names match the strings the parser accepts") {
  CHECK(std::string(graph_family_string(GraphFamily::FreeProductZ3Z3)) == "free_product");
  CHECK(std::string(kernel_rule_string(KernelRule::BoundedRangeMixture)) ==
        "bounded_range_mixture");
  CHECK(std::string(floyd_family_string(FloydFamily::GreenScaledTable)) == "lemma1");
  CHECK(std::string(floyd_family_string(FloydFamily::Geometric)) == "geometric");
}
