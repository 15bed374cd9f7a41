#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "pathchaos/config.hpp"
#include "pathchaos/experiments.hpp"
#include "pathchaos/report.hpp"

using namespace pathchaos;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text, ExperimentConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

ExperimentConfig small_forward() {
  return parse(R"(
scenario = kl-bound
[system]
N = 4
[integration]
T = 0.2
dt = 0.01
[meanfield]
M = 200
[montecarlo]
realizations = 60
)");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pathchaos-test-" + name);
  fs::remove_all(p);
  return p;
}

Record rec(const std::string& name, bool pass) { return {name, "test", 1.0, 0.0, 2.0, pass}; }

}  // namespace

TEST_CASE("config parsing") {
  const auto c = parse(R"(
# comment line
; another comment
scenario = kl-bound
[system]
order = 1      # trailing comment
N = 12
d = 2
m = 2.5
gamma = 0.3
sigma = 1 0.5; 0 2
[initial]
law = point
mean = 0.25
[kernel]
variant = gauss_bump
amplitude = 1.5
[meanfield]
M = 500
refine_iters = 2
[integration]
T = 0.5
dt = 0.005
[montecarlo]
realizations = 10
master_seed = 77
threads = 3
[bounds]
eta = 0.01
[sweep]
N = 4, 8
T = 0.25,0.5
[output]
directory = out-dir
formats = json
)");
  CHECK(c.scenario == "kl-bound");
  CHECK(c.order == Order::first);
  CHECK(c.n_particles == 12);
  CHECK(c.d == 2);
  CHECK(c.mass == 2.5);
  CHECK(c.sigma(0, 1) == 0.5);
  CHECK(c.sigma(1, 1) == 2.0);
  CHECK(c.init_law == "point");
  CHECK(c.kernel == "gauss_bump");
  CHECK(c.cloud_size == 500);
  CHECK(c.refine_iters == 2);
  CHECK(c.grid().n_steps() == 100);
  CHECK(c.master_seed == 77);
  CHECK(c.threads == 3);
  CHECK(c.eta.value() == 0.01);
  CHECK(c.sweep_n == std::vector<std::size_t>{4, 8});
  CHECK(c.sweep_t == std::vector<double>{0.25, 0.5});
  CHECK(c.out_dir == "out-dir");
  CHECK(!c.write_csv);
  CHECK(c.write_json);
  CHECK_NOTHROW(c.validate());
  CHECK(c.effective_cloud_size() == 500);
  CHECK(ExperimentConfig{}.effective_cloud_size() == 10000);
  const auto wide = parse("[system]\nN = 2000\n");
  CHECK(wide.effective_cloud_size() == 20000);
  CHECK(parse("[system]\nd = 3\nsigma = 2\n").sigma.isApprox(2.0 * Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse("[system]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[system\nN = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[system]\nN\n"), ConfigError);
  CHECK_THROWS_AS(parse("[system]\norder = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[system]\nN = many\n"), ConfigError);
  CHECK_THROWS_AS(parse("[sweep]\nN = 1, 4\n"), ConfigError);
  CHECK_THROWS_AS(parse("[output]\nformats = xml\n"), ConfigError);
  CHECK_THROWS_AS(parse("[system]\nm = -1\n").validate(), InvalidParameter);
  CHECK_THROWS_AS(parse("[system]\nsigma = 0\n").validate(), DegenerateDiffusion);
  CHECK_THROWS_AS(parse("[kernel]\nvariant = coulomb\n").validate(), ConfigError);
  CHECK_THROWS_AS(parse("[integration]\ndt = 0.3\n").validate(), InvalidParameter);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), IoError);
  CHECK_THROWS_AS(preset("no-such-preset"), ConfigError);
  CHECK_THROWS_AS(scenario_kind("no-such-scenario"), ConfigError);
}

TEST_CASE("config hash covers results only") {
  const auto a = small_forward();
  auto b = a;
  b.threads = 8;
  b.out_dir = "elsewhere";
  b.write_csv = false;
  CHECK(a.hash() == b.hash());
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash().size() == 16);
  b.master_seed += 1;
  CHECK(a.hash() != b.hash());
  auto c = a;
  c.amplitude = 1.0000001;
  CHECK(a.hash() != c.hash());
  CHECK(a.canonical().find("threads") == std::string::npos);
}

TEST_CASE("every preset validates") {
  for (const auto& name : preset_names()) {
    const auto c = preset(name);
    CHECK_NOTHROW(c.validate());
    CHECK_NOTHROW(scenario_kind(c.scenario));
  }
  CHECK(preset("girsanov-martingale").n_particles == 8);
  CHECK(preset("oracle-validation").kernel == "linear");
}

TEST_CASE("zero-kernel preset gives exact zeros") {
  const auto rep = run_scenario(preset("zero-kernel-null"));
  CHECK(rep.all_pass());
  CHECK(rep.find("forward_exactly_zero").value == 0.0);
  CHECK(rep.find("reversed_exactly_zero").value == 0.0);
  CHECK(rep.find("rn_exactly_one").value == 1.0);
  CHECK(rep.config_hash == preset("zero-kernel-null").hash());
}

TEST_CASE("dpi preset reproduces the Gaussian channel numbers") {
  const auto rep = run_scenario(preset("dpi-suite"));
  CHECK(rep.all_pass());
  CHECK(std::abs(rep.find("gaussian_kl N(0,1)||N(1,1)").value - 0.5) <= 1e-12);
  CHECK_THROWS(rep.find("no-such-record"));
}

TEST_CASE("small forward run: records, tables and determinism") {
  auto cfg = small_forward();
  const auto a = run_scenario(cfg);
  CHECK(a.all_pass());
  CHECK(a.find("rn_martingale").pass);
  const auto& lw = a.find("lambda_functional T=0.2");
  CHECK(lw.value > 0.0);
  CHECK(a.find("sharp_functional T=0.2").value <= lw.value * (1.0 + 1e-12));
  REQUIRE(!a.tables.empty());
  CHECK(a.tables[0].name == "curve");
  CHECK(a.tables[0].columns.size() == 6);
  CHECK(a.tables[0].rows.size() == 21);

  cfg.threads = 3;
  const auto b = run_scenario(cfg);
  auto ja = to_json(a), jb = to_json(b);
  ja.erase("wall_clock_s");
  jb.erase("wall_clock_s");
  CHECK(ja.dump() == jb.dump());
}

TEST_CASE("small sweep") {
  auto cfg = small_forward();
  cfg.sweep_n = {3, 6};
  cfg.sweep_t = {0.1, 0.2};
  const auto s = run_sweep(cfg);
  CHECK(s.points.size() == 2);
  CHECK(s.points[0].tag.find("N=3") != std::string::npos);
  bool has_table = false;
  for (const auto& t : s.aggregate.tables)
    if (t.name == "sweep") {
      has_table = true;
      CHECK(t.rows.size() == 4);
    }
  CHECK(has_table);
  bool uniformity = false;
  for (const auto& r : s.aggregate.records) uniformity |= r.name.rfind("N_uniformity", 0) == 0;
  CHECK(uniformity);
  auto bad = small_forward();
  CHECK_THROWS_AS(run_sweep(bad), ConfigError);
}

TEST_CASE("relative spread") {
  CHECK(relative_spread({1.0, 1.0, 1.0}) == 0.0);
  CHECK(relative_spread({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
}

TEST_CASE("emit_report contract") {
  std::ostringstream text;
  CHECK_THROWS_AS(emit_report({}, "", text), InvalidParameter);
  RunReport empty;
  empty.scenario = "x";
  CHECK_THROWS_AS(emit_report({empty}, "", text), InvalidParameter);

  RunReport good;
  good.scenario = "good";
  good.records = {rec("a", true), rec("b", true)};
  const auto ok = emit_report({good}, "", text);
  CHECK(ok.all_pass);
  CHECK(ok.failing.empty());

  RunReport bad = good;
  bad.scenario = "bad";
  bad.tag = "N=4";
  bad.records.push_back(rec("broken_invariant", false));
  std::ostringstream text2;
  const auto res = emit_report({good, bad}, "", text2);
  CHECK(!res.all_pass);
  REQUIRE(res.failing.size() == 1);
  CHECK(res.failing[0].find("broken_invariant") != std::string::npos);
  CHECK(text2.str().find("broken_invariant") != std::string::npos);
  CHECK(text2.str().find("FAIL") != std::string::npos);
}

TEST_CASE("emitted files are reproducible and round-trip") {
  auto cfg = small_forward();
  const auto rep = run_scenario(cfg);
  const fs::path d1 = scratch("a"), d2 = scratch("b");
  std::ostringstream sink;
  const auto r1 = emit_report({rep}, d1.string(), sink);
  auto rep2 = run_scenario(cfg);
  rep2.wall_clock = rep.wall_clock;
  const auto r2 = emit_report({rep2}, d2.string(), sink);
  REQUIRE(r1.files.size() == r2.files.size());
  REQUIRE(r1.files.size() == 2);
  for (std::size_t i = 0; i < r1.files.size(); ++i) {
    CHECK(fs::path(r1.files[i]).filename() == fs::path(r2.files[i]).filename());
    CHECK(slurp(r1.files[i]) == slurp(r2.files[i]));
  }
  fs::path json;
  for (const auto& f : r1.files)
    if (fs::path(f).extension() == ".json") json = f;
  const auto back = read_report(json.string());
  CHECK(back.scenario == rep.scenario);
  CHECK(back.config_hash == rep.config_hash);
  REQUIRE(back.records.size() == rep.records.size());
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    CHECK(back.records[i].name == rep.records[i].name);
    CHECK(back.records[i].value == rep.records[i].value);
    CHECK(back.records[i].pass == rep.records[i].pass);
  }
  const auto j = to_json(rep);
  CHECK(j.at("note") == kPresetNote);
  CHECK(j.at("seed") == cfg.master_seed);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("CSV uses 17 significant digits and JSON keeps infinities") {
  Table t{"curve", {"t", "v"}, {{0.1, 1.0 / 3.0}}};
  std::ostringstream out;
  write_table_csv(out, t);
  CHECK(out.str() == "t,v\n0.10000000000000001,0.33333333333333331\n");
  RunReport r;
  r.scenario = "inf";
  r.records = {{"x", "y", 1.0, 0.0, std::numeric_limits<double>::infinity(), true}};
  const auto back = report_from_json(to_json(r));
  CHECK(std::isinf(back.records[0].bound));
}
