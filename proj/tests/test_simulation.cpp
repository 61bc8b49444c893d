#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "futspot/simulation.hpp"

using namespace futspot;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("futspot_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

SimulationConfig quick_config(const std::string& outdir, int scenarios = 40) {
  SimulationConfig c = default_config();
  c.scenario_count = scenarios;
  c.seed = 4242;
  c.output.directory = outdir;
  c.solver.start_count = 4;
  return c;
}

}  // namespace

TEST_CASE("config files load with comments and validate") {
  const fs::path dir = temp_dir("cfg");
  const fs::path path = dir / "config.json";
  {
    std::ofstream out(path);
    out << R"({
      // desk study: physical futures, Cournot conduct
      "model": "gm",
      "conduct": "cournot",
      "risk": {"phi": 0.25, "alpha": 0.9},
      "scenarios": {"count": 30, "seed": 99, "res_capacity_mean": 4000, "res_capacity_sigma": 800},
      "demand": {"gamma_mean": 180, "gamma_cv": 0.1, "beta_mean": 0.005, "beta_sigma": 0.0005},
      "generators": {
        "conventional": [
          {"cost_b_mean": 37, "cost_b_cv": 0.09, "cost_c_mean": 0.013, "cost_c_sigma": 0.000125,
           "q_futures_max": 6000}
        ],
        "res": [{"q_futures_min": 0}]
      },
      "output": {"directory": ")" << dir.generic_string() << R"("}
    })";
  }
  const SimulationConfig c = load_config(path.string());
  CHECK(c.model == MarketModel::GM);
  CHECK(c.risk.phi == doctest::Approx(0.25));
  CHECK(c.scenario_count == 30);
  CHECK(c.seed == 99);
  CHECK(c.res_capacity.mean == doctest::Approx(4000.0));
  CHECK(c.gamma_futures.sigma == doctest::Approx(18.0));
  CHECK(c.conventional.size() == 1);
  CHECK(c.conventional[0].cost_b.sigma == doctest::Approx(37.0 * 0.09));
  CHECK_FALSE(c.res[0].q_futures_max.has_value());
}

TEST_CASE("malformed or invalid configs are rejected with anchored messages") {
  const fs::path dir = temp_dir("badcfg");
  SUBCASE("syntax error carries file:line") {
    const fs::path path = dir / "broken.json";
    std::ofstream(path) << "{\n  \"model\": \"gm\",\n  oops\n}\n";
    try {
      load_config(path.string());
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(path.string() + ":3") != std::string::npos);
    }
  }
  SUBCASE("unknown keys are reported") {
    const fs::path path = dir / "typo.json";
    std::ofstream(path) << R"({"risk": {"phy": 0.5}})";
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
  }
  SUBCASE("semantic violations are rejected") {
    const fs::path path = dir / "range.json";
    std::ofstream(path) << R"({"risk": {"phi": 1.5}})";
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_config((dir / "nope.json").string()), ConfigError); }
}

TEST_CASE("cli overrides replace config fields") {
  SimulationConfig c = default_config();
  CliOverrides o;
  o.model = "cfd";
  o.phi = 0.75;
  o.scenarios = 55;
  o.seed = 1234;
  o.out_dir = "elsewhere";
  apply_overrides(c, o);
  CHECK(c.model == MarketModel::CFD);
  CHECK(c.risk.phi == doctest::Approx(0.75));
  CHECK(c.scenario_count == 55);
  CHECK(c.seed == 1234);
  CHECK(c.output.directory == "elsewhere");
  o.conduct = "sideways";
  CHECK_THROWS_AS(apply_overrides(c, o), ConfigError);
}

TEST_CASE("config hash is stable and input-sensitive") {
  SimulationConfig a = default_config();
  SimulationConfig b = default_config();
  CHECK(config_hash(a) == config_hash(b));
  b.seed += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("number formatting: six significant digits, dot decimal") {
  CHECK(format_number(108.275901) == "108.276");
  CHECK(format_number(0.0050004) == "0.0050004");
  CHECK(format_number(-550.5678) == "-550.568");
  CHECK(format_number(17999.994) == "18000");
  CHECK(format_number(0.0) == "0");
}

TEST_CASE("run_single writes result files with embedded hash and seed") {
  const fs::path dir = temp_dir("single");
  SimulationConfig c = quick_config(dir.string());
  const SingleRunResult r = run_single(c);
  CHECK(r.solved);
  CHECK(fs::exists(r.json_path));
  CHECK(fs::exists(r.csv_path));
  const std::string csv = slurp(r.csv_path);
  CHECK(csv.find(config_hash(c)) != std::string::npos);
  CHECK(csv.find("4242") != std::string::npos);
  // header plus exactly one data row
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

  SUBCASE("re-running reproduces the csv byte for byte") {
    const SingleRunResult again = run_single(c);
    CHECK(slurp(again.csv_path) == csv);
  }
}

TEST_CASE("run_single handles the futures-free model without a solve") {
  const fs::path dir = temp_dir("bare");
  SimulationConfig c = quick_config(dir.string());
  c.model = MarketModel::SpotOnly;
  const SingleRunResult r = run_single(c);
  CHECK_FALSE(r.solved);
  CHECK(r.headline.e_price_spot == doctest::Approx(r.headline.e_price_spot_only));
  const std::string csv = slurp(r.csv_path);
  CHECK(csv.find("spot-only") != std::string::npos);
}

TEST_CASE("res sweep emits one row per level plus trends") {
  const fs::path dir = temp_dir("ressweep");
  SimulationConfig c = quick_config(dir.string(), 25);
  c.sweep.res_levels = {0.0, 2500.0, 5000.0, 7500.0, 10000.0};
  c.sweep.workers = 2;
  const SweepResult r = run_res_sweep(c);
  CHECK(r.exit_code == 0);
  CHECK(r.rows.size() == 5);
  for (const auto& row : r.rows) CHECK(row.ok);
  const std::string csv = slurp(r.csv_path);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  const std::string trends = slurp(r.trend_path);
  CHECK(trends.find("eps,") != std::string::npos);

  SUBCASE("rows are keyed in level order regardless of worker count") {
    SimulationConfig serial = c;
    serial.sweep.workers = 1;
    serial.output.directory = (dir / "serial").string();
    const SweepResult r2 = run_res_sweep(serial);
    CHECK(slurp(r2.csv_path) == csv);
  }
}

TEST_CASE("res sweep: a failing level is reported and the rest continue") {
  const fs::path dir = temp_dir("partial");
  SimulationConfig c = quick_config(dir.string(), 20);
  // The renewable futures floor exceeds the capacity-linked cap at low
  // penetration levels, so those instances are rejected while the high
  // levels still solve.
  c.res[0].q_futures_min = 3000.0;
  c.sweep.res_levels = {0.0, 5000.0, 10000.0};
  const SweepResult r = run_res_sweep(c);
  CHECK(r.exit_code == 1);
  REQUIRE(r.rows.size() == 3);
  CHECK_FALSE(r.rows[0].ok);
  CHECK(!r.rows[0].error.empty());
  CHECK(r.rows[1].ok);
  CHECK(r.rows[2].ok);
  const std::string csv = slurp(r.csv_path);
  CHECK(csv.find("failed") != std::string::npos);
}

TEST_CASE("phi sweep: first row coincides with a single run at phi zero") {
  const fs::path dir = temp_dir("phisweep");
  SimulationConfig c = quick_config(dir.string(), 25);
  c.risk.phi = 0.0;
  c.sweep.phi_grid = {0.0, 0.5, 1.0};
  const SweepResult sweep = run_phi_sweep(c);
  CHECK(sweep.exit_code == 0);
  REQUIRE(sweep.rows.size() == 3);

  SimulationConfig single = c;
  single.output.directory = (dir / "single").string();
  const SingleRunResult one = run_single(single);

  const std::string sweep_csv = slurp(sweep.csv_path);
  const std::string single_csv = slurp(one.csv_path);
  // The phi = 0 sweep row and the single-run row share the numeric fields
  // byte for byte (common seed, common formatting).
  std::istringstream sweep_in(sweep_csv);
  std::string line, sweep_row0;
  std::getline(sweep_in, line);  // header
  std::getline(sweep_in, sweep_row0);
  std::istringstream single_in(single_csv);
  std::string single_row;
  std::getline(single_in, line);
  std::getline(single_in, single_row);
  CHECK(sweep_row0 == "0," + single_row);
}

TEST_CASE("risk-averse desk run lands near the reference column") {
  const fs::path dir = temp_dir("riskaverse");
  SimulationConfig c = default_config();
  c.risk.phi = 1.0;
  c.scenario_count = 200;
  c.seed = 1729;
  c.output.directory = dir.string();
  const SingleRunResult r = run_single(c);
  CHECK(std::abs(r.headline.price_futures / 107.68 - 1.0) < 0.10);
  CHECK(std::abs(r.headline.e_price_spot / 88.48 - 1.0) < 0.10);
}

TEST_CASE("verify passes on shipped-style configs") {
  const fs::path dir = temp_dir("verify");
  SimulationConfig c = quick_config(dir.string(), 20);
  std::ostringstream log;
  CHECK(run_verify(c, log) == 0);
  CHECK(log.str().find("[FAIL]") == std::string::npos);
  SUBCASE("flags overrides keep verify green") {
    c.model = MarketModel::CFD;
    c.conduct = "perfect";
    c.risk.phi = 1.0;
    std::ostringstream log2;
    CHECK(run_verify(c, log2) == 0);
  }
}
