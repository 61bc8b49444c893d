#include "futspot/scenario.hpp"

#include <string>

#include "futspot/rng.hpp"

namespace futspot {

namespace {
constexpr double kPositivityFloor = 1e-6;
}

ParameterStats stats_from_cv(double mean, double cv) {
  if (cv < 0.0) throw ValidationError("stats_from_cv: negative coefficient of variation");
  return ParameterStats{mean, mean * cv};
}

void CalibrationConfig::validate() const {
  if (scenario_count < 1) throw ValidationError("CalibrationConfig: scenario_count must be >= 1");
  if (cost_b.size() != cost_c.size()) {
    throw DimensionError("CalibrationConfig: cost_b and cost_c must list the same generators");
  }
  auto check = [](const ParameterStats& s, const char* name, bool allow_zero_mean) {
    if (s.sigma < 0.0) throw ValidationError(std::string("CalibrationConfig: negative sigma for ") + name);
    if (allow_zero_mean ? s.mean < 0.0 : !(s.mean > 0.0)) {
      throw ValidationError(std::string("CalibrationConfig: invalid mean for ") + name);
    }
  };
  for (const auto& s : cost_b) check(s, "cost_b", false);
  for (const auto& s : cost_c) check(s, "cost_c", false);
  check(gamma_futures, "gamma_futures", false);
  check(beta_futures, "beta_futures", false);
  check(res_capacity, "res_capacity", true);
}

CalibrationConfig default_calibration() {
  CalibrationConfig c;
  c.cost_b = {stats_from_cv(37.0, 0.09), stats_from_cv(40.0, 0.09), stats_from_cv(43.0, 0.09)};
  c.cost_c = {{0.013, 0.000125}, {0.003, 0.0002}, {0.019, 0.000195}};
  c.gamma_futures = {180.0, 18.0};
  c.beta_futures = {0.005, 0.0005};
  c.res_capacity = {5000.0, 1000.0};
  c.scenario_count = 150;
  c.seed = 0;
  return c;
}

ScenarioSet generate(const CalibrationConfig& config, int n_conventional, int n_res) {
  config.validate();
  if (n_conventional < 1) throw ValidationError("generate: need at least one conventional generator");
  if (n_res < 0) throw ValidationError("generate: negative RES count");
  if (static_cast<int>(config.cost_b.size()) != n_conventional) {
    throw DimensionError("generate: cost calibration lists " + std::to_string(config.cost_b.size()) +
                         " generators, requested " + std::to_string(n_conventional));
  }

  const int S = config.scenario_count;
  NormalSampler rng(config.seed);
  ScenarioSet set;
  set.cost_a.assign(n_conventional, std::vector<double>(S, 0.0));
  set.cost_b.assign(n_conventional, std::vector<double>(S, 0.0));
  set.cost_c.assign(n_conventional, std::vector<double>(S, 0.0));
  set.capacity.assign(n_res, std::vector<double>(S, 0.0));
  set.gamma_spot.assign(S, 0.0);
  set.beta_spot.assign(S, 0.0);

  for (int i = 0; i < n_conventional; ++i) {
    for (int w = 0; w < S; ++w) {
      set.cost_b[i][w] = rng.normal(config.cost_b[i].mean, config.cost_b[i].sigma);
    }
  }
  for (int i = 0; i < n_conventional; ++i) {
    for (int w = 0; w < S; ++w) {
      set.cost_c[i][w] =
          rng.truncated_normal(config.cost_c[i].mean, config.cost_c[i].sigma, kPositivityFloor);
    }
  }
  // Spot demand inherits the futures-curve statistics.
  for (int w = 0; w < S; ++w) {
    set.gamma_spot[w] = rng.normal(config.gamma_futures.mean, config.gamma_futures.sigma);
  }
  for (int w = 0; w < S; ++w) {
    set.beta_spot[w] =
        rng.truncated_normal(config.beta_futures.mean, config.beta_futures.sigma, kPositivityFloor);
  }
  for (int j = 0; j < n_res; ++j) {
    for (int w = 0; w < S; ++w) {
      set.capacity[j][w] =
          rng.truncated_normal(config.res_capacity.mean, config.res_capacity.sigma, 0.0);
    }
  }

  set.sigma.assign(static_cast<std::size_t>(n_conventional + n_res),
                   std::vector<double>(S, 1.0 / S));
  return set;
}

std::vector<CalibrationConfig> sweep_capacity(const CalibrationConfig& config,
                                              std::span<const double> levels) {
  if (levels.empty()) throw ValidationError("sweep_capacity: empty level list");
  double prev = levels.front();
  for (double level : levels) {
    if (level < 0.0) throw ValidationError("sweep_capacity: negative capacity level");
    if (level < prev) throw ValidationError("sweep_capacity: levels must be nondecreasing");
    prev = level;
  }
  std::vector<CalibrationConfig> out;
  out.reserve(levels.size());
  for (double level : levels) {
    CalibrationConfig c = config;
    c.res_capacity.mean = level;
    out.push_back(c);
  }
  return out;
}

}  // namespace futspot
