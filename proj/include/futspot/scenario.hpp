#pragma once

// Reproducible scenario generation. Cost coefficients, spot demand
// intercept/slope and renewable capacity are drawn from independent
// normals; the spot demand curve inherits the futures-curve mean and
// standard deviation. Draws below a positivity floor (demand slope, cost
// curvature, capacity) are resampled.

#include <cstdint>
#include <span>
#include <vector>

#include "futspot/errors.hpp"

namespace futspot {

struct ParameterStats {
  double mean = 0.0;
  double sigma = 0.0;
};

/// sigma = mean * cv; cv must be nonnegative.
ParameterStats stats_from_cv(double mean, double cv);

struct CalibrationConfig {
  std::vector<ParameterStats> cost_b;  // one entry per conventional generator
  std::vector<ParameterStats> cost_c;
  ParameterStats gamma_futures{180.0, 18.0};
  ParameterStats beta_futures{0.005, 0.0005};
  ParameterStats res_capacity{5000.0, 1000.0};
  int scenario_count = 150;
  std::uint64_t seed = 0;

  void validate() const;
};

/// The desk calibration used by the default configs: three conventional
/// generators (b = 37/40/43 at 9% CV, c = 0.013/0.003/0.019 with explicit
/// sigmas), demand 180/0.005 at 10% CV, renewable capacity 5000 +- 1000.
CalibrationConfig default_calibration();

/// One set of scenario realizations plus occurrence probabilities.
/// Per-generator data is indexed [generator][scenario].
struct ScenarioSet {
  std::vector<std::vector<double>> cost_a;
  std::vector<std::vector<double>> cost_b;
  std::vector<std::vector<double>> cost_c;
  std::vector<std::vector<double>> capacity;  // RES generators
  std::vector<double> gamma_spot;
  std::vector<double> beta_spot;
  std::vector<std::vector<double>> sigma;  // all generators, conventional first

  int n_scenarios() const { return static_cast<int>(gamma_spot.size()); }
};

/// Deterministic for a fixed seed. Draw order is part of the contract:
/// families in the order cost_b, cost_c, gamma, beta, capacity;
/// generator-major, scenario-minor within a family.
ScenarioSet generate(const CalibrationConfig& config, int n_conventional, int n_res);

/// One config per capacity level, identical otherwise (common random
/// numbers across a sweep). Levels must be nonempty, nonnegative and
/// nondecreasing.
std::vector<CalibrationConfig> sweep_capacity(const CalibrationConfig& config,
                                              std::span<const double> levels);

}  // namespace futspot
