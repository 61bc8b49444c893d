#pragma once

// Batch-study front end: config file loading, single solves, RES-penetration
// and risk-parameter sweeps, CSV/JSON emission. Sweeps reuse one scenario
// seed across points (common random numbers) and run levels in a bounded
// worker pool; rows are always written in level order.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "futspot/equilibrium.hpp"
#include "futspot/scenario.hpp"

namespace futspot {

struct ConventionalConfig {
  double cost_a = 0.0;
  ParameterStats cost_b;
  ParameterStats cost_c;
  double q_futures_min = 0.0;
  double q_futures_max = 0.0;
};

struct ResConfig {
  double q_futures_min = 0.0;
  /// Absent means "capacity mean": the contractable volume tracks the
  /// penetration level being studied.
  std::optional<double> q_futures_max;
};

struct SweepConfig {
  std::vector<double> res_levels;  // default 0,1000,...,10000
  std::vector<double> phi_grid;    // default 0.0,0.1,...,1.0
  int workers = 0;                 // 0 = hardware concurrency
};

struct OutputConfig {
  std::string directory = "out";
  std::string prefix;
};

struct SimulationConfig {
  MarketModel model = MarketModel::GM;
  std::string conduct = "cournot";  // "cournot" | "perfect" | "custom"
  std::vector<double> delta;        // custom conduct only
  std::vector<double> psi;
  RiskConfig risk;
  int scenario_count = 150;
  std::uint64_t seed = 1729;
  ParameterStats gamma_futures{180.0, 18.0};
  ParameterStats beta_futures{0.005, 0.0005};
  ParameterStats res_capacity{5000.0, 1000.0};
  std::vector<ConventionalConfig> conventional;
  std::vector<ResConfig> res;
  SolverOptions solver;
  SweepConfig sweep;
  OutputConfig output;

  CalibrationConfig calibration() const;
  ConductParams conduct_params() const;
  void validate() const;
};

/// Desk defaults: three conventional generators and one renewable unit on
/// the standard calibration, Cournot conduct, risk neutral.
SimulationConfig default_config();

/// Parse a config file (JSON, // and /* */ comments allowed). Throws
/// ConfigError with file:line anchoring on malformed input.
SimulationConfig load_config(const std::string& path);

/// Flag overrides applied on top of a loaded config; empty/absent fields
/// leave the config untouched.
struct CliOverrides {
  std::optional<std::string> model;
  std::optional<std::string> conduct;
  std::optional<double> phi;
  std::optional<double> alpha;
  std::optional<int> scenarios;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};
void apply_overrides(SimulationConfig& config, const CliOverrides& overrides);

/// FNV-1a hash of the canonical JSON form, embedded in every output file.
std::string config_hash(const SimulationConfig& config);

/// Bind the config's structure to a scenario set. res_capacity_mean feeds
/// the default RES futures bound.
MarketInstance build_instance(const SimulationConfig& config, const ScenarioSet& scenarios,
                              double res_capacity_mean);

/// Table-style summary of one solved market.
struct HeadlineOutcomes {
  double price_futures = 0.0;
  double e_price_spot = 0.0;
  double e_price_spot_only = 0.0;  // same market without a futures stage
  double sum_qf_conv = 0.0;
  double e_sum_qs_conv = 0.0;
  double sum_qf_res = 0.0;
  double e_sum_qs_res = 0.0;
  double e_profit_conv = 0.0;
  double e_profit_res = 0.0;
  double cvar_conv = 0.0;
  double cvar_res = 0.0;
  double objective_residual = 0.0;
};

HeadlineOutcomes headline_outcomes(const MarketInstance& instance,
                                   const EquilibriumSolution& solution, double alpha);
/// Headline for a futures-free market (price/quantity/profit columns only).
HeadlineOutcomes spot_only_headline(const MarketInstance& instance, double alpha);

struct SingleRunResult {
  HeadlineOutcomes headline;
  EquilibriumSolution solution;  // empty for SpotOnly runs
  bool solved = false;
  std::string json_path;
  std::string csv_path;
};

/// Writes <prefix>result.json and <prefix>headline.csv into the output
/// directory. On solver failure a diagnostics JSON is written before the
/// SolveFailure is rethrown.
SingleRunResult run_single(const SimulationConfig& config);

struct SweepRow {
  double key = 0.0;  // res level or phi
  bool ok = false;
  HeadlineOutcomes headline;
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string csv_path;
  std::string trend_path;
  int exit_code = 0;  // 0 = all rows solved, 1 = partial failure
};

SweepResult run_res_sweep(const SimulationConfig& config);
SweepResult run_phi_sweep(const SimulationConfig& config);

/// Oracle/invariant suite against a config: closed forms vs best-response
/// iteration, analytic gradients vs conjectured finite differences, the
/// zero-futures model bridge, and (GM/CFD) a full solve with KKT residual
/// thresholds. Returns 0 on success, 1 on any failed check.
int run_verify(const SimulationConfig& config, std::ostream& log);

/// Fixed 6-significant-digit formatting, locale independent.
std::string format_number(double value);

}  // namespace futspot
