#pragma once

// Stage-one equilibrium under a blended expected-profit / CVaR objective.
// Each generator maximizes
//
//   (1-phi) * E[profit] + phi * [xi - 1/(1-alpha) * E[max(0, xi - profit)]]
//
// over its futures quantity (within bounds) and the CVaR auxiliaries. The
// market equilibrium is the simultaneous solution of every generator's KKT
// system; it is certified through the complementarity-minimization
// reformulation (objective zero <=> all KKT conditions hold).

#include <cstdint>
#include <span>
#include <vector>

#include "futspot/gradients.hpp"
#include "futspot/market.hpp"

namespace futspot {

struct RiskConfig {
  double phi = 0.0;    // 0 = expected profit only, 1 = pure CVaR
  double alpha = 0.90; // CVaR confidence level

  void validate() const;
};

/// CVaR auxiliaries at fixed profits: xi is the (1-alpha)-quantile of the
/// profit distribution (the VaR), eta the scenario shortfalls below it.
struct CvarAuxiliaries {
  double xi = 0.0;
  std::vector<double> eta;
};

CvarAuxiliaries optimal_cvar_auxiliaries(std::span<const double> profits,
                                         std::span<const double> sigma, double alpha);

/// Blended objective value at explicit auxiliaries. eta must be feasible
/// (eta >= 0 and eta + profit - xi >= 0, up to roundoff).
double cvar_objective(std::span<const double> profits, std::span<const double> sigma,
                      const RiskConfig& risk, double xi, std::span<const double> eta);

/// CVaR at optimal auxiliaries (the phi = 1 objective).
double cvar_value(std::span<const double> profits, std::span<const double> sigma, double alpha);

/// Tail duals of the shortfall constraints at fixed profits and xi:
/// mu_w = phi*sigma_w/(1-alpha) strictly below the VaR, the remainder on
/// the quantile scenario(s) so that sum(mu) = phi.
std::vector<double> cvar_tail_duals(std::span<const double> profits,
                                    std::span<const double> sigma, const RiskConfig& risk,
                                    double xi);

struct StartDiagnostics {
  int index = 0;
  bool converged = false;
  int iterations = 0;
  double stationarity = 0.0;       // EUR/MWh, unscaled
  double objective_scaled = 0.0;   // complementarity objective, scaled
  double q_norm = 0.0;
  std::vector<double> q_futures;
};

struct SolveReport {
  int starts_attempted = 0;
  int starts_converged = 0;
  int accepted_start = -1;
  int iterations = 0;  // Newton iterations of the accepted start
  double wall_seconds = 0.0;
  std::vector<StartDiagnostics> starts;
};

/// Full first-stage equilibrium: decision, CVaR auxiliaries and duals,
/// per-scenario profits and the complementarity objective at the solution.
/// Indexing is [generator] or [generator][scenario].
struct EquilibriumSolution {
  FuturesDecision decision;
  std::vector<double> xi;
  std::vector<std::vector<double>> eta;
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<double>> theta;
  std::vector<double> nu_min;
  std::vector<double> nu_max;
  std::vector<std::vector<double>> profits;
  double objective_residual = 0.0;  // scaled complementarity objective
  SolveReport report;
};

/// Residuals of the per-generator KKT system at a candidate solution, in
/// scaled units (currency-like quantities divided by profit_scale).
struct KktResiduals {
  struct PerGenerator {
    double stationarity_qf = 0.0;   // futures stationarity
    double stationarity_eta = 0.0;  // shortfall stationarity, max over scenarios
    double stationarity_xi = 0.0;   // VaR stationarity
    double comp_tail = 0.0;         // mu * (eta + profit - xi), max abs
    double comp_eta = 0.0;          // eta * theta, max abs
    double comp_lower = 0.0;        // (q - q_min) * nu_min
    double comp_upper = 0.0;        // (q_max - q) * nu_max
    double sign_violation = 0.0;    // worst violated sign/feasibility condition
  };
  std::vector<PerGenerator> generators;
  double objective = 0.0;  // scaled complementarity objective

  double max_stationarity() const;
  double max_complementarity() const;
  double max_sign_violation() const;
};

KktResiduals kkt_residuals(const MarketInstance& instance, const RiskConfig& risk,
                           const EquilibriumSolution& candidate, double profit_scale = 1e5);

/// Complementarity-minimization reformulation of the concatenated KKT
/// systems, over the variable vector
///   [qF (n)] [xi (n)] [eta (n*S)] [mu (n*S)] [theta (n*S)] [nu_min (n)] [nu_max (n)].
/// Values in x are unscaled; evaluations report scaled units. The
/// description borrows the instance, which must outlive it.
class NlpDescription {
 public:
  NlpDescription(const MarketInstance& instance, RiskConfig risk, double profit_scale = 1e5);

  int n_generators() const { return n_; }
  int n_scenarios() const { return s_; }
  int n_variables() const { return n_ * (4 + 3 * s_); }
  int n_equalities() const { return n_ * (2 + s_); }

  int qf_offset() const { return 0; }
  int xi_offset() const { return n_; }
  int eta_offset() const { return 2 * n_; }
  int mu_offset() const { return 2 * n_ + n_ * s_; }
  int theta_offset() const { return 2 * n_ + 2 * n_ * s_; }
  int nu_min_offset() const { return 2 * n_ + 3 * n_ * s_; }
  int nu_max_offset() const { return 3 * n_ + 3 * n_ * s_; }

  std::vector<double> pack(const EquilibriumSolution& solution) const;

  /// Scaled Eq-15 objective: sum of all complementarity products.
  double objective(std::span<const double> x) const;
  /// Scaled stationarity residuals (futures, shortfall, VaR blocks).
  std::vector<double> equality_residuals(std::span<const double> x) const;
  /// Largest violation of the sign/bound/slack inequalities.
  double max_inequality_violation(std::span<const double> x) const;

 private:
  const MarketInstance* m_;
  RiskConfig risk_;
  double scale_;
  int n_ = 0;
  int s_ = 0;
};

NlpDescription assemble_nlp(const MarketInstance& instance, const RiskConfig& risk,
                            double profit_scale = 1e5);

struct SolverOptions {
  int start_count = 10;     // one risk-neutral warm start + random starts
  int max_outer = 200;      // Newton iterations per start
  int max_inner = 40;       // line-search backtracking steps
  double tolerance = 1e-6;  // acceptance threshold on scaled objective/residuals
  std::uint64_t seed = 7;   // start-point seed
  double profit_scale = 1e5;
};

/// Multi-start projected-Newton solve of the equilibrium system. Throws
/// SolveFailure when no start reaches the acceptance thresholds;
/// ValidationError for infeasible bounds; DegenerateModelError for
/// SpotOnly instances or guard violations.
EquilibriumSolution solve(const MarketInstance& instance, const RiskConfig& risk,
                          const SolverOptions& options = {});

class SolveFailure : public ConvergenceError {
 public:
  SolveFailure(const std::string& msg, SolveReport report)
      : ConvergenceError(msg), report(std::move(report)) {}
  SolveReport report;
};

}  // namespace futspot
