#pragma once

// Closed-form stage-two equilibria for all three market models, plus an
// independent best-response iteration that verifies them. Every routine is
// a pure function; per-scenario evaluations are independent.

#include <span>

#include "futspot/market.hpp"

namespace futspot {

/// Floor on beta*(1+delta)+c below which the closed forms degenerate.
inline constexpr double kSingularityFloor = 1e-9;

/// Throws DegenerateModelError if any (generator, scenario) pair violates
/// the singularity guard.
void check_singularity_guard(const MarketInstance& instance);

/// Spot equilibrium under physical futures delivery. q_futures: one entry
/// per generator.
SpotOutcome gm_spot(const MarketInstance& instance, std::span<const double> q_futures);

/// Spot equilibrium under financially settled futures.
SpotOutcome cfd_spot(const MarketInstance& instance, std::span<const double> q_futures);

/// Spot equilibrium without a futures stage.
SpotOutcome spot_only(const MarketInstance& instance);

/// Dispatch on instance.model(); for SpotOnly the futures quantities are
/// ignored.
SpotOutcome solve_spot(const MarketInstance& instance, std::span<const double> q_futures);

/// Single-scenario equilibrium produced by the verification oracle.
struct SpotScenario {
  double price = 0.0;
  std::vector<double> q;    // per generator
  std::vector<double> tau;  // per conventional generator
  double phi_aux = 0.0;
  int iterations = 0;
};

/// Verification oracle: Gauss-Seidel sweeps that solve each conventional
/// generator's conjectured first-order condition exactly against the raw
/// demand curve, from a zero start, until the largest quantity update falls
/// below 1e-10 (at most 1e5 sweeps). Independent of the closed forms.
SpotScenario best_response_oracle(const MarketInstance& instance, int scenario,
                                  std::span<const double> q_futures);

/// Conjectured spot first-order condition residuals, one per conventional
/// generator, at the given prices/quantities.
std::vector<double> spot_foc_residuals(const MarketInstance& instance, int scenario, double price,
                                       std::span<const double> q_spot_conventional,
                                       std::span<const double> q_futures);

}  // namespace futspot
