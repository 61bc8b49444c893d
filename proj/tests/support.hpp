#pragma once

// Shared helpers for the unit and acceptance suites: deterministic random
// instances in calibration-like ranges, and an independent central-
// difference oracle for the futures-stage gradients (market-core profit
// composed with the closed-form spot maps along the conjectured deviation).

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "futspot/gradients.hpp"
#include "futspot/market.hpp"
#include "futspot/spot.hpp"

namespace test_support {

enum class Conduct { Cournot, Perfect, Random };

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

inline futspot::MarketInstance random_instance(std::mt19937_64& rng, futspot::MarketModel model,
                                               Conduct conduct, int max_conv = 4, int max_res = 2,
                                               int max_scen = 5) {
  using namespace futspot;
  const int I = 1 + static_cast<int>(rng() % max_conv);
  const int J = static_cast<int>(rng() % (max_res + 1));
  const int S = 1 + static_cast<int>(rng() % max_scen);
  std::vector<ConventionalGenerator> conv(I);
  for (auto& g : conv) {
    for (int w = 0; w < S; ++w) {
      g.cost_a.push_back(uniform(rng, 0.0, 50.0));
      g.cost_b.push_back(uniform(rng, 20.0, 60.0));
      g.cost_c.push_back(uniform(rng, 0.001, 0.03));
    }
    g.q_futures_min = 0.0;
    g.q_futures_max = uniform(rng, 1000.0, 8000.0);
  }
  std::vector<ResGenerator> res(J);
  for (auto& g : res) {
    for (int w = 0; w < S; ++w) g.capacity.push_back(uniform(rng, 0.0, 8000.0));
    g.q_futures_min = 0.0;
    g.q_futures_max = uniform(rng, 500.0, 6000.0);
  }
  DemandCurves demand;
  demand.gamma_futures = uniform(rng, 120.0, 250.0);
  demand.beta_futures = uniform(rng, 0.002, 0.01);
  for (int w = 0; w < S; ++w) {
    demand.gamma_spot.push_back(uniform(rng, 120.0, 250.0));
    demand.beta_spot.push_back(uniform(rng, 0.002, 0.01));
  }
  ConductParams cp;
  switch (conduct) {
    case Conduct::Cournot: cp = ConductParams::cournot(I, J); break;
    case Conduct::Perfect: cp = ConductParams::perfect_competition(I, J); break;
    case Conduct::Random: {
      for (int i = 0; i < I; ++i) cp.delta.push_back(uniform(rng, -1.0, 1.0));
      const int n = I + J;
      const double floor_psi = n > 1 ? -1.0 / (n - 1) : 0.0;
      for (int k = 0; k < n; ++k) cp.psi.push_back(uniform(rng, floor_psi, 0.5));
      break;
    }
  }
  return MarketInstance(model, std::move(conv), std::move(res), std::move(demand), std::move(cp));
}

inline std::vector<double> random_futures(std::mt19937_64& rng, const futspot::MarketInstance& m) {
  std::vector<double> q(m.n_generators());
  for (int k = 0; k < m.n_generators(); ++k) {
    q[k] = uniform(rng, m.futures_lower(k), m.futures_upper(k));
  }
  return q;
}

/// Central difference of generator k's scenario-w profit along its
/// conjectured deviation: rivals respond at rate psi_k in the futures
/// price; the spot equilibrium responds only for conventional deviators.
/// Profits are quadratic along the ray, so the difference is exact.
inline double fd_profit_gradient(const futspot::MarketInstance& m, const std::vector<double>& q,
                                 int k, int w) {
  using namespace futspot;
  const double h = 1e-4 * std::max(1000.0, std::abs(q[k]));
  const double psi = m.conduct().psi[k];
  auto value = [&](double step) {
    std::vector<double> moved = q;
    moved[k] += step;
    for (int r = 0; r < m.n_generators(); ++r) {
      if (r != k) moved[r] += psi * step;
    }
    const double pf = futures_price(m, moved);
    std::vector<double> spot_q = q;
    if (!m.is_res(k)) {
      spot_q = moved;
    } else {
      spot_q[k] += step;
    }
    const SpotOutcome spot = solve_spot(m, spot_q);
    return profit_raw(m, w, pf, moved[k], spot.price[w], spot.q[k][w], k);
  };
  return (value(h) - value(-h)) / (2.0 * h);
}

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

/// One-scenario instance with a single conventional generator; handy for
/// the textbook monopoly checks.
inline futspot::MarketInstance monopoly_instance(futspot::MarketModel model, double gamma,
                                                 double beta, double b, double c, double delta,
                                                 double qf_max = 1000.0) {
  using namespace futspot;
  ConventionalGenerator g;
  g.cost_a = {0.0};
  g.cost_b = {b};
  g.cost_c = {c};
  g.q_futures_min = 0.0;
  g.q_futures_max = qf_max;
  DemandCurves demand;
  demand.gamma_futures = gamma;
  demand.beta_futures = beta;
  demand.gamma_spot = {gamma};
  demand.beta_spot = {beta};
  ConductParams cp;
  cp.delta = {delta};
  cp.psi = {0.0};
  return MarketInstance(model, {g}, {}, demand, cp);
}

}  // namespace test_support
