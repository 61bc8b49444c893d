#include "futspot/spot.hpp"

#include <cmath>
#include <string>

namespace futspot {

namespace {

struct ScenarioAux {
  std::vector<double> tau;
  double phi = 0.0;
};

ScenarioAux scenario_aux(const MarketInstance& m, int w) {
  const int I = m.n_conventional();
  const double beta = m.demand().beta_spot[w];
  ScenarioAux aux;
  aux.tau.resize(I);
  double tau_sum = 0.0;
  for (int i = 0; i < I; ++i) {
    const double denom = beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w];
    aux.tau[i] = 1.0 / denom;
    tau_sum += aux.tau[i];
  }
  aux.phi = 1.0 / (1.0 + beta * tau_sum);
  return aux;
}

void require_futures_size(const MarketInstance& m, std::span<const double> q_futures) {
  if (static_cast<int>(q_futures.size()) != m.n_generators()) {
    throw DimensionError("spot equilibrium: one futures quantity per generator required");
  }
}

SpotOutcome make_outcome(const MarketInstance& m) {
  const std::size_t S = static_cast<std::size_t>(m.n_scenarios());
  SpotOutcome out;
  out.price.assign(S, 0.0);
  out.q.assign(static_cast<std::size_t>(m.n_generators()), std::vector<double>(S, 0.0));
  out.tau.assign(static_cast<std::size_t>(m.n_conventional()), std::vector<double>(S, 0.0));
  out.phi_aux.assign(S, 0.0);
  return out;
}

}  // namespace

void check_singularity_guard(const MarketInstance& instance) {
  const int I = instance.n_conventional();
  for (int w = 0; w < instance.n_scenarios(); ++w) {
    const double beta = instance.demand().beta_spot[w];
    for (int i = 0; i < I; ++i) {
      const double denom = beta * (1.0 + instance.conduct().delta[i]) +
                           instance.conventional(i).cost_c[w];
      if (!(denom >= kSingularityFloor)) {
        throw DegenerateModelError(
            "degenerate conduct/cost: beta*(1+delta)+c = " + std::to_string(denom) +
            " for generator " + std::to_string(i) + ", scenario " + std::to_string(w));
      }
    }
  }
}

SpotOutcome gm_spot(const MarketInstance& m, std::span<const double> q_futures) {
  if (m.model() != MarketModel::GM) throw DegenerateModelError("gm_spot: instance model is not GM");
  require_futures_size(m, q_futures);
  check_singularity_guard(m);
  const int I = m.n_conventional();
  const int J = m.n_res();
  SpotOutcome out = make_outcome(m);
  double qf_conv = 0.0;
  for (int i = 0; i < I; ++i) qf_conv += q_futures[i];
  for (int w = 0; w < m.n_scenarios(); ++w) {
    const double beta = m.demand().beta_spot[w];
    const ScenarioAux aux = scenario_aux(m, w);
    double passthrough = 0.0;
    for (int i = 0; i < I; ++i) {
      passthrough += aux.tau[i] * (m.conventional(i).cost_b[w] +
                                   m.conventional(i).cost_c[w] * q_futures[i]);
    }
    const double price = aux.phi * (m.gamma_hat(w) - beta * qf_conv + beta * passthrough);
    out.price[w] = price;
    out.phi_aux[w] = aux.phi;
    for (int i = 0; i < I; ++i) {
      out.tau[i][w] = aux.tau[i];
      out.q[i][w] = aux.tau[i] * (price - m.conventional(i).cost_b[w] -
                                  m.conventional(i).cost_c[w] * q_futures[i]);
    }
    for (int j = 0; j < J; ++j) {
      out.q[I + j][w] = m.res(j).capacity[w] - q_futures[I + j];
    }
  }
  return out;
}

SpotOutcome cfd_spot(const MarketInstance& m, std::span<const double> q_futures) {
  if (m.model() != MarketModel::CFD) throw DegenerateModelError("cfd_spot: instance model is not CFD");
  require_futures_size(m, q_futures);
  check_singularity_guard(m);
  const int I = m.n_conventional();
  const int J = m.n_res();
  SpotOutcome out = make_outcome(m);
  for (int w = 0; w < m.n_scenarios(); ++w) {
    const double beta = m.demand().beta_spot[w];
    const ScenarioAux aux = scenario_aux(m, w);
    double b_passthrough = 0.0;
    double contract_tilt = 0.0;
    for (int i = 0; i < I; ++i) {
      b_passthrough += aux.tau[i] * m.conventional(i).cost_b[w];
      contract_tilt += q_futures[i] * beta * (1.0 + m.conduct().delta[i]) * aux.tau[i];
    }
    const double price =
        aux.phi * (m.gamma_hat(w) + beta * b_passthrough - beta * contract_tilt);
    out.price[w] = price;
    out.phi_aux[w] = aux.phi;
    for (int i = 0; i < I; ++i) {
      out.tau[i][w] = aux.tau[i];
      out.q[i][w] = aux.tau[i] * (price - m.conventional(i).cost_b[w] +
                                  q_futures[i] * beta * (1.0 + m.conduct().delta[i]));
    }
    for (int j = 0; j < J; ++j) {
      out.q[I + j][w] = m.res(j).capacity[w] - q_futures[I + j];
    }
  }
  return out;
}

SpotOutcome spot_only(const MarketInstance& m) {
  if (m.model() != MarketModel::SpotOnly) {
    throw DegenerateModelError("spot_only: instance model is not SpotOnly");
  }
  check_singularity_guard(m);
  const int I = m.n_conventional();
  const int J = m.n_res();
  SpotOutcome out = make_outcome(m);
  for (int w = 0; w < m.n_scenarios(); ++w) {
    const double beta = m.demand().beta_spot[w];
    const ScenarioAux aux = scenario_aux(m, w);
    double b_passthrough = 0.0;
    for (int i = 0; i < I; ++i) b_passthrough += aux.tau[i] * m.conventional(i).cost_b[w];
    const double price = aux.phi * (m.gamma_hat(w) + beta * b_passthrough);
    out.price[w] = price;
    out.phi_aux[w] = aux.phi;
    for (int i = 0; i < I; ++i) {
      out.tau[i][w] = aux.tau[i];
      out.q[i][w] = aux.tau[i] * (price - m.conventional(i).cost_b[w]);
    }
    for (int j = 0; j < J; ++j) {
      out.q[I + j][w] = m.res(j).capacity[w];
    }
  }
  return out;
}

SpotOutcome solve_spot(const MarketInstance& m, std::span<const double> q_futures) {
  switch (m.model()) {
    case MarketModel::GM: return gm_spot(m, q_futures);
    case MarketModel::CFD: return cfd_spot(m, q_futures);
    case MarketModel::SpotOnly: return spot_only(m);
  }
  throw Error("solve_spot: unreachable");
}

std::vector<double> spot_foc_residuals(const MarketInstance& m, int scenario, double price,
                                       std::span<const double> q_spot_conventional,
                                       std::span<const double> q_futures) {
  m.require_scenario(scenario);
  const int I = m.n_conventional();
  const double beta = m.demand().beta_spot[scenario];
  std::vector<double> res(I, 0.0);
  for (int i = 0; i < I; ++i) {
    const double slope = -beta * (1.0 + m.conduct().delta[i]);  // conjectured dP/dq_own
    const double b = m.conventional(i).cost_b[scenario];
    const double c = m.conventional(i).cost_c[scenario];
    const double q = q_spot_conventional[i];
    const double qf = q_futures.empty() ? 0.0 : q_futures[i];
    switch (m.model()) {
      case MarketModel::GM:
        res[i] = slope * q + price - b - c * (qf + q);
        break;
      case MarketModel::CFD:
        res[i] = -qf * slope + slope * q + price - b - c * q;
        break;
      case MarketModel::SpotOnly:
        res[i] = slope * q + price - b - c * q;
        break;
    }
  }
  return res;
}

SpotScenario best_response_oracle(const MarketInstance& m, int scenario,
                                  std::span<const double> q_futures) {
  m.require_scenario(scenario);
  if (m.model() != MarketModel::SpotOnly) require_futures_size(m, q_futures);
  check_singularity_guard(m);

  const int I = m.n_conventional();
  const int J = m.n_res();
  const int w = scenario;
  const double beta = m.demand().beta_spot[w];
  const double gamma_hat = m.gamma_hat(w);
  const bool gm = m.model() == MarketModel::GM;
  const bool cfd = m.model() == MarketModel::CFD;

  double qf_conv = 0.0;
  if (gm) {
    for (int i = 0; i < I; ++i) qf_conv += q_futures[i];
  }

  std::vector<double> q(I, 0.0);
  constexpr int kMaxSweeps = 100000;
  constexpr double kQuantityTol = 1e-10;
  int sweeps = 0;
  double max_change = 0.0;
  for (sweeps = 1; sweeps <= kMaxSweeps; ++sweeps) {
    max_change = 0.0;
    for (int i = 0; i < I; ++i) {
      const double delta_i = m.conduct().delta[i];
      const double b = m.conventional(i).cost_b[w];
      const double c = m.conventional(i).cost_c[w];
      const double qf = (gm || cfd) ? q_futures[i] : 0.0;
      double rivals = 0.0;
      for (int k = 0; k < I; ++k) {
        if (k != i) rivals += q[k];
      }
      // Own first-order condition solved exactly against the raw demand
      // curve, rivals held at their current iterates.
      double numer;
      if (gm) {
        numer = gamma_hat - beta * rivals - beta * qf_conv - b - c * qf;
      } else if (cfd) {
        numer = gamma_hat - beta * rivals - b + beta * (1.0 + delta_i) * qf;
      } else {
        numer = gamma_hat - beta * rivals - b;
      }
      const double denom = beta * (2.0 + delta_i) + c;
      const double updated = numer / denom;
      max_change = std::max(max_change, std::abs(updated - q[i]));
      q[i] = updated;
    }
    if (max_change < kQuantityTol) break;
  }
  if (max_change >= kQuantityTol) {
    double q_sum = 0.0;
    for (double v : q) q_sum += v;
    throw ConvergenceError("best_response_oracle: no fixed point after " +
                           std::to_string(kMaxSweeps) + " sweeps (last max change " +
                           std::to_string(max_change) + ", sum of quantities " +
                           std::to_string(q_sum) + ")");
  }

  SpotScenario out;
  out.iterations = sweeps;
  out.q.resize(I + J);
  out.tau.resize(I);
  double q_sum = 0.0;
  for (int i = 0; i < I; ++i) {
    out.q[i] = q[i];
    q_sum += q[i];
    out.tau[i] = 1.0 / (beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w]);
  }
  double tau_sum = 0.0;
  for (double t : out.tau) tau_sum += t;
  out.phi_aux = 1.0 / (1.0 + beta * tau_sum);
  out.price = gamma_hat - beta * (q_sum + (gm ? qf_conv : 0.0));
  for (int j = 0; j < J; ++j) {
    out.q[I + j] = m.res(j).capacity[w] - ((gm || cfd) ? q_futures[I + j] : 0.0);
    if (m.model() == MarketModel::SpotOnly) out.q[I + j] = m.res(j).capacity[w];
  }

  const auto foc =
      spot_foc_residuals(m, w, out.price, std::span<const double>(q.data(), q.size()), q_futures);
  for (double r : foc) {
    if (std::abs(r) >= 1e-6) {
      throw ConvergenceError("best_response_oracle: stationarity residual " + std::to_string(r) +
                             " at fixed point");
    }
  }
  return out;
}

}  // namespace futspot
