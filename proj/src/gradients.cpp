#include "futspot/gradients.hpp"

#include "futspot/spot.hpp"

namespace futspot {

namespace {

std::vector<double> futures_price_partials(const MarketInstance& m) {
  const int n = m.n_generators();
  std::vector<double> d(n);
  for (int k = 0; k < n; ++k) {
    d[k] = -m.demand().beta_futures * (1.0 + (n - 1) * m.conduct().psi[k]);
  }
  return d;
}

PartialBundle make_bundle(const MarketInstance& m) {
  const std::size_t S = static_cast<std::size_t>(m.n_scenarios());
  PartialBundle b;
  b.dprice_futures = futures_price_partials(m);
  b.dprice_spot.assign(static_cast<std::size_t>(m.n_generators()), std::vector<double>(S, 0.0));
  b.dq_spot.assign(static_cast<std::size_t>(m.n_generators()), std::vector<double>(S, 0.0));
  for (int j = m.n_conventional(); j < m.n_generators(); ++j) {
    for (std::size_t w = 0; w < S; ++w) b.dq_spot[j][w] = -1.0;
  }
  return b;
}

}  // namespace

PartialBundle gm_partials(const MarketInstance& m) {
  if (m.model() != MarketModel::GM) throw DegenerateModelError("gm_partials: model is not GM");
  check_singularity_guard(m);
  PartialBundle b = make_bundle(m);
  const int I = m.n_conventional();
  for (int w = 0; w < m.n_scenarios(); ++w) {
    const double beta = m.demand().beta_spot[w];
    std::vector<double> tau(I);
    double tau_sum = 0.0;
    for (int i = 0; i < I; ++i) {
      tau[i] = 1.0 / (beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w]);
      tau_sum += tau[i];
    }
    const double phi = 1.0 / (1.0 + beta * tau_sum);
    double ct_sum = 0.0;  // sum_k c_k * tau_k
    for (int i = 0; i < I; ++i) ct_sum += m.conventional(i).cost_c[w] * tau[i];
    for (int i = 0; i < I; ++i) {
      const double psi = m.conduct().psi[i];
      const double own_ct = m.conventional(i).cost_c[w] * tau[i];
      const double dps = phi * (-beta * (1.0 + (I - 1) * psi)) +
                         phi * beta * (own_ct + psi * (ct_sum - own_ct));
      b.dprice_spot[i][w] = dps;
      b.dq_spot[i][w] = tau[i] * (dps - m.conventional(i).cost_c[w]);
    }
  }
  return b;
}

PartialBundle cfd_partials(const MarketInstance& m) {
  if (m.model() != MarketModel::CFD) throw DegenerateModelError("cfd_partials: model is not CFD");
  check_singularity_guard(m);
  PartialBundle b = make_bundle(m);
  const int I = m.n_conventional();
  for (int w = 0; w < m.n_scenarios(); ++w) {
    const double beta = m.demand().beta_spot[w];
    std::vector<double> bt(I);  // beta*(1+delta_k)*tau_k
    double bt_sum = 0.0;
    for (int i = 0; i < I; ++i) {
      const double tau = 1.0 / (beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w]);
      bt[i] = beta * (1.0 + m.conduct().delta[i]) * tau;
      bt_sum += bt[i];
    }
    double tau_sum = 0.0;
    for (int i = 0; i < I; ++i) {
      tau_sum += 1.0 / (beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w]);
    }
    const double phi = 1.0 / (1.0 + beta * tau_sum);
    for (int i = 0; i < I; ++i) {
      const double psi = m.conduct().psi[i];
      const double tau = 1.0 / (beta * (1.0 + m.conduct().delta[i]) + m.conventional(i).cost_c[w]);
      const double dps = phi * (-beta) * (bt[i] + psi * (bt_sum - bt[i]));
      b.dprice_spot[i][w] = dps;
      b.dq_spot[i][w] = tau * (dps + beta * (1.0 + m.conduct().delta[i]));
    }
  }
  return b;
}

PartialBundle futures_partials(const MarketInstance& m) {
  switch (m.model()) {
    case MarketModel::GM: return gm_partials(m);
    case MarketModel::CFD: return cfd_partials(m);
    case MarketModel::SpotOnly:
      throw DegenerateModelError("futures_partials: SpotOnly has no futures stage");
  }
  throw Error("futures_partials: unreachable");
}

std::vector<std::vector<double>> all_profit_gradients(const MarketInstance& m,
                                                      std::span<const double> q_futures,
                                                      const SpotOutcome& spot,
                                                      const PartialBundle& partials) {
  const int I = m.n_conventional();
  const int n = m.n_generators();
  const int S = m.n_scenarios();
  const double pf = futures_price(m, q_futures);
  std::vector<std::vector<double>> g(static_cast<std::size_t>(n),
                                     std::vector<double>(static_cast<std::size_t>(S), 0.0));
  for (int w = 0; w < S; ++w) {
    const double ps = spot.price[w];
    for (int i = 0; i < I; ++i) {
      const double b = m.conventional(i).cost_b[w];
      const double c = m.conventional(i).cost_c[w];
      const double qs = spot.q[i][w];
      const double qf = q_futures[i];
      const double dpf = partials.dprice_futures[i];
      const double dps = partials.dprice_spot[i][w];
      const double dqs = partials.dq_spot[i][w];
      if (m.model() == MarketModel::GM) {
        g[i][w] = dpf * qf + pf + dps * qs + ps * dqs - b * (1.0 + dqs) -
                  c * (qf + qs) * (1.0 + dqs);
      } else {
        g[i][w] = (dpf - dps) * qf + pf - ps + dps * qs + (ps - b - c * qs) * dqs;
      }
    }
    for (int k = I; k < n; ++k) {
      g[k][w] = partials.dprice_futures[k] * q_futures[k] + pf - ps;
    }
  }
  return g;
}

std::vector<double> profit_gradient(const MarketInstance& m, std::span<const double> q_futures,
                                    int generator) {
  if (m.model() == MarketModel::SpotOnly) {
    throw DegenerateModelError("profit_gradient: SpotOnly has no futures stage");
  }
  if (generator < 0 || generator >= m.n_generators()) {
    throw DimensionError("profit_gradient: unknown generator id");
  }
  const SpotOutcome spot = solve_spot(m, q_futures);
  const PartialBundle partials = futures_partials(m);
  auto g = all_profit_gradients(m, q_futures, spot, partials);
  return g[generator];
}

}  // namespace futspot
