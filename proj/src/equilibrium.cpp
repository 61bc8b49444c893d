#include "futspot/equilibrium.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "futspot/spot.hpp"

namespace futspot {

namespace {

double kahan_sum(std::span<const double> values) {
  double sum = 0.0, comp = 0.0;
  for (double v : values) {
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

void require_probabilities(std::span<const double> sigma) {
  if (std::abs(kahan_sum(sigma) - 1.0) > 1e-12) {
    throw ValidationError("probability vector does not sum to 1");
  }
}

std::vector<int> order_by_profit(std::span<const double> profits) {
  std::vector<int> idx(profits.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return profits[a] < profits[b]; });
  return idx;
}

std::vector<std::vector<double>> profit_matrix(const MarketInstance& m,
                                               std::span<const double> q_futures, double pf,
                                               const SpotOutcome& spot) {
  const int n = m.n_generators();
  const int S = m.n_scenarios();
  std::vector<std::vector<double>> profits(static_cast<std::size_t>(n),
                                           std::vector<double>(static_cast<std::size_t>(S)));
  for (int k = 0; k < n; ++k) {
    for (int w = 0; w < S; ++w) {
      profits[k][w] = profit_raw(m, w, pf, q_futures[k], spot.price[w], spot.q[k][w], k);
    }
  }
  return profits;
}

}  // namespace

void RiskConfig::validate() const {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ValidationError("RiskConfig: phi must lie in [0,1]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("RiskConfig: alpha must lie in (0,1)");
}

CvarAuxiliaries optimal_cvar_auxiliaries(std::span<const double> profits,
                                         std::span<const double> sigma, double alpha) {
  if (profits.empty()) throw ValidationError("optimal_cvar_auxiliaries: empty profit vector");
  if (profits.size() != sigma.size()) {
    throw DimensionError("optimal_cvar_auxiliaries: profits/sigma size mismatch");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  const auto idx = order_by_profit(profits);
  const double target = 1.0 - alpha;
  double cum = 0.0;
  double xi = profits[idx.back()];
  for (int i : idx) {
    cum += sigma[i];
    if (cum >= target - 1e-9) {
      xi = profits[i];
      break;
    }
  }
  CvarAuxiliaries aux;
  aux.xi = xi;
  aux.eta.resize(profits.size());
  for (std::size_t w = 0; w < profits.size(); ++w) {
    aux.eta[w] = std::max(0.0, xi - profits[w]);
  }
  return aux;
}

double cvar_objective(std::span<const double> profits, std::span<const double> sigma,
                      const RiskConfig& risk, double xi, std::span<const double> eta) {
  risk.validate();
  if (profits.size() != sigma.size() || profits.size() != eta.size()) {
    throw DimensionError("cvar_objective: inconsistent vector sizes");
  }
  require_probabilities(sigma);
  double scale = 1.0;
  for (double p : profits) scale = std::max(scale, std::abs(p));
  for (std::size_t w = 0; w < eta.size(); ++w) {
    if (eta[w] < -1e-9 * scale || eta[w] + profits[w] - xi < -1e-9 * scale) {
      throw ValidationError("cvar_objective: infeasible auxiliaries");
    }
  }
  double expected = 0.0, shortfall = 0.0;
  for (std::size_t w = 0; w < profits.size(); ++w) {
    expected += sigma[w] * profits[w];
    shortfall += sigma[w] * eta[w];
  }
  return (1.0 - risk.phi) * expected + risk.phi * (xi - shortfall / (1.0 - risk.alpha));
}

double cvar_value(std::span<const double> profits, std::span<const double> sigma, double alpha) {
  const CvarAuxiliaries aux = optimal_cvar_auxiliaries(profits, sigma, alpha);
  RiskConfig risk{1.0, alpha};
  return cvar_objective(profits, sigma, risk, aux.xi, aux.eta);
}

std::vector<double> cvar_tail_duals(std::span<const double> profits,
                                    std::span<const double> sigma, const RiskConfig& risk,
                                    double xi) {
  risk.validate();
  if (profits.size() != sigma.size()) {
    throw DimensionError("cvar_tail_duals: profits/sigma size mismatch");
  }
  const std::size_t S = profits.size();
  std::vector<double> mu(S, 0.0);
  if (risk.phi == 0.0) return mu;

  double scale = 1.0;
  for (double p : profits) scale = std::max(scale, std::abs(p));
  const double tie_tol = 1e-9 * scale;
  const double inv = 1.0 / (1.0 - risk.alpha);

  double below_mass = 0.0;
  for (std::size_t w = 0; w < S; ++w) {
    if (profits[w] < xi - tie_tol) {
      mu[w] = risk.phi * sigma[w] * inv;
      below_mass += mu[w];
    }
  }
  double remainder = risk.phi - below_mass;
  for (std::size_t w = 0; w < S && remainder > 0.0; ++w) {
    if (std::abs(profits[w] - xi) <= tie_tol) {
      const double cap = risk.phi * sigma[w] * inv;
      const double take = std::min(cap, remainder);
      mu[w] = take;
      remainder -= take;
    }
  }
  if (remainder > 1e-9 * risk.phi) {
    throw Error("cvar_tail_duals: xi is not a (1-alpha)-quantile of the profit distribution");
  }
  return mu;
}

double KktResiduals::max_stationarity() const {
  double m = 0.0;
  for (const auto& g : generators) {
    m = std::max({m, g.stationarity_qf, g.stationarity_eta, g.stationarity_xi});
  }
  return m;
}

double KktResiduals::max_complementarity() const {
  double m = 0.0;
  for (const auto& g : generators) {
    m = std::max({m, g.comp_tail, g.comp_eta, g.comp_lower, g.comp_upper});
  }
  return m;
}

double KktResiduals::max_sign_violation() const {
  double m = 0.0;
  for (const auto& g : generators) m = std::max(m, g.sign_violation);
  return m;
}

KktResiduals kkt_residuals(const MarketInstance& m, const RiskConfig& risk,
                           const EquilibriumSolution& cand, double profit_scale) {
  risk.validate();
  const int n = m.n_generators();
  const int S = m.n_scenarios();
  const double inv_scale = 1.0 / profit_scale;
  const std::vector<double>& qf = cand.decision.q_futures;
  if (static_cast<int>(qf.size()) != n) {
    throw DimensionError("kkt_residuals: candidate has wrong generator count");
  }

  const SpotOutcome spot = solve_spot(m, qf);
  const PartialBundle partials = futures_partials(m);
  const auto gradients = all_profit_gradients(m, qf, spot, partials);

  KktResiduals out;
  out.generators.resize(n);
  double objective = 0.0;
  for (int k = 0; k < n; ++k) {
    auto& r = out.generators[k];
    const auto& sig = m.sigma(k);
    const double lo = m.futures_lower(k);
    const double hi = m.futures_upper(k);
    const double span = 1.0 + hi - lo;

    double weighted_grad = 0.0;
    double mu_sum = 0.0;
    for (int w = 0; w < S; ++w) {
      weighted_grad += ((1.0 - risk.phi) * sig[w] + cand.mu[k][w]) * gradients[k][w];
      mu_sum += cand.mu[k][w];
      const double stat_eta =
          risk.phi * sig[w] / (1.0 - risk.alpha) - cand.mu[k][w] - cand.theta[k][w];
      r.stationarity_eta = std::max(r.stationarity_eta, std::abs(stat_eta));
      const double slack = cand.eta[k][w] + cand.profits[k][w] - cand.xi[k];
      r.comp_tail = std::max(r.comp_tail, std::abs(cand.mu[k][w] * slack) * inv_scale);
      r.comp_eta = std::max(r.comp_eta, std::abs(cand.eta[k][w] * cand.theta[k][w]) * inv_scale);
      objective += (cand.mu[k][w] * slack + cand.eta[k][w] * cand.theta[k][w]) * inv_scale;
      r.sign_violation = std::max({r.sign_violation, -cand.eta[k][w] * inv_scale,
                                   -cand.mu[k][w], -cand.theta[k][w], -slack * inv_scale});
    }
    r.stationarity_qf =
        std::abs(-weighted_grad - cand.nu_min[k] + cand.nu_max[k]) * inv_scale;
    r.stationarity_xi = std::abs(-risk.phi + mu_sum);
    r.comp_lower = std::abs((qf[k] - lo) * cand.nu_min[k]) * inv_scale;
    r.comp_upper = std::abs((hi - qf[k]) * cand.nu_max[k]) * inv_scale;
    objective += ((qf[k] - lo) * cand.nu_min[k] + (hi - qf[k]) * cand.nu_max[k]) * inv_scale;
    r.sign_violation = std::max({r.sign_violation, -cand.nu_min[k] * inv_scale,
                                 -cand.nu_max[k] * inv_scale, (lo - qf[k]) / span,
                                 (qf[k] - hi) / span});
  }
  out.objective = objective;
  return out;
}

NlpDescription::NlpDescription(const MarketInstance& instance, RiskConfig risk,
                               double profit_scale)
    : m_(&instance), risk_(risk), scale_(profit_scale) {
  risk_.validate();
  if (instance.model() == MarketModel::SpotOnly) {
    throw DegenerateModelError("assemble_nlp: SpotOnly has no futures stage");
  }
  n_ = instance.n_generators();
  s_ = instance.n_scenarios();
}

NlpDescription assemble_nlp(const MarketInstance& instance, const RiskConfig& risk,
                            double profit_scale) {
  return NlpDescription(instance, risk, profit_scale);
}

std::vector<double> NlpDescription::pack(const EquilibriumSolution& sol) const {
  std::vector<double> x(static_cast<std::size_t>(n_variables()), 0.0);
  for (int k = 0; k < n_; ++k) {
    x[qf_offset() + k] = sol.decision.q_futures[k];
    x[xi_offset() + k] = sol.xi[k];
    x[nu_min_offset() + k] = sol.nu_min[k];
    x[nu_max_offset() + k] = sol.nu_max[k];
    for (int w = 0; w < s_; ++w) {
      x[eta_offset() + k * s_ + w] = sol.eta[k][w];
      x[mu_offset() + k * s_ + w] = sol.mu[k][w];
      x[theta_offset() + k * s_ + w] = sol.theta[k][w];
    }
  }
  return x;
}

double NlpDescription::objective(std::span<const double> x) const {
  const std::span<const double> qf = x.subspan(qf_offset(), n_);
  const double pf = futures_price(*m_, qf);
  const SpotOutcome spot = solve_spot(*m_, qf);
  const auto profits = profit_matrix(*m_, qf, pf, spot);
  double obj = 0.0;
  const double inv_scale = 1.0 / scale_;
  for (int k = 0; k < n_; ++k) {
    for (int w = 0; w < s_; ++w) {
      const double eta = x[eta_offset() + k * s_ + w];
      const double mu = x[mu_offset() + k * s_ + w];
      const double theta = x[theta_offset() + k * s_ + w];
      const double slack = eta + profits[k][w] - x[xi_offset() + k];
      obj += (mu * slack + eta * theta) * inv_scale;
    }
    obj += ((qf[k] - m_->futures_lower(k)) * x[nu_min_offset() + k] +
            (m_->futures_upper(k) - qf[k]) * x[nu_max_offset() + k]) *
           inv_scale;
  }
  return obj;
}

std::vector<double> NlpDescription::equality_residuals(std::span<const double> x) const {
  const std::span<const double> qf = x.subspan(qf_offset(), n_);
  const SpotOutcome spot = solve_spot(*m_, qf);
  const PartialBundle partials = futures_partials(*m_);
  const auto gradients = all_profit_gradients(*m_, qf, spot, partials);
  std::vector<double> res;
  res.reserve(static_cast<std::size_t>(n_equalities()));
  const double inv_scale = 1.0 / scale_;
  for (int k = 0; k < n_; ++k) {
    double weighted = 0.0;
    double mu_sum = 0.0;
    for (int w = 0; w < s_; ++w) {
      const double mu = x[mu_offset() + k * s_ + w];
      weighted += ((1.0 - risk_.phi) * m_->sigma(k)[w] + mu) * gradients[k][w];
      mu_sum += mu;
    }
    res.push_back((-weighted - x[nu_min_offset() + k] + x[nu_max_offset() + k]) * inv_scale);
    for (int w = 0; w < s_; ++w) {
      res.push_back(risk_.phi * m_->sigma(k)[w] / (1.0 - risk_.alpha) -
                    x[mu_offset() + k * s_ + w] - x[theta_offset() + k * s_ + w]);
    }
    res.push_back(-risk_.phi + mu_sum);
  }
  return res;
}

double NlpDescription::max_inequality_violation(std::span<const double> x) const {
  const std::span<const double> qf = x.subspan(qf_offset(), n_);
  const double pf = futures_price(*m_, qf);
  const SpotOutcome spot = solve_spot(*m_, qf);
  const auto profits = profit_matrix(*m_, qf, pf, spot);
  double v = 0.0;
  const double inv_scale = 1.0 / scale_;
  for (int k = 0; k < n_; ++k) {
    for (int w = 0; w < s_; ++w) {
      const double eta = x[eta_offset() + k * s_ + w];
      const double slack = eta + profits[k][w] - x[xi_offset() + k];
      v = std::max({v, -eta * inv_scale, -slack * inv_scale, -x[mu_offset() + k * s_ + w],
                    -x[theta_offset() + k * s_ + w]});
    }
    const double span = 1.0 + m_->futures_upper(k) - m_->futures_lower(k);
    v = std::max({v, -x[nu_min_offset() + k] * inv_scale, -x[nu_max_offset() + k] * inv_scale,
                  (m_->futures_lower(k) - qf[k]) / span, (qf[k] - m_->futures_upper(k)) / span});
  }
  return v;
}

// ---------------------------------------------------------------------------
// Reduced-space solver. With the CVaR tail weights held fixed, the per-
// generator stationarity map is affine in the futures vector (the closed-
// form spot maps and gradients are), so a projected Newton step solves each
// smooth piece exactly; the outer loop re-selects the tail.
// ---------------------------------------------------------------------------

namespace {

constexpr double kStationarityTol = 1e-7;  // EUR/MWh, unscaled
constexpr double kBoundEps = 1e-9;

std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const int n = static_cast<int>(b.size());
  double max_entry = 1e-300;
  for (const auto& row : a) {
    for (double v : row) max_entry = std::max(max_entry, std::abs(v));
  }
  double ridge = 0.0;
  for (int attempt = 0; attempt < 6; ++attempt) {
    auto m = a;
    auto rhs = b;
    for (int i = 0; i < n; ++i) m[i][i] += ridge;
    bool ok = true;
    for (int col = 0; col < n && ok; ++col) {
      int pivot = col;
      for (int r = col + 1; r < n; ++r) {
        if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
      }
      if (std::abs(m[pivot][col]) < 1e-13 * max_entry) {
        ok = false;
        break;
      }
      std::swap(m[pivot], m[col]);
      std::swap(rhs[pivot], rhs[col]);
      for (int r = col + 1; r < n; ++r) {
        const double f = m[r][col] / m[col][col];
        for (int c = col; c < n; ++c) m[r][c] -= f * m[col][c];
        rhs[r] -= f * rhs[col];
      }
    }
    if (ok) {
      std::vector<double> x(n, 0.0);
      for (int r = n - 1; r >= 0; --r) {
        double s = rhs[r];
        for (int c = r + 1; c < n; ++c) s -= m[r][c] * x[c];
        x[r] = s / m[r][r];
      }
      bool finite = true;
      for (double v : x) finite = finite && std::isfinite(v);
      if (finite) return x;
    }
    ridge = (ridge == 0.0) ? 1e-8 * max_entry : ridge * 100.0;
  }
  throw Error("solve_dense: singular Newton system");
}

struct WorkingState {
  std::vector<double> q;
  double pf = 0.0;
  SpotOutcome spot;
  std::vector<std::vector<double>> gradients;
  std::vector<std::vector<double>> profits;
  std::vector<double> xi;
  std::vector<std::vector<double>> mu;
  std::vector<std::vector<double>> weights;  // (1-phi)*sigma + mu
  std::vector<double> stationarity;          // risk-adjusted marginal objective
};

/// Risk-adjusted stationarity of one generator at fixed profits/gradients.
/// At profit ties around the VaR the extreme dual selection may be unable
/// to zero the stationarity even though a valid dual exists; redistribute
/// the quantile mass inside the tie set when that closes the gap. mu is
/// updated in place.
double tail_stationarity(const RiskConfig& risk, std::span<const double> sigma,
                         std::span<const double> profits, std::span<const double> grads,
                         double xi, std::vector<double>& mu) {
  const std::size_t S = profits.size();
  double d = 0.0;
  for (std::size_t w = 0; w < S; ++w) {
    d += ((1.0 - risk.phi) * sigma[w] + mu[w]) * grads[w];
  }
  if (risk.phi == 0.0 || std::abs(d) <= kStationarityTol) return d;

  double scale = 1.0;
  for (double p : profits) scale = std::max(scale, std::abs(p));
  const double tie_tol = 1e-9 * scale;
  std::vector<int> ties;
  double tie_mass = 0.0;
  for (std::size_t w = 0; w < S; ++w) {
    if (std::abs(profits[w] - xi) <= tie_tol) {
      ties.push_back(static_cast<int>(w));
      tie_mass += mu[w];
    }
  }
  if (ties.size() < 2 || tie_mass <= 0.0) return d;

  double outside = d;
  for (int w : ties) outside -= mu[w] * grads[w];

  auto fill = [&](const std::vector<int>& order) {
    std::vector<double> alloc(ties.size(), 0.0);
    double remaining = tie_mass;
    for (int w : order) {
      if (remaining <= 0.0) break;
      const double cap = risk.phi * sigma[w] / (1.0 - risk.alpha);
      const double take = std::min(cap, remaining);
      for (std::size_t t = 0; t < ties.size(); ++t) {
        if (ties[t] == w) alloc[t] = take;
      }
      remaining -= take;
    }
    return alloc;
  };
  std::vector<int> asc = ties;
  std::sort(asc.begin(), asc.end(), [&](int a, int b) { return grads[a] < grads[b]; });
  std::vector<int> desc(asc.rbegin(), asc.rend());
  const auto alloc_lo = fill(asc);
  const auto alloc_hi = fill(desc);
  double d_lo = outside, d_hi = outside;
  for (std::size_t t = 0; t < ties.size(); ++t) {
    d_lo += alloc_lo[t] * grads[ties[t]];
    d_hi += alloc_hi[t] * grads[ties[t]];
  }
  if ((d_lo > 0.0 && d_hi > 0.0) || (d_lo < 0.0 && d_hi < 0.0)) {
    // Zero not reachable inside the tie polytope; keep the closer extreme.
    const bool lo_better = std::abs(d_lo) < std::abs(d_hi);
    const auto& alloc = lo_better ? alloc_lo : alloc_hi;
    for (std::size_t t = 0; t < ties.size(); ++t) mu[ties[t]] = alloc[t];
    return lo_better ? d_lo : d_hi;
  }
  const double span = d_hi - d_lo;
  const double blend = (span == 0.0) ? 0.0 : -d_lo / span;
  for (std::size_t t = 0; t < ties.size(); ++t) {
    mu[ties[t]] = (1.0 - blend) * alloc_lo[t] + blend * alloc_hi[t];
  }
  return 0.0;
}

class ReducedProblem {
 public:
  ReducedProblem(const MarketInstance& m, const RiskConfig& risk)
      : m_(m), risk_(risk), partials_(futures_partials(m)) {
    const int n = m.n_generators();
    lo_.resize(n);
    hi_.resize(n);
    for (int k = 0; k < n; ++k) {
      lo_[k] = m.futures_lower(k);
      hi_[k] = m.futures_upper(k);
    }
  }

  const MarketInstance& instance() const { return m_; }
  const RiskConfig& risk() const { return risk_; }
  const std::vector<double>& lower() const { return lo_; }
  const std::vector<double>& upper() const { return hi_; }

  std::vector<double> clamp(std::vector<double> q) const {
    for (std::size_t k = 0; k < q.size(); ++k) q[k] = std::clamp(q[k], lo_[k], hi_[k]);
    return q;
  }

  WorkingState evaluate(std::vector<double> q) const {
    WorkingState st;
    st.q = clamp(std::move(q));
    st.pf = futures_price(m_, st.q);
    st.spot = solve_spot(m_, st.q);
    st.gradients = all_profit_gradients(m_, st.q, st.spot, partials_);
    st.profits = profit_matrix(m_, st.q, st.pf, st.spot);
    const int n = m_.n_generators();
    const int S = m_.n_scenarios();
    st.xi.resize(n);
    st.mu.resize(n);
    st.weights.resize(n);
    st.stationarity.resize(n);
    for (int k = 0; k < n; ++k) {
      const auto& sig = m_.sigma(k);
      const auto aux = optimal_cvar_auxiliaries(st.profits[k], sig, risk_.alpha);
      st.xi[k] = aux.xi;
      st.mu[k] = cvar_tail_duals(st.profits[k], sig, risk_, aux.xi);
      st.stationarity[k] =
          tail_stationarity(risk_, sig, st.profits[k], st.gradients[k], st.xi[k], st.mu[k]);
      st.weights[k].resize(S);
      for (int w = 0; w < S; ++w) {
        st.weights[k][w] = (1.0 - risk_.phi) * sig[w] + st.mu[k][w];
      }
    }
    return st;
  }

  /// Stationarity of a single generator at q, with everything reselected.
  double stationarity_of(int k, std::span<const double> q) const {
    const SpotOutcome spot = solve_spot(m_, q);
    const auto gradients = all_profit_gradients(m_, q, spot, partials_);
    const double pf = futures_price(m_, q);
    const int S = m_.n_scenarios();
    std::vector<double> profits(S);
    for (int w = 0; w < S; ++w) {
      profits[w] = profit_raw(m_, w, pf, q[k], spot.price[w], spot.q[k][w], k);
    }
    const auto& sig = m_.sigma(k);
    const auto aux = optimal_cvar_auxiliaries(profits, sig, risk_.alpha);
    std::vector<double> mu = cvar_tail_duals(profits, sig, risk_, aux.xi);
    return tail_stationarity(risk_, sig, profits, gradients[k], aux.xi, mu);
  }

  /// Stationarity residual respecting the bound KKT conditions. A pinned
  /// coordinate (lower bound equals upper bound) is always stationary.
  double residual(const WorkingState& st, int k) const {
    const double d = st.stationarity[k];
    const bool lower = at_lower(st.q[k], k);
    const bool upper = at_upper(st.q[k], k);
    if (lower && upper) return 0.0;
    if (lower) return std::max(0.0, d);
    if (upper) return std::max(0.0, -d);
    return std::abs(d);
  }

  double max_residual(const WorkingState& st) const {
    double r = 0.0;
    for (int k = 0; k < m_.n_generators(); ++k) r = std::max(r, residual(st, k));
    return r;
  }

  bool at_lower(double q, int k) const { return q <= lo_[k] + kBoundEps * (1.0 + std::abs(lo_[k])); }
  bool at_upper(double q, int k) const { return q >= hi_[k] - kBoundEps * (1.0 + std::abs(hi_[k])); }

  /// Stationarity map at arbitrary q with frozen tail weights.
  std::vector<double> frozen_map(std::span<const double> q,
                                 const std::vector<std::vector<double>>& weights) const {
    const SpotOutcome spot = solve_spot(m_, q);
    const auto gradients = all_profit_gradients(m_, q, spot, partials_);
    const int n = m_.n_generators();
    std::vector<double> d(n);
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t w = 0; w < gradients[k].size(); ++w) s += weights[k][w] * gradients[k][w];
      d[k] = s;
    }
    return d;
  }

 private:
  const MarketInstance& m_;
  RiskConfig risk_;
  PartialBundle partials_;
  std::vector<double> lo_;
  std::vector<double> hi_;
};

struct NewtonResult {
  WorkingState state;
  bool converged = false;
  int iterations = 0;
};

/// Damped Gauss-Seidel sweeps with an exact 1-D solve per generator. Each
/// generator's conjectured objective is concave in its own quantity, so
/// its stationarity is nonincreasing and bisection pins the optimum even
/// at CVaR kinks, where the bracket collapses onto the tie point and the
/// dual redistribution in tail_stationarity closes the residual.
bool gauss_seidel_polish(const ReducedProblem& problem, WorkingState& state, int max_sweeps) {
  const int n = problem.instance().n_generators();
  std::vector<double> q = state.q;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double moved = 0.0;
    for (int k = 0; k < n; ++k) {
      const double lo = problem.lower()[k];
      const double hi = problem.upper()[k];
      auto g = [&](double t) {
        std::vector<double> probe = q;
        probe[k] = t;
        return problem.stationarity_of(k, probe);
      };
      double target;
      if (g(lo) <= 0.0) {
        target = lo;
      } else if (g(hi) >= 0.0) {
        target = hi;
      } else {
        double a = lo, b = hi;
        target = 0.5 * (a + b);
        for (int it = 0; it < 80 && (b - a) > 1e-12 * (1.0 + std::abs(b)); ++it) {
          const double mid = 0.5 * (a + b);
          const double gm = g(mid);
          if (gm == 0.0) {
            // Inside the redistributed tie plateau; stay there rather than
            // converging onto its edge.
            a = b = mid;
            break;
          }
          (gm > 0.0 ? a : b) = mid;
        }
        target = 0.5 * (a + b);
      }
      const double gap = std::abs(target - q[k]);
      moved = std::max(moved, gap);
      const double step = gap < 1e-6 * (1.0 + std::abs(q[k])) ? 1.0 : 0.9;
      q[k] = q[k] + step * (target - q[k]);
    }
    state = problem.evaluate(q);
    q = state.q;
    if (problem.max_residual(state) < kStationarityTol) return true;
    if (moved < 1e-11 * (1.0 + std::abs(q[0]))) break;
  }
  return problem.max_residual(state) < kStationarityTol;
}

NewtonResult projected_newton(const ReducedProblem& problem, std::vector<double> start,
                              const SolverOptions& options) {
  const int n = problem.instance().n_generators();
  NewtonResult result;
  result.state = problem.evaluate(std::move(start));

  for (int iter = 1; iter <= options.max_outer; ++iter) {
    result.iterations = iter;
    const double rmax = problem.max_residual(result.state);
    if (rmax < kStationarityTol) {
      result.converged = true;
      return result;
    }

    // Jacobian of the frozen-weight stationarity map; the map is affine in
    // q, so unit-step forward differences are exact.
    const std::vector<double>& q = result.state.q;
    const std::vector<double> d0 = result.state.stationarity;
    std::vector<std::vector<double>> jac(n, std::vector<double>(n, 0.0));
    for (int m = 0; m < n; ++m) {
      std::vector<double> qp = q;
      const double h = 1.0;
      qp[m] += h;
      const auto dm = problem.frozen_map(qp, result.state.weights);
      for (int k = 0; k < n; ++k) jac[k][m] = (dm[k] - d0[k]) / h;
    }

    // Newton target D(q + delta) = 0 with bound handling: solve, clamp,
    // refix clamped coordinates, re-solve the free block.
    std::vector<double> target = q;
    std::vector<bool> fixed(n, false);
    for (int pass = 0; pass <= n; ++pass) {
      std::vector<int> free;
      for (int k = 0; k < n; ++k) {
        if (!fixed[k]) free.push_back(k);
      }
      if (!free.empty()) {
        std::vector<std::vector<double>> a(free.size(), std::vector<double>(free.size(), 0.0));
        std::vector<double> rhs(free.size(), 0.0);
        for (std::size_t r = 0; r < free.size(); ++r) {
          double b = -d0[free[r]];
          for (int k = 0; k < n; ++k) {
            if (fixed[k]) b -= jac[free[r]][k] * (target[k] - q[k]);
          }
          rhs[r] = b;
          for (std::size_t c = 0; c < free.size(); ++c) a[r][c] = jac[free[r]][free[c]];
        }
        const auto delta_free = solve_dense(std::move(a), std::move(rhs));
        for (std::size_t r = 0; r < free.size(); ++r) {
          target[free[r]] = q[free[r]] + delta_free[r];
        }
      }
      bool clamped_any = false;
      for (int k = 0; k < n; ++k) {
        if (fixed[k]) continue;
        const double lo = problem.lower()[k];
        const double hi = problem.upper()[k];
        if (target[k] < lo || target[k] > hi) {
          target[k] = std::clamp(target[k], lo, hi);
          fixed[k] = true;
          clamped_any = true;
        }
      }
      if (!clamped_any) break;
    }

    // Backtracking on the true (re-selected weights) residual.
    bool accepted = false;
    double t = 1.0;
    for (int inner = 0; inner < options.max_inner; ++inner) {
      std::vector<double> trial(n);
      for (int k = 0; k < n; ++k) trial[k] = q[k] + t * (target[k] - q[k]);
      WorkingState trial_state = problem.evaluate(std::move(trial));
      const double trial_r = problem.max_residual(trial_state);
      if (trial_r < rmax * (1.0 - 1e-6) || trial_r < kStationarityTol) {
        result.state = std::move(trial_state);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Newton stalled (typically at a CVaR kink); switch to coordinate
      // sweeps with an exact 1-D solve.
      result.converged = gauss_seidel_polish(problem, result.state, 80);
      return result;
    }
  }
  result.converged = problem.max_residual(result.state) < kStationarityTol;
  if (!result.converged) {
    result.converged = gauss_seidel_polish(problem, result.state, 80);
  }
  return result;
}

EquilibriumSolution build_solution(const ReducedProblem& problem, const WorkingState& st,
                                   const RiskConfig& risk, double profit_scale) {
  const MarketInstance& m = problem.instance();
  const int n = m.n_generators();
  const int S = m.n_scenarios();
  EquilibriumSolution sol;
  sol.decision = make_futures_decision(m, st.q);
  sol.profits = st.profits;
  sol.xi = st.xi;
  sol.mu = st.mu;
  sol.eta.assign(n, std::vector<double>(S, 0.0));
  sol.theta.assign(n, std::vector<double>(S, 0.0));
  sol.nu_min.assign(n, 0.0);
  sol.nu_max.assign(n, 0.0);
  for (int k = 0; k < n; ++k) {
    for (int w = 0; w < S; ++w) {
      sol.eta[k][w] = std::max(0.0, st.xi[k] - st.profits[k][w]);
      sol.theta[k][w] =
          risk.phi * m.sigma(k)[w] / (1.0 - risk.alpha) - st.mu[k][w];
      if (std::abs(sol.theta[k][w]) < 1e-15) sol.theta[k][w] = 0.0;
    }
    const double d = st.stationarity[k];
    if (problem.at_upper(st.q[k], k) && d > 0.0) {
      sol.nu_max[k] = d;
    } else if (problem.at_lower(st.q[k], k) && d < 0.0) {
      sol.nu_min[k] = -d;
    }
  }
  NlpDescription nlp(m, risk, profit_scale);
  sol.objective_residual = nlp.objective(nlp.pack(sol));
  return sol;
}

std::vector<double> risk_neutral_start(const ReducedProblem& problem,
                                       const SolverOptions& options) {
  std::vector<double> mid(problem.lower().size());
  for (std::size_t k = 0; k < mid.size(); ++k) {
    mid[k] = 0.5 * (problem.lower()[k] + problem.upper()[k]);
  }
  if (problem.risk().phi == 0.0) return mid;
  RiskConfig neutral{0.0, problem.risk().alpha};
  ReducedProblem rn(problem.instance(), neutral);
  SolverOptions rn_options = options;
  rn_options.max_outer = std::min(options.max_outer, 60);
  const NewtonResult res = projected_newton(rn, mid, rn_options);
  return res.converged ? res.state.q : mid;
}

}  // namespace

EquilibriumSolution solve(const MarketInstance& m, const RiskConfig& risk,
                          const SolverOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  risk.validate();
  if (m.model() == MarketModel::SpotOnly) {
    throw DegenerateModelError("solve: SpotOnly has no futures stage");
  }
  check_singularity_guard(m);
  const int n = m.n_generators();
  for (int k = 0; k < n; ++k) {
    if (m.futures_lower(k) > m.futures_upper(k)) {
      throw ValidationError("solve: q_futures_min exceeds q_futures_max for generator " +
                            std::to_string(k));
    }
  }

  ReducedProblem problem(m, risk);
  NlpDescription nlp(m, risk, options.profit_scale);
  std::mt19937_64 engine(options.seed);

  std::vector<std::vector<double>> starts;
  starts.push_back(risk_neutral_start(problem, options));
  for (int s = 1; s < options.start_count; ++s) {
    std::vector<double> q(n);
    for (int k = 0; k < n; ++k) {
      const double u =
          (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
      q[k] = problem.lower()[k] + u * (problem.upper()[k] - problem.lower()[k]);
    }
    starts.push_back(std::move(q));
  }

  SolveReport report;
  report.starts_attempted = static_cast<int>(starts.size());
  int best = -1;
  double best_objective = 0.0;
  double best_norm = 0.0;
  EquilibriumSolution best_solution;

  for (std::size_t s = 0; s < starts.size(); ++s) {
    StartDiagnostics diag;
    diag.index = static_cast<int>(s);
    NewtonResult res;
    try {
      res = projected_newton(problem, starts[s], options);
    } catch (const Error&) {
      // A start may hit a numerically degenerate corner; record it and
      // move on, only the aggregate outcome matters.
      res.state = problem.evaluate(starts[s]);
      res.converged = false;
    }
    diag.iterations = res.iterations;
    diag.stationarity = problem.max_residual(res.state);
    diag.q_futures = res.state.q;
    double norm = 0.0;
    for (double q : res.state.q) norm += q * q;
    diag.q_norm = std::sqrt(norm);
    if (res.converged) {
      EquilibriumSolution sol = build_solution(problem, res.state, risk, options.profit_scale);
      const auto eq = nlp.equality_residuals(nlp.pack(sol));
      double eq_max = 0.0;
      for (double r : eq) eq_max = std::max(eq_max, std::abs(r));
      diag.objective_scaled = sol.objective_residual;
      if (sol.objective_residual <= options.tolerance && eq_max <= options.tolerance) {
        diag.converged = true;
        report.starts_converged++;
        const bool better =
            best < 0 || sol.objective_residual < best_objective - 1e-18 ||
            (std::abs(sol.objective_residual - best_objective) <= 1e-18 &&
             diag.q_norm < best_norm - 1e-12);
        if (better) {
          best = static_cast<int>(s);
          best_objective = sol.objective_residual;
          best_norm = diag.q_norm;
          best_solution = std::move(sol);
          best_solution.report.iterations = res.iterations;
        }
      }
    }
    report.starts.push_back(std::move(diag));
  }

  const auto t1 = std::chrono::steady_clock::now();
  report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  if (best < 0) {
    throw SolveFailure("solve: no start reached the acceptance thresholds (" +
                           std::to_string(starts.size()) + " starts attempted)",
                       report);
  }
  report.accepted_start = best;
  report.iterations = best_solution.report.iterations;
  best_solution.report = report;
  return best_solution;
}

}  // namespace futspot
