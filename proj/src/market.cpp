#include "futspot/market.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

namespace futspot {

namespace {

constexpr double kProbabilityTol = 1e-12;

void require_same_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(want) +
                         " entries, got " + std::to_string(got));
  }
}

void check_bounds(double lo, double hi, const char* what) {
  if (!(lo >= 0.0) || !(lo <= hi)) {
    throw ValidationError(std::string(what) + ": futures bounds must satisfy 0 <= min <= max (got [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "])");
  }
}

}  // namespace

const char* to_string(MarketModel model) {
  switch (model) {
    case MarketModel::GM: return "gm";
    case MarketModel::CFD: return "cfd";
    case MarketModel::SpotOnly: return "spot-only";
  }
  return "?";
}

ConductParams ConductParams::cournot(int n_conventional, int n_res) {
  ConductParams p;
  p.delta.assign(static_cast<std::size_t>(n_conventional), 0.0);
  p.psi.assign(static_cast<std::size_t>(n_conventional + n_res), 0.0);
  return p;
}

ConductParams ConductParams::perfect_competition(int n_conventional, int n_res) {
  ConductParams p;
  p.delta.assign(static_cast<std::size_t>(n_conventional), -1.0);
  const int rivals = n_conventional + n_res - 1;
  // With a single generator there are no rivals and psi never enters.
  const double psi = rivals > 0 ? -1.0 / rivals : 0.0;
  p.psi.assign(static_cast<std::size_t>(n_conventional + n_res), psi);
  return p;
}

MarketInstance::MarketInstance(MarketModel model, std::vector<ConventionalGenerator> conventional,
                               std::vector<ResGenerator> res, DemandCurves demand,
                               ConductParams conduct, std::vector<std::vector<double>> sigma)
    : model_(model),
      conventional_(std::move(conventional)),
      res_(std::move(res)),
      demand_(std::move(demand)),
      conduct_(std::move(conduct)),
      sigma_(std::move(sigma)) {
  if (conventional_.empty()) {
    throw ValidationError("MarketInstance: at least one conventional generator required");
  }
  if (demand_.gamma_spot.empty()) {
    throw ValidationError("MarketInstance: no scenarios");
  }
  n_scenarios_ = static_cast<int>(demand_.gamma_spot.size());
  const std::size_t S = static_cast<std::size_t>(n_scenarios_);

  if (!(demand_.beta_futures > 0.0) || !(demand_.gamma_futures > 0.0)) {
    throw ValidationError("DemandCurves: futures intercept and slope must be positive");
  }
  require_same_size(demand_.beta_spot.size(), S, "DemandCurves.beta_spot");
  for (std::size_t w = 0; w < S; ++w) {
    if (!(demand_.gamma_spot[w] > 0.0) || !(demand_.beta_spot[w] > 0.0)) {
      throw ValidationError("DemandCurves: spot intercept/slope must be positive in scenario " +
                            std::to_string(w));
    }
  }

  for (std::size_t i = 0; i < conventional_.size(); ++i) {
    const auto& g = conventional_[i];
    require_same_size(g.cost_a.size(), S, "ConventionalGenerator.cost_a");
    require_same_size(g.cost_b.size(), S, "ConventionalGenerator.cost_b");
    require_same_size(g.cost_c.size(), S, "ConventionalGenerator.cost_c");
    for (std::size_t w = 0; w < S; ++w) {
      if (g.cost_b[w] < 0.0 || g.cost_c[w] < 0.0) {
        throw ValidationError("ConventionalGenerator " + std::to_string(i) +
                              ": cost_b and cost_c must be nonnegative in every scenario");
      }
    }
    check_bounds(g.q_futures_min, g.q_futures_max, "ConventionalGenerator");
  }
  for (std::size_t j = 0; j < res_.size(); ++j) {
    const auto& g = res_[j];
    require_same_size(g.capacity.size(), S, "ResGenerator.capacity");
    for (double cap : g.capacity) {
      if (cap < 0.0) {
        throw ValidationError("ResGenerator " + std::to_string(j) + ": capacity must be nonnegative");
      }
    }
    check_bounds(g.q_futures_min, g.q_futures_max, "ResGenerator");
  }

  const int n = n_generators();
  require_same_size(conduct_.delta.size(), conventional_.size(), "ConductParams.delta");
  require_same_size(conduct_.psi.size(), static_cast<std::size_t>(n), "ConductParams.psi");
  for (double d : conduct_.delta) {
    if (d < -1.0) throw ValidationError("ConductParams: delta must be >= -1");
  }
  if (n > 1) {
    const double psi_floor = -1.0 / (n - 1);
    for (double p : conduct_.psi) {
      if (p < psi_floor - 1e-15) {
        throw ValidationError("ConductParams: psi must be >= -1/(I+J-1)");
      }
    }
  }

  if (sigma_.empty()) {
    sigma_.assign(static_cast<std::size_t>(n), std::vector<double>(S, 1.0 / n_scenarios_));
  }
  require_same_size(sigma_.size(), static_cast<std::size_t>(n), "sigma");
  for (int k = 0; k < n; ++k) {
    require_same_size(sigma_[k].size(), S, "sigma[k]");
    double sum = 0.0;
    for (double s : sigma_[k]) {
      if (s < 0.0) throw ValidationError("sigma: probabilities must be nonnegative");
      sum += s;
    }
    if (std::abs(sum - 1.0) > kProbabilityTol * n_scenarios_) {
      throw ValidationError("sigma: probabilities of generator " + std::to_string(k) +
                            " sum to " + std::to_string(sum));
    }
  }
}

double MarketInstance::gamma_hat(int w) const {
  return demand_.gamma_spot[w] - demand_.beta_spot[w] * total_res_capacity(w);
}

double MarketInstance::total_res_capacity(int w) const {
  double total = 0.0;
  for (const auto& g : res_) total += g.capacity[w];
  return total;
}

double MarketInstance::futures_lower(int k) const {
  return is_res(k) ? res_[k - n_conventional()].q_futures_min : conventional_[k].q_futures_min;
}

double MarketInstance::futures_upper(int k) const {
  return is_res(k) ? res_[k - n_conventional()].q_futures_max : conventional_[k].q_futures_max;
}

void MarketInstance::require_scenario(int w) const {
  if (w < 0 || w >= n_scenarios_) {
    throw DimensionError("scenario index " + std::to_string(w) + " out of range [0, " +
                         std::to_string(n_scenarios_) + ")");
  }
}

FuturesDecision make_futures_decision(const MarketInstance& instance,
                                      std::span<const double> q_futures) {
  FuturesDecision d;
  d.q_futures.assign(q_futures.begin(), q_futures.end());
  d.price_futures = futures_price(instance, q_futures);
  return d;
}

MarketInstance with_model(const MarketInstance& m, MarketModel model) {
  std::vector<ConventionalGenerator> conventional;
  conventional.reserve(m.n_conventional());
  for (int i = 0; i < m.n_conventional(); ++i) conventional.push_back(m.conventional(i));
  std::vector<ResGenerator> res;
  res.reserve(m.n_res());
  for (int j = 0; j < m.n_res(); ++j) res.push_back(m.res(j));
  std::vector<std::vector<double>> sigma;
  sigma.reserve(m.n_generators());
  for (int k = 0; k < m.n_generators(); ++k) sigma.push_back(m.sigma(k));
  return MarketInstance(model, std::move(conventional), std::move(res), m.demand(), m.conduct(),
                        std::move(sigma));
}

double futures_price(const MarketInstance& instance, std::span<const double> q_futures) {
  if (static_cast<int>(q_futures.size()) != instance.n_generators()) {
    throw DimensionError("futures_price: one quantity per generator required");
  }
  double total = 0.0;
  for (double q : q_futures) total += q;
  return instance.demand().gamma_futures - instance.demand().beta_futures * total;
}

double spot_demand_price(const MarketInstance& instance, int scenario,
                         std::span<const double> q_spot_conventional,
                         std::span<const double> q_futures) {
  instance.require_scenario(scenario);
  const int I = instance.n_conventional();
  if (static_cast<int>(q_spot_conventional.size()) != I) {
    throw DimensionError("spot_demand_price: one spot quantity per conventional generator required");
  }
  double supply = 0.0;
  for (double q : q_spot_conventional) supply += q;
  if (instance.model() == MarketModel::GM) {
    if (static_cast<int>(q_futures.size()) != instance.n_generators()) {
      throw DimensionError("spot_demand_price: one futures quantity per generator required");
    }
    for (int i = 0; i < I; ++i) supply += q_futures[i];
  }
  return instance.gamma_hat(scenario) - instance.demand().beta_spot[scenario] * supply;
}

double profit_raw(const MarketInstance& instance, int scenario, double price_futures,
                  double q_futures_own, double price_spot, double q_spot_own, int generator) {
  instance.require_scenario(scenario);
  if (generator < 0 || generator >= instance.n_generators()) {
    throw DimensionError("profit: unknown generator id " + std::to_string(generator));
  }
  const MarketModel model = instance.model();
  if (instance.is_res(generator)) {
    const double capacity = instance.res(generator - instance.n_conventional()).capacity[scenario];
    switch (model) {
      case MarketModel::GM:
      case MarketModel::CFD:
        // Full production earns the spot price; the contracted volume is
        // settled at the futures price (physically under GM, financially
        // under CFD — same cash flow for a costless must-run unit).
        return (price_futures - price_spot) * q_futures_own + price_spot * capacity;
      case MarketModel::SpotOnly:
        return price_spot * capacity;
    }
  }
  const auto& g = instance.conventional(generator);
  const double a = g.cost_a[scenario];
  const double b = g.cost_b[scenario];
  const double c = g.cost_c[scenario];
  switch (model) {
    case MarketModel::GM: {
      const double total = q_futures_own + q_spot_own;
      return price_futures * q_futures_own + price_spot * q_spot_own -
             (a + b * total + 0.5 * c * total * total);
    }
    case MarketModel::CFD:
      return (price_futures - price_spot) * q_futures_own + price_spot * q_spot_own - a -
             b * q_spot_own - 0.5 * c * q_spot_own * q_spot_own;
    case MarketModel::SpotOnly:
      return price_spot * q_spot_own - a - b * q_spot_own - 0.5 * c * q_spot_own * q_spot_own;
  }
  throw Error("profit: unreachable");
}

double profit(const MarketInstance& instance, int scenario, const FuturesDecision& decision,
              const SpotOutcome& spot, int generator) {
  instance.require_scenario(scenario);
  if (generator < 0 || generator >= instance.n_generators()) {
    throw DimensionError("profit: unknown generator id " + std::to_string(generator));
  }
  const double qf = decision.q_futures.empty() ? 0.0 : decision.q_futures[generator];
  return profit_raw(instance, scenario, decision.price_futures, qf, spot.price[scenario],
                    spot.q[generator][scenario], generator);
}

}  // namespace futspot
