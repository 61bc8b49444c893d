#pragma once

// Domain types for a two-stage (futures + spot) electricity market with
// conventional and renewable generators, and the profit/demand evaluations
// shared by every market model.
//
// Conventions used throughout the library:
//   - generators are indexed 0..I+J-1 with the I conventional units first,
//     followed by the J renewable (RES) units;
//   - scenario-indexed data is stored one vector per generator, one entry
//     per scenario;
//   - all prices are EUR/MWh, quantities MWh, demand slopes EUR/MWh^2.

#include <span>
#include <vector>

#include "futspot/errors.hpp"

namespace futspot {

enum class MarketModel {
  GM,        // futures with physical delivery
  CFD,       // contracts for differences, settled financially
  SpotOnly,  // no futures stage
};

const char* to_string(MarketModel model);

/// Conjectural-variation parameters. `delta[i]` is conventional generator
/// i's conjecture about the aggregate rival response in the spot market,
/// `psi[k]` generator k's conjecture about each rival's futures response.
/// delta = 0, psi = 0 is Cournot; delta = -1, psi = -1/(I+J-1) is perfect
/// competition (price taking in both stages).
struct ConductParams {
  std::vector<double> delta;  // one per conventional generator
  std::vector<double> psi;    // one per generator (conventional then RES)

  static ConductParams cournot(int n_conventional, int n_res);
  static ConductParams perfect_competition(int n_conventional, int n_res);
};

/// Quadratic-cost generator. Cost coefficients are scenario-indexed;
/// futures bounds are deterministic.
struct ConventionalGenerator {
  std::vector<double> cost_a;  // EUR, per scenario
  std::vector<double> cost_b;  // EUR/MWh, per scenario
  std::vector<double> cost_c;  // EUR/MWh^2, per scenario
  double q_futures_min = 0.0;
  double q_futures_max = 0.0;
};

/// Non-dispatchable renewable generator: `capacity[w]` is the realized
/// total production Q in scenario w, all of which is delivered.
struct ResGenerator {
  std::vector<double> capacity;  // MWh, per scenario
  double q_futures_min = 0.0;
  double q_futures_max = 0.0;
};

/// Linear inverse demand curves. The futures curve is deterministic, the
/// spot curve scenario-indexed.
struct DemandCurves {
  double gamma_futures = 0.0;
  double beta_futures = 0.0;
  std::vector<double> gamma_spot;
  std::vector<double> beta_spot;
};

/// Immutable, validated snapshot of one market game: generators with their
/// per-scenario parameter realizations, demand curves, conduct parameters,
/// scenario probabilities and the contract model. All evaluation routines
/// in the library are pure functions of an instance, so instances can be
/// shared freely across threads.
class MarketInstance {
 public:
  MarketInstance(MarketModel model, std::vector<ConventionalGenerator> conventional,
                 std::vector<ResGenerator> res, DemandCurves demand, ConductParams conduct,
                 std::vector<std::vector<double>> sigma = {});

  MarketModel model() const { return model_; }
  int n_conventional() const { return static_cast<int>(conventional_.size()); }
  int n_res() const { return static_cast<int>(res_.size()); }
  int n_generators() const { return n_conventional() + n_res(); }
  int n_scenarios() const { return n_scenarios_; }
  bool is_res(int k) const { return k >= n_conventional(); }

  const ConventionalGenerator& conventional(int i) const { return conventional_[i]; }
  const ResGenerator& res(int j) const { return res_[j]; }
  const DemandCurves& demand() const { return demand_; }
  const ConductParams& conduct() const { return conduct_; }

  /// Scenario probabilities assigned by generator k (sum to one).
  const std::vector<double>& sigma(int k) const { return sigma_[k]; }
  /// Probabilities used for market-level expectations in reports. All
  /// generators share these under the default equiprobable weighting.
  const std::vector<double>& market_probabilities() const { return sigma_[0]; }

  /// Residual demand intercept: gamma_spot[w] - beta_spot[w] * sum_j Q_jw.
  double gamma_hat(int w) const;
  /// Sum of renewable capacity realizations in scenario w.
  double total_res_capacity(int w) const;

  double futures_lower(int k) const;
  double futures_upper(int k) const;

  void require_scenario(int w) const;

 private:
  MarketModel model_;
  std::vector<ConventionalGenerator> conventional_;
  std::vector<ResGenerator> res_;
  DemandCurves demand_;
  ConductParams conduct_;
  std::vector<std::vector<double>> sigma_;
  int n_scenarios_ = 0;
};

/// Stage-one decision: futures quantity per generator plus the implied
/// futures price. Construct through make_futures_decision so the price is
/// always the demand-curve evaluation of the quantities.
struct FuturesDecision {
  std::vector<double> q_futures;
  double price_futures = 0.0;
};

FuturesDecision make_futures_decision(const MarketInstance& instance,
                                      std::span<const double> q_futures);

/// Same data under a different contract model (used to compare against the
/// futures-free market).
MarketInstance with_model(const MarketInstance& instance, MarketModel model);

/// Stage-two equilibrium, all scenarios. `q[k][w]` is generator k's spot
/// quantity (for CFD RES units this is the uncontracted remainder Q - qF;
/// revenue still accrues on the full production, see profit()). `tau` and
/// `phi_aux` are the auxiliaries the closed forms are written in:
/// tau = 1/(beta*(1+delta)+c), phi_aux = 1/(1+beta*sum tau).
struct SpotOutcome {
  std::vector<double> price;            // per scenario
  std::vector<std::vector<double>> q;   // [generator][scenario]
  std::vector<std::vector<double>> tau; // [conventional][scenario]
  std::vector<double> phi_aux;          // per scenario
};

/// Futures market clearing price for the given quantities. Linear, never
/// clamped; extreme inputs may price negative.
double futures_price(const MarketInstance& instance, std::span<const double> q_futures);

/// Spot inverse-demand evaluation at given conventional spot quantities.
/// Under GM the conventional futures quantities are physically delivered
/// and enter demand; under CFD/SpotOnly futures are ignored (financial or
/// absent). Renewable production enters through gamma_hat in all models.
double spot_demand_price(const MarketInstance& instance, int scenario,
                         std::span<const double> q_spot_conventional,
                         std::span<const double> q_futures);

/// Scenario profit of one generator given a futures decision and the spot
/// outcome. Dispatches on (model, generator kind).
double profit(const MarketInstance& instance, int scenario, const FuturesDecision& decision,
              const SpotOutcome& spot, int generator);

/// Scenario profit from raw prices/quantities, without a full outcome
/// object. `q_spot` is the generator's own spot quantity (ignored for RES
/// units, whose production is the capacity realization).
double profit_raw(const MarketInstance& instance, int scenario, double price_futures,
                  double q_futures_own, double price_spot, double q_spot_own, int generator);

}  // namespace futspot
