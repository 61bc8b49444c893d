#pragma once

// Analytic stage-one derivatives d(profit)/d(q_futures) for the GM and CFD
// models. Each generator differentiates along its conjectured deviation:
// all rivals' futures positions respond at rate psi in the futures price;
// in the spot stage the response propagates only through conventional
// rivals of a conventional deviator (a renewable deviator leaves the spot
// equilibrium untouched, so its spot-price partial is exactly zero and its
// own spot quantity moves one-for-one against the contract).
//
// The closed-form spot maps are affine in the futures quantities, so these
// partials depend on the instance only, not on the evaluation point.

#include <span>

#include "futspot/market.hpp"

namespace futspot {

struct PartialBundle {
  std::vector<double> dprice_futures;            // [generator]
  std::vector<std::vector<double>> dprice_spot;  // [generator][scenario], zero rows for RES
  std::vector<std::vector<double>> dq_spot;      // [generator][scenario], -1 rows for RES
};

PartialBundle gm_partials(const MarketInstance& instance);
PartialBundle cfd_partials(const MarketInstance& instance);

/// Dispatch on instance model (GM or CFD).
PartialBundle futures_partials(const MarketInstance& instance);

/// Per-scenario profit derivative of one generator with respect to its own
/// futures quantity, at the given decision point. Errors for SpotOnly.
std::vector<double> profit_gradient(const MarketInstance& instance,
                                    std::span<const double> q_futures, int generator);

/// All generators at once, reusing a spot outcome and partial bundle
/// already computed at q_futures. Returns [generator][scenario].
std::vector<std::vector<double>> all_profit_gradients(const MarketInstance& instance,
                                                      std::span<const double> q_futures,
                                                      const SpotOutcome& spot,
                                                      const PartialBundle& partials);

}  // namespace futspot
