#include <doctest.h>

#include <random>

#include "futspot/gradients.hpp"
#include "futspot/spot.hpp"
#include "support.hpp"

using namespace futspot;
using test_support::close_rel;
using test_support::monopoly_instance;

TEST_CASE("futures price partial under cournot monopoly") {
  auto m = monopoly_instance(MarketModel::GM, 180.0, 0.005, 0.0, 0.001, 0.0);
  const PartialBundle b = gm_partials(m);
  CHECK(b.dprice_futures[0] == doctest::Approx(-0.005));
}

TEST_CASE("gm spot-price partial: monopoly with flat costs") {
  auto m = monopoly_instance(MarketModel::GM, 100.0, 1.0, 0.0, 0.0, 0.0);
  const PartialBundle b = gm_partials(m);
  CHECK(b.dprice_spot[0][0] == doctest::Approx(-0.5));
  CHECK(b.dq_spot[0][0] == doctest::Approx(-0.5));
}

TEST_CASE("cfd partials: monopoly with flat costs") {
  auto m = monopoly_instance(MarketModel::CFD, 100.0, 1.0, 0.0, 0.0, 0.0);
  const PartialBundle b = cfd_partials(m);
  CHECK(b.dprice_spot[0][0] == doctest::Approx(-0.5));
  CHECK(b.dq_spot[0][0] == doctest::Approx(0.5));
}

TEST_CASE("cfd partials vanish under competitive conduct") {
  std::mt19937_64 rng(31);
  auto m = test_support::random_instance(rng, MarketModel::CFD, test_support::Conduct::Perfect);
  const PartialBundle b = cfd_partials(m);
  for (int i = 0; i < m.n_conventional(); ++i) {
    for (int w = 0; w < m.n_scenarios(); ++w) {
      CHECK(b.dprice_spot[i][w] == 0.0);
      CHECK(b.dq_spot[i][w] == 0.0);
    }
  }
}

TEST_CASE("price taking: futures price partial is exactly zero under perfect competition") {
  // The preset needs at least one rival; a single generator has no
  // conjectured response that could offset its own market impact.
  std::mt19937_64 rng(32);
  int checked = 0;
  while (checked < 50) {
    const MarketModel model = checked % 2 ? MarketModel::GM : MarketModel::CFD;
    auto m = test_support::random_instance(rng, model, test_support::Conduct::Perfect);
    if (m.n_generators() < 2) continue;
    const PartialBundle b = futures_partials(m);
    for (int k = 0; k < m.n_generators(); ++k) {
      CHECK(b.dprice_futures[k] == 0.0);
    }
    ++checked;
  }
}

TEST_CASE("res rows: spot price insensitive, contract displaces delivery one-for-one") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const MarketModel model = trial % 2 ? MarketModel::GM : MarketModel::CFD;
    auto m = test_support::random_instance(rng, model, test_support::Conduct::Random);
    const PartialBundle b = futures_partials(m);
    for (int k = m.n_conventional(); k < m.n_generators(); ++k) {
      for (int w = 0; w < m.n_scenarios(); ++w) {
        CHECK(b.dprice_spot[k][w] == 0.0);
        CHECK(b.dq_spot[k][w] == -1.0);
      }
    }
  }
}

TEST_CASE("gradient assembly: monopoly value from the worked example") {
  auto m = monopoly_instance(MarketModel::GM, 100.0, 1.0, 0.0, 0.0, 0.0);
  const auto g = profit_gradient(m, std::vector<double>{0.0}, 0);
  CHECK(g[0] == doctest::Approx(50.0));
}

TEST_CASE("res gradient at zero contract volume is the futures-spot spread") {
  ConventionalGenerator g;
  g.cost_a = {0.0};
  g.cost_b = {30.0};
  g.cost_c = {0.01};
  g.q_futures_max = 5000.0;
  ResGenerator r;
  r.capacity = {4000.0};
  r.q_futures_max = 4000.0;
  DemandCurves d;
  d.gamma_futures = 180.0;
  d.beta_futures = 0.005;
  d.gamma_spot = {175.0};
  d.beta_spot = {0.006};
  MarketInstance m(MarketModel::GM, {g}, {r}, d, ConductParams::cournot(1, 1));
  const std::vector<double> q{1000.0, 0.0};
  const SpotOutcome spot = gm_spot(m, q);
  const double pf = futures_price(m, q);
  const auto grad = profit_gradient(m, q, 1);
  CHECK(grad[0] == doctest::Approx(pf - spot.price[0]));
}

TEST_CASE("profit gradients match conjectured finite differences") {
  std::mt19937_64 rng(2025);
  const test_support::Conduct kinds[] = {test_support::Conduct::Cournot,
                                         test_support::Conduct::Perfect,
                                         test_support::Conduct::Random};
  for (int trial = 0; trial < 300; ++trial) {
    const MarketModel model = trial % 2 ? MarketModel::GM : MarketModel::CFD;
    auto m = test_support::random_instance(rng, model, kinds[trial % 3]);
    const auto q = test_support::random_futures(rng, m);
    const SpotOutcome spot = solve_spot(m, q);
    const PartialBundle partials = futures_partials(m);
    const auto grads = all_profit_gradients(m, q, spot, partials);
    for (int k = 0; k < m.n_generators(); ++k) {
      for (int w = 0; w < m.n_scenarios(); ++w) {
        const double fd = test_support::fd_profit_gradient(m, q, k, w);
        CHECK(close_rel(grads[k][w], fd, 1e-5));
      }
    }
  }
}

TEST_CASE("partials match finite differences of the spot maps themselves") {
  // Checks the building blocks, not just the assembled gradient: perturb
  // one conventional generator's futures position along its conjectured
  // deviation and difference the closed-form price/quantity maps.
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const MarketModel model = trial % 2 ? MarketModel::GM : MarketModel::CFD;
    auto m = test_support::random_instance(rng, model, test_support::Conduct::Random);
    const auto q = test_support::random_futures(rng, m);
    const PartialBundle partials = futures_partials(m);
    const double h = 1.0;
    for (int i = 0; i < m.n_conventional(); ++i) {
      const double psi = m.conduct().psi[i];
      auto moved = [&](double step) {
        std::vector<double> out = q;
        out[i] += step;
        for (int r = 0; r < m.n_generators(); ++r) {
          if (r != i) out[r] += psi * step;
        }
        return out;
      };
      const SpotOutcome up = solve_spot(m, moved(h));
      const SpotOutcome down = solve_spot(m, moved(-h));
      const double dpf =
          (futures_price(m, moved(h)) - futures_price(m, moved(-h))) / (2.0 * h);
      CHECK(close_rel(partials.dprice_futures[i], dpf, 1e-9));
      for (int w = 0; w < m.n_scenarios(); ++w) {
        const double dps = (up.price[w] - down.price[w]) / (2.0 * h);
        const double dqs = (up.q[i][w] - down.q[i][w]) / (2.0 * h);
        CHECK(close_rel(partials.dprice_spot[i][w], dps, 1e-8));
        CHECK(close_rel(partials.dq_spot[i][w], dqs, 1e-8));
      }
    }
  }
}

TEST_CASE("spot-only has no futures stage") {
  auto m = monopoly_instance(MarketModel::SpotOnly, 100.0, 1.0, 0.0, 0.0, 0.0);
  CHECK_THROWS_AS(futures_partials(m), DegenerateModelError);
  CHECK_THROWS_AS(profit_gradient(m, std::vector<double>{0.0}, 0), DegenerateModelError);
}
