#include <doctest.h>

#include <random>

#include "futspot/market.hpp"
#include "futspot/spot.hpp"
#include "support.hpp"

using namespace futspot;
using test_support::close_rel;

namespace {

MarketInstance tiny_instance(MarketModel model, double gamma, double beta,
                             std::vector<double> res_capacity = {}) {
  ConventionalGenerator g;
  g.cost_a = {0.0};
  g.cost_b = {0.0};
  g.cost_c = {0.0};
  g.q_futures_max = 10000.0;
  std::vector<ResGenerator> res;
  if (!res_capacity.empty()) {
    ResGenerator r;
    r.capacity = res_capacity;
    r.q_futures_max = 10000.0;
    res.push_back(r);
  }
  DemandCurves demand;
  demand.gamma_futures = gamma;
  demand.beta_futures = beta;
  demand.gamma_spot = {gamma};
  demand.beta_spot = {beta};
  return MarketInstance(model, {g}, res, demand,
                        ConductParams::cournot(1, res_capacity.empty() ? 0 : 1));
}

}  // namespace

TEST_CASE("futures price is the linear demand evaluation") {
  auto m = tiny_instance(MarketModel::GM, 180.0, 0.005);
  CHECK(futures_price(m, std::vector<double>{0.0}) == doctest::Approx(180.0));
  CHECK(futures_price(m, std::vector<double>{18000.0}) == doctest::Approx(90.0));
  // Solver-scale total around 18.9 GWh prices close to the reference value.
  const double pf = futures_price(m, std::vector<double>{18900.0});
  CHECK(pf == doctest::Approx(85.5));
  CHECK(std::abs(pf / 87.26 - 1.0) < 0.10);
  CHECK_THROWS_AS(futures_price(m, std::vector<double>{1.0, 2.0}), DimensionError);
}

TEST_CASE("spot demand prices by model") {
  SUBCASE("gm counts conventional futures as physical supply") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0);
    CHECK(spot_demand_price(m, 0, std::vector<double>{50.0}, std::vector<double>{0.0}) ==
          doctest::Approx(50.0));
  }
  SUBCASE("gm with renewables folds capacity into the intercept") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0, {20.0});
    CHECK(m.gamma_hat(0) == doctest::Approx(80.0));
    CHECK(spot_demand_price(m, 0, std::vector<double>{30.0}, std::vector<double>{10.0, 0.0}) ==
          doctest::Approx(40.0));
  }
  SUBCASE("cfd ignores futures positions") {
    auto m = tiny_instance(MarketModel::CFD, 100.0, 1.0);
    for (double qf : {0.0, 10.0, 500.0}) {
      CHECK(spot_demand_price(m, 0, std::vector<double>{55.0}, std::vector<double>{qf}) ==
            doctest::Approx(45.0));
    }
  }
  SUBCASE("scenario index is validated") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0);
    CHECK_THROWS_AS(
        spot_demand_price(m, 3, std::vector<double>{0.0}, std::vector<double>{0.0}),
        DimensionError);
  }
}

TEST_CASE("profit dispatch on model and generator kind") {
  SUBCASE("gm conventional") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0);
    CHECK(profit_raw(m, 0, 90.0, 10.0, 45.0, 45.0, 0) == doctest::Approx(2925.0));
  }
  SUBCASE("gm res") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0, {30.0});
    CHECK(profit_raw(m, 0, 90.0, 10.0, 45.0, 20.0, 1) == doctest::Approx(1800.0));
  }
  SUBCASE("cfd conventional") {
    auto m = tiny_instance(MarketModel::CFD, 100.0, 1.0);
    CHECK(profit_raw(m, 0, 90.0, 10.0, 45.0, 55.0, 0) == doctest::Approx(2925.0));
  }
  SUBCASE("unknown generator id") {
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0);
    CHECK_THROWS_AS(profit_raw(m, 0, 90.0, 0.0, 45.0, 0.0, 5), DimensionError);
  }
}

TEST_CASE("quadratic cost enters gm profit through total production") {
  ConventionalGenerator g;
  g.cost_a = {7.0};
  g.cost_b = {3.0};
  g.cost_c = {0.5};
  g.q_futures_max = 100.0;
  DemandCurves d;
  d.gamma_futures = 100.0;
  d.beta_futures = 1.0;
  d.gamma_spot = {100.0};
  d.beta_spot = {1.0};
  MarketInstance m(MarketModel::GM, {g}, {}, d, ConductParams::cournot(1, 0));
  const double total = 10.0 + 5.0;
  const double expected = 90.0 * 10.0 + 45.0 * 5.0 - (7.0 + 3.0 * total + 0.25 * total * total);
  CHECK(profit_raw(m, 0, 90.0, 10.0, 45.0, 5.0, 0) == doctest::Approx(expected));
}

TEST_CASE("model bridge: with no futures position all models pay alike") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    auto gm = test_support::random_instance(rng, MarketModel::GM, test_support::Conduct::Random);
    auto cfd = with_model(gm, MarketModel::CFD);
    auto only = with_model(gm, MarketModel::SpotOnly);
    const SpotOutcome spot = spot_only(only);
    for (int w = 0; w < gm.n_scenarios(); ++w) {
      for (int k = 0; k < gm.n_generators(); ++k) {
        const double a = profit_raw(gm, w, 55.0, 0.0, spot.price[w], spot.q[k][w], k);
        const double b = profit_raw(cfd, w, 55.0, 0.0, spot.price[w], spot.q[k][w], k);
        const double c = profit_raw(only, w, 0.0, 0.0, spot.price[w], spot.q[k][w], k);
        CHECK(close_rel(a, b, 1e-12));
        CHECK(close_rel(a, c, 1e-12));
      }
    }
  }
}

TEST_CASE("gm res profit: raw two-market form equals the settled form") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 500; ++trial) {
    const double pf = test_support::uniform(rng, 10.0, 200.0);
    const double ps = test_support::uniform(rng, -50.0, 200.0);
    const double qf = test_support::uniform(rng, 0.0, 5000.0);
    const double cap = test_support::uniform(rng, 0.0, 9000.0);
    auto m = tiny_instance(MarketModel::GM, 100.0, 1.0, {cap});
    const double settled = profit_raw(m, 0, pf, qf, ps, cap - qf, 1);
    const double raw = pf * qf + ps * (cap - qf);
    CHECK(close_rel(settled, raw, 1e-12));
  }
}

TEST_CASE("profit is equivariant under generator relabeling") {
  ConventionalGenerator g0, g1;
  g0.cost_a = {5.0};
  g0.cost_b = {30.0};
  g0.cost_c = {0.01};
  g0.q_futures_max = 1000.0;
  g1.cost_a = {9.0};
  g1.cost_b = {45.0};
  g1.cost_c = {0.02};
  g1.q_futures_max = 2000.0;
  DemandCurves d;
  d.gamma_futures = 150.0;
  d.beta_futures = 0.01;
  d.gamma_spot = {150.0};
  d.beta_spot = {0.01};
  MarketInstance m(MarketModel::GM, {g0, g1}, {}, d, ConductParams::cournot(2, 0));
  MarketInstance swapped(MarketModel::GM, {g1, g0}, {}, d, ConductParams::cournot(2, 0));
  CHECK(profit_raw(m, 0, 80.0, 100.0, 60.0, 200.0, 0) ==
        doctest::Approx(profit_raw(swapped, 0, 80.0, 100.0, 60.0, 200.0, 1)));
  CHECK(profit_raw(m, 0, 80.0, 100.0, 60.0, 200.0, 1) ==
        doctest::Approx(profit_raw(swapped, 0, 80.0, 100.0, 60.0, 200.0, 0)));
}

TEST_CASE("futures decision carries the implied price") {
  auto m = tiny_instance(MarketModel::GM, 180.0, 0.005);
  const FuturesDecision d = make_futures_decision(m, std::vector<double>{4000.0});
  CHECK(d.price_futures == doctest::Approx(180.0 - 0.005 * 4000.0));
}

TEST_CASE("instance validation rejects broken inputs") {
  ConventionalGenerator g;
  g.cost_a = {0.0};
  g.cost_b = {1.0};
  g.cost_c = {0.1};
  g.q_futures_max = 10.0;
  DemandCurves d;
  d.gamma_futures = 100.0;
  d.beta_futures = 1.0;
  d.gamma_spot = {100.0};
  d.beta_spot = {1.0};

  SUBCASE("no conventional generators") {
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {}, {}, d, ConductParams{}), ValidationError);
  }
  SUBCASE("negative spot slope") {
    DemandCurves bad = d;
    bad.beta_spot = {-1.0};
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {g}, {}, bad, ConductParams::cournot(1, 0)),
                    ValidationError);
  }
  SUBCASE("negative cost coefficient") {
    ConventionalGenerator bad = g;
    bad.cost_b = {-1.0};
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {bad}, {}, d, ConductParams::cournot(1, 0)),
                    ValidationError);
  }
  SUBCASE("bounds out of order") {
    ConventionalGenerator bad = g;
    bad.q_futures_min = 20.0;
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {bad}, {}, d, ConductParams::cournot(1, 0)),
                    ValidationError);
  }
  SUBCASE("delta below -1") {
    ConductParams cp = ConductParams::cournot(1, 0);
    cp.delta[0] = -1.5;
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {g}, {}, d, cp), ValidationError);
  }
  SUBCASE("mismatched scenario counts") {
    ConventionalGenerator bad = g;
    bad.cost_b = {1.0, 2.0};
    CHECK_THROWS_AS(MarketInstance(MarketModel::GM, {bad}, {}, d, ConductParams::cournot(1, 0)),
                    DimensionError);
  }
  SUBCASE("probabilities must sum to one") {
    CHECK_THROWS_AS(
        MarketInstance(MarketModel::GM, {g}, {}, d, ConductParams::cournot(1, 0), {{0.5}}),
        ValidationError);
  }
}

TEST_CASE("conduct presets") {
  const auto pc = ConductParams::perfect_competition(3, 1);
  CHECK(pc.delta == std::vector<double>{-1.0, -1.0, -1.0});
  for (double psi : pc.psi) CHECK(psi == doctest::Approx(-1.0 / 3.0));
  const auto cournot = ConductParams::cournot(2, 1);
  for (double v : cournot.delta) CHECK(v == 0.0);
  for (double v : cournot.psi) CHECK(v == 0.0);
}
