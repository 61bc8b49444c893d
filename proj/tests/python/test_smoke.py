"""End-to-end smoke tests for the python bindings."""

import math

import pytest

import futspot as fs


def monopoly(model=fs.MarketModel.GM, gamma=100.0, beta=1.0, b=0.0, c=0.0, delta=0.0):
    g = fs.ConventionalGenerator()
    g.cost_a = [0.0]
    g.cost_b = [b]
    g.cost_c = [c]
    g.q_futures_min = 0.0
    g.q_futures_max = 1000.0
    d = fs.DemandCurves()
    d.gamma_futures = gamma
    d.beta_futures = beta
    d.gamma_spot = [gamma]
    d.beta_spot = [beta]
    conduct = fs.ConductParams()
    conduct.delta = [delta]
    conduct.psi = [0.0]
    return fs.MarketInstance(model, [g], [], d, conduct)


def test_monopoly_spot_closed_form():
    m = monopoly()
    out = fs.gm_spot(m, [0.0])
    assert out.price[0] == pytest.approx(50.0)
    assert out.q[0][0] == pytest.approx(50.0)
    oracle = fs.best_response_oracle(m, 0, [0.0])
    assert oracle.price == pytest.approx(out.price[0], rel=1e-10)
    assert oracle.iterations <= 60


def test_futures_price_and_profit():
    m = monopoly(gamma=180.0, beta=0.005)
    assert fs.futures_price(m, [0.0]) == pytest.approx(180.0)
    assert fs.futures_price(m, [18000.0]) == pytest.approx(90.0)
    assert fs.profit_raw(m, 0, 90.0, 10.0, 45.0, 45.0, 0) == pytest.approx(2925.0)


def test_cvar_examples():
    profits = [10.0, 20.0, 30.0, 40.0]
    sigma = [0.25] * 4
    aux = fs.optimal_cvar_auxiliaries(profits, sigma, 0.75)
    assert aux.xi == pytest.approx(10.0)
    assert fs.cvar_value(profits, sigma, 0.75) == pytest.approx(10.0)
    assert fs.cvar_objective(profits, sigma, fs.RiskConfig(0.5, 0.75), aux.xi, aux.eta) == \
        pytest.approx(17.5)


def test_scenario_generation_is_deterministic():
    cal = fs.default_calibration()
    cal.scenario_count = 50
    cal.seed = 321
    a = fs.generate(cal, 3, 1)
    b = fs.generate(cal, 3, 1)
    assert a.cost_b == b.cost_b
    assert a.capacity == b.capacity
    assert a.n_scenarios == 50


def test_solve_desk_instance(tmp_path):
    cfg = fs.default_config()
    cfg.scenario_count = 60
    cfg.seed = 7
    assert cfg.model == fs.MarketModel.GM
    cfg.output_directory = str(tmp_path)
    result = fs.run_single(cfg)
    assert result.solved
    h = result.headline
    assert h.objective_residual <= 1e-6
    assert 60.0 < h.e_price_spot < 130.0
    assert 60.0 < h.price_futures < 160.0
    assert (tmp_path / "result.json").exists()
    assert (tmp_path / "headline.csv").exists()


def test_solver_consistency():
    cfg = fs.default_config()
    cfg.scenario_count = 40
    cfg.seed = 11
    cal = fs.default_calibration()
    cal.scenario_count = 40
    cal.seed = 11
    scen = fs.generate(cal, 3, 1)
    inst = fs.build_instance(cfg, scen, 5000.0)
    risk = fs.RiskConfig(0.5, 0.9)
    sol = fs.solve(inst, risk)
    # Futures price is the demand evaluation of the decision.
    assert sol.decision.price_futures == pytest.approx(
        fs.futures_price(inst, sol.decision.q_futures), rel=1e-12)
    # Dual mass equals phi per generator.
    for row in sol.mu:
        assert math.fsum(row) == pytest.approx(0.5, abs=1e-9)
    kkt = fs.kkt_residuals(inst, risk, sol)
    assert kkt.max_stationarity() <= 1e-6
    assert kkt.objective <= 1e-6


def test_verify_passes():
    cfg = fs.default_config()
    cfg.scenario_count = 15
    code, log = fs.run_verify(cfg)
    assert code == 0, log
    assert "[FAIL]" not in log


def test_errors_are_typed():
    m = monopoly()
    with pytest.raises(fs.DimensionError):
        fs.futures_price(m, [1.0, 2.0])
    with pytest.raises(fs.DegenerateModelError):
        fs.spot_only(m)
    bad = monopoly(c=0.0, delta=-1.0)
    with pytest.raises(fs.DegenerateModelError):
        fs.gm_spot(bad, [0.0])
