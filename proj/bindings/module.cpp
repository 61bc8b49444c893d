#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "futspot/equilibrium.hpp"
#include "futspot/gradients.hpp"
#include "futspot/market.hpp"
#include "futspot/scenario.hpp"
#include "futspot/simulation.hpp"
#include "futspot/spot.hpp"

namespace py = pybind11;
using namespace futspot;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-stage electricity market equilibria: futures/spot closed forms, "
            "CVaR-weighted first-stage equilibrium solver, scenario generation.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<DegenerateModelError>(m, "DegenerateModelError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base);

  py::enum_<MarketModel>(m, "MarketModel")
      .value("GM", MarketModel::GM)
      .value("CFD", MarketModel::CFD)
      .value("SPOT_ONLY", MarketModel::SpotOnly);

  py::class_<ConductParams>(m, "ConductParams")
      .def(py::init<>())
      .def_readwrite("delta", &ConductParams::delta)
      .def_readwrite("psi", &ConductParams::psi)
      .def_static("cournot", &ConductParams::cournot, py::arg("n_conventional"),
                  py::arg("n_res"))
      .def_static("perfect_competition", &ConductParams::perfect_competition,
                  py::arg("n_conventional"), py::arg("n_res"));

  py::class_<ConventionalGenerator>(m, "ConventionalGenerator")
      .def(py::init<>())
      .def_readwrite("cost_a", &ConventionalGenerator::cost_a)
      .def_readwrite("cost_b", &ConventionalGenerator::cost_b)
      .def_readwrite("cost_c", &ConventionalGenerator::cost_c)
      .def_readwrite("q_futures_min", &ConventionalGenerator::q_futures_min)
      .def_readwrite("q_futures_max", &ConventionalGenerator::q_futures_max);

  py::class_<ResGenerator>(m, "ResGenerator")
      .def(py::init<>())
      .def_readwrite("capacity", &ResGenerator::capacity)
      .def_readwrite("q_futures_min", &ResGenerator::q_futures_min)
      .def_readwrite("q_futures_max", &ResGenerator::q_futures_max);

  py::class_<DemandCurves>(m, "DemandCurves")
      .def(py::init<>())
      .def_readwrite("gamma_futures", &DemandCurves::gamma_futures)
      .def_readwrite("beta_futures", &DemandCurves::beta_futures)
      .def_readwrite("gamma_spot", &DemandCurves::gamma_spot)
      .def_readwrite("beta_spot", &DemandCurves::beta_spot);

  py::class_<MarketInstance>(m, "MarketInstance")
      .def(py::init<MarketModel, std::vector<ConventionalGenerator>, std::vector<ResGenerator>,
                    DemandCurves, ConductParams, std::vector<std::vector<double>>>(),
           py::arg("model"), py::arg("conventional"), py::arg("res"), py::arg("demand"),
           py::arg("conduct"), py::arg("sigma") = std::vector<std::vector<double>>{})
      .def_property_readonly("model", &MarketInstance::model)
      .def_property_readonly("n_conventional", &MarketInstance::n_conventional)
      .def_property_readonly("n_res", &MarketInstance::n_res)
      .def_property_readonly("n_generators", &MarketInstance::n_generators)
      .def_property_readonly("n_scenarios", &MarketInstance::n_scenarios)
      .def("sigma", &MarketInstance::sigma, py::arg("generator"))
      .def("gamma_hat", &MarketInstance::gamma_hat, py::arg("scenario"))
      .def("total_res_capacity", &MarketInstance::total_res_capacity, py::arg("scenario"))
      .def("futures_lower", &MarketInstance::futures_lower, py::arg("generator"))
      .def("futures_upper", &MarketInstance::futures_upper, py::arg("generator"));

  m.def("with_model", &with_model, py::arg("instance"), py::arg("model"));

  py::class_<FuturesDecision>(m, "FuturesDecision")
      .def_readonly("q_futures", &FuturesDecision::q_futures)
      .def_readonly("price_futures", &FuturesDecision::price_futures);
  m.def("make_futures_decision",
        [](const MarketInstance& inst, const std::vector<double>& q) {
          return make_futures_decision(inst, q);
        },
        py::arg("instance"), py::arg("q_futures"));

  py::class_<SpotOutcome>(m, "SpotOutcome")
      .def_readonly("price", &SpotOutcome::price)
      .def_readonly("q", &SpotOutcome::q)
      .def_readonly("tau", &SpotOutcome::tau)
      .def_readonly("phi_aux", &SpotOutcome::phi_aux);

  py::class_<SpotScenario>(m, "SpotScenario")
      .def_readonly("price", &SpotScenario::price)
      .def_readonly("q", &SpotScenario::q)
      .def_readonly("tau", &SpotScenario::tau)
      .def_readonly("phi_aux", &SpotScenario::phi_aux)
      .def_readonly("iterations", &SpotScenario::iterations);

  m.def("futures_price",
        [](const MarketInstance& inst, const std::vector<double>& q) {
          return futures_price(inst, q);
        },
        py::arg("instance"), py::arg("q_futures"));
  m.def("spot_demand_price",
        [](const MarketInstance& inst, int w, const std::vector<double>& qs,
           const std::vector<double>& qf) { return spot_demand_price(inst, w, qs, qf); },
        py::arg("instance"), py::arg("scenario"), py::arg("q_spot_conventional"),
        py::arg("q_futures"));
  m.def("profit", &profit, py::arg("instance"), py::arg("scenario"), py::arg("decision"),
        py::arg("spot"), py::arg("generator"));
  m.def("profit_raw", &profit_raw, py::arg("instance"), py::arg("scenario"),
        py::arg("price_futures"), py::arg("q_futures_own"), py::arg("price_spot"),
        py::arg("q_spot_own"), py::arg("generator"));

  m.def("gm_spot",
        [](const MarketInstance& inst, const std::vector<double>& q) { return gm_spot(inst, q); },
        py::arg("instance"), py::arg("q_futures"));
  m.def("cfd_spot",
        [](const MarketInstance& inst, const std::vector<double>& q) { return cfd_spot(inst, q); },
        py::arg("instance"), py::arg("q_futures"));
  m.def("spot_only", &spot_only, py::arg("instance"));
  m.def("solve_spot",
        [](const MarketInstance& inst, const std::vector<double>& q) {
          return solve_spot(inst, q);
        },
        py::arg("instance"), py::arg("q_futures"));
  m.def("best_response_oracle",
        [](const MarketInstance& inst, int w, const std::vector<double>& q) {
          return best_response_oracle(inst, w, q);
        },
        py::arg("instance"), py::arg("scenario"), py::arg("q_futures"));
  m.def("spot_foc_residuals",
        [](const MarketInstance& inst, int w, double price, const std::vector<double>& qs,
           const std::vector<double>& qf) {
          return spot_foc_residuals(inst, w, price, qs, qf);
        },
        py::arg("instance"), py::arg("scenario"), py::arg("price"),
        py::arg("q_spot_conventional"), py::arg("q_futures"));

  py::class_<PartialBundle>(m, "PartialBundle")
      .def_readonly("dprice_futures", &PartialBundle::dprice_futures)
      .def_readonly("dprice_spot", &PartialBundle::dprice_spot)
      .def_readonly("dq_spot", &PartialBundle::dq_spot);
  m.def("gm_partials", &gm_partials, py::arg("instance"));
  m.def("cfd_partials", &cfd_partials, py::arg("instance"));
  m.def("futures_partials", &futures_partials, py::arg("instance"));
  m.def("profit_gradient",
        [](const MarketInstance& inst, const std::vector<double>& q, int k) {
          return profit_gradient(inst, q, k);
        },
        py::arg("instance"), py::arg("q_futures"), py::arg("generator"));

  py::class_<RiskConfig>(m, "RiskConfig")
      .def(py::init([](double phi, double alpha) {
             RiskConfig r{phi, alpha};
             r.validate();
             return r;
           }),
           py::arg("phi") = 0.0, py::arg("alpha") = 0.90)
      .def_readwrite("phi", &RiskConfig::phi)
      .def_readwrite("alpha", &RiskConfig::alpha);

  py::class_<CvarAuxiliaries>(m, "CvarAuxiliaries")
      .def_readonly("xi", &CvarAuxiliaries::xi)
      .def_readonly("eta", &CvarAuxiliaries::eta);
  m.def("optimal_cvar_auxiliaries",
        [](const std::vector<double>& profits, const std::vector<double>& sigma, double alpha) {
          return optimal_cvar_auxiliaries(profits, sigma, alpha);
        },
        py::arg("profits"), py::arg("sigma"), py::arg("alpha"));
  m.def("cvar_objective",
        [](const std::vector<double>& profits, const std::vector<double>& sigma,
           const RiskConfig& risk, double xi, const std::vector<double>& eta) {
          return cvar_objective(profits, sigma, risk, xi, eta);
        },
        py::arg("profits"), py::arg("sigma"), py::arg("risk"), py::arg("xi"), py::arg("eta"));
  m.def("cvar_value",
        [](const std::vector<double>& profits, const std::vector<double>& sigma, double alpha) {
          return cvar_value(profits, sigma, alpha);
        },
        py::arg("profits"), py::arg("sigma"), py::arg("alpha"));

  py::class_<ParameterStats>(m, "ParameterStats")
      .def(py::init<double, double>(), py::arg("mean"), py::arg("sigma"))
      .def_readwrite("mean", &ParameterStats::mean)
      .def_readwrite("sigma", &ParameterStats::sigma);
  m.def("stats_from_cv", &stats_from_cv, py::arg("mean"), py::arg("cv"));

  py::class_<CalibrationConfig>(m, "CalibrationConfig")
      .def(py::init<>())
      .def_readwrite("cost_b", &CalibrationConfig::cost_b)
      .def_readwrite("cost_c", &CalibrationConfig::cost_c)
      .def_readwrite("gamma_futures", &CalibrationConfig::gamma_futures)
      .def_readwrite("beta_futures", &CalibrationConfig::beta_futures)
      .def_readwrite("res_capacity", &CalibrationConfig::res_capacity)
      .def_readwrite("scenario_count", &CalibrationConfig::scenario_count)
      .def_readwrite("seed", &CalibrationConfig::seed);
  m.def("default_calibration", &default_calibration);

  py::class_<ScenarioSet>(m, "ScenarioSet")
      .def_readonly("cost_a", &ScenarioSet::cost_a)
      .def_readonly("cost_b", &ScenarioSet::cost_b)
      .def_readonly("cost_c", &ScenarioSet::cost_c)
      .def_readonly("capacity", &ScenarioSet::capacity)
      .def_readonly("gamma_spot", &ScenarioSet::gamma_spot)
      .def_readonly("beta_spot", &ScenarioSet::beta_spot)
      .def_readonly("sigma", &ScenarioSet::sigma)
      .def_property_readonly("n_scenarios", &ScenarioSet::n_scenarios);
  m.def("generate", &generate, py::arg("config"), py::arg("n_conventional"), py::arg("n_res"));
  m.def("sweep_capacity",
        [](const CalibrationConfig& config, const std::vector<double>& levels) {
          return sweep_capacity(config, levels);
        },
        py::arg("config"), py::arg("levels"));

  py::class_<SolverOptions>(m, "SolverOptions")
      .def(py::init<>())
      .def_readwrite("start_count", &SolverOptions::start_count)
      .def_readwrite("max_outer", &SolverOptions::max_outer)
      .def_readwrite("max_inner", &SolverOptions::max_inner)
      .def_readwrite("tolerance", &SolverOptions::tolerance)
      .def_readwrite("seed", &SolverOptions::seed)
      .def_readwrite("profit_scale", &SolverOptions::profit_scale);

  py::class_<SolveReport>(m, "SolveReport")
      .def_readonly("starts_attempted", &SolveReport::starts_attempted)
      .def_readonly("starts_converged", &SolveReport::starts_converged)
      .def_readonly("accepted_start", &SolveReport::accepted_start)
      .def_readonly("iterations", &SolveReport::iterations)
      .def_readonly("wall_seconds", &SolveReport::wall_seconds);

  py::class_<EquilibriumSolution>(m, "EquilibriumSolution")
      .def_readonly("decision", &EquilibriumSolution::decision)
      .def_readonly("xi", &EquilibriumSolution::xi)
      .def_readonly("eta", &EquilibriumSolution::eta)
      .def_readonly("mu", &EquilibriumSolution::mu)
      .def_readonly("theta", &EquilibriumSolution::theta)
      .def_readonly("nu_min", &EquilibriumSolution::nu_min)
      .def_readonly("nu_max", &EquilibriumSolution::nu_max)
      .def_readonly("profits", &EquilibriumSolution::profits)
      .def_readonly("objective_residual", &EquilibriumSolution::objective_residual)
      .def_readonly("report", &EquilibriumSolution::report);

  py::class_<KktResiduals>(m, "KktResiduals")
      .def_readonly("objective", &KktResiduals::objective)
      .def("max_stationarity", &KktResiduals::max_stationarity)
      .def("max_complementarity", &KktResiduals::max_complementarity)
      .def("max_sign_violation", &KktResiduals::max_sign_violation);

  m.def("solve", &solve, py::arg("instance"), py::arg("risk"),
        py::arg("options") = SolverOptions{},
        py::call_guard<py::gil_scoped_release>());
  m.def("kkt_residuals", &kkt_residuals, py::arg("instance"), py::arg("risk"),
        py::arg("candidate"), py::arg("profit_scale") = 1e5);

  // Batch front end, mirroring the CLI.
  py::class_<HeadlineOutcomes>(m, "HeadlineOutcomes")
      .def_readonly("price_futures", &HeadlineOutcomes::price_futures)
      .def_readonly("e_price_spot", &HeadlineOutcomes::e_price_spot)
      .def_readonly("e_price_spot_only", &HeadlineOutcomes::e_price_spot_only)
      .def_readonly("sum_qf_conv", &HeadlineOutcomes::sum_qf_conv)
      .def_readonly("e_sum_qs_conv", &HeadlineOutcomes::e_sum_qs_conv)
      .def_readonly("sum_qf_res", &HeadlineOutcomes::sum_qf_res)
      .def_readonly("e_sum_qs_res", &HeadlineOutcomes::e_sum_qs_res)
      .def_readonly("e_profit_conv", &HeadlineOutcomes::e_profit_conv)
      .def_readonly("e_profit_res", &HeadlineOutcomes::e_profit_res)
      .def_readonly("cvar_conv", &HeadlineOutcomes::cvar_conv)
      .def_readonly("cvar_res", &HeadlineOutcomes::cvar_res)
      .def_readonly("objective_residual", &HeadlineOutcomes::objective_residual);

  py::class_<SimulationConfig>(m, "SimulationConfig")
      .def_readwrite("model", &SimulationConfig::model)
      .def_readwrite("conduct", &SimulationConfig::conduct)
      .def_readwrite("risk", &SimulationConfig::risk)
      .def_readwrite("scenario_count", &SimulationConfig::scenario_count)
      .def_readwrite("seed", &SimulationConfig::seed)
      .def_readwrite("solver", &SimulationConfig::solver)
      .def_property(
          "output_directory",
          [](const SimulationConfig& c) { return c.output.directory; },
          [](SimulationConfig& c, const std::string& dir) { c.output.directory = dir; })
      .def_property(
          "res_levels", [](const SimulationConfig& c) { return c.sweep.res_levels; },
          [](SimulationConfig& c, std::vector<double> v) { c.sweep.res_levels = std::move(v); })
      .def_property(
          "phi_grid", [](const SimulationConfig& c) { return c.sweep.phi_grid; },
          [](SimulationConfig& c, std::vector<double> v) { c.sweep.phi_grid = std::move(v); });
  m.def("default_config", &default_config);
  m.def("load_config", &load_config, py::arg("path"));
  m.def("config_hash", &config_hash, py::arg("config"));
  m.def("build_instance", &build_instance, py::arg("config"), py::arg("scenarios"),
        py::arg("res_capacity_mean"));

  py::class_<SingleRunResult>(m, "SingleRunResult")
      .def_readonly("headline", &SingleRunResult::headline)
      .def_readonly("solved", &SingleRunResult::solved)
      .def_readonly("json_path", &SingleRunResult::json_path)
      .def_readonly("csv_path", &SingleRunResult::csv_path);
  py::class_<SweepRow>(m, "SweepRow")
      .def_readonly("key", &SweepRow::key)
      .def_readonly("ok", &SweepRow::ok)
      .def_readonly("headline", &SweepRow::headline)
      .def_readonly("error", &SweepRow::error);
  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("rows", &SweepResult::rows)
      .def_readonly("csv_path", &SweepResult::csv_path)
      .def_readonly("trend_path", &SweepResult::trend_path)
      .def_readonly("exit_code", &SweepResult::exit_code);
  m.def("run_single", &run_single, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_res_sweep", &run_res_sweep, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_phi_sweep", &run_phi_sweep, py::arg("config"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_verify",
        [](const SimulationConfig& config) {
          std::ostringstream log;
          const int code = run_verify(config, log);
          return py::make_tuple(code, log.str());
        },
        py::arg("config"), "Returns (exit_code, log_text).");
}
