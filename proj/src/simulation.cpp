#include "futspot/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "futspot/spot.hpp"

namespace futspot {

using nlohmann::json;
namespace fs = std::filesystem;

// --------------------------------------------------------------------------
// Config parsing
// --------------------------------------------------------------------------

namespace {

MarketModel parse_model(const std::string& name) {
  if (name == "gm") return MarketModel::GM;
  if (name == "cfd") return MarketModel::CFD;
  if (name == "spot-only") return MarketModel::SpotOnly;
  throw ConfigError("model must be one of gm|cfd|spot-only, got '" + name + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

double require_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if (!j[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

double number_or(const json& j, const char* key, double def, const std::string& where) {
  if (!j.contains(key)) return def;
  if (!j[key].is_number()) throw ConfigError(where + ": '" + key + "' must be a number");
  return j[key].get<double>();
}

/// Accepts "<name>_mean" with either "<name>_sigma" or "<name>_cv".
ParameterStats parse_stats(const json& j, const std::string& name, const std::string& where,
                           std::optional<ParameterStats> fallback = std::nullopt) {
  const std::string mean_key = name + "_mean";
  const std::string sigma_key = name + "_sigma";
  const std::string cv_key = name + "_cv";
  if (!j.contains(mean_key)) {
    if (fallback) return *fallback;
    throw ConfigError(where + ": missing '" + mean_key + "'");
  }
  const double mean = j[mean_key].get<double>();
  if (j.contains(sigma_key)) return ParameterStats{mean, j[sigma_key].get<double>()};
  if (j.contains(cv_key)) return stats_from_cv(mean, j[cv_key].get<double>());
  throw ConfigError(where + ": '" + name + "' needs either '" + sigma_key + "' or '" + cv_key + "'");
}

std::vector<double> parse_grid(const json& j, const char* key, const std::string& where,
                               std::vector<double> def) {
  if (!j.contains(key)) return def;
  const json& g = j[key];
  if (g.is_array()) return g.get<std::vector<double>>();
  if (g.is_object()) {
    check_keys(g, {"from", "to", "step"}, where);
    const double from = require_number(g, "from", where);
    const double to = require_number(g, "to", where);
    const double step = require_number(g, "step", where);
    if (!(step > 0.0) || to < from) throw ConfigError(where + ": bad grid specification");
    std::vector<double> out;
    for (double v = from; v <= to + 0.5 * step; v += step) out.push_back(v);
    return out;
  }
  throw ConfigError(where + ": '" + std::string(key) + "' must be an array or {from,to,step}");
}

std::vector<double> default_res_levels() {
  std::vector<double> v;
  for (int l = 0; l <= 10000; l += 1000) v.push_back(l);
  return v;
}

std::vector<double> default_phi_grid() {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(0.1 * i);
  return v;
}

json stats_to_json(const ParameterStats& s) { return json{{"mean", s.mean}, {"sigma", s.sigma}}; }

json config_to_json(const SimulationConfig& c) {
  json conventional = json::array();
  for (const auto& g : c.conventional) {
    conventional.push_back(json{{"cost_a", g.cost_a},
                                {"cost_b", stats_to_json(g.cost_b)},
                                {"cost_c", stats_to_json(g.cost_c)},
                                {"q_futures_min", g.q_futures_min},
                                {"q_futures_max", g.q_futures_max}});
  }
  json res = json::array();
  for (const auto& g : c.res) {
    json r{{"q_futures_min", g.q_futures_min}};
    if (g.q_futures_max) r["q_futures_max"] = *g.q_futures_max;
    res.push_back(r);
  }
  json conduct;
  if (c.conduct == "custom") {
    conduct = json{{"delta", c.delta}, {"psi", c.psi}};
  } else {
    conduct = c.conduct;
  }
  return json{
      {"model", to_string(c.model)},
      {"conduct", conduct},
      {"risk", {{"phi", c.risk.phi}, {"alpha", c.risk.alpha}}},
      {"scenarios",
       {{"count", c.scenario_count},
        {"seed", c.seed},
        {"res_capacity", stats_to_json(c.res_capacity)}}},
      {"demand", {{"gamma", stats_to_json(c.gamma_futures)}, {"beta", stats_to_json(c.beta_futures)}}},
      {"generators", {{"conventional", conventional}, {"res", res}}},
      {"solver",
       {{"starts", c.solver.start_count},
        {"max_outer", c.solver.max_outer},
        {"max_inner", c.solver.max_inner},
        {"tolerance", c.solver.tolerance},
        {"seed", c.solver.seed},
        {"profit_scale", c.solver.profit_scale}}},
      {"sweep",
       {{"res_levels", c.sweep.res_levels},
        {"phi_grid", c.sweep.phi_grid},
        {"workers", c.sweep.workers}}},
      {"output", {{"directory", c.output.directory}, {"prefix", c.output.prefix}}}};
}

SimulationConfig config_from_json(const json& j) {
  SimulationConfig c = default_config();
  check_keys(j, {"model", "conduct", "risk", "scenarios", "demand", "generators", "solver",
                 "sweep", "output"},
             "config");

  if (j.contains("model")) c.model = parse_model(j["model"].get<std::string>());

  if (j.contains("conduct")) {
    const json& co = j["conduct"];
    if (co.is_string()) {
      c.conduct = co.get<std::string>();
      if (c.conduct != "cournot" && c.conduct != "perfect") {
        throw ConfigError("conduct must be cournot|perfect or an object {delta, psi}");
      }
    } else if (co.is_object()) {
      check_keys(co, {"delta", "psi"}, "conduct");
      c.conduct = "custom";
      c.delta = co.at("delta").get<std::vector<double>>();
      c.psi = co.at("psi").get<std::vector<double>>();
    } else {
      throw ConfigError("conduct must be a string or an object");
    }
  }

  if (j.contains("risk")) {
    const json& r = j["risk"];
    check_keys(r, {"phi", "alpha"}, "risk");
    c.risk.phi = number_or(r, "phi", c.risk.phi, "risk");
    c.risk.alpha = number_or(r, "alpha", c.risk.alpha, "risk");
  }

  if (j.contains("scenarios")) {
    const json& s = j["scenarios"];
    check_keys(s, {"count", "seed", "res_capacity_mean", "res_capacity_sigma", "res_capacity_cv"},
               "scenarios");
    c.scenario_count = static_cast<int>(number_or(s, "count", c.scenario_count, "scenarios"));
    if (s.contains("seed")) c.seed = s["seed"].get<std::uint64_t>();
    c.res_capacity = parse_stats(s, "res_capacity", "scenarios", c.res_capacity);
  }

  if (j.contains("demand")) {
    const json& d = j["demand"];
    check_keys(d, {"gamma_mean", "gamma_sigma", "gamma_cv", "beta_mean", "beta_sigma", "beta_cv"},
               "demand");
    c.gamma_futures = parse_stats(d, "gamma", "demand", c.gamma_futures);
    c.beta_futures = parse_stats(d, "beta", "demand", c.beta_futures);
  }

  if (j.contains("generators")) {
    const json& g = j["generators"];
    check_keys(g, {"conventional", "res"}, "generators");
    if (g.contains("conventional")) {
      c.conventional.clear();
      int index = 0;
      for (const json& cg : g.at("conventional")) {
        const std::string where = "generators.conventional[" + std::to_string(index++) + "]";
        check_keys(cg,
                   {"cost_a", "cost_b_mean", "cost_b_sigma", "cost_b_cv", "cost_c_mean",
                    "cost_c_sigma", "cost_c_cv", "q_futures_min", "q_futures_max"},
                   where);
        ConventionalConfig out;
        out.cost_a = number_or(cg, "cost_a", 0.0, where);
        out.cost_b = parse_stats(cg, "cost_b", where);
        out.cost_c = parse_stats(cg, "cost_c", where);
        out.q_futures_min = number_or(cg, "q_futures_min", 0.0, where);
        out.q_futures_max = require_number(cg, "q_futures_max", where);
        c.conventional.push_back(out);
      }
    }
    if (g.contains("res")) {
      c.res.clear();
      int index = 0;
      for (const json& rg : g.at("res")) {
        const std::string where = "generators.res[" + std::to_string(index++) + "]";
        check_keys(rg, {"q_futures_min", "q_futures_max"}, where);
        ResConfig out;
        out.q_futures_min = number_or(rg, "q_futures_min", 0.0, where);
        if (rg.contains("q_futures_max")) out.q_futures_max = rg["q_futures_max"].get<double>();
        c.res.push_back(out);
      }
    }
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, {"starts", "max_outer", "max_inner", "tolerance", "seed", "profit_scale"},
               "solver");
    c.solver.start_count = static_cast<int>(number_or(s, "starts", c.solver.start_count, "solver"));
    c.solver.max_outer = static_cast<int>(number_or(s, "max_outer", c.solver.max_outer, "solver"));
    c.solver.max_inner = static_cast<int>(number_or(s, "max_inner", c.solver.max_inner, "solver"));
    c.solver.tolerance = number_or(s, "tolerance", c.solver.tolerance, "solver");
    if (s.contains("seed")) c.solver.seed = s["seed"].get<std::uint64_t>();
    c.solver.profit_scale = number_or(s, "profit_scale", c.solver.profit_scale, "solver");
  }

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    check_keys(s, {"res_levels", "phi_grid", "workers"}, "sweep");
    c.sweep.res_levels = parse_grid(s, "res_levels", "sweep", c.sweep.res_levels);
    c.sweep.phi_grid = parse_grid(s, "phi_grid", "sweep", c.sweep.phi_grid);
    c.sweep.workers = static_cast<int>(number_or(s, "workers", c.sweep.workers, "sweep"));
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    check_keys(o, {"directory", "prefix"}, "output");
    if (o.contains("directory")) c.output.directory = o["directory"].get<std::string>();
    if (o.contains("prefix")) c.output.prefix = o["prefix"].get<std::string>();
  }

  c.validate();
  return c;
}

}  // namespace

CalibrationConfig SimulationConfig::calibration() const {
  CalibrationConfig cal;
  for (const auto& g : conventional) {
    cal.cost_b.push_back(g.cost_b);
    cal.cost_c.push_back(g.cost_c);
  }
  cal.gamma_futures = gamma_futures;
  cal.beta_futures = beta_futures;
  cal.res_capacity = res_capacity;
  cal.scenario_count = scenario_count;
  cal.seed = seed;
  return cal;
}

ConductParams SimulationConfig::conduct_params() const {
  const int I = static_cast<int>(conventional.size());
  const int J = static_cast<int>(res.size());
  if (conduct == "cournot") return ConductParams::cournot(I, J);
  if (conduct == "perfect") return ConductParams::perfect_competition(I, J);
  ConductParams p;
  p.delta = delta;
  p.psi = psi;
  return p;
}

void SimulationConfig::validate() const {
  risk.validate();
  if (conventional.empty()) throw ConfigError("config: at least one conventional generator required");
  if (conduct == "custom") {
    if (delta.size() != conventional.size() || psi.size() != conventional.size() + res.size()) {
      throw ConfigError("config: custom conduct vectors have wrong lengths");
    }
  } else if (conduct != "cournot" && conduct != "perfect") {
    throw ConfigError("config: unknown conduct '" + conduct + "'");
  }
  calibration().validate();
  for (const auto& g : conventional) {
    if (g.q_futures_min < 0.0 || g.q_futures_min > g.q_futures_max) {
      throw ConfigError("config: conventional futures bounds must satisfy 0 <= min <= max");
    }
  }
  for (const auto& g : res) {
    if (g.q_futures_min < 0.0 || (g.q_futures_max && g.q_futures_min > *g.q_futures_max)) {
      throw ConfigError("config: RES futures bounds must satisfy 0 <= min <= max");
    }
  }
}

SimulationConfig default_config() {
  SimulationConfig c;
  c.sweep.res_levels = default_res_levels();
  c.sweep.phi_grid = default_phi_grid();
  const CalibrationConfig cal = default_calibration();
  const double caps[] = {6000.0, 7000.0, 5000.0};
  for (std::size_t i = 0; i < cal.cost_b.size(); ++i) {
    ConventionalConfig g;
    g.cost_b = cal.cost_b[i];
    g.cost_c = cal.cost_c[i];
    g.q_futures_min = 0.0;
    g.q_futures_max = caps[i];
    c.conventional.push_back(g);
  }
  c.res.push_back(ResConfig{});
  return c;
}

SimulationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json j;
  try {
    j = json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t pos = 0; pos < std::min(e.byte, text.size()); ++pos) {
      if (text[pos] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " +
                      e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const Error& e) {
    // Validation failures surface as config errors when triggered by a file.
    throw ConfigError(path + ": " + e.what());
  }
}

void apply_overrides(SimulationConfig& config, const CliOverrides& o) {
  if (o.model) config.model = parse_model(*o.model);
  if (o.conduct) {
    if (*o.conduct != "cournot" && *o.conduct != "perfect") {
      throw ConfigError("--conduct must be cournot or perfect");
    }
    config.conduct = *o.conduct;
  }
  if (o.phi) config.risk.phi = *o.phi;
  if (o.alpha) config.risk.alpha = *o.alpha;
  if (o.scenarios) config.scenario_count = *o.scenarios;
  if (o.seed) config.seed = *o.seed;
  if (o.out_dir) config.output.directory = *o.out_dir;
  config.validate();
}

std::string config_hash(const SimulationConfig& config) {
  // Identifies the experiment inputs; where results land and how many
  // workers computed them do not matter.
  json j = config_to_json(config);
  j.erase("output");
  j["sweep"].erase("workers");
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

MarketInstance build_instance(const SimulationConfig& config, const ScenarioSet& scen,
                              double res_capacity_mean) {
  const int S = scen.n_scenarios();
  std::vector<ConventionalGenerator> conventional;
  for (std::size_t i = 0; i < config.conventional.size(); ++i) {
    ConventionalGenerator g;
    g.cost_a.assign(S, config.conventional[i].cost_a);
    g.cost_b = scen.cost_b[i];
    g.cost_c = scen.cost_c[i];
    g.q_futures_min = config.conventional[i].q_futures_min;
    g.q_futures_max = config.conventional[i].q_futures_max;
    conventional.push_back(std::move(g));
  }
  std::vector<ResGenerator> res;
  for (std::size_t jj = 0; jj < config.res.size(); ++jj) {
    ResGenerator g;
    g.capacity = scen.capacity[jj];
    g.q_futures_min = config.res[jj].q_futures_min;
    g.q_futures_max = config.res[jj].q_futures_max.value_or(res_capacity_mean);
    res.push_back(std::move(g));
  }
  DemandCurves demand;
  demand.gamma_futures = config.gamma_futures.mean;
  demand.beta_futures = config.beta_futures.mean;
  demand.gamma_spot = scen.gamma_spot;
  demand.beta_spot = scen.beta_spot;
  return MarketInstance(config.model, std::move(conventional), std::move(res), std::move(demand),
                        config.conduct_params(), scen.sigma);
}

// --------------------------------------------------------------------------
// Headlines and output files
// --------------------------------------------------------------------------

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  for (char* p = buf; *p; ++p) {
    if (*p == ',') *p = '.';  // decimal point independent of any locale
  }
  return buf;
}

namespace {

double expectation(std::span<const double> values, std::span<const double> probs) {
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * probs[i];
  return s;
}

double e_price_without_futures(const MarketInstance& m) {
  const MarketInstance bare = with_model(m, MarketModel::SpotOnly);
  const SpotOutcome out = spot_only(bare);
  return expectation(out.price, bare.market_probabilities());
}

}  // namespace

HeadlineOutcomes headline_outcomes(const MarketInstance& m, const EquilibriumSolution& sol,
                                   double alpha) {
  HeadlineOutcomes h;
  const int I = m.n_conventional();
  const int n = m.n_generators();
  const auto& probs = m.market_probabilities();
  const SpotOutcome spot = solve_spot(m, sol.decision.q_futures);
  h.price_futures = sol.decision.price_futures;
  h.e_price_spot = expectation(spot.price, probs);
  h.e_price_spot_only = e_price_without_futures(m);
  for (int k = 0; k < n; ++k) {
    const double qf = sol.decision.q_futures[k];
    const double e_qs = expectation(spot.q[k], m.sigma(k));
    const double e_profit = expectation(sol.profits[k], m.sigma(k));
    const double cvar = cvar_value(sol.profits[k], m.sigma(k), alpha);
    if (k < I) {
      h.sum_qf_conv += qf;
      h.e_sum_qs_conv += e_qs;
      h.e_profit_conv += e_profit;
      h.cvar_conv += cvar;
    } else {
      h.sum_qf_res += qf;
      h.e_sum_qs_res += e_qs;
      h.e_profit_res += e_profit;
      h.cvar_res += cvar;
    }
  }
  h.objective_residual = sol.objective_residual;
  return h;
}

HeadlineOutcomes spot_only_headline(const MarketInstance& m, double alpha) {
  HeadlineOutcomes h;
  const MarketInstance bare = with_model(m, MarketModel::SpotOnly);
  const SpotOutcome spot = spot_only(bare);
  const auto& probs = bare.market_probabilities();
  h.price_futures = std::numeric_limits<double>::quiet_NaN();
  h.e_price_spot = expectation(spot.price, probs);
  h.e_price_spot_only = h.e_price_spot;
  const int I = bare.n_conventional();
  FuturesDecision none;
  none.q_futures.assign(bare.n_generators(), 0.0);
  none.price_futures = 0.0;
  for (int k = 0; k < bare.n_generators(); ++k) {
    std::vector<double> profits(bare.n_scenarios());
    for (int w = 0; w < bare.n_scenarios(); ++w) {
      profits[w] = profit_raw(bare, w, 0.0, 0.0, spot.price[w], spot.q[k][w], k);
    }
    const double e_qs = expectation(spot.q[k], bare.sigma(k));
    const double e_profit = expectation(profits, bare.sigma(k));
    const double cvar = cvar_value(profits, bare.sigma(k), alpha);
    if (k < I) {
      h.e_sum_qs_conv += e_qs;
      h.e_profit_conv += e_profit;
      h.cvar_conv += cvar;
    } else {
      h.e_sum_qs_res += e_qs;
      h.e_profit_res += e_profit;
      h.cvar_res += cvar;
    }
  }
  return h;
}

namespace {

const char* kCsvHeader =
    "config_hash,seed,model,conduct,phi,alpha,scenarios,res_level,pf,eps,eps_spot_only,"
    "qf_conv,qs_conv,qf_res,qs_res,profit_conv,profit_res,cvar_conv,cvar_res,objective,status";

std::string csv_row(const SimulationConfig& c, const std::string& hash, double phi,
                    double res_level, const HeadlineOutcomes& h, const std::string& status) {
  std::ostringstream out;
  out << hash << ',' << c.seed << ',' << to_string(c.model) << ',' << c.conduct << ','
      << format_number(phi) << ',' << format_number(c.risk.alpha) << ',' << c.scenario_count << ','
      << format_number(res_level);
  if (status == "ok") {
    const double fields[] = {h.price_futures, h.e_price_spot,   h.e_price_spot_only,
                             h.sum_qf_conv,   h.e_sum_qs_conv,  h.sum_qf_res,
                             h.e_sum_qs_res,  h.e_profit_conv,  h.e_profit_res,
                             h.cvar_conv,     h.cvar_res,       h.objective_residual};
    for (double f : fields) {
      out << ',';
      if (std::isfinite(f)) out << format_number(f);
    }
  } else {
    for (int i = 0; i < 12; ++i) out << ',';
  }
  out << ',' << status;
  return out.str();
}

json headline_to_json(const HeadlineOutcomes& h) {
  json j{{"eps", h.e_price_spot},
         {"eps_spot_only", h.e_price_spot_only},
         {"qf_conv", h.sum_qf_conv},
         {"qs_conv", h.e_sum_qs_conv},
         {"qf_res", h.sum_qf_res},
         {"qs_res", h.e_sum_qs_res},
         {"profit_conv", h.e_profit_conv},
         {"profit_res", h.e_profit_res},
         {"cvar_conv", h.cvar_conv},
         {"cvar_res", h.cvar_res},
         {"objective", h.objective_residual}};
  if (std::isfinite(h.price_futures)) j["pf"] = h.price_futures;
  return j;
}

fs::path output_path(const SimulationConfig& c, const std::string& name) {
  fs::create_directories(c.output.directory);
  return fs::path(c.output.directory) / (c.output.prefix + name);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct TrendPoint {
  double x;
  double y;
};

json trend_summary(const std::vector<SweepRow>& rows) {
  // Least-squares slope of every outcome against the sweep key.
  const std::pair<const char*, double HeadlineOutcomes::*> fields[] = {
      {"pf", &HeadlineOutcomes::price_futures},
      {"eps", &HeadlineOutcomes::e_price_spot},
      {"eps_spot_only", &HeadlineOutcomes::e_price_spot_only},
      {"qf_conv", &HeadlineOutcomes::sum_qf_conv},
      {"qs_conv", &HeadlineOutcomes::e_sum_qs_conv},
      {"qf_res", &HeadlineOutcomes::sum_qf_res},
      {"qs_res", &HeadlineOutcomes::e_sum_qs_res},
      {"profit_conv", &HeadlineOutcomes::e_profit_conv},
      {"profit_res", &HeadlineOutcomes::e_profit_res},
      {"cvar_conv", &HeadlineOutcomes::cvar_conv},
      {"cvar_res", &HeadlineOutcomes::cvar_res},
  };
  json out = json::array();
  for (const auto& [name, member] : fields) {
    std::vector<TrendPoint> pts;
    for (const auto& row : rows) {
      const double y = row.headline.*member;
      if (row.ok && std::isfinite(y)) pts.push_back({row.key, y});
    }
    if (pts.size() < 2) continue;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : pts) {
      sx += p.x;
      sy += p.y;
      sxx += p.x * p.x;
      sxy += p.x * p.y;
    }
    const double n = static_cast<double>(pts.size());
    const double denom = n * sxx - sx * sx;
    if (denom == 0.0) continue;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    out.push_back(json{{"outcome", name}, {"slope", slope}, {"intercept", intercept},
                       {"points", pts.size()}});
  }
  return out;
}

std::string trend_csv(const json& trends, const std::string& hash, std::uint64_t seed) {
  std::ostringstream out;
  out << "outcome,slope,intercept,points,config_hash,seed\n";
  for (const auto& t : trends) {
    out << t["outcome"].get<std::string>() << ',' << format_number(t["slope"].get<double>()) << ','
        << format_number(t["intercept"].get<double>()) << ',' << t["points"].get<std::size_t>()
        << ',' << hash << ',' << seed << '\n';
  }
  return out.str();
}

json solution_to_json(const EquilibriumSolution& sol) {
  return json{{"q_futures", sol.decision.q_futures},
              {"price_futures", sol.decision.price_futures},
              {"xi", sol.xi},
              {"eta", sol.eta},
              {"mu", sol.mu},
              {"theta", sol.theta},
              {"nu_min", sol.nu_min},
              {"nu_max", sol.nu_max},
              {"profits", sol.profits},
              {"objective_residual", sol.objective_residual},
              {"report",
               {{"starts_attempted", sol.report.starts_attempted},
                {"starts_converged", sol.report.starts_converged},
                {"accepted_start", sol.report.accepted_start},
                {"iterations", sol.report.iterations},
                {"wall_seconds", sol.report.wall_seconds}}}};
}

json diagnostics_to_json(const SolveReport& report) {
  json starts = json::array();
  for (const auto& d : report.starts) {
    starts.push_back(json{{"index", d.index},
                          {"converged", d.converged},
                          {"iterations", d.iterations},
                          {"stationarity", d.stationarity},
                          {"objective_scaled", d.objective_scaled},
                          {"q_norm", d.q_norm},
                          {"q_futures", d.q_futures}});
  }
  return json{{"starts_attempted", report.starts_attempted},
              {"starts_converged", report.starts_converged},
              {"wall_seconds", report.wall_seconds},
              {"starts", starts}};
}

}  // namespace

SingleRunResult run_single(const SimulationConfig& config) {
  config.validate();
  const std::string hash = config_hash(config);
  const ScenarioSet scen = generate(config.calibration(), static_cast<int>(config.conventional.size()),
                                    static_cast<int>(config.res.size()));
  const MarketInstance instance = build_instance(config, scen, config.res_capacity.mean);

  SingleRunResult result;
  json doc{{"config_hash", hash}, {"seed", config.seed}, {"config", config_to_json(config)}};
  if (config.model == MarketModel::SpotOnly) {
    result.headline = spot_only_headline(instance, config.risk.alpha);
  } else {
    try {
      result.solution = solve(instance, config.risk, config.solver);
      result.solved = true;
    } catch (const SolveFailure& failure) {
      const fs::path diag = output_path(config, "diagnostics.json");
      json d{{"config_hash", hash}, {"seed", config.seed}, {"error", failure.what()},
             {"report", diagnostics_to_json(failure.report)}};
      write_text(diag, d.dump(2) + "\n");
      throw;
    }
    result.headline = headline_outcomes(instance, result.solution, config.risk.alpha);
    const KktResiduals kkt =
        kkt_residuals(instance, config.risk, result.solution, config.solver.profit_scale);
    doc["solution"] = solution_to_json(result.solution);
    doc["kkt"] = {{"max_stationarity", kkt.max_stationarity()},
                  {"max_complementarity", kkt.max_complementarity()},
                  {"max_sign_violation", kkt.max_sign_violation()},
                  {"objective", kkt.objective}};
    json warnings = json::array();
    if (result.headline.e_sum_qs_conv < 0.0) {
      warnings.push_back("negative expected conventional spot volume (financial buy-back)");
    }
    if (result.headline.e_price_spot < 0.0) warnings.push_back("negative expected spot price");
    doc["warnings"] = warnings;
  }
  doc["headline"] = headline_to_json(result.headline);

  const fs::path json_path = output_path(config, "result.json");
  write_text(json_path, doc.dump(2) + "\n");
  result.json_path = json_path.string();

  const fs::path csv_path = output_path(config, "headline.csv");
  std::ostringstream csv;
  csv << kCsvHeader << '\n'
      << csv_row(config, hash, config.risk.phi, config.res_capacity.mean, result.headline, "ok")
      << '\n';
  write_text(csv_path, csv.str());
  result.csv_path = csv_path.string();
  return result;
}

namespace {

/// Runs `points` independent jobs in a bounded pool, preserving order.
std::vector<SweepRow> run_pool(int points, int workers,
                               const std::function<SweepRow(int)>& job) {
  std::vector<SweepRow> rows(points);
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  workers = std::min(workers, points);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= points) return;
      rows[idx] = job(idx);
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (int t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return rows;
}

SweepResult write_sweep_outputs(const SimulationConfig& config, const std::string& key_name,
                                std::vector<SweepRow> rows, const std::string& stem) {
  SweepResult result;
  const std::string hash = config_hash(config);
  std::ostringstream csv;
  csv << "key," << kCsvHeader << '\n';
  for (const auto& row : rows) {
    const double phi = key_name == "phi" ? row.key : config.risk.phi;
    const double level = key_name == "res_level" ? row.key : config.res_capacity.mean;
    csv << format_number(row.key) << ','
        << csv_row(config, hash, phi, level, row.headline, row.ok ? "ok" : "failed") << '\n';
    if (!row.ok) result.exit_code = 1;
  }
  const fs::path csv_path = output_path(config, stem + ".csv");
  write_text(csv_path, csv.str());
  result.csv_path = csv_path.string();

  const json trends = trend_summary(rows);
  const fs::path trend_path = output_path(config, stem + "_trends.csv");
  write_text(trend_path, trend_csv(trends, hash, config.seed));
  result.trend_path = trend_path.string();
  result.rows = std::move(rows);
  return result;
}

}  // namespace

SweepResult run_res_sweep(const SimulationConfig& config) {
  config.validate();
  if (config.sweep.res_levels.empty()) throw ConfigError("sweep.res_levels is empty");
  const auto calibrations =
      sweep_capacity(config.calibration(), config.sweep.res_levels);
  const int points = static_cast<int>(calibrations.size());

  auto job = [&](int idx) -> SweepRow {
    SweepRow row;
    row.key = config.sweep.res_levels[idx];
    try {
      const ScenarioSet scen = generate(calibrations[idx],
                                        static_cast<int>(config.conventional.size()),
                                        static_cast<int>(config.res.size()));
      const MarketInstance instance = build_instance(config, scen, row.key);
      if (config.model == MarketModel::SpotOnly) {
        row.headline = spot_only_headline(instance, config.risk.alpha);
      } else {
        const EquilibriumSolution sol = solve(instance, config.risk, config.solver);
        row.headline = headline_outcomes(instance, sol, config.risk.alpha);
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    return row;
  };
  auto rows = run_pool(points, config.sweep.workers, job);
  return write_sweep_outputs(config, "res_level", std::move(rows), "res_sweep");
}

SweepResult run_phi_sweep(const SimulationConfig& config) {
  config.validate();
  if (config.sweep.phi_grid.empty()) throw ConfigError("sweep.phi_grid is empty");
  if (config.model == MarketModel::SpotOnly) {
    throw ConfigError("phi sweep requires a futures-stage model (gm or cfd)");
  }
  // Common random numbers: one scenario set shared by every phi point.
  const ScenarioSet scen = generate(config.calibration(),
                                    static_cast<int>(config.conventional.size()),
                                    static_cast<int>(config.res.size()));
  const MarketInstance instance = build_instance(config, scen, config.res_capacity.mean);

  auto job = [&](int idx) -> SweepRow {
    SweepRow row;
    row.key = config.sweep.phi_grid[idx];
    try {
      RiskConfig risk = config.risk;
      risk.phi = row.key;
      const EquilibriumSolution sol = solve(instance, risk, config.solver);
      row.headline = headline_outcomes(instance, sol, risk.alpha);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    return row;
  };
  auto rows = run_pool(static_cast<int>(config.sweep.phi_grid.size()), config.sweep.workers, job);
  return write_sweep_outputs(config, "phi", std::move(rows), "phi_sweep");
}

// --------------------------------------------------------------------------
// verify: oracle and invariant suite on a config
// --------------------------------------------------------------------------

namespace {

/// Central finite difference of a generator's profit along its conjectured
/// deviation, composed with the closed-form spot map.
double conjectured_fd_gradient(const MarketInstance& m, std::span<const double> q, int k, int w) {
  const double h = 1e-4 * std::max(1000.0, std::abs(q[k]));
  const double psi = m.conduct().psi[k];
  auto value = [&](double step) {
    std::vector<double> moved(q.begin(), q.end());
    moved[k] += step;
    for (int r = 0; r < m.n_generators(); ++r) {
      if (r != k) moved[r] += psi * step;
    }
    const double pf = futures_price(m, moved);
    // A renewable deviator leaves the spot equilibrium untouched: only its
    // own contract volume moves against production.
    std::vector<double> spot_q(q.begin(), q.end());
    if (!m.is_res(k)) spot_q = moved;
    else spot_q[k] += step;
    const SpotOutcome spot = solve_spot(m, spot_q);
    return profit_raw(m, w, pf, moved[k], spot.price[w], spot.q[k][w], k);
  };
  return (value(h) - value(-h)) / (2.0 * h);
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

int run_verify(const SimulationConfig& config, std::ostream& log) {
  config.validate();
  int failures = 0;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    log << (ok ? "[ok]   " : "[FAIL] ") << name;
    if (!detail.empty()) log << ": " << detail;
    log << '\n';
    if (!ok) ++failures;
  };

  const ScenarioSet scen = generate(config.calibration(),
                                    static_cast<int>(config.conventional.size()),
                                    static_cast<int>(config.res.size()));
  const MarketInstance instance = build_instance(config, scen, config.res_capacity.mean);
  const int n = instance.n_generators();
  std::vector<double> probe(n);
  for (int k = 0; k < n; ++k) {
    probe[k] = 0.5 * (instance.futures_lower(k) + instance.futures_upper(k));
  }

  // Closed form vs best-response iteration, every scenario.
  {
    double worst = 0.0;
    const SpotOutcome closed = solve_spot(instance, probe);
    for (int w = 0; w < instance.n_scenarios(); ++w) {
      const SpotScenario oracle = best_response_oracle(instance, w, probe);
      worst = std::max(worst, std::abs(closed.price[w] - oracle.price) /
                                  std::max(1.0, std::abs(oracle.price)));
      for (int k = 0; k < n; ++k) {
        worst = std::max(worst, std::abs(closed.q[k][w] - oracle.q[k]) /
                                    std::max(1.0, std::abs(oracle.q[k])));
      }
    }
    report(worst < 1e-8, "spot closed form vs best-response oracle",
           "max relative gap " + format_number(worst));
  }

  // Zero-futures bridge across the three models.
  {
    std::vector<double> zero(n, 0.0);
    const SpotOutcome a = solve_spot(with_model(instance, MarketModel::GM), zero);
    const SpotOutcome b = solve_spot(with_model(instance, MarketModel::CFD), zero);
    const SpotOutcome c = spot_only(with_model(instance, MarketModel::SpotOnly));
    double worst = 0.0;
    for (int w = 0; w < instance.n_scenarios(); ++w) {
      worst = std::max({worst, std::abs(a.price[w] - c.price[w]), std::abs(b.price[w] - c.price[w])});
      for (int k = 0; k < n; ++k) {
        worst = std::max({worst, std::abs(a.q[k][w] - c.q[k][w]), std::abs(b.q[k][w] - c.q[k][w])});
      }
    }
    report(worst < 1e-9 * (1.0 + instance.demand().gamma_futures), "zero-futures model bridge",
           "max gap " + format_number(worst));
  }

  if (config.model == MarketModel::SpotOnly) {
    return failures == 0 ? 0 : 1;
  }

  // Analytic gradients vs conjectured finite differences.
  {
    double worst = 0.0;
    const PartialBundle partials = futures_partials(instance);
    const SpotOutcome spot = solve_spot(instance, probe);
    const auto grads = all_profit_gradients(instance, probe, spot, partials);
    const int sample = std::min(instance.n_scenarios(), 20);
    for (int k = 0; k < n; ++k) {
      for (int w = 0; w < sample; ++w) {
        const double fd = conjectured_fd_gradient(instance, probe, k, w);
        worst = std::max(worst, std::abs(fd - grads[k][w]) /
                                    std::max({1.0, std::abs(fd), std::abs(grads[k][w])}));
      }
    }
    report(worst < 1e-5, "analytic gradient vs finite differences",
           "max relative gap " + format_number(worst));
  }

  // Full solve with residual thresholds.
  try {
    const EquilibriumSolution sol = solve(instance, config.risk, config.solver);
    const KktResiduals kkt =
        kkt_residuals(instance, config.risk, sol, config.solver.profit_scale);
    report(sol.objective_residual <= config.solver.tolerance, "complementarity objective",
           format_number(sol.objective_residual));
    report(kkt.max_stationarity() <= config.solver.tolerance, "KKT stationarity residuals",
           format_number(kkt.max_stationarity()));
    report(kkt.max_sign_violation() <= config.solver.tolerance, "KKT sign conditions",
           format_number(kkt.max_sign_violation()));
    report(close_rel(futures_price(instance, sol.decision.q_futures),
                     sol.decision.price_futures, 1e-12),
           "futures price consistency", "");
  } catch (const SolveFailure& e) {
    report(false, "equilibrium solve", e.what());
  }

  return failures == 0 ? 0 : 1;
}

}  // namespace futspot
