// Command-line front end: single solves, RES-penetration and risk sweeps,
// and an oracle/invariant verification pass, all driven by a JSON config.
//
// Exit codes: 0 success, 1 partial sweep failure (or failed verification),
// 2 invalid input, 3 solver non-convergence.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "futspot/simulation.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  futspot::CliOverrides overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "path to the JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--model", args.overrides.model, "market model: gm|cfd|spot-only");
  cmd->add_option("--conduct", args.overrides.conduct, "conduct preset: cournot|perfect");
  cmd->add_option("--phi", args.overrides.phi, "risk blend in [0,1]");
  cmd->add_option("--alpha", args.overrides.alpha, "CVaR confidence level in (0,1)");
  cmd->add_option("--scenarios", args.overrides.scenarios, "scenario count");
  cmd->add_option("--seed", args.overrides.seed, "scenario seed");
  cmd->add_option("--out", args.overrides.out_dir, "output directory");
}

futspot::SimulationConfig load(const CommonArgs& args) {
  futspot::SimulationConfig config = futspot::load_config(args.config_path);
  futspot::CliOverrides overrides = args.overrides;
  if (!overrides.out_dir) {
    if (const char* env = std::getenv("FUTSPOT_OUT")) overrides.out_dir = std::string(env);
  }
  futspot::apply_overrides(config, overrides);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage electricity market equilibrium studies"};
  app.require_subcommand(1);

  CommonArgs solve_args, res_args, phi_args, verify_args;
  CLI::App* cmd_solve = app.add_subcommand("solve", "single equilibrium solve");
  add_common(cmd_solve, solve_args);
  CLI::App* cmd_res = app.add_subcommand("sweep-res", "sweep renewable penetration levels");
  add_common(cmd_res, res_args);
  CLI::App* cmd_phi = app.add_subcommand("sweep-phi", "sweep the risk parameter phi");
  add_common(cmd_phi, phi_args);
  CLI::App* cmd_verify = app.add_subcommand("verify", "run the oracle/invariant suite");
  add_common(cmd_verify, verify_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (cmd_solve->parsed()) {
      const auto config = load(solve_args);
      const auto result = futspot::run_single(config);
      std::cout << "wrote " << result.json_path << "\n";
      std::cout << "wrote " << result.csv_path << "\n";
      return 0;
    }
    if (cmd_res->parsed()) {
      const auto config = load(res_args);
      const auto result = futspot::run_res_sweep(config);
      std::cout << "wrote " << result.csv_path << "\n";
      std::cout << "wrote " << result.trend_path << "\n";
      if (result.exit_code != 0) std::cerr << "some sweep points failed\n";
      return result.exit_code;
    }
    if (cmd_phi->parsed()) {
      const auto config = load(phi_args);
      const auto result = futspot::run_phi_sweep(config);
      std::cout << "wrote " << result.csv_path << "\n";
      std::cout << "wrote " << result.trend_path << "\n";
      if (result.exit_code != 0) std::cerr << "some sweep points failed\n";
      return result.exit_code;
    }
    if (cmd_verify->parsed()) {
      const auto config = load(verify_args);
      return futspot::run_verify(config, std::cout);
    }
  } catch (const futspot::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const futspot::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const futspot::DimensionError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const futspot::SolveFailure& e) {
    std::cerr << "solver did not converge: " << e.what() << "\n";
    return 3;
  } catch (const futspot::ConvergenceError& e) {
    std::cerr << "solver did not converge: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
