// exitflow command line driver.
//
// Subcommands map one-to-one onto the pipelines in exitflow/runner.hpp.
// Exit codes: 0 success, 2 invalid configuration or usage, 3 verification
// failure, 4 runtime failure inside a pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include "exitflow/config.hpp"
#include "exitflow/errors.hpp"
#include "exitflow/runner.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "out";
  long long seed = -1;
  int threads = -1;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool needs_config) {
  if (needs_config) {
    sub->add_option("--config", o.config_path, "Path to a JSON run configuration")
        ->required()
        ->check(CLI::ExistingFile);
  }
  sub->add_option("--out", o.out_dir, "Output directory for artifacts");
  sub->add_option("--seed", o.seed, "Override the configured random seed");
  sub->add_option("--threads", o.threads, "Override the configured thread count");
  sub->add_flag("--quiet", o.quiet, "Suppress progress output");
}

bool env_quiet() {
  const char* v = std::getenv("EXITFLOW_LOG");
  if (v == nullptr) return false;
  const std::string s(v);
  return s == "quiet" || s == "off" || s == "0" || s == "none";
}

bool env_debug() {
  const char* v = std::getenv("EXITFLOW_LOG");
  if (v == nullptr) return false;
  const std::string s(v);
  return s == "debug" || s == "trace";
}

exitflow::RunConfig load_with_overrides(const CommonOpts& o) {
  exitflow::RunConfig cfg = exitflow::load_config(o.config_path);
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (o.threads >= 0) cfg.threads = o.threads;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"exitflow: exit-time control, value functions, and crowd equilibria"};
  app.require_subcommand(1);

  CommonOpts solve_o, traj_o, eq_o, eps_o, verify_o, report_o;

  CLI::App* solve = app.add_subcommand("solve-hjb", "Solve the value function and export it");
  add_common(solve, solve_o, true);
  CLI::App* traj = app.add_subcommand("trajectories", "Integrate optimal paths and shooting matches");
  add_common(traj, traj_o, true);
  CLI::App* eq = app.add_subcommand("equilibrium", "Run the fixed-point crowd equilibrium loop");
  add_common(eq, eq_o, true);
  CLI::App* eps = app.add_subcommand("epsilon-study", "Sweep averaging radii and compare limits");
  add_common(eps, eps_o, true);
  CLI::App* verify = app.add_subcommand("verify", "Run the quantitative check battery");
  add_common(verify, verify_o, true);
  CLI::App* report = app.add_subcommand("report", "Render report.md from an output directory");
  add_common(report, report_o, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const bool quiet_env = env_quiet();
  const bool debug = env_debug();

  auto announce = [&](const CommonOpts& o, const char* what) {
    if (o.quiet || quiet_env) return;
    std::cerr << "[exitflow] " << what << " -> " << o.out_dir << "\n";
  };

  try {
    if (solve->parsed()) {
      announce(solve_o, "solve-hjb");
      exitflow::RunConfig cfg = load_with_overrides(solve_o);
      if (debug) std::cerr << "[exitflow] config digest " << exitflow::config_digest(cfg) << "\n";
      return exitflow::run_solve(cfg, solve_o.out_dir);
    }
    if (traj->parsed()) {
      announce(traj_o, "trajectories");
      exitflow::RunConfig cfg = load_with_overrides(traj_o);
      return exitflow::run_trajectories(cfg, traj_o.out_dir);
    }
    if (eq->parsed()) {
      announce(eq_o, "equilibrium");
      exitflow::RunConfig cfg = load_with_overrides(eq_o);
      return exitflow::run_equilibrium(cfg, eq_o.out_dir);
    }
    if (eps->parsed()) {
      announce(eps_o, "epsilon-study");
      exitflow::RunConfig cfg = load_with_overrides(eps_o);
      return exitflow::run_epsilon_study(cfg, eps_o.out_dir);
    }
    if (verify->parsed()) {
      announce(verify_o, "verify");
      exitflow::RunConfig cfg = load_with_overrides(verify_o);
      return exitflow::run_verify(cfg, verify_o.out_dir);
    }
    if (report->parsed()) {
      announce(report_o, "report");
      return exitflow::run_report(report_o.out_dir);
    }
  } catch (const exitflow::ConfigInvalid& e) {
    std::cerr << "[exitflow] invalid config: " << e.what() << "\n";
    return 2;
  } catch (const exitflow::Error& e) {
    std::cerr << "[exitflow] error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "[exitflow] error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
