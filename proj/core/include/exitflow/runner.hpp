#pragma once

#include <string>

#include "exitflow/analysis.hpp"
#include "exitflow/config.hpp"
#include "exitflow/equilibrium.hpp"
#include "exitflow/io.hpp"

namespace exitflow {

/// Materialized problem: geometry, cost, certified speed bounds, and grids
/// sized so the covered horizon dominates every certified exit time (with a
/// contamination pad when the driving field never settles).
struct RunSetup {
  RunConfig cfg;
  SignedDomain dom;
  BoundaryCost cost;
  SpaceGrid sg;
  TimeGrid tg;
  int threads = 1;
  double k_min = 0.0;
  double k_max = 0.0;
  double t_upper = 0.0;  // uniform exit-time bound from t = 0
  double g_max = 0.0;
  bool kernel_dynamic = false;
};

RunSetup make_setup(const RunConfig& cfg);

/// Tabulated field for profile dynamics.
SpeedField profile_field(const RunSetup& s);

/// Field induced by the initial crowd held fixed in time (kernel configs).
SpeedField frozen_kernel_field(const RunSetup& s, const InteractionKernel& kernel,
                               const WeightedPoints& pts);

// Pipelines.  Each writes its artifacts plus manifest.json into out_dir and
// returns a process exit code: 0 success, 3 failed verification, 4 runtime
// error (with a FAILED outcome flushed to the manifest).
int run_solve(const RunConfig& cfg, const std::string& out_dir);
int run_trajectories(const RunConfig& cfg, const std::string& out_dir);
int run_equilibrium(const RunConfig& cfg, const std::string& out_dir);
int run_epsilon_study(const RunConfig& cfg, const std::string& out_dir);
int run_verify(const RunConfig& cfg, const std::string& out_dir);
int run_report(const std::string& out_dir);

/// Verification battery used by run_verify; exposed for tests.
std::vector<CheckRecord> verify_checks(const RunConfig& cfg);

}  // namespace exitflow
