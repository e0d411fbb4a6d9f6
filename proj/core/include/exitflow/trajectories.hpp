#pragma once

#include <optional>
#include <vector>

#include "exitflow/dynamics.hpp"
#include "exitflow/geometry.hpp"
#include "exitflow/hjb.hpp"

namespace exitflow {

struct TrajectorySample {
  double t;
  Vec x;
  Vec u;  // unit control in effect at time t
};

/// One agent path.  Samples are ordered in time; the last sample is the
/// exit event when the path reached the boundary.
struct Trajectory {
  double t0 = 0.0;
  Vec x0;
  double weight = 1.0;
  bool exited = false;
  double tau = 0.0;   // exit time offset: exit at t0 + tau
  Vec exit_point;
  double cost = 0.0;  // tau + g(exit_point), set when exited
  int gradient_fallbacks = 0;  // steps that reused the previous direction
  std::vector<TrajectorySample> samples;

  Vec position(double t) const;
  Vec control(double t) const;
  double exit_time() const { return t0 + tau; }
  bool exited_by(double t) const { return exited && t >= exit_time() - 1e-14; }
};

struct IntegratorParams {
  double dt = 0.0;            // ODE step; callers pass grid dt / 2
  double horizon = 0.0;       // stall budget measured from t0
  double exit_tol = 1e-9;     // |d| target for the exit bisection
  int exit_bisections = 40;
  int record_stride = 1;      // keep every k-th sample (exit always kept)
};

/// Follows the optimal synthesis x' = -k(t,x) grad phi / |grad phi|.
/// Throws DegenerateStart when the value gradient is flagged at (t0, x0)
/// and StallDetected when no exit occurs within the horizon budget.
Trajectory integrate_optimal(const ValueGrid& vg, const SpeedField& field,
                             const SignedDomain& dom, const BoundaryCost& cost,
                             Vec x0, double t0, const IntegratorParams& params);

/// Replays a recorded control signal from a different start.  Throws NoExit
/// when the signal ends before the path reaches the boundary.
Trajectory integrate_with_control(const SpeedField& field,
                                  const SignedDomain& dom,
                                  const BoundaryCost& cost, Vec x0, double t0,
                                  const Trajectory& control_source,
                                  const IntegratorParams& params);

/// Integrates the characteristic system
///   x' = k(t,x) u,   u' = -grad k + (u . grad k) u,
/// keeping |u| = 1, until the boundary is reached.
Trajectory integrate_characteristic(const SpeedField& field,
                                    const SignedDomain& dom,
                                    const BoundaryCost& cost, Vec x0, double t0,
                                    Vec u0, const IntegratorParams& params);

/// Realized cost tau + g(z); throws NotExited for paths still inside.
double trajectory_cost(const Trajectory& traj);

struct DualArc {
  std::vector<double> t;
  std::vector<Vec> p;
  double mu = 0.0;       // normal coefficient at the exit point
  Vec terminal;          // p at the exit: grad g - mu n
  bool degenerate = false;  // |p| fell below 1e-6 of the terminal magnitude
};

/// Backward dual equation p' = -(u . p) grad k along a stored trajectory,
/// from the transversality terminal condition at the exit point.
DualArc dual_arc(const Trajectory& traj, const SpeedField& field,
                 const SignedDomain& dom, const BoundaryCost& cost);

struct ShootingParams {
  int scan = 64;          // initial angular samples (2d)
  int bisections = 30;    // refinement steps on the bracketed angle
  double mismatch_tol = 5e-3;  // accepted terminal angle error (radians)
};

struct ShootingResult {
  Trajectory traj;
  double mismatch = 0.0;  // terminal angle error of the returned path
  double u0_angle = 0.0;
  int evaluated = 0;
};

/// Two-point problem: find u0 so the characteristic path satisfies the exit
/// condition u(exit) = (mu n - grad g) / |mu n - grad g|.  Among candidates
/// meeting the tolerance the cheapest one is returned; ShootingFailed
/// otherwise.
ShootingResult shooting_match(const SpeedField& field, const SignedDomain& dom,
                              const BoundaryCost& cost, Vec x0, double t0,
                              const IntegratorParams& params,
                              const ShootingParams& shoot = {});

}  // namespace exitflow
