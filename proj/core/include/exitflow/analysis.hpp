#pragma once

#include <string>
#include <vector>

#include "exitflow/time_profile.hpp"
#include "exitflow/trajectories.hpp"
#include "exitflow/transport.hpp"

namespace exitflow {

/// Closed-form optimal exit data for a centered ball with zero exit cost and
/// a purely time-dependent speed zeta(t): the optimal path runs radially
/// outward, so the remaining time T solves
///   integral_{t0}^{t0+T} zeta(s) ds = R - |x|.
/// Bisection on the exact profile integral, |residual| <= 1e-12.
double radial_exit_value(const TimeProfile& zeta, double radius, double t0,
                         double dist_from_center);

struct SemiconcavityReport {
  double with_ridge = 0.0;  // max centered second difference, all nodes
  double off_ridge = 0.0;   // same, triples containing flagged nodes skipped
  int probes = 0;
};

/// Largest centered second difference quotient of the value over interior
/// probe triples (axis and diagonal directions, steps of 1, 2 and 4 cells),
/// restricted to slices up to t_hi.  Negative maxima clip to zero.
SemiconcavityReport semiconcavity_estimate(const ValueGrid& vg, double t_hi);

struct MonotonicityReport {
  double min_quotient = 0.0;  // min slicewise (phi(t+dt) - phi(t)) / dt
  double implied_c = 0.0;     // 1 + min_quotient, clamped at 0
  int slices = 0;
};

/// Time difference quotients of the value on interior off-ridge nodes for
/// slices below t_hi; the quotient is bounded below by c - 1 where c is the
/// boundary transversality constant.
MonotonicityReport time_monotonicity(const ValueGrid& vg, double t_hi);

struct GradientBoundReport {
  double min_norm = 0.0;  // min upwind gradient norm, off-ridge interior
  double reference = 0.0;  // c_cert / k_max comparison level
  int nodes = 0;
};

GradientBoundReport gradient_lower_bound(const ValueGrid& vg, double t_hi);

struct DppReport {
  double max_slack = 0.0;   // max over probed pairs of the dpp slack
  double min_slack = 0.0;   // min over probed pairs (>= -tol when valid)
  int pairs = 0;
};

/// Dynamic programming slack (t1 - t0) + phi(t1, x(t1)) - phi(t0, x(t0))
/// along a path, over all ordered probe pairs.  Zero along optimal paths,
/// nonnegative along any admissible path.
DppReport dpp_check(const ValueGrid& vg, const Trajectory& traj,
                    int probes = 24);

struct TransversalityReport {
  double min_alignment = 1e30;  // min grad d . u over in-tube samples
  double certified_c = 0.0;     // (k_min / 4) (1 / k_max - lip g)
  double certified_delta = 0.0;  // tube width where the bound is claimed
  double delta_used = 0.0;
  int samples = 0;
};

/// Boundary-tube alignment of realized controls with the outward distance
/// gradient, measured over every stored sample with -delta <= d < 0.
TransversalityReport transversality_report(
    const std::vector<Trajectory>& trajs, const SpeedField& field,
    const SignedDomain& dom, const BoundaryCost& cost, double delta = 0.0);

struct ExitBoundReport {
  double max_tau = 0.0;
  double horizon = 0.0;  // certified uniform bound
  int exited = 0;
  int total = 0;
};

ExitBoundReport exit_bound_report(const std::vector<Trajectory>& trajs,
                                  const SpeedField& field,
                                  const SignedDomain& dom,
                                  const BoundaryCost& cost);

/// Growth envelope exp((1 - 1/p) c_div t) for interior L^p norms under the
/// mollified exit flow; p may be infinity.
double lp_envelope(double p, double c_div, double t);

/// One certification line: a measured quantity against its certified bound.
struct CheckRecord {
  std::string name;
  double measured = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string note;
};

}  // namespace exitflow
