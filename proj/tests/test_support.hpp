#pragma once

// Shared fixtures for the unit suites: small, fast problem setups with
// closed-form references.  Everything here stays coarse on purpose; the
// acceptance binary owns the production-resolution runs.

#include <cmath>
#include <vector>

#include "exitflow/analysis.hpp"
#include "exitflow/dynamics.hpp"
#include "exitflow/equilibrium.hpp"
#include "exitflow/geometry.hpp"
#include "exitflow/hjb.hpp"
#include "exitflow/time_profile.hpp"
#include "exitflow/trajectories.hpp"
#include "exitflow/transport.hpp"

namespace exitflow::testsupport {

/// Node-centered grid covering [lo, hi]^dim with padding wide enough for
/// the 3h boundary band of a domain whose bbox is [lo, hi].
inline SpaceGrid make_grid(int dim, double lo, double hi, double h,
                           double pad_cells = 4.5) {
  SpaceGrid sg;
  sg.dim = dim;
  sg.h = h;
  const double pad = pad_cells * h;
  sg.origin = dim == 2 ? Vec{lo - pad, lo - pad} : Vec{lo - pad, 0.0};
  sg.nx = static_cast<int>(std::ceil((hi - lo + 2.0 * pad) / h)) + 1;
  sg.ny = dim == 2 ? sg.nx : 1;
  return sg;
}

inline TimeGrid make_time_grid(double t_end, double dt) {
  TimeGrid tg;
  tg.t0 = 0.0;
  tg.dt = dt;
  tg.nt = static_cast<int>(std::ceil(t_end / dt)) + 1;
  return tg;
}

struct Problem {
  SignedDomain dom;
  BoundaryCost cost;
  SpeedField field;
  SpaceGrid sg;
  TimeGrid tg;
};

/// Unit interval with profile speed; horizon padded past the certified
/// uniform exit bound.
inline Problem interval_problem(const TimeProfile& zeta, double h,
                                BoundaryCost cost = BoundaryCost::zero(),
                                double horizon_pad = 1.3) {
  Problem p;
  p.dom = SignedDomain::interval(0.0, 1.0);
  p.cost = cost;
  p.sg = make_grid(1, 0.0, 1.0, h);
  const double guess = 2.0;  // generous window for the profile extremes
  const double k_max = zeta.max_on(0.0, guess);
  const double dt = 0.5 * h / k_max;
  SpeedField probe = SpeedField::from_profile(zeta, make_time_grid(1.0, dt), p.sg);
  const double t_up = terminal_horizon(probe, p.dom, cost);
  p.tg = make_time_grid(horizon_pad * t_up, dt);
  p.field = SpeedField::from_profile(zeta, p.tg, p.sg);
  return p;
}

/// Unit ball with profile speed.
inline Problem ball_problem(const TimeProfile& zeta, double h,
                            BoundaryCost cost = BoundaryCost::zero(),
                            double horizon_pad = 1.3) {
  Problem p;
  p.dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  p.cost = cost;
  p.sg = make_grid(2, -1.0, 1.0, h);
  const double guess = 4.0;
  const double k_max = zeta.max_on(0.0, guess);
  const double dt = 0.5 * h / k_max;
  SpeedField probe = SpeedField::from_profile(zeta, make_time_grid(1.0, dt), p.sg);
  const double t_up = terminal_horizon(probe, p.dom, cost);
  p.tg = make_time_grid(horizon_pad * t_up, dt);
  p.field = SpeedField::from_profile(zeta, p.tg, p.sg);
  return p;
}

inline ValueGrid solve(const Problem& p, int threads = 2) {
  HjbParams hp;
  hp.threads = threads;
  return solve_value_function(p.field, p.dom, p.cost, hp);
}

inline IntegratorParams integrator(const Problem& p) {
  IntegratorParams ip;
  ip.dt = 0.5 * p.tg.dt;
  ip.horizon = p.tg.t_end();
  return ip;
}

}  // namespace exitflow::testsupport
