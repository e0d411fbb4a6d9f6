#include "exitflow/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "exitflow/errors.hpp"

namespace exitflow {

namespace {

double boundary_tol(const SignedDomain& dom) {
  return 1e-6 * std::max(1.0, dom.diameter());
}

// Interpolation helper over ordered samples.
template <typename Pick>
Vec interp_samples(const std::vector<TrajectorySample>& s, double t,
                   Pick pick) {
  if (s.empty()) return {};
  if (t <= s.front().t) return pick(s.front());
  if (t >= s.back().t) return pick(s.back());
  auto it = std::upper_bound(
      s.begin(), s.end(), t,
      [](double v, const TrajectorySample& a) { return v < a.t; });
  const TrajectorySample& hi = *it;
  const TrajectorySample& lo = *(it - 1);
  const double span = hi.t - lo.t;
  if (span <= 0.0) return pick(lo);
  const double w = (t - lo.t) / span;
  return (1.0 - w) * pick(lo) + w * pick(hi);
}

struct ExitEvent {
  bool crossed = false;
  double theta = 1.0;  // fraction of the step at the crossing
  Vec point;
};

// Bisects the straight chord a -> b for the boundary crossing.  a is
// strictly inside; d(b) >= 0.
ExitEvent bisect_exit(const SignedDomain& dom, Vec a, Vec b, double tol,
                      int iters) {
  ExitEvent ev;
  ev.crossed = true;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const Vec xm = a + mid * (b - a);
    const double d = dom.signed_distance(xm);
    if (std::abs(d) <= tol) {
      ev.theta = mid;
      ev.point = xm;
      return ev;
    }
    if (d < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  ev.theta = hi;
  ev.point = a + hi * (b - a);
  return ev;
}

// Shared integration loop.  `direction` returns the unit control for
// (t, x); `ok=false` marks a failed gradient probe, in which case the
// previous direction is reused.
template <typename Direction>
Trajectory run_integration(const SpeedField& field, const SignedDomain& dom,
                           const BoundaryCost& cost, Vec x0, double t0,
                           const IntegratorParams& params, Direction direction,
                           bool stall_is_no_exit) {
  Trajectory traj;
  traj.t0 = t0;
  traj.x0 = x0;
  const double dt = params.dt;
  if (dt <= 0.0) throw ConfigInvalid("integrator step must be positive");
  const double tol = boundary_tol(dom);
  const double d0 = dom.signed_distance(x0);
  if (d0 >= 0.0) {
    // Starting on (or numerically at) the boundary: immediate exit.
    traj.exited = true;
    traj.tau = 0.0;
    traj.exit_point = dom.project_to_boundary(x0);
    traj.cost = cost.value(dom, traj.exit_point, tol);
    traj.samples.push_back({t0, traj.exit_point, Vec{}});
    return traj;
  }

  Vec x = x0;
  double t = t0;
  Vec u_prev{};
  bool have_prev = false;
  const int stride = std::max(1, params.record_stride);
  long step = 0;
  const double t_stop = t0 + params.horizon;

  auto probe = [&](double tt, Vec xx, Vec* u) -> bool {
    bool ok = true;
    *u = direction(tt, xx, &ok);
    if (!ok) {
      if (!have_prev) return false;
      ++traj.gradient_fallbacks;
      *u = u_prev;
    }
    return true;
  };

  while (t < t_stop) {
    Vec u1;
    if (!probe(t, x, &u1)) {
      throw DegenerateStart("value gradient unusable at the start point");
    }
    if (step % stride == 0) traj.samples.push_back({t, x, u1});
    const Vec v1 = field.value(t, x) * u1;
    const Vec xm = x + (0.5 * dt) * v1;
    Vec x_new;
    Vec u_used = u1;
    if (dom.signed_distance(xm) >= 0.0) {
      // Midpoint already crossed; fall back to an Euler step for the event.
      x_new = x + dt * v1;
    } else {
      Vec um;
      if (!probe(t + 0.5 * dt, xm, &um)) um = u1;
      const Vec vm = field.value(t + 0.5 * dt, xm) * um;
      x_new = x + dt * vm;
      u_used = um;
    }
    have_prev = true;
    u_prev = u_used;
    if (dom.signed_distance(x_new) >= 0.0) {
      const ExitEvent ev = bisect_exit(dom, x, x_new, params.exit_tol,
                                       params.exit_bisections);
      const double t_exit = t + ev.theta * dt;
      traj.exited = true;
      traj.tau = t_exit - t0;
      traj.exit_point = dom.project_to_boundary(ev.point);
      traj.cost = traj.tau + cost.value(dom, traj.exit_point, tol);
      traj.samples.push_back({t_exit, traj.exit_point, u_used});
      return traj;
    }
    x = x_new;
    t += dt;
    ++step;
  }
  if (stall_is_no_exit) {
    throw NoExit("control signal exhausted before reaching the boundary");
  }
  char msg[160];
  std::snprintf(msg, sizeof(msg),
                "no boundary crossing before t = %.6g (started at %.6g)",
                t_stop, t0);
  throw StallDetected(msg);
}

}  // namespace

Vec Trajectory::position(double t) const {
  if (exited && t >= exit_time()) return exit_point;
  return interp_samples(samples, t,
                        [](const TrajectorySample& s) { return s.x; });
}

Vec Trajectory::control(double t) const {
  const Vec u = interp_samples(samples, t,
                               [](const TrajectorySample& s) { return s.u; });
  const double n = norm(u);
  return n > 1e-12 ? (1.0 / n) * u : u;
}

Trajectory integrate_optimal(const ValueGrid& vg, const SpeedField& field,
                             const SignedDomain& dom, const BoundaryCost& cost,
                             Vec x0, double t0, const IntegratorParams& params) {
  const SpaceGrid& sg = vg.space_grid();
  const TimeGrid& tg = vg.time_grid();
  const double bd_tol = boundary_tol(dom);

  // Direction fan for the value-descent fallback.
  std::vector<Vec> fan;
  if (sg.dim == 1) {
    fan = {Vec{1.0, 0.0}, Vec{-1.0, 0.0}};
  } else {
    const double two_pi = 6.28318530717958647692;
    fan.reserve(16);
    for (int a = 0; a < 16; ++a)
      fan.push_back({std::cos(two_pi * a / 16), std::sin(two_pi * a / 16)});
  }

  auto direction = [&, fan](double t, Vec x, bool* ok) -> Vec {
    Vec g{};
    const GradientStatus st = vg.try_gradient(t, x, &g);
    const double gn = norm(g);
    if (st == GradientStatus::Ok && gn > 1e-14) return (-1.0 / gn) * g;

    // Interpolating the gradient across a kink can cancel it even though
    // both cell corners carry clean one-sided slopes; the nearest
    // unflagged node keeps a usable direction.
    const int node = sg.nearest(x);
    const int it = tg.floor_index(t);
    if (!vg.ridge_flag(it, node) &&
        vg.node_class(node) == NodeClass::Interior) {
      const Vec gl = vg.node_upwind_gradient(it, node % sg.nx, node / sg.nx);
      const double gln = norm(gl);
      if (gln >= vg.gradient_floor()) return (-1.0 / gln) * gl;
    }

    // Last resort (start on a flagged ridge): greedy one-step descent on
    // the value surface, mirroring the solver's candidate search.  Any
    // near-minimal choice is acceptable there; ties break on fan order.
    const double step = field.value(t, x) * tg.dt;
    const double t_next = std::min(t + tg.dt, tg.t_end());
    double best = std::numeric_limits<double>::infinity();
    Vec best_u{};
    for (const Vec& u : fan) {
      const Vec foot = x + step * u;
      double val;
      if (dom.signed_distance(foot) >= 0.0) {
        // Crossing candidates pay the in-step travel time so an early
        // radial exit beats a grazing one.
        double lo = 0.0, hi = 1.0;
        for (int b = 0; b < 20; ++b) {
          const double mid = 0.5 * (lo + hi);
          (dom.signed_distance(x + mid * step * u) < 0.0 ? lo : hi) = mid;
        }
        const Vec z = dom.project_to_boundary(x + hi * step * u);
        val = hi * tg.dt + cost.value(dom, z, bd_tol);
      } else {
        val = tg.dt + vg.value(t_next, foot);
      }
      if (val < best) {
        best = val;
        best_u = u;
      }
    }
    if (best <= vg.value(t, x) + 0.5 * tg.dt) return best_u;
    *ok = false;
    return {};
  };
  return run_integration(field, dom, cost, x0, t0, params, direction, false);
}

Trajectory integrate_with_control(const SpeedField& field,
                                  const SignedDomain& dom,
                                  const BoundaryCost& cost, Vec x0, double t0,
                                  const Trajectory& control_source,
                                  const IntegratorParams& params) {
  auto direction = [&](double t, Vec /*x*/, bool* ok) -> Vec {
    const Vec u = control_source.control(t);
    if (norm(u) <= 1e-12) {
      *ok = false;
      return {};
    }
    return u;
  };
  return run_integration(field, dom, cost, x0, t0, params, direction, true);
}

Trajectory integrate_characteristic(const SpeedField& field,
                                    const SignedDomain& dom,
                                    const BoundaryCost& cost, Vec x0, double t0,
                                    Vec u0, const IntegratorParams& params) {
  const double un = norm(u0);
  if (un <= 1e-12) throw ConfigInvalid("characteristic needs a unit control");
  Vec u = (1.0 / un) * u0;

  // The control evolves alongside the state; run_integration sees a closure
  // that advances u by the same midpoint rule keyed on the queried time.
  double u_time = t0;
  auto rhs = [&](double t, Vec x, Vec uu) -> Vec {
    const Vec gk = field.gradient(t, x);
    return -1.0 * gk + dot(uu, gk) * uu;
  };
  auto direction = [&](double t, Vec x, bool* /*ok*/) -> Vec {
    if (t > u_time + 1e-15) {
      const double step = t - u_time;
      const Vec k1 = rhs(u_time, x, u);
      Vec um = u + (0.5 * step) * k1;
      double nm = norm(um);
      if (nm > 1e-12) um = (1.0 / nm) * um;
      const Vec k2 = rhs(u_time + 0.5 * step, x, um);
      u = u + step * k2;
      nm = norm(u);
      if (nm > 1e-12) u = (1.0 / nm) * u;
      u_time = t;
    }
    return u;
  };
  return run_integration(field, dom, cost, x0, t0, params, direction, false);
}

double trajectory_cost(const Trajectory& traj) {
  if (!traj.exited) throw NotExited("cost queried on a path still inside");
  return traj.cost;
}

DualArc dual_arc(const Trajectory& traj, const SpeedField& field,
                 const SignedDomain& dom, const BoundaryCost& cost) {
  if (!traj.exited) throw NotExited("dual arc needs an exited path");
  DualArc arc;
  const double tol = boundary_tol(dom);
  const Vec z = traj.exit_point;
  const double te = traj.exit_time();
  const Vec n = dom.outward_normal(z, tol);
  const Vec gt = cost.tangential_gradient(dom, z, tol);
  const double ke = field.value(te, z);
  const double mu_t = solve_transversality_mu(ke, gt, n);
  arc.mu = mu_t + dot(cost.ambient_gradient(), n);
  arc.terminal = gt - mu_t * n;
  const double p_ref = std::max(norm(arc.terminal), 1e-12);

  auto rhs = [&](double t, Vec p) -> Vec {
    const Vec x = traj.position(t);
    const Vec u = traj.control(t);
    const Vec gk = field.gradient(t, x);
    return -dot(u, p) * gk;
  };

  // Walk the recorded sample times backward with the midpoint rule.
  std::vector<double> times;
  times.reserve(traj.samples.size());
  for (const auto& s : traj.samples) times.push_back(s.t);
  if (times.empty() || times.back() < te - 1e-14) times.push_back(te);

  Vec p = arc.terminal;
  arc.t.push_back(te);
  arc.p.push_back(p);
  for (int i = static_cast<int>(times.size()) - 1; i > 0; --i) {
    const double tb = times[i];
    const double ta = times[i - 1];
    const double step = tb - ta;
    if (step <= 0.0) continue;
    const Vec k1 = rhs(tb, p);
    const Vec pm = p - (0.5 * step) * k1;
    const Vec k2 = rhs(tb - 0.5 * step, pm);
    p = p - step * k2;
    arc.t.push_back(ta);
    arc.p.push_back(p);
    if (norm(p) < 1e-6 * p_ref) arc.degenerate = true;
  }
  std::reverse(arc.t.begin(), arc.t.end());
  std::reverse(arc.p.begin(), arc.p.end());
  return arc;
}

namespace {

// Angle between the realized exit control and the transversality direction
// (mu n - grad g) normalized; signed in 2d, 0 or pi in 1d.
double exit_mismatch(const Trajectory& traj, const SpeedField& field,
                     const SignedDomain& dom, const BoundaryCost& cost) {
  const double tol = boundary_tol(dom);
  const Vec z = traj.exit_point;
  const Vec n = dom.outward_normal(z, tol);
  const Vec gt = cost.tangential_gradient(dom, z, tol);
  const double ke = field.value(traj.exit_time(), z);
  const double mu_t = solve_transversality_mu(ke, gt, n);
  Vec w = mu_t * n - gt;
  const double wn = norm(w);
  if (wn <= 1e-14) return 0.0;
  w = (1.0 / wn) * w;
  const Vec u = traj.samples.empty() ? n : traj.samples.back().u;
  if (dom.dim() == 1) return dot(u, w) > 0.0 ? 0.0 : 3.14159265358979323846;
  return std::atan2(cross(u, w), dot(u, w));
}

}  // namespace

ShootingResult shooting_match(const SpeedField& field, const SignedDomain& dom,
                              const BoundaryCost& cost, Vec x0, double t0,
                              const IntegratorParams& params,
                              const ShootingParams& shoot) {
  ShootingResult best;
  bool found = false;
  double best_abs_any = 1e30;
  int evaluated = 0;

  auto try_angle = [&](double angle, Vec u0) -> std::optional<Trajectory> {
    ++evaluated;
    try {
      Trajectory tr =
          integrate_characteristic(field, dom, cost, x0, t0, u0, params);
      (void)angle;
      return tr;
    } catch (const StallDetected&) {
      return std::nullopt;
    } catch (const OutsideTube&) {
      return std::nullopt;
    }
  };

  auto consider = [&](double angle, const Trajectory& tr) {
    const double s = exit_mismatch(tr, field, dom, cost);
    best_abs_any = std::min(best_abs_any, std::abs(s));
    if (std::abs(s) <= shoot.mismatch_tol) {
      if (!found || tr.cost < best.traj.cost - 1e-15) {
        best.traj = tr;
        best.mismatch = s;
        best.u0_angle = angle;
        found = true;
      }
    }
    return s;
  };

  if (dom.dim() == 1) {
    for (const double a : {1.0, -1.0}) {
      auto tr = try_angle(a, Vec{a, 0.0});
      if (tr) consider(a, *tr);
    }
  } else {
    const double two_pi = 6.28318530717958647692;
    const int m = std::max(8, shoot.scan);
    std::vector<double> angles(m), mis(m);
    std::vector<char> ok(m, 0);
    for (int i = 0; i < m; ++i) {
      const double a = two_pi * i / m;
      angles[i] = a;
      auto tr = try_angle(a, Vec{std::cos(a), std::sin(a)});
      if (tr) {
        ok[i] = 1;
        mis[i] = consider(a, *tr);
      }
    }
    // Refine every bracket with a sign change that does not wrap through pi.
    for (int i = 0; i < m; ++i) {
      const int j = (i + 1) % m;
      if (!ok[i] || !ok[j]) continue;
      if (mis[i] == 0.0 || mis[j] == 0.0) continue;
      if (mis[i] * mis[j] > 0.0) continue;
      if (std::abs(mis[i]) + std::abs(mis[j]) > 3.0) continue;
      double lo = angles[i];
      double hi = angles[i] + two_pi / m;
      double s_lo = mis[i];
      for (int b = 0; b < shoot.bisections; ++b) {
        const double mid = 0.5 * (lo + hi);
        auto tr = try_angle(mid, Vec{std::cos(mid), std::sin(mid)});
        if (!tr) break;
        const double s_mid = consider(mid, *tr);
        if (s_mid == 0.0) break;
        if (s_lo * s_mid < 0.0) {
          hi = mid;
        } else {
          lo = mid;
          s_lo = s_mid;
        }
      }
    }
  }

  best.evaluated = evaluated;
  if (!found) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "no shot met the exit condition (best angle error %.3g rad "
                  "after %d paths)",
                  best_abs_any, evaluated);
    throw ShootingFailed(msg);
  }
  return best;
}

}  // namespace exitflow
