#include "exitflow/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace exitflow {

double radial_exit_value(const TimeProfile& zeta, double radius, double t0,
                         double dist_from_center) {
  if (dist_from_center >= radius) return 0.0;
  const double target = radius - dist_from_center;
  double hi = 1.0;
  while (zeta.integral(t0, t0 + hi) < target) {
    hi *= 2.0;
    if (hi > 1e9) throw NonConvergence("radial oracle bracket diverged");
  }
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double val = zeta.integral(t0, t0 + mid);
    if (std::abs(val - target) <= 1e-12) return mid;
    if (val < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-15 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

SemiconcavityReport semiconcavity_estimate(const ValueGrid& vg, double t_hi) {
  const SpaceGrid& sg = vg.space_grid();
  const TimeGrid& tg = vg.time_grid();
  SemiconcavityReport rep;
  double max_all = -1e30, max_off = -1e30;

  struct Dir {
    int dx, dy;
  };
  std::vector<Dir> dirs = {{1, 0}};
  if (sg.dim == 2) {
    dirs.push_back({0, 1});
    dirs.push_back({1, 1});
    dirs.push_back({1, -1});
  }
  const int steps[3] = {1, 2, 4};

  for (int it = 0; it < tg.nt && tg.time(it) <= t_hi + 1e-12; ++it) {
    for (int iy = 0; iy < sg.ny; ++iy) {
      for (int ix = 0; ix < sg.nx; ++ix) {
        const int i = sg.index(ix, iy);
        if (vg.node_class(i) != NodeClass::Interior) continue;
        for (const Dir& d : dirs) {
          for (int m : steps) {
            const int jx = ix + m * d.dx, jy = iy + m * d.dy;
            const int kx = ix - m * d.dx, ky = iy - m * d.dy;
            if (!sg.contains_index(jx, jy) || !sg.contains_index(kx, ky))
              continue;
            const int j = sg.index(jx, jy);
            const int k = sg.index(kx, ky);
            // Band values sit at laterally displaced boundary projections,
            // which breaks a straight-line second difference; stay interior.
            if (vg.node_class(j) != NodeClass::Interior ||
                vg.node_class(k) != NodeClass::Interior)
              continue;
            const double step2 =
                sg.h * sg.h * m * m * (d.dx * d.dx + d.dy * d.dy);
            const double q =
                (vg.at(it, j) + vg.at(it, k) - 2.0 * vg.at(it, i)) / step2;
            max_all = std::max(max_all, q);
            // The off-ridge estimate restricts to stencil lines that do
            // not pass through a flagged kink anywhere between the ends.
            bool clean = true;
            for (int r = -m; r <= m && clean; ++r)
              if (vg.ridge_flag(it, sg.index(ix + r * d.dx, iy + r * d.dy)))
                clean = false;
            if (clean) max_off = std::max(max_off, q);
            ++rep.probes;
          }
        }
      }
    }
  }
  rep.with_ridge = std::max(0.0, max_all);
  rep.off_ridge = std::max(0.0, max_off);
  return rep;
}

MonotonicityReport time_monotonicity(const ValueGrid& vg, double t_hi) {
  const SpaceGrid& sg = vg.space_grid();
  const TimeGrid& tg = vg.time_grid();
  MonotonicityReport rep;
  double mn = 1e30;
  int slices = 0;
  for (int it = 0; it + 1 < tg.nt && tg.time(it + 1) <= t_hi + 1e-12; ++it) {
    ++slices;
    for (int i = 0; i < sg.size(); ++i) {
      if (vg.node_class(i) != NodeClass::Interior) continue;
      if (vg.ridge_flag(it, i) || vg.ridge_flag(it + 1, i)) continue;
      mn = std::min(mn, (vg.at(it + 1, i) - vg.at(it, i)) / tg.dt);
    }
  }
  rep.slices = slices;
  rep.min_quotient = slices > 0 && mn < 1e30 ? mn : 0.0;
  rep.implied_c = std::max(0.0, 1.0 + rep.min_quotient);
  return rep;
}

GradientBoundReport gradient_lower_bound(const ValueGrid& vg, double t_hi) {
  const SpaceGrid& sg = vg.space_grid();
  const TimeGrid& tg = vg.time_grid();
  GradientBoundReport rep;
  double mn = 1e30;
  for (int it = 0; it < tg.nt && tg.time(it) <= t_hi + 1e-12; ++it) {
    for (int iy = 0; iy < sg.ny; ++iy) {
      for (int ix = 0; ix < sg.nx; ++ix) {
        const int i = sg.index(ix, iy);
        if (vg.node_class(i) != NodeClass::Interior) continue;
        if (vg.ridge_flag(it, i)) continue;
        mn = std::min(mn, norm(vg.node_upwind_gradient(it, ix, iy)));
        ++rep.nodes;
      }
    }
  }
  rep.min_norm = mn < 1e30 ? mn : 0.0;
  rep.reference = 2.0 * vg.gradient_floor();  // c_cert / k_max
  return rep;
}

DppReport dpp_check(const ValueGrid& vg, const Trajectory& traj, int probes) {
  DppReport rep;
  rep.max_slack = -1e30;
  rep.min_slack = 1e30;
  const double t_end = traj.exited ? traj.exit_time()
                                   : traj.samples.back().t;
  std::vector<double> times;
  for (int i = 0; i <= probes; ++i)
    times.push_back(traj.t0 + (t_end - traj.t0) * i / probes);
  for (size_t a = 0; a < times.size(); ++a) {
    for (size_t b = a + 1; b < times.size(); ++b) {
      const double t0 = times[a], t1 = times[b];
      const double slack = (t1 - t0) + vg.value(t1, traj.position(t1)) -
                           vg.value(t0, traj.position(t0));
      rep.max_slack = std::max(rep.max_slack, slack);
      rep.min_slack = std::min(rep.min_slack, slack);
      ++rep.pairs;
    }
  }
  if (rep.pairs == 0) {
    rep.max_slack = 0.0;
    rep.min_slack = 0.0;
  }
  return rep;
}

TransversalityReport transversality_report(
    const std::vector<Trajectory>& trajs, const SpeedField& field,
    const SignedDomain& dom, const BoundaryCost& cost, double delta) {
  const FieldConstants& fc = field.constants();
  TransversalityReport rep;
  const double lam = cost.lipschitz();
  rep.certified_c = 0.25 * fc.k_min * (1.0 / fc.k_max - lam);
  const double num = fc.k_min * fc.k_min * (1.0 - lam * fc.k_max) *
                     (1.0 - lam * fc.k_max);
  const double den = 4.0 * fc.k_max * (1.0 + lam * fc.k_max) *
                     (dom.grad_lipschitz() * fc.k_max + fc.lip_x);
  rep.certified_delta =
      den > 0.0 ? std::min(dom.delta0(), num / den) : dom.delta0();
  rep.delta_used = delta > 0.0 ? delta : rep.certified_delta;

  for (const auto& tr : trajs) {
    for (const auto& s : tr.samples) {
      const double d = dom.signed_distance(s.x);
      if (d < -rep.delta_used || d >= 0.0) continue;
      const Vec gd = dom.distance_gradient(s.x);
      const double un = norm(s.u);
      if (un <= 1e-12) continue;
      rep.min_alignment = std::min(rep.min_alignment, dot(gd, s.u) / un);
      ++rep.samples;
    }
  }
  if (rep.samples == 0) rep.min_alignment = 1.0;
  return rep;
}

ExitBoundReport exit_bound_report(const std::vector<Trajectory>& trajs,
                                  const SpeedField& field,
                                  const SignedDomain& dom,
                                  const BoundaryCost& cost) {
  ExitBoundReport rep;
  rep.horizon = terminal_horizon(field, dom, cost);
  rep.total = static_cast<int>(trajs.size());
  for (const auto& tr : trajs) {
    if (!tr.exited) continue;
    ++rep.exited;
    rep.max_tau = std::max(rep.max_tau, tr.tau);
  }
  return rep;
}

double lp_envelope(double p, double c_div, double t) {
  if (p < 1.0) throw BadExponent("L^p envelope needs p >= 1");
  const double factor = std::isinf(p) ? 1.0 : 1.0 - 1.0 / p;
  return std::exp(factor * c_div * t);
}

}  // namespace exitflow
