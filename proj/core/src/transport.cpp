#include "exitflow/transport.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>

#include "exitflow/parallel.hpp"

namespace exitflow {

namespace {

double bump01(double s) {
  const double r2 = s * s;
  if (r2 >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - r2));
}

double bump01_prime(double s) {
  const double r2 = s * s;
  if (r2 >= 1.0) return 0.0;
  const double q = 1.0 - r2;
  return bump01(s) * (-2.0 * s / (q * q));
}

}  // namespace

namespace {

// Kahan compensated sum: keeps the 1e-12 normalization checks honest for
// 1e5-particle ensembles.
template <typename It, typename Get>
double kahan_sum(It begin, It end, Get get) {
  double s = 0.0, c = 0.0;
  for (It it = begin; it != end; ++it) {
    const double y = get(*it) - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  return s;
}

}  // namespace

double WeightedPoints::total_weight() const {
  return kahan_sum(w.begin(), w.end(), [](double v) { return v; });
}

double LagrangianMeasure::total_weight() const {
  return kahan_sum(curves.begin(), curves.end(),
                   [](const Trajectory& t) { return t.weight; });
}

void LagrangianMeasure::check_normalized(double tol) const {
  const double s = total_weight();
  if (std::abs(s - 1.0) > tol)
    throw UnnormalizedDensity("curve weights sum to " + std::to_string(s));
}

DensitySnapshot push_forward(const LagrangianMeasure& m, double t,
                             const SpaceGrid& sg) {
  DensitySnapshot snap;
  snap.time = t;
  snap.cells.assign(sg.size(), 0.0);
  for (const auto& c : m.curves) {
    if (c.exited_by(t)) {
      snap.exited_mass += c.weight;
    } else {
      snap.cells[sg.nearest(c.position(t))] += c.weight;
    }
  }
  const double inv_vol = 1.0 / sg.cell_volume();
  for (double& v : snap.cells) v *= inv_vol;
  return snap;
}

DensityPath push_forward_path(const LagrangianMeasure& m, const TimeGrid& tg,
                              const SpaceGrid& sg) {
  DensityPath path = DensityPath::zeros(tg, sg);
  for (int it = 0; it < tg.nt; ++it) {
    DensitySnapshot snap = push_forward(m, tg.time(it), sg);
    std::copy(snap.cells.begin(), snap.cells.end(), path.slice(it).begin());
    path.exited_mass[it] = snap.exited_mass;
  }
  return path;
}

double VelocityField::divergence(double t, Vec x, int dim) const {
  const double s = fd_step;
  double div = (eval(t, {x.x + s, x.y}).x - eval(t, {x.x - s, x.y}).x) /
               (2.0 * s);
  if (dim == 2)
    div += (eval(t, {x.x, x.y + s}).y - eval(t, {x.x, x.y - s}).y) / (2.0 * s);
  return div;
}

VelocityField optimal_velocity(const ValueGrid& vg, const SpeedField& field,
                               const SignedDomain& dom) {
  VelocityField v;
  v.fd_step = 0.5 * vg.space_grid().h;
  v.eval = [&vg, &field, &dom](double t, Vec x) -> Vec {
    if (dom.signed_distance(x) >= 0.0) return {};
    Vec g{};
    if (vg.try_gradient(t, x, &g) != GradientStatus::Ok) return {};
    const double gn = norm(g);
    if (gn <= 1e-14) return {};
    return (-field.value(t, x) / gn) * g;
  };
  return v;
}

VelocityField mollified_velocity(const ValueGrid& vg, const SpeedField& field,
                                 const SignedDomain& dom, double eps,
                                 int threads) {
  const SpaceGrid sg = vg.space_grid();
  const TimeGrid tg = vg.time_grid();
  const int dim = sg.dim;
  if (eps > 0.5 * dom.delta0() + 1e-12)
    throw EpsilonTooLarge("mollification radius " + std::to_string(eps) +
                          " exceeds half the boundary tube width");
  {
    const Vec lo = dom.bbox_lo();
    const Vec hi = dom.bbox_hi();
    const Vec glo = sg.origin;
    const Vec ghi = sg.node(sg.nx - 1, sg.ny - 1);
    const bool ok_x = lo.x - eps >= glo.x - 1e-12 && hi.x + eps <= ghi.x + 1e-12;
    const bool ok_y =
        dim == 1 || (lo.y - eps >= glo.y - 1e-12 && hi.y + eps <= ghi.y + 1e-12);
    if (!(ok_x && ok_y))
      throw EpsilonTooLarge("mollification radius " + std::to_string(eps) +
                            " leaves the covered grid");
  }

  // Discrete normalized kernel on node offsets.
  struct Offset {
    int ox, oy;
    double w;
  };
  std::vector<Offset> kernel;
  const int R = static_cast<int>(std::ceil(eps / sg.h));
  double wsum = 0.0;
  for (int oy = (dim == 2 ? -R : 0); oy <= (dim == 2 ? R : 0); ++oy) {
    for (int ox = -R; ox <= R; ++ox) {
      const double r = sg.h * std::sqrt(double(ox) * ox + double(oy) * oy) / eps;
      const double w = bump01(r);
      if (w > 0.0) {
        kernel.push_back({ox, oy, w});
        wsum += w;
      }
    }
  }
  for (auto& k : kernel) k.w /= wsum;

  // Tabulate on a strided time lattice to bound memory; interpolate linearly
  // in time between stored slices.
  const int max_stored = 257;
  const int stride = std::max(1, (tg.nt + max_stored - 1) / max_stored);
  std::vector<int> stored;
  for (int it = 0; it < tg.nt; it += stride) stored.push_back(it);
  if (stored.back() != tg.nt - 1) stored.push_back(tg.nt - 1);
  const int ns = static_cast<int>(stored.size());
  const int n = sg.size();

  auto data = std::make_shared<std::vector<double>>(
      static_cast<size_t>(ns) * n * 2, 0.0);
  std::vector<double> raw_x(n), raw_y(n);
  const double floor = vg.gradient_floor();
  for (int s = 0; s < ns; ++s) {
    const int it = stored[s];
    parallel_for(sg.ny, threads, [&](int y0, int y1) {
      for (int iy = y0; iy < y1; ++iy) {
        for (int ix = 0; ix < sg.nx; ++ix) {
          const int i = sg.index(ix, iy);
          raw_x[i] = 0.0;
          raw_y[i] = 0.0;
          const Vec p = sg.node(ix, iy);
          if (dom.signed_distance(p) >= 0.0) continue;
          const Vec g = vg.node_upwind_gradient(it, ix, iy);
          const double gn = norm(g);
          if (gn <= floor) continue;
          const double k = field.value(tg.time(it), p);
          raw_x[i] = -k * g.x / gn;
          raw_y[i] = -k * g.y / gn;
        }
      }
    });
    double* out = data->data() + static_cast<size_t>(s) * n * 2;
    parallel_for(sg.ny, threads, [&](int y0, int y1) {
      for (int iy = y0; iy < y1; ++iy) {
        for (int ix = 0; ix < sg.nx; ++ix) {
          double ax = 0.0, ay = 0.0;
          for (const auto& k : kernel) {
            const int jx = ix + k.ox;
            const int jy = iy + k.oy;
            if (jx < 0 || jx >= sg.nx || jy < 0 || jy >= sg.ny) continue;
            const int j = sg.index(jx, jy);
            ax += k.w * raw_x[j];
            ay += k.w * raw_y[j];
          }
          const int i = sg.index(ix, iy);
          out[2 * i] = ax;
          out[2 * i + 1] = ay;
        }
      }
    });
  }

  auto times = std::make_shared<std::vector<double>>();
  for (int it : stored) times->push_back(tg.time(it));

  VelocityField v;
  v.fd_step = 0.5 * sg.h;
  v.eval = [sg, data, times, n](double t, Vec x) -> Vec {
    const auto& tt = *times;
    int k = static_cast<int>(
        std::upper_bound(tt.begin(), tt.end(), t) - tt.begin()) - 1;
    k = std::max(0, std::min(k, static_cast<int>(tt.size()) - 2));
    const double span = tt[k + 1] - tt[k];
    const double w = span > 0.0
                         ? std::max(0.0, std::min((t - tt[k]) / span, 1.0))
                         : 0.0;
    const double* a = data->data() + static_cast<size_t>(k) * n * 2;
    const double* b = data->data() + static_cast<size_t>(k + 1) * n * 2;
    const SpaceGrid::CellRef c = sg.locate(x);
    auto sample = [&](const double* src, int comp) {
      auto val = [&](int ix, int iy) {
        return src[2 * sg.index(ix, iy) + comp];
      };
      const double v00 = val(c.ix, c.iy);
      const double v10 = val(c.ix + 1, c.iy);
      if (sg.dim == 1) return (1.0 - c.fx) * v00 + c.fx * v10;
      const double v01 = val(c.ix, c.iy + 1);
      const double v11 = val(c.ix + 1, c.iy + 1);
      return (1.0 - c.fy) * ((1.0 - c.fx) * v00 + c.fx * v10) +
             c.fy * ((1.0 - c.fx) * v01 + c.fx * v11);
    };
    const double vx = (1.0 - w) * sample(a, 0) + w * sample(b, 0);
    const double vy =
        sg.dim == 2 ? (1.0 - w) * sample(a, 1) + w * sample(b, 1) : 0.0;
    return {vx, vy};
  };
  return v;
}

FlowResult flow_with_jacobian(const VelocityField& v, const WeightedPoints& pts,
                              const TimeGrid& tg, const SpaceGrid& sg,
                              const SignedDomain& dom,
                              const FlowParams& params) {
  const int n_particles = pts.size();
  const int n_cells = sg.size();
  FlowResult res;
  res.path = DensityPath::zeros(tg, sg);
  res.final_log_j.assign(n_particles, 0.0);
  res.in_core.assign(n_particles, 1);
  res.min_density_core.assign(tg.nt, std::numeric_limits<double>::infinity());
  res.max_density_core.assign(tg.nt, 0.0);

  // Per-slice accumulation of pointwise density estimates rho0 / J.
  std::vector<double> cell_sum(n_cells), cell_cnt(n_cells);
  std::vector<Vec> X = pts.x;
  std::vector<double> logj(n_particles, 0.0);
  std::vector<char> alive(n_particles, 1);
  double exited_weight = 0.0;
  double max_abs_logj = 0.0;

  const int sub = 2;  // RK2 substeps per grid interval
  const double dt = tg.dt / sub;

  for (int it = 0; it < tg.nt; ++it) {
    // Bin the current positions.
    std::fill(cell_sum.begin(), cell_sum.end(), 0.0);
    std::fill(cell_cnt.begin(), cell_cnt.end(), 0.0);
    double mn_core = std::numeric_limits<double>::infinity();
    double mx_core = 0.0;
    for (int i = 0; i < n_particles; ++i) {
      if (!alive[i]) continue;
      const double dens = pts.rho0[i] * std::exp(-logj[i]);
      const int c = sg.nearest(X[i]);
      cell_sum[c] += dens * pts.w[i];
      cell_cnt[c] += pts.w[i];
      if (res.in_core[i]) {
        mn_core = std::min(mn_core, dens);
        mx_core = std::max(mx_core, dens);
      }
    }
    for (int c = 0; c < n_cells; ++c) {
      res.path.at(it, c) = cell_cnt[c] > 0.0 ? cell_sum[c] / cell_cnt[c] : 0.0;
    }
    res.path.exited_mass[it] = exited_weight;
    res.min_density_core[it] = mn_core;
    res.max_density_core[it] = mx_core;
    if (it == tg.nt - 1) break;

    // Advance every live particle across the interval.  Worker threads only
    // record a blow-up; the throw happens after the join.
    const double t_slice = tg.time(it);
    std::atomic<bool> blowup{false};
    parallel_for(n_particles, params.threads, [&](int a, int b) {
      for (int i = a; i < b; ++i) {
        if (!alive[i]) continue;
        Vec x = X[i];
        double lj = logj[i];
        bool core = res.in_core[i] != 0;
        bool gone = false;
        for (int s = 0; s < sub; ++s) {
          const double t = t_slice + s * dt;
          const Vec v1 = v(t, x);
          const Vec xm = x + (0.5 * dt) * v1;
          const Vec vm = v(t + 0.5 * dt, xm);
          lj += dt * v.divergence(t + 0.5 * dt, xm, sg.dim);
          x = x + dt * vm;
          const double d = dom.signed_distance(x);
          if (d >= 0.0) {
            gone = true;
            break;
          }
          if (d > -params.core_margin) core = false;
        }
        if (std::abs(lj) > params.jacobian_cap) blowup.store(true);
        X[i] = x;
        logj[i] = lj;
        res.final_log_j[i] = lj;
        res.in_core[i] = core ? 1 : 0;
        if (gone) alive[i] = 0;
      }
    });
    if (blowup.load())
      throw JacobianBlowup("log-Jacobian magnitude exceeded " +
                           std::to_string(params.jacobian_cap));
    exited_weight = 0.0;
    for (int i = 0; i < n_particles; ++i)
      if (!alive[i]) exited_weight += pts.w[i];
    for (double lj : logj) max_abs_logj = std::max(max_abs_logj, std::abs(lj));
  }

  res.max_abs_log_j = max_abs_logj;
  res.core_count = 0;
  for (char c : res.in_core)
    if (c) ++res.core_count;
  return res;
}

DivergenceStats divergence_envelope(const VelocityField& v,
                                    const SignedDomain& dom,
                                    const SpaceGrid& sg, const TimeGrid& tg,
                                    double eps, int threads) {
  const int t_stride = std::max(1, (tg.nt - 1) / 64);
  std::vector<double> row_min(sg.ny, 0.0), row_max(sg.ny, 0.0);
  for (int it = 0; it < tg.nt; it += t_stride) {
    const double t = tg.time(it);
    parallel_for(sg.ny, threads, [&](int y0, int y1) {
      for (int iy = y0; iy < y1; ++iy) {
        double lo = row_min[iy], hi = row_max[iy];
        for (int ix = 0; ix < sg.nx; ++ix) {
          const Vec p = sg.node(ix, iy);
          if (dom.signed_distance(p) > -eps) continue;
          const double d = v.divergence(t, p, sg.dim);
          lo = std::min(lo, d);
          hi = std::max(hi, d);
        }
        row_min[iy] = lo;
        row_max[iy] = hi;
      }
    });
  }
  DivergenceStats stats;
  for (int iy = 0; iy < sg.ny; ++iy) {
    stats.min_div = std::min(stats.min_div, row_min[iy]);
    stats.max_div = std::max(stats.max_div, row_max[iy]);
  }
  return stats;
}

double lp_norm_interior(std::span<const double> cells, const SpaceGrid& sg,
                        const SignedDomain& dom, double p, double margin) {
  if (p < 1.0) throw BadExponent("L^p norm needs p >= 1");
  const double vol = sg.cell_volume();
  if (std::isinf(p)) {
    double m = 0.0;
    for (int i = 0; i < sg.size(); ++i) {
      if (dom.signed_distance(sg.node(i)) > -margin) continue;
      m = std::max(m, std::abs(cells[i]));
    }
    return m;
  }
  double acc = 0.0;
  for (int i = 0; i < sg.size(); ++i) {
    if (dom.signed_distance(sg.node(i)) > -margin) continue;
    acc += std::pow(std::abs(cells[i]), p) * vol;
  }
  return std::pow(acc, 1.0 / p);
}

namespace {

double w1_grid_1d(std::span<const double> a, std::span<const double> b,
                  const SpaceGrid& sg) {
  const double vol = sg.cell_volume();
  double cdf_a = 0.0, cdf_b = 0.0, acc = 0.0;
  for (int i = 0; i < sg.nx; ++i) {
    cdf_a += a[i] * vol;
    cdf_b += b[i] * vol;
    acc += std::abs(cdf_a - cdf_b) * sg.h;
  }
  return acc;
}

double w1_grid_2d(std::span<const double> a, std::span<const double> b,
                  const SpaceGrid& sg) {
  int P = 1;
  while (P < std::max(sg.nx, sg.ny)) P *= 2;
  std::vector<double> diff(static_cast<size_t>(P) * P, 0.0);
  const double vol = sg.cell_volume();
  for (int iy = 0; iy < sg.ny; ++iy)
    for (int ix = 0; ix < sg.nx; ++ix)
      diff[static_cast<size_t>(iy) * P + ix] =
          (a[sg.index(ix, iy)] - b[sg.index(ix, iy)]) * vol;

  double total = 0.0;
  double scale = 0.5 * sg.h;
  int side = P;
  std::vector<double> cur = std::move(diff);
  while (true) {
    double level = 0.0;
    for (double m : cur) level += std::abs(m);
    total += scale * level;
    if (side == 1) break;
    const int half = side / 2;
    std::vector<double> next(static_cast<size_t>(half) * half, 0.0);
    for (int iy = 0; iy < side; ++iy)
      for (int ix = 0; ix < side; ++ix)
        next[static_cast<size_t>(iy / 2) * half + ix / 2] +=
            cur[static_cast<size_t>(iy) * side + ix];
    cur = std::move(next);
    side = half;
    scale *= 2.0;
  }
  return total;
}

}  // namespace

double w1_grid(std::span<const double> a, std::span<const double> b,
               const SpaceGrid& sg) {
  return sg.dim == 1 ? w1_grid_1d(a, b, sg) : w1_grid_2d(a, b, sg);
}

double path_distance(const DensityPath& a, const DensityPath& b) {
  double worst = 0.0;
  for (int it = 0; it < a.tg.nt; ++it)
    worst = std::max(worst, w1_grid(a.slice(it), b.slice(it), a.sg));
  return worst;
}

WeakFormReport continuity_residual(const DensityPath& path,
                                   const VelocityField& v,
                                   const SignedDomain& dom) {
  const SpaceGrid& sg = path.sg;
  const TimeGrid& tg = path.tg;
  const Vec lo = dom.bbox_lo();
  const Vec hi = dom.bbox_hi();
  const double ex = hi.x - lo.x;
  const double ey = sg.dim == 2 ? hi.y - lo.y : 0.0;
  const double min_half = sg.dim == 2 ? 0.5 * std::min(ex, ey) : 0.5 * ex;

  struct Test {
    Vec center;
    double radius;
  };
  std::vector<Test> tests;
  const double fracs[3] = {0.3, 0.5, 0.7};
  const double scales[3] = {0.5, 0.32, 0.2};
  for (double s : scales) {
    for (double fx : fracs) {
      if (sg.dim == 1) {
        tests.push_back({{lo.x + fx * ex, 0.0}, s * min_half});
      } else {
        for (double fy : fracs)
          tests.push_back({{lo.x + fx * ex, lo.y + fy * ey}, s * min_half});
      }
    }
  }

  const double t_lo = tg.t0 + 0.05 * (tg.t_end() - tg.t0);
  const double t_hi = tg.t0 + 0.95 * (tg.t_end() - tg.t0);
  const double t_mid = 0.5 * (t_lo + t_hi);
  const double t_half = 0.5 * (t_hi - t_lo);

  WeakFormReport rep;
  rep.per_test.assign(tests.size(), 0.0);
  const double vol = sg.cell_volume();

  std::vector<int> active;
  std::vector<Vec> vel;
  for (int it = 0; it < tg.nt; ++it) {
    const double t = tg.time(it);
    const double ts = (t - t_mid) / t_half;
    const double tau = bump01(ts);
    const double tau_p = bump01_prime(ts) / t_half;
    if (tau == 0.0 && tau_p == 0.0) continue;
    active.clear();
    vel.clear();
    const auto slice = path.slice(it);
    for (int c = 0; c < sg.size(); ++c) {
      if (slice[c] != 0.0) {
        active.push_back(c);
        vel.push_back(v(t, sg.node(c)));
      }
    }
    const double wt = (it == 0 || it == tg.nt - 1) ? 0.5 : 1.0;
    for (size_t j = 0; j < tests.size(); ++j) {
      const Test& te = tests[j];
      double acc = 0.0;
      for (size_t a = 0; a < active.size(); ++a) {
        const int c = active[a];
        const Vec p = sg.node(c);
        const double sx = (p.x - te.center.x) / te.radius;
        const double bx = bump01(sx);
        if (bx == 0.0) continue;
        double B = bx, dBx = bump01_prime(sx) / te.radius, dBy = 0.0;
        if (sg.dim == 2) {
          const double sy = (p.y - te.center.y) / te.radius;
          const double by = bump01(sy);
          if (by == 0.0) continue;
          dBx *= by;
          dBy = bx * bump01_prime(sy) / te.radius;
          B = bx * by;
        }
        const double rho = slice[c];
        const double grad_term =
            tau * (dBx * vel[a].x + (sg.dim == 2 ? dBy * vel[a].y : 0.0));
        acc += vol * rho * (tau_p * B + grad_term);
      }
      rep.per_test[j] += wt * tg.dt * acc;
    }
  }

  rep.n_tests = static_cast<int>(tests.size());
  for (double r : rep.per_test) {
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
    rep.mean_abs += std::abs(r);
  }
  if (rep.n_tests > 0) rep.mean_abs /= rep.n_tests;
  return rep;
}

}  // namespace exitflow
