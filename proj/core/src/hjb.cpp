#include "exitflow/hjb.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "exitflow/parallel.hpp"

namespace exitflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<Vec> control_directions(int dim, int count) {
  if (dim == 1) return {Vec{1.0, 0.0}, Vec{-1.0, 0.0}};
  std::vector<Vec> dirs;
  dirs.reserve(count);
  for (int m = 0; m < count; ++m) {
    const double th = 2.0 * kPi * m / count;
    dirs.push_back({std::cos(th), std::sin(th)});
  }
  return dirs;
}

/// Upwind nodal gradient: per axis, lean on the steeper descending side;
/// zero contribution at an axis-local minimum.  When cut tables are given,
/// a side whose cell is crossed by the boundary uses the boundary cost at
/// the crossing and the true sub-cell spacing instead of the neighbor.
Vec upwind_from_slice(std::span<const double> phi, const SpaceGrid& sg, int ix,
                      int iy, const double* cut_frac = nullptr,
                      const double* cut_value = nullptr) {
  const int i = sg.index(ix, iy);
  const double c = phi[i];
  auto axis = [&](int dx, int dy, int slot_minus, int slot_plus) {
    auto side = [&](int sx, int sy, int slot) {
      // returns descending slope magnitude (0 if not descending)
      double v, spacing = sg.h;
      if (cut_frac != nullptr && cut_frac[4 * i + slot] < 1.0) {
        v = cut_value[4 * i + slot];
        spacing = cut_frac[4 * i + slot] * sg.h;
      } else if (sg.contains_index(ix + sx, iy + sy)) {
        v = phi[sg.index(ix + sx, iy + sy)];
      } else {
        return 0.0;
      }
      if (v >= c || spacing <= 0.0) return 0.0;
      return (c - v) / spacing;
    };
    const double s_lo = side(-dx, -dy, slot_minus);
    const double s_hi = side(dx, dy, slot_plus);
    if (s_lo <= 0.0 && s_hi <= 0.0) return 0.0;
    // slope signed toward increasing coordinate
    return s_lo >= s_hi ? s_lo : -s_hi;
  };
  Vec g{axis(1, 0, 1, 0), 0.0};
  if (sg.dim == 2) g.y = axis(0, 1, 3, 2);
  return g;
}

struct Candidate {
  double val;
  Vec dir;
};

}  // namespace

double terminal_horizon(const SpeedField& field, const SignedDomain& dom,
                        const BoundaryCost& cost) {
  const FieldConstants& fc = field.constants();
  ensure_cost_compatible(cost, fc.k_max);
  const double lam_k = cost.lipschitz() * fc.k_max;
  return (1.0 + lam_k) / (1.0 - lam_k) * dom.max_depth() / fc.k_min;
}

double solve_transversality_mu(double k, Vec grad_g, Vec n) {
  const double gn = dot(grad_g, n);
  auto f = [&](double mu) { return k * norm(grad_g - mu * n) - 1.0; };
  double lo = std::max(0.0, gn);
  double hi = gn + 1.0 / k + norm(grad_g) + 1.0;
  if (f(lo) > 0.0)
    throw ShootingFailed("no positive transversality root: |grad g| too large");
  double mu = hi;
  for (int it = 0; it < 80; ++it) {
    const double fm = f(mu);
    if (std::abs(fm) < 1e-14) break;
    (fm < 0.0 ? lo : hi) = mu;
    // Newton step on the monotone branch, bisection fallback
    const Vec r = grad_g - mu * n;
    const double nr = norm(r);
    const double df = nr > 1e-14 ? -k * dot(r, n) / nr : k;
    double next = df > 1e-14 ? mu - fm / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    mu = next;
  }
  return mu;
}

ValueGrid solve_value_function(const SpeedField& field, const SignedDomain& dom,
                               const BoundaryCost& cost,
                               const HjbParams& params) {
  const SpaceGrid sg = field.space_grid();
  const TimeGrid tg = field.time_grid();
  const FieldConstants& fc = field.constants();
  const double h = sg.h;
  const double dt = tg.dt;

  if (fc.k_max * dt > h * (1.0 + 1e-12))
    throw CFLViolation("k_max * dt = " + std::to_string(fc.k_max * dt) +
                       " exceeds h = " + std::to_string(h));
  ensure_cost_compatible(cost, fc.k_max);
  cost.validate(dom);

  const double band_width = 3.0 * h;
  if (band_width > dom.delta0())
    throw GridMismatch("grid spacing too coarse for the boundary tube");
  const double bd_tol = 1e-7 * std::max(1.0, dom.diameter());

  ValueGrid vg;
  vg.tg_ = tg;
  vg.sg_ = sg;
  vg.field_hash_ = field.hash();
  vg.field_constants_ = fc;
  vg.mask_.resize(sg.size());
  vg.band_slot_.assign(sg.size(), -1);

  std::vector<int> interior_nodes;
  std::vector<int> band_nodes;
  std::vector<double> band_value;
  for (int i = 0; i < sg.size(); ++i) {
    const double d = dom.signed_distance(sg.node(i));
    if (d < 0.0) {
      vg.mask_[i] = NodeClass::Interior;
      interior_nodes.push_back(i);
    } else if (d <= band_width) {
      vg.mask_[i] = NodeClass::Band;
      vg.band_slot_[i] = static_cast<int>(band_nodes.size());
      band_nodes.push_back(i);
      const Vec z = dom.project_to_boundary(sg.node(i));
      band_value.push_back(cost.value(dom, z, bd_tol));
    } else {
      vg.mask_[i] = NodeClass::Far;
    }
  }
  if (interior_nodes.empty())
    throw GridMismatch("no interior nodes: grid does not resolve the domain");

  // Cut-cell geometry: for interior nodes with a non-interior neighbor,
  // locate the axis crossing of the boundary and record its fraction of
  // the cell together with the boundary cost there.
  vg.cut_frac_.assign(4 * sg.size(), 1.0);
  vg.cut_value_.assign(4 * sg.size(), 0.0);
  {
    const int offs[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    const int n_axes = sg.dim == 2 ? 4 : 2;
    for (int i : interior_nodes) {
      const int ix = i % sg.nx, iy = i / sg.nx;
      const Vec x = sg.node(ix, iy);
      for (int a = 0; a < n_axes; ++a) {
        const int jx = ix + offs[a][0], jy = iy + offs[a][1];
        if (sg.contains_index(jx, jy) &&
            vg.mask_[sg.index(jx, jy)] == NodeClass::Interior)
          continue;
        const Vec e{static_cast<double>(offs[a][0]),
                    static_cast<double>(offs[a][1])};
        double lo_f = 0.0, hi_f = 1.0;
        if (dom.signed_distance(x + h * e) < 0.0) continue;  // grid edge quirk
        for (int b = 0; b < 40; ++b) {
          const double mid = 0.5 * (lo_f + hi_f);
          (dom.signed_distance(x + mid * h * e) < 0.0 ? lo_f : hi_f) = mid;
        }
        const double theta = hi_f;
        const Vec z = dom.project_to_boundary(x + theta * h * e);
        vg.cut_frac_[4 * i + a] = theta;
        vg.cut_value_[4 * i + a] = cost.value(dom, z, bd_tol);
      }
    }
  }

  const size_t n = sg.size();
  vg.phi_.assign(static_cast<size_t>(tg.nt) * n, ValueGrid::far_sentinel());
  vg.ridge_.assign(static_cast<size_t>(tg.nt) * n, 0);

  auto slice_ptr = [&](int it) { return vg.phi_.data() + static_cast<size_t>(it) * n; };

  const int fs = std::min(field.freeze_index(), tg.nt - 1);
  vg.freeze_index_ = fs;

  // ---- boundary-limit gradients and ghost extensions on band nodes ----
  // Band nodes hold the first-order extension of the value across the
  // boundary, g(z) + (x_b - z) . (grad g - mu n); interpolation in a cut
  // cell then crosses the boundary data exactly at the boundary instead of
  // smearing it over the band, which would otherwise inflate values of the
  // first interior layer whenever k dt < depth.
  const int band_count = static_cast<int>(band_nodes.size());
  vg.band_count_ = band_count;
  vg.band_grad_.assign(static_cast<size_t>(tg.nt) * band_count, Vec{});
  std::vector<double> band_ghost(static_cast<size_t>(tg.nt) * band_count, 0.0);
  for (int it = 0; it <= fs; ++it) {
    for (int bi = 0; bi < band_count; ++bi) {
      const Vec xb = sg.node(band_nodes[bi]);
      const Vec z = dom.project_to_boundary(xb);
      const Vec nrm = dom.distance_gradient(z);
      const Vec gt = cost.tangential_gradient(dom, z, bd_tol);
      const double kz = sg.interpolate(field.slice(it), z);
      const double mu = solve_transversality_mu(kz, gt, nrm);
      const Vec bgrad = gt - mu * nrm;
      vg.band_grad_[static_cast<size_t>(it) * band_count + bi] = bgrad;
      band_ghost[static_cast<size_t>(it) * band_count + bi] =
          band_value[bi] + dot(xb - z, bgrad);
    }
  }
  for (int it = fs + 1; it < tg.nt; ++it) {
    std::copy_n(vg.band_grad_.begin() + static_cast<size_t>(fs) * band_count,
                band_count,
                vg.band_grad_.begin() + static_cast<size_t>(it) * band_count);
    std::copy_n(band_ghost.begin() + static_cast<size_t>(fs) * band_count,
                band_count,
                band_ghost.begin() + static_cast<size_t>(it) * band_count);
  }
  auto ghost_ptr = [&](int it) {
    return band_ghost.data() + static_cast<size_t>(it) * band_count;
  };

  // ---- stationary tail: fast sweeping on the frozen field slice ----
  {
    std::vector<double> phi(n, ValueGrid::far_sentinel());
    const auto kfs = field.slice(fs);
    for (int bi = 0; bi < band_count; ++bi)
      phi[band_nodes[bi]] = ghost_ptr(fs)[bi];
    // near-boundary interior nodes: direct local candidate along the normal
    for (int i : interior_nodes) {
      const Vec x = sg.node(i);
      const double d = dom.signed_distance(x);
      if (-d <= 2.0 * h) {
        const Vec z = dom.project_to_boundary(x);
        phi[i] = cost.value(dom, z, bd_tol) - d / kfs[i];
      }
    }

    auto local_update = [&](int ix, int iy) {
      const int i = sg.index(ix, iy);
      if (vg.mask_[i] != NodeClass::Interior) return 0.0;
      auto nb = [&](int jx, int jy) {
        return sg.contains_index(jx, jy) ? phi[sg.index(jx, jy)]
                                         : ValueGrid::far_sentinel();
      };
      const double f = 1.0 / kfs[i];
      double cand;
      if (sg.dim == 1) {
        cand = std::min(nb(ix - 1, iy), nb(ix + 1, iy)) + h * f;
      } else {
        double a = std::min(nb(ix - 1, iy), nb(ix + 1, iy));
        double b = std::min(nb(ix, iy - 1), nb(ix, iy + 1));
        if (a > b) std::swap(a, b);
        if (b - a >= h * f) {
          cand = a + h * f;
        } else {
          const double diff = b - a;
          cand = 0.5 * (a + b + std::sqrt(2.0 * h * h * f * f - diff * diff));
        }
      }
      if (cand < phi[i]) {
        const double change = phi[i] - cand;
        phi[i] = cand;
        return change;
      }
      return 0.0;
    };

    bool converged = false;
    for (int round = 0; round < params.max_sweep_rounds && !converged; ++round) {
      double change = 0.0;
      for (int order = 0; order < (sg.dim == 2 ? 8 : 2); ++order) {
        const bool xf = order & 1;              // x forward?
        const bool yf = order & 2;              // y forward?
        const bool swap_axes = sg.dim == 2 && (order & 4);
        const int onx = swap_axes ? sg.ny : sg.nx;
        const int ony = swap_axes ? sg.nx : sg.ny;
        for (int a = 0; a < ony; ++a)
          for (int b = 0; b < onx; ++b) {
            const int pa = yf ? a : ony - 1 - a;
            const int pb = xf ? b : onx - 1 - b;
            const int ix = swap_axes ? pa : pb;
            const int iy = swap_axes ? pb : pa;
            change = std::max(change, local_update(ix, iy));
          }
      }
      converged = change <= params.sweep_tol;
    }
    if (!converged)
      throw NonConvergence("fast sweeping did not reach tolerance " +
                           std::to_string(params.sweep_tol));
    for (int it = fs; it < tg.nt; ++it)
      std::memcpy(slice_ptr(it), phi.data(), n * sizeof(double));
  }

  // ---- backward semi-Lagrangian slices ----
  const std::vector<Vec> dirs = control_directions(sg.dim, params.directions);
  const bool add_grad_candidate = sg.dim == 2;

  auto scan_slice = [&](int it, std::span<const double> next, int k_slice) {
    const auto kslice = field.slice(k_slice);
    double* phi_here = slice_ptr(it);
    std::uint8_t* ridge_here = vg.ridge_.data() + static_cast<size_t>(it) * n;
    parallel_for(static_cast<int>(interior_nodes.size()), params.threads,
                 [&](int lo, int hi) {
      std::vector<Candidate> cands;
      cands.reserve(dirs.size() + 1);
      for (int idx = lo; idx < hi; ++idx) {
        const int i = interior_nodes[idx];
        const int ix = i % sg.nx, iy = i / sg.nx;
        const Vec x = sg.node(ix, iy);
        const double step = kslice[i] * dt;
        cands.clear();

        auto eval_dir = [&](Vec u) {
          const Vec foot = x + step * u;
          double val;
          if (dom.signed_distance(foot) >= 0.0) {
            double lo_f = 0.0, hi_f = 1.0;
            for (int b = 0; b < params.crossing_bisections; ++b) {
              const double mid = 0.5 * (lo_f + hi_f);
              (dom.signed_distance(x + mid * step * u) < 0.0 ? lo_f : hi_f) = mid;
            }
            const double theta = 0.5 * (lo_f + hi_f);
            const Vec z = dom.project_to_boundary(x + theta * step * u);
            val = theta * dt + cost.value(dom, z, bd_tol);
          } else {
            val = dt + sg.interpolate(next, foot);
          }
          cands.push_back({val, u});
        };

        for (const Vec& u : dirs) eval_dir(u);
        if (add_grad_candidate) {
          const Vec g = upwind_from_slice(next, sg, ix, iy,
                                         vg.cut_frac_.data(),
                                         vg.cut_value_.data());
          const double gn = norm(g);
          if (gn > 1e-12) eval_dir(-1.0 / gn * g);
        }

        double best = cands[0].val;
        for (const auto& c : cands) best = std::min(best, c.val);
        phi_here[i] = best;

        // ridge: two near-minimal candidates pointing more than 90 degrees apart
        bool flag = false;
        for (size_t a = 0; a < cands.size() && !flag; ++a) {
          if (cands[a].val > best + params.ridge_value_tol) continue;
          for (size_t b = a + 1; b < cands.size(); ++b) {
            if (cands[b].val > best + params.ridge_value_tol) continue;
            if (dot(cands[a].dir, cands[b].dir) < 0.0) {
              flag = true;
              break;
            }
          }
        }
        ridge_here[i] = flag ? 1 : 0;
      }
    });
    for (int bi = 0; bi < band_count; ++bi)
      phi_here[band_nodes[bi]] = ghost_ptr(it)[bi];
  };

  // ghost band values for every slice
  for (int it = 0; it < tg.nt; ++it) {
    double* p = slice_ptr(it);
    for (int bi = 0; bi < band_count; ++bi)
      p[band_nodes[bi]] = ghost_ptr(it)[bi];
  }

  // ridge flags on the frozen tail: a self-consistent scan against the
  // stationary slice produces the flags; the scanned values are discarded
  // so the tail slices stay bit-identical
  {
    std::vector<double> stat(slice_ptr(fs), slice_ptr(fs) + n);
    scan_slice(fs, stat, fs);
    std::memcpy(slice_ptr(fs), stat.data(), n * sizeof(double));
    for (int it = fs + 1; it < tg.nt; ++it)
      std::memcpy(vg.ridge_.data() + static_cast<size_t>(it) * n,
                  vg.ridge_.data() + static_cast<size_t>(fs) * n, n);
  }

  for (int it = fs - 1; it >= 0; --it)
    scan_slice(it, vg.slice(it + 1), it);

  // ---- monotonicity summary and gradient floor ----
  double min_q = 0.0;
  for (int it = 0; it + 1 < tg.nt; ++it) {
    const double* a = slice_ptr(it);
    const double* b = slice_ptr(it + 1);
    for (int i : interior_nodes)
      min_q = std::min(min_q, (b[i] - a[i]) / dt);
  }
  vg.min_time_quotient_ = min_q;
  const double c_cert =
      0.25 * fc.k_min * (1.0 / fc.k_max - cost.lipschitz());
  vg.gradient_floor_ = std::max(1e-12, 0.5 * c_cert / fc.k_max);

  return vg;
}

double ValueGrid::value(double t, Vec x) const {
  const int it = tg_.floor_index(t);
  const double w = std::clamp((t - tg_.time(it)) / tg_.dt, 0.0, 1.0);
  const double v0 = sg_.interpolate(slice(it), x);
  if (w == 0.0) return v0;
  return (1.0 - w) * v0 + w * sg_.interpolate(slice(it + 1), x);
}

Vec ValueGrid::node_upwind_gradient(int it, int ix, int iy) const {
  return upwind_from_slice(slice(it), sg_, ix, iy, cut_frac_.data(),
                           cut_value_.data());
}

Vec ValueGrid::corner_gradient(int it, int ix, int iy) const {
  const int i = sg_.index(ix, iy);
  switch (mask_[i]) {
    case NodeClass::Interior:
      return upwind_from_slice(slice(it), sg_, ix, iy,
                               cut_frac_.data(), cut_value_.data());
    case NodeClass::Band:
      return band_grad_[static_cast<size_t>(it) * band_count_ + band_slot_[i]];
    case NodeClass::Far:
      return {};
  }
  return {};
}

bool ValueGrid::ridge_near(double t, Vec x) const {
  const int it = tg_.floor_index(t);
  return ridge_flag(it, sg_.nearest(x));
}

GradientStatus ValueGrid::try_gradient(double t, Vec x, Vec* out) const {
  const int it = tg_.floor_index(t);
  const double w = std::clamp((t - tg_.time(it)) / tg_.dt, 0.0, 1.0);
  const SpaceGrid::CellRef c = sg_.locate(x);
  auto slice_grad = [&](int jt) {
    const Vec g00 = corner_gradient(jt, c.ix, c.iy);
    const Vec g10 = corner_gradient(jt, c.ix + 1, c.iy);
    if (sg_.dim == 1) return (1 - c.fx) * g00 + c.fx * g10;
    const Vec g01 = corner_gradient(jt, c.ix, c.iy + 1);
    const Vec g11 = corner_gradient(jt, c.ix + 1, c.iy + 1);
    return (1 - c.fy) * ((1 - c.fx) * g00 + c.fx * g10) +
           c.fy * ((1 - c.fx) * g01 + c.fx * g11);
  };
  Vec g = slice_grad(it);
  if (w > 0.0) g = (1.0 - w) * g + w * slice_grad(it + 1);
  if (out != nullptr) *out = g;
  if (ridge_flag(it, sg_.nearest(x))) return GradientStatus::Ridge;
  if (norm(g) < gradient_floor_) return GradientStatus::Degenerate;
  return GradientStatus::Ok;
}

Vec ValueGrid::gradient(double t, Vec x) const {
  Vec g;
  switch (try_gradient(t, x, &g)) {
    case GradientStatus::Ok:
      return g;
    case GradientStatus::Ridge:
      throw DegenerateGradient("gradient queried at a flagged ridge point");
    case GradientStatus::Degenerate:
      throw DegenerateGradient("gradient magnitude " + std::to_string(norm(g)) +
                               " below floor " + std::to_string(gradient_floor_));
  }
  return g;
}

double ValueGrid::max_interior_value() const {
  double m = 0.0;
  for (int it = 0; it < tg_.nt; ++it) {
    const auto s = slice(it);
    for (int i = 0; i < sg_.size(); ++i)
      if (mask_[i] == NodeClass::Interior) m = std::max(m, s[i]);
  }
  return m;
}

ResidualReport hj_residual(const ValueGrid& vg, const SpeedField& field,
                           const SignedDomain& dom, double exclusion_radius) {
  const SpaceGrid& sg = vg.space_grid();
  const TimeGrid& tg = vg.time_grid();
  ResidualReport rep;

  std::vector<char> deep(sg.size(), 0);
  for (int i = 0; i < sg.size(); ++i)
    deep[i] = vg.node_class(i) == NodeClass::Interior &&
                      dom.signed_distance(sg.node(i)) <= -sg.h
                  ? 1
                  : 0;

  const int dil = exclusion_radius > 0.0
                      ? static_cast<int>(std::ceil(exclusion_radius / sg.h))
                      : 0;

  for (int it = 0; it + 1 < tg.nt; ++it) {
    std::vector<char> excluded(sg.size(), 0);
    if (dil > 0) {
      for (int iy = 0; iy < sg.ny; ++iy)
        for (int ix = 0; ix < sg.nx; ++ix)
          if (vg.ridge_flag(it, sg.index(ix, iy)))
            for (int dy = -dil; dy <= dil; ++dy)
              for (int dx = -dil; dx <= dil; ++dx)
                if (sg.contains_index(ix + dx, iy + dy) &&
                    dx * dx + dy * dy <= dil * dil)
                  excluded[sg.index(ix + dx, iy + dy)] = 1;
    }
    for (int iy = 0; iy < sg.ny; ++iy)
      for (int ix = 0; ix < sg.nx; ++ix) {
        const int i = sg.index(ix, iy);
        if (!deep[i] || vg.ridge_flag(it, i) || excluded[i]) continue;
        const double dtphi = (vg.at(it + 1, i) - vg.at(it, i)) / tg.dt;
        const Vec grad = vg.node_upwind_gradient(it, ix, iy);
        const double r = std::abs(-dtphi + field.at(it, i) * norm(grad) - 1.0);
        ++rep.nodes_checked;
        if (r > rep.max_off_ridge) {
          rep.max_off_ridge = r;
          rep.worst_node = i;
          rep.worst_slice = it;
        }
      }
  }
  return rep;
}

}  // namespace exitflow
