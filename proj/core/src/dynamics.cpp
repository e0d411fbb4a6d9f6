#include "exitflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "exitflow/digest.hpp"
#include "exitflow/parallel.hpp"

namespace exitflow {

namespace {

double cubic_ramp(double u) { return u <= 0 ? 0.0 : u >= 1 ? 1.0 : u * u * (3 - 2 * u); }
double cubic_ramp_prime(double u) { return u <= 0 || u >= 1 ? 0.0 : 6 * u * (1 - u); }

}  // namespace

SpeedLaw SpeedLaw::constant(double v) {
  if (v <= 0.0) throw ConfigInvalid("speed law must be positive");
  SpeedLaw s;
  s.kind_ = Kind::Constant;
  s.v0_ = v;
  return s;
}

SpeedLaw SpeedLaw::reciprocal(double v0, double a) {
  if (v0 <= 0.0 || a < 0.0)
    throw ConfigInvalid("reciprocal speed law requires v0 > 0, a >= 0");
  SpeedLaw s;
  s.kind_ = Kind::Reciprocal;
  s.v0_ = v0;
  s.a_ = a;
  return s;
}

double SpeedLaw::value(double s) const {
  switch (kind_) {
    case Kind::Constant: return v0_;
    case Kind::Reciprocal: return v0_ / (1.0 + a_ * std::max(s, 0.0));
  }
  return v0_;
}

double SpeedLaw::derivative(double s) const {
  switch (kind_) {
    case Kind::Constant: return 0.0;
    case Kind::Reciprocal: {
      const double d = 1.0 + a_ * std::max(s, 0.0);
      return -v0_ * a_ / (d * d);
    }
  }
  return 0.0;
}

double SpeedLaw::sup_abs_derivative(double s_max) const {
  (void)s_max;
  return kind_ == Kind::Constant ? 0.0 : v0_ * a_;
}

void SpeedLaw::validate(double s_max) const {
  double prev = value(0.0);
  for (int i = 1; i <= 64; ++i) {
    const double s = s_max * i / 64.0;
    const double v = value(s);
    if (v <= 0.0) throw ConfigInvalid("speed law reaches zero");
    if (v > prev + 1e-12)
      throw ConfigInvalid("speed law must be non-increasing");
    prev = v;
  }
}

std::string SpeedLaw::describe() const {
  if (kind_ == Kind::Constant) return "constant(" + std::to_string(v0_) + ")";
  return "reciprocal(" + std::to_string(v0_) + ", " + std::to_string(a_) + ")";
}

AveragingKernel AveragingKernel::gaussian(double sigma, double cut) {
  if (sigma <= 0.0) throw ConfigInvalid("kernel sigma must be positive");
  AveragingKernel k;
  k.sigma_ = sigma;
  k.cut_ = cut > 0.0 ? cut : 2.5 * sigma;
  // Certify sup |chi'| by a fine radial scan; the profile is C^1.
  double sup = 0.0;
  const int n = 4096;
  for (int i = 1; i < n; ++i) {
    const double r = k.cut_ * i / n;
    const double rp = k.cut_ * (i + 1) / n;
    sup = std::max(sup, std::abs(k.value({rp, 0}) - k.value({r, 0})) /
                            (rp - r));
  }
  k.sup_grad_ = sup * 1.01;
  return k;
}

double AveragingKernel::value(Vec z) const {
  const double r = norm(z);
  if (r >= cut_) return 0.0;
  const double bell = std::exp(-0.5 * r * r / (sigma_ * sigma_));
  const double edge = 0.8 * cut_;
  if (r <= edge) return bell;
  return bell * (1.0 - cubic_ramp((r - edge) / (0.2 * cut_)));
}

std::string AveragingKernel::describe() const {
  return "gaussian(sigma " + std::to_string(sigma_) + ", cut " +
         std::to_string(cut_) + ")";
}

InteriorCutoff InteriorCutoff::indicator() { return InteriorCutoff{}; }

InteriorCutoff InteriorCutoff::smoothstep(double delta) {
  if (delta <= 0.0) throw ConfigInvalid("cutoff ramp width must be positive");
  InteriorCutoff c;
  c.delta_ = delta;
  return c;
}

double InteriorCutoff::alpha(double s) const {
  if (delta_ == 0.0) return s < 0.0 ? 1.0 : 0.0;
  if (s >= 0.0) return 0.0;
  if (s <= -delta_) return 1.0;
  return 1.0 - cubic_ramp(1.0 + s / delta_);
}

double InteriorCutoff::alpha_prime(double s) const {
  if (delta_ == 0.0) return 0.0;
  if (s >= 0.0 || s <= -delta_) return 0.0;
  return -cubic_ramp_prime(1.0 + s / delta_) / delta_;
}

std::string InteriorCutoff::describe() const {
  return delta_ == 0.0 ? "indicator"
                       : "smoothstep(delta " + std::to_string(delta_) + ")";
}

InteractionKernel::InteractionKernel(const SignedDomain* dom, SpeedLaw v,
                                     AveragingKernel chi, InteriorCutoff psi)
    : dom_(dom), v_(std::move(v)), chi_(std::move(chi)), psi_(std::move(psi)) {
  if (dom_ == nullptr) throw ConfigInvalid("kernel requires a domain");
  if (!psi_.is_indicator() && psi_.delta() > dom_->delta0())
    throw DeltaTooLarge("cutoff ramp " + std::to_string(psi_.delta()) +
                        " exceeds the C^{1,1} tube width " +
                        std::to_string(dom_->delta0()));
  v_.validate(chi_.sup_value());
}

double InteractionKernel::local_crowd(std::span<const double> rho_cells,
                                      const SpaceGrid& sg, Vec x) const {
  const double cut = chi_.support_radius();
  const double vol = sg.cell_volume();
  const int ix0 = std::max(0, static_cast<int>(std::ceil((x.x - cut - sg.origin.x) / sg.h)));
  const int ix1 = std::min(sg.nx - 1, static_cast<int>(std::floor((x.x + cut - sg.origin.x) / sg.h)));
  int iy0 = 0, iy1 = 0;
  if (sg.dim == 2) {
    iy0 = std::max(0, static_cast<int>(std::ceil((x.y - cut - sg.origin.y) / sg.h)));
    iy1 = std::min(sg.ny - 1, static_cast<int>(std::floor((x.y + cut - sg.origin.y) / sg.h)));
  }
  double q = 0.0;
  for (int iy = iy0; iy <= iy1; ++iy)
    for (int ix = ix0; ix <= ix1; ++ix) {
      const double m = rho_cells[sg.index(ix, iy)];
      if (m == 0.0) continue;
      if (m < 0.0) throw NegativeDensity("negative cell density in crowd sum");
      const Vec xc = sg.node(ix, iy);
      const double w = chi_.value(x - xc);
      if (w == 0.0) continue;
      q += w * psi_.value(*dom_, xc) * m * vol;
    }
  return q;
}

double InteractionKernel::local_speed(std::span<const double> rho_cells,
                                      const SpaceGrid& sg, Vec x) const {
  return v_.value(local_crowd(rho_cells, sg, x));
}

double InteractionKernel::certified_k_min() const {
  return v_.value(chi_.sup_value());
}
double InteractionKernel::certified_k_max() const { return v_.value(0.0); }
double InteractionKernel::certified_dt_drop() const {
  return v_.sup_abs_derivative(chi_.sup_value()) * chi_.sup_bound() *
         v_.value(0.0);
}

SpeedField SpeedField::from_profile(const TimeProfile& zeta, TimeGrid tg,
                                    SpaceGrid sg) {
  zeta.validate_positive(tg.t0, tg.t_end());
  SpeedField f;
  f.tg_ = tg;
  f.sg_ = sg;
  f.k_.resize(static_cast<size_t>(tg.nt) * sg.size());
  for (int it = 0; it < tg.nt; ++it) {
    const double v = zeta.value(tg.time(it));
    std::fill_n(f.k_.begin() + static_cast<size_t>(it) * sg.size(), sg.size(), v);
  }
  f.constants_.k_min = zeta.min_on(tg.t0, tg.t_end());
  f.constants_.k_max = zeta.max_on(tg.t0, tg.t_end());
  f.constants_.lip_x = 0.0;
  f.constants_.lip_grad = 0.0;
  f.constants_.dt_drop = std::max(0.0, -zeta.slope_min_on(tg.t0, tg.t_end()));
  f.finalize();
  return f;
}

SpeedField SpeedField::from_closure(std::function<double(double, Vec)> k,
                                    TimeGrid tg, SpaceGrid sg,
                                    std::optional<FieldConstants> certified) {
  SpeedField f;
  f.tg_ = tg;
  f.sg_ = sg;
  f.k_.resize(static_cast<size_t>(tg.nt) * sg.size());
  for (int it = 0; it < tg.nt; ++it) {
    const double t = tg.time(it);
    for (int i = 0; i < sg.size(); ++i) {
      const double v = k(t, sg.node(i));
      if (v <= 0.0)
        throw ConfigInvalid("speed closure is non-positive at a grid node");
      f.k_[static_cast<size_t>(it) * sg.size() + i] = v;
    }
  }
  f.constants_ = certified ? *certified : FieldConstants{};
  f.finalize();
  if (!certified) f.constants_ = f.measure_constants(nullptr);
  return f;
}

SpeedField SpeedField::from_kernel_and_path(const InteractionKernel& kernel,
                                            const DensityPath& path,
                                            int stride_space, int stride_time,
                                            int threads) {
  const TimeGrid& tg = path.tg;
  const SpaceGrid& sg = path.sg;
  stride_space = std::max(1, stride_space);
  stride_time = std::max(1, stride_time);

  // Sample lattice per axis: multiples of the stride plus the last index.
  auto lattice = [](int n, int stride) {
    std::vector<int> idx;
    for (int i = 0; i < n; i += stride) idx.push_back(i);
    if (idx.back() != n - 1) idx.push_back(n - 1);
    return idx;
  };
  const std::vector<int> xs = lattice(sg.nx, stride_space);
  const std::vector<int> ys = sg.dim == 2 ? lattice(sg.ny, stride_space)
                                          : std::vector<int>{0};
  const std::vector<int> ts = lattice(tg.nt, stride_time);

  // Crowd values on the coarse lattice, one slice at a time.
  const int cnx = static_cast<int>(xs.size());
  const int cny = static_cast<int>(ys.size());
  std::vector<double> coarse(static_cast<size_t>(ts.size()) * cnx * cny);
  std::vector<double> weighted(sg.size());
  const double vol = sg.cell_volume();
  for (size_t a = 0; a < ts.size(); ++a) {
    const auto slice = path.slice(ts[a]);
    for (int c = 0; c < sg.size(); ++c) {
      const double m = slice[c];
      if (m < 0.0) throw NegativeDensity("negative cell in density path");
      weighted[c] = m == 0.0
                        ? 0.0
                        : m * kernel.psi().value(kernel.domain(), sg.node(c)) * vol;
    }
    // chi-window sum against the weighted cells; origin-shifted copy so the
    // crowd routine sees plain cell masses.
    const double cut = kernel.chi().support_radius();
    parallel_for(cny, threads, [&](int lo, int hi) {
      for (int jy = lo; jy < hi; ++jy)
        for (int jx = 0; jx < cnx; ++jx) {
          const Vec x = sg.node(xs[jx], ys[jy]);
          const int ix0 = std::max(0, static_cast<int>(std::ceil((x.x - cut - sg.origin.x) / sg.h)));
          const int ix1 = std::min(sg.nx - 1, static_cast<int>(std::floor((x.x + cut - sg.origin.x) / sg.h)));
          int iy0 = 0, iy1 = 0;
          if (sg.dim == 2) {
            iy0 = std::max(0, static_cast<int>(std::ceil((x.y - cut - sg.origin.y) / sg.h)));
            iy1 = std::min(sg.ny - 1, static_cast<int>(std::floor((x.y + cut - sg.origin.y) / sg.h)));
          }
          double q = 0.0;
          for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) {
              const double w = weighted[sg.index(ix, iy)];
              if (w == 0.0) continue;
              q += kernel.chi().value(x - sg.node(ix, iy)) * w;
            }
          coarse[(a * cny + jy) * cnx + jx] = q;
        }
    });
  }

  // Per-axis refinement maps (bracketing coarse samples + weight).
  struct Lin {
    int j0, j1;
    double w;
  };
  auto refine = [](const std::vector<int>& samples, int n) {
    std::vector<Lin> m(n);
    int s = 0;
    for (int i = 0; i < n; ++i) {
      while (s + 1 < static_cast<int>(samples.size()) && samples[s + 1] <= i) ++s;
      const int j0 = s;
      const int j1 = std::min(s + 1, static_cast<int>(samples.size()) - 1);
      const double span = samples[j1] > samples[j0]
                              ? static_cast<double>(samples[j1] - samples[j0])
                              : 1.0;
      m[i] = {j0, j1, (i - samples[j0]) / span};
    }
    return m;
  };
  const std::vector<Lin> mx = refine(xs, sg.nx);
  const std::vector<Lin> my = sg.dim == 2 ? refine(ys, sg.ny)
                                          : std::vector<Lin>{{0, 0, 0.0}};
  const std::vector<Lin> mt = refine(ts, tg.nt);

  SpeedField f;
  f.tg_ = tg;
  f.sg_ = sg;
  f.k_.resize(static_cast<size_t>(tg.nt) * sg.size());
  const auto& law = kernel.speed_law();
  parallel_for(tg.nt, threads, [&](int lo, int hi) {
    for (int it = lo; it < hi; ++it) {
      const Lin& lt = mt[it];
      for (int iy = 0; iy < sg.ny; ++iy) {
        const Lin& ly = my[sg.dim == 2 ? iy : 0];
        for (int ix = 0; ix < sg.nx; ++ix) {
          const Lin& lx = mx[ix];
          auto q_at = [&](int a) {
            const double q00 = coarse[(static_cast<size_t>(a) * cny + ly.j0) * cnx + lx.j0];
            const double q10 = coarse[(static_cast<size_t>(a) * cny + ly.j0) * cnx + lx.j1];
            const double q01 = coarse[(static_cast<size_t>(a) * cny + ly.j1) * cnx + lx.j0];
            const double q11 = coarse[(static_cast<size_t>(a) * cny + ly.j1) * cnx + lx.j1];
            return (1 - ly.w) * ((1 - lx.w) * q00 + lx.w * q10) +
                   ly.w * ((1 - lx.w) * q01 + lx.w * q11);
          };
          const double q = (1 - lt.w) * q_at(lt.j0) + lt.w * q_at(lt.j1);
          f.k_[static_cast<size_t>(it) * sg.size() + sg.index(ix, iy)] =
              law.value(q);
        }
      }
    }
  });

  f.constants_.k_min = kernel.certified_k_min();
  f.constants_.k_max = kernel.certified_k_max();
  f.constants_.dt_drop = kernel.certified_dt_drop();
  f.finalize();
  const FieldConstants emp = f.measure_constants(&kernel.domain());
  f.constants_.lip_x = emp.lip_x;
  f.constants_.lip_grad = emp.lip_grad;
  return f;
}

void SpeedField::finalize() {
  const size_t n = sg_.size();
  freeze_index_ = tg_.nt - 1;
  for (int it = tg_.nt - 2; it >= 0; --it) {
    if (std::memcmp(k_.data() + static_cast<size_t>(it) * n,
                    k_.data() + static_cast<size_t>(it + 1) * n,
                    n * sizeof(double)) == 0)
      freeze_index_ = it;
    else
      break;
  }
  Fnv1a64 d;
  d.update(std::span<const double>(k_));
  d.update(sg_.h);
  d.update(static_cast<double>(tg_.nt));
  d.update(tg_.dt);
  hash_ = d.value();
}

double SpeedField::value(double t, Vec x) const {
  const int it = tg_.floor_index(t);
  const double w = std::clamp((t - tg_.time(it)) / tg_.dt, 0.0, 1.0);
  const double v0 = sg_.interpolate(slice(it), x);
  if (w == 0.0) return v0;
  const double v1 = sg_.interpolate(slice(it + 1), x);
  return (1.0 - w) * v0 + w * v1;
}

Vec SpeedField::gradient(double t, Vec x) const {
  const int it = tg_.floor_index(t);
  const double w = std::clamp((t - tg_.time(it)) / tg_.dt, 0.0, 1.0);
  const auto node_grad = [&](std::span<const double> ks, int ix, int iy) {
    const int xm = std::max(ix - 1, 0), xp = std::min(ix + 1, sg_.nx - 1);
    double gx = (ks[sg_.index(xp, iy)] - ks[sg_.index(xm, iy)]) / ((xp - xm) * sg_.h);
    double gy = 0.0;
    if (sg_.dim == 2) {
      const int ym = std::max(iy - 1, 0), yp = std::min(iy + 1, sg_.ny - 1);
      gy = (ks[sg_.index(ix, yp)] - ks[sg_.index(ix, ym)]) / ((yp - ym) * sg_.h);
    }
    return Vec{gx, gy};
  };
  const auto slice_grad = [&](std::span<const double> ks) {
    const SpaceGrid::CellRef c = sg_.locate(x);
    const Vec g00 = node_grad(ks, c.ix, c.iy);
    const Vec g10 = node_grad(ks, c.ix + 1, c.iy);
    if (sg_.dim == 1) return (1 - c.fx) * g00 + c.fx * g10;
    const Vec g01 = node_grad(ks, c.ix, c.iy + 1);
    const Vec g11 = node_grad(ks, c.ix + 1, c.iy + 1);
    return (1 - c.fy) * ((1 - c.fx) * g00 + c.fx * g10) +
           c.fy * ((1 - c.fx) * g01 + c.fx * g11);
  };
  const Vec g0 = slice_grad(slice(it));
  if (w == 0.0) return g0;
  const Vec g1 = slice_grad(slice(it + 1));
  return (1.0 - w) * g0 + w * g1;
}

FieldConstants SpeedField::measure_constants(const SignedDomain* dom) const {
  FieldConstants c;
  c.k_min = 1e300;
  c.k_max = -1e300;
  std::vector<char> in_region(sg_.size(), 1);
  if (dom != nullptr)
    for (int i = 0; i < sg_.size(); ++i)
      in_region[i] = dom->signed_distance(sg_.node(i)) <= sg_.h ? 1 : 0;

  for (int it = 0; it < tg_.nt; ++it) {
    const auto ks = slice(it);
    for (int iy = 0; iy < sg_.ny; ++iy)
      for (int ix = 0; ix < sg_.nx; ++ix) {
        const int i = sg_.index(ix, iy);
        if (!in_region[i]) continue;
        const double v = ks[i];
        c.k_min = std::min(c.k_min, v);
        c.k_max = std::max(c.k_max, v);
        if (ix + 1 < sg_.nx && in_region[sg_.index(ix + 1, iy)])
          c.lip_x = std::max(c.lip_x, std::abs(ks[sg_.index(ix + 1, iy)] - v) / sg_.h);
        if (sg_.dim == 2 && iy + 1 < sg_.ny && in_region[sg_.index(ix, iy + 1)])
          c.lip_x = std::max(c.lip_x, std::abs(ks[sg_.index(ix, iy + 1)] - v) / sg_.h);
        if (it + 1 < tg_.nt) {
          const double drop = -(at(it + 1, i) - v) / tg_.dt;
          c.dt_drop = std::max(c.dt_drop, drop);
        }
      }
    // gradient Lipschitz estimate on interior stencils
    for (int iy = 1; iy + 1 < sg_.ny || (sg_.dim == 1 && iy == 1); ++iy) {
      if (sg_.dim == 1 && iy != 1) break;
      const int jy = sg_.dim == 2 ? iy : 0;
      for (int ix = 1; ix + 1 < sg_.nx; ++ix) {
        const int i = sg_.index(ix, jy);
        if (!in_region[i]) continue;
        auto grad_at = [&](int ax, int ay) {
          double gx = (ks[sg_.index(ax + 1, ay)] - ks[sg_.index(ax - 1, ay)]) / (2 * sg_.h);
          double gy = 0.0;
          if (sg_.dim == 2 && ay >= 1 && ay + 1 < sg_.ny)
            gy = (ks[sg_.index(ax, ay + 1)] - ks[sg_.index(ax, ay - 1)]) / (2 * sg_.h);
          return Vec{gx, gy};
        };
        if (ix + 2 < sg_.nx && in_region[sg_.index(ix + 1, jy)])
          c.lip_grad = std::max(c.lip_grad,
                                norm(grad_at(ix + 1, jy) - grad_at(ix, jy)) / sg_.h);
      }
    }
  }
  if (c.k_min > c.k_max) {
    c.k_min = 0.0;
    c.k_max = 0.0;
  }
  return c;
}

}  // namespace exitflow
