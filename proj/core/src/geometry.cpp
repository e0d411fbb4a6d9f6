#include "exitflow/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace exitflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

double rounded_rect_sdf(Vec p, Vec half_widths, double r) {
  const double qx = std::abs(p.x) - (half_widths.x - r);
  const double qy = std::abs(p.y) - (half_widths.y - r);
  const double ox = std::max(qx, 0.0);
  const double oy = std::max(qy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0) - r;
}

Vec rounded_rect_grad(Vec p, Vec half_widths, double r) {
  const double qx = std::abs(p.x) - (half_widths.x - r);
  const double qy = std::abs(p.y) - (half_widths.y - r);
  Vec g;
  if (qx > 0.0 || qy > 0.0) {
    const double ox = std::max(qx, 0.0);
    const double oy = std::max(qy, 0.0);
    const double n = std::hypot(ox, oy);
    g = {ox / n, oy / n};
  } else {
    g = qx >= qy ? Vec{1.0, 0.0} : Vec{0.0, 1.0};
  }
  if (p.x < 0.0) g.x = -g.x;
  if (p.y < 0.0) g.y = -g.y;
  return g;
}

}  // namespace

SignedDomain SignedDomain::ball(Vec center, double radius) {
  if (radius <= 0.0) throw ConfigInvalid("ball radius must be positive");
  SignedDomain d;
  d.kind_ = Kind::Ball;
  d.dim_ = 2;
  d.center_ = center;
  d.radius_ = radius;
  d.bbox_lo_ = center - Vec{radius, radius};
  d.bbox_hi_ = center + Vec{radius, radius};
  d.kappa_ = 1.0 / radius;
  d.delta0_ = 0.5 * radius;
  d.grad_lipschitz_ = 2.0 / radius;
  d.max_depth_ = radius;
  return d;
}

SignedDomain SignedDomain::interval(double a, double b) {
  if (!(a < b)) throw ConfigInvalid("interval requires a < b");
  SignedDomain d;
  d.kind_ = Kind::Interval;
  d.dim_ = 1;
  d.a_ = a;
  d.b_ = b;
  d.bbox_lo_ = {a, 0.0};
  d.bbox_hi_ = {b, 0.0};
  d.kappa_ = 0.0;
  d.delta0_ = 0.4 * (b - a);
  d.grad_lipschitz_ = 0.0;
  d.max_depth_ = 0.5 * (b - a);
  return d;
}

SignedDomain SignedDomain::rounded_rectangle(Vec center, Vec half_widths,
                                             double corner_radius) {
  if (half_widths.x <= 0.0 || half_widths.y <= 0.0)
    throw ConfigInvalid("rounded rectangle requires positive half widths");
  const double min_half = std::min(half_widths.x, half_widths.y);
  double r = corner_radius > 0.0 ? corner_radius : 0.2 * min_half;
  if (r > min_half)
    throw ConfigInvalid("corner radius exceeds the smallest half width");
  SignedDomain d;
  d.kind_ = Kind::RoundedRectangle;
  d.dim_ = 2;
  d.center_ = center;
  d.half_widths_ = half_widths;
  d.radius_ = r;
  d.bbox_lo_ = center - half_widths;
  d.bbox_hi_ = center + half_widths;
  d.kappa_ = 1.0 / r;
  d.delta0_ = 0.5 * r;
  d.grad_lipschitz_ = 2.0 / r;
  d.max_depth_ = min_half;
  return d;
}

SignedDomain SignedDomain::custom(int dim, std::function<double(Vec)> sdf,
                                  Vec bbox_lo, Vec bbox_hi, double kappa,
                                  double delta0, double grad_lipschitz) {
  if (dim != 1 && dim != 2) throw ConfigInvalid("dim must be 1 or 2");
  if (!sdf) throw ConfigInvalid("custom domain requires an evaluator");
  SignedDomain d;
  d.kind_ = Kind::Custom;
  d.dim_ = dim;
  d.sdf_ = std::move(sdf);
  d.bbox_lo_ = bbox_lo;
  d.bbox_hi_ = bbox_hi;
  d.center_ = 0.5 * (bbox_lo + bbox_hi);
  d.kappa_ = kappa;
  d.delta0_ = delta0;
  d.grad_lipschitz_ = grad_lipschitz;
  // Conservative depth estimate: deepest point found on a coarse scan.
  double depth = 0.0;
  const int n = 64;
  for (int j = 0; j <= (dim == 2 ? n : 0); ++j)
    for (int i = 0; i <= n; ++i) {
      Vec p{bbox_lo.x + (bbox_hi.x - bbox_lo.x) * i / n,
            dim == 2 ? bbox_lo.y + (bbox_hi.y - bbox_lo.y) * j / n : 0.0};
      depth = std::max(depth, -d.sdf_(p));
    }
  d.max_depth_ = depth;
  return d;
}

std::string SignedDomain::kind_name() const {
  switch (kind_) {
    case Kind::Ball: return "ball";
    case Kind::Interval: return "interval";
    case Kind::RoundedRectangle: return "rounded_rectangle";
    case Kind::Custom: return "custom";
  }
  return "?";
}

double SignedDomain::signed_distance(Vec x) const {
  switch (kind_) {
    case Kind::Ball:
      return distance(x, center_) - radius_;
    case Kind::Interval:
      return std::max(a_ - x.x, x.x - b_);
    case Kind::RoundedRectangle:
      return rounded_rect_sdf(x - center_, half_widths_, radius_);
    case Kind::Custom:
      return sdf_(x);
  }
  return 0.0;
}

Vec SignedDomain::distance_gradient(Vec x) const {
  switch (kind_) {
    case Kind::Ball: {
      const Vec p = x - center_;
      const double n = norm(p);
      return n > 1e-14 ? p / n : Vec{1.0, 0.0};
    }
    case Kind::Interval:
      return x.x < 0.5 * (a_ + b_) ? Vec{-1.0, 0.0} : Vec{1.0, 0.0};
    case Kind::RoundedRectangle:
      return rounded_rect_grad(x - center_, half_widths_, radius_);
    case Kind::Custom: {
      const double step = 1e-6 * std::max(1.0, norm(bbox_hi_ - bbox_lo_));
      Vec g{(sdf_(x + Vec{step, 0}) - sdf_(x - Vec{step, 0})) / (2 * step),
            dim_ == 2
                ? (sdf_(x + Vec{0, step}) - sdf_(x - Vec{0, step})) / (2 * step)
                : 0.0};
      return normalized(g);
    }
  }
  return {1.0, 0.0};
}

Vec SignedDomain::outward_normal(Vec z, double tol) const {
  if (std::abs(signed_distance(z)) > tol)
    throw NotOnBoundary("outward_normal: point is " +
                        std::to_string(signed_distance(z)) +
                        " away from the boundary (tol " + std::to_string(tol) +
                        ")");
  return distance_gradient(z);
}

Vec SignedDomain::project_to_boundary(Vec x) const {
  const double d = signed_distance(x);
  if (std::abs(d) > delta0_)
    throw OutsideTube("project_to_boundary: |d| = " +
                      std::to_string(std::abs(d)) + " exceeds delta0 = " +
                      std::to_string(delta0_));
  // Exact for exact signed distances; one corrector step guards custom
  // evaluators with small slope errors.
  Vec z = x - d * distance_gradient(x);
  if (kind_ == Kind::Custom) {
    const double d2 = sdf_(z);
    z = z - d2 * distance_gradient(z);
  }
  return z;
}

double SignedDomain::diameter() const {
  if (dim_ == 1) return b_ - a_;
  return norm(bbox_hi_ - bbox_lo_);
}

std::vector<Vec> SignedDomain::sample_boundary(int count) const {
  std::vector<Vec> pts;
  if (dim_ == 1) {
    pts.push_back({a_, 0.0});
    pts.push_back({b_, 0.0});
    return pts;
  }
  pts.reserve(count);
  // All builtin 2d shapes are star-shaped around their center, so a ray
  // bisection on the signed distance lands on the boundary.
  const double r_far = norm(bbox_hi_ - bbox_lo_);
  for (int i = 0; i < count; ++i) {
    const double theta = 2.0 * kPi * i / count;
    const Vec dir{std::cos(theta), std::sin(theta)};
    double lo = 0.0, hi = r_far;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (signed_distance(center_ + mid * dir) < 0.0 ? lo : hi) = mid;
    }
    pts.push_back(center_ + 0.5 * (lo + hi) * dir);
  }
  return pts;
}

BoundaryCost BoundaryCost::zero() { return BoundaryCost{}; }

BoundaryCost BoundaryCost::affine(double base, Vec slope, Vec anchor) {
  BoundaryCost c;
  c.kind_ = Kind::Affine;
  c.base_ = base;
  c.slope_ = slope;
  c.anchor_ = anchor;
  return c;
}

double BoundaryCost::value(const SignedDomain& dom, Vec z, double tol) const {
  if (std::abs(dom.signed_distance(z)) > tol)
    throw NotOnBoundary("boundary cost queried off the boundary (d = " +
                        std::to_string(dom.signed_distance(z)) + ")");
  if (kind_ == Kind::Zero) return 0.0;
  return base_ + dot(slope_, z - anchor_);
}

Vec BoundaryCost::tangential_gradient(const SignedDomain& dom, Vec z,
                                      double tol) const {
  if (kind_ == Kind::Zero) return {};
  if (dom.dim() == 1) return {};
  const Vec n = dom.outward_normal(z, tol);
  return slope_ - dot(slope_, n) * n;
}

Vec BoundaryCost::ambient_gradient() const {
  return kind_ == Kind::Zero ? Vec{} : slope_;
}

double BoundaryCost::lipschitz() const {
  return kind_ == Kind::Zero ? 0.0 : norm(slope_);
}

double BoundaryCost::semiconcavity(const SignedDomain& dom) const {
  return lipschitz() * dom.kappa();
}

void BoundaryCost::validate(const SignedDomain& dom) const {
  if (kind_ == Kind::Zero) return;
  for (const Vec z : dom.sample_boundary(512)) {
    const double g = base_ + dot(slope_, z - anchor_);
    if (g < -1e-12)
      throw ConfigInvalid("boundary cost is negative at sampled point (g = " +
                          std::to_string(g) + ")");
  }
}

void ensure_cost_compatible(const BoundaryCost& cost, double k_max) {
  const double product = cost.lipschitz() * k_max;
  if (product >= 1.0)
    throw CostTooSteep("lip(g) * k_max = " + std::to_string(product) +
                       " >= 1; exit-time bounds degenerate");
}

}  // namespace exitflow
