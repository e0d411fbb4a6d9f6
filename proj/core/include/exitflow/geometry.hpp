#pragma once

#include <functional>
#include <string>
#include <vector>

#include "exitflow/errors.hpp"
#include "exitflow/vec.hpp"

namespace exitflow {

/// Bounded open domain described through its signed distance d(x): negative
/// inside, zero on the boundary, positive outside.  Builtin shapes carry
/// exact distances and analytic gradients; user-supplied evaluators fall
/// back to central differences.
///
/// Geometric certificates stored with the shape:
///   kappa           curvature bound of the boundary
///   delta0          width of the tube around the boundary where the
///                   distance stays C^{1,1} (no medial-axis points)
///   grad_lipschitz  Lipschitz constant of the distance gradient inside
///                   that tube
class SignedDomain {
 public:
  enum class Kind { Ball, Interval, RoundedRectangle, Custom };

  static SignedDomain ball(Vec center, double radius);
  static SignedDomain interval(double a, double b);
  /// Corner radius defaults to 0.1 * min side length when radius <= 0.
  static SignedDomain rounded_rectangle(Vec center, Vec half_widths,
                                        double corner_radius = 0.0);
  static SignedDomain custom(int dim, std::function<double(Vec)> sdf,
                             Vec bbox_lo, Vec bbox_hi, double kappa,
                             double delta0, double grad_lipschitz);

  int dim() const { return dim_; }
  Kind kind() const { return kind_; }
  std::string kind_name() const;

  double signed_distance(Vec x) const;
  /// Unit gradient of the signed distance; valid away from the medial axis.
  Vec distance_gradient(Vec x) const;

  /// Outward unit normal at a boundary point.  Throws NotOnBoundary when
  /// |d(z)| > tol.
  Vec outward_normal(Vec z, double tol) const;

  /// Closest boundary point for x in the C^{1,1} tube; throws OutsideTube
  /// when |d(x)| > delta0.
  Vec project_to_boundary(Vec x) const;

  bool inside(Vec x) const { return signed_distance(x) < 0.0; }

  Vec bbox_lo() const { return bbox_lo_; }
  Vec bbox_hi() const { return bbox_hi_; }
  double kappa() const { return kappa_; }
  double delta0() const { return delta0_; }
  double grad_lipschitz() const { return grad_lipschitz_; }
  /// sup_x d(x, boundary): depth of the deepest interior point.
  double max_depth() const { return max_depth_; }
  double diameter() const;

  /// Boundary sample points, used for cost validation and diagnostics.
  /// Builtins sample exactly; custom shapes ray-march from the bbox center.
  std::vector<Vec> sample_boundary(int count) const;

  /// Empty placeholder; assign a factory result before use.
  SignedDomain() = default;

 private:
  Kind kind_ = Kind::Custom;
  int dim_ = 2;
  Vec center_;
  double radius_ = 0.0;       // ball / corner radius
  Vec half_widths_;           // rounded rectangle
  double a_ = 0.0, b_ = 0.0;  // interval
  std::function<double(Vec)> sdf_;
  Vec bbox_lo_, bbox_hi_;
  double kappa_ = 0.0;
  double delta0_ = 0.0;
  double grad_lipschitz_ = 0.0;
  double max_depth_ = 0.0;
};

/// Exit cost g on the boundary.  The affine form g(z) = base + slope.(z - anchor)
/// restricted to the boundary covers the builtin experiments; its ambient
/// Lipschitz constant |slope| certifies the boundary Lipschitz bound.
class BoundaryCost {
 public:
  static BoundaryCost zero();
  static BoundaryCost affine(double base, Vec slope, Vec anchor = {});

  /// Cost at a boundary point; throws NotOnBoundary when |d(z)| > tol.
  double value(const SignedDomain& dom, Vec z, double tol) const;

  /// Gradient of g along the boundary: the ambient slope projected onto the
  /// tangent space.  Zero in 1d where boundary points are isolated.
  Vec tangential_gradient(const SignedDomain& dom, Vec z, double tol) const;

  /// Gradient of the ambient extension of g (the raw slope for affine costs).
  Vec ambient_gradient() const;

  double lipschitz() const;
  /// Semi-concavity certificate for g along the boundary.
  double semiconcavity(const SignedDomain& dom) const;

  bool is_zero() const { return kind_ == Kind::Zero; }

  /// Checks g >= 0 on sampled boundary points.
  void validate(const SignedDomain& dom) const;

  double base() const { return base_; }
  Vec slope() const { return slope_; }
  Vec anchor() const { return anchor_; }

 private:
  enum class Kind { Zero, Affine };
  Kind kind_ = Kind::Zero;
  double base_ = 0.0;
  Vec slope_;
  Vec anchor_;
};

/// Enforces the smallness hypothesis lip(g) * k_max < 1 that every exit-time
/// bound relies on; throws CostTooSteep otherwise.
void ensure_cost_compatible(const BoundaryCost& cost, double k_max);

}  // namespace exitflow
