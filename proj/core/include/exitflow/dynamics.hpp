#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>

#include "exitflow/density.hpp"
#include "exitflow/geometry.hpp"
#include "exitflow/grid.hpp"
#include "exitflow/time_profile.hpp"

namespace exitflow {

/// Decreasing speed law V mapping local crowd measure to a speed.
class SpeedLaw {
 public:
  static SpeedLaw constant(double v);
  /// V(s) = v0 / (1 + a*s), a >= 0.
  static SpeedLaw reciprocal(double v0, double a);

  double value(double s) const;
  double derivative(double s) const;
  double sup_abs_derivative(double s_max) const;
  bool is_constant() const { return kind_ == Kind::Constant || a_ == 0.0; }

  /// Positivity and monotonicity on [0, s_max].
  void validate(double s_max) const;

  std::string describe() const;

 private:
  enum class Kind { Constant, Reciprocal };
  Kind kind_ = Kind::Constant;
  double v0_ = 1.0;
  double a_ = 0.0;
};

/// Nonnegative averaging kernel chi with compact support; the builtin is a
/// Gaussian bell truncated at a cut radius with a smooth taper so the
/// gradient stays bounded.
class AveragingKernel {
 public:
  /// sigma: Gaussian width, cut: support radius (defaults to 2.5*sigma).
  static AveragingKernel gaussian(double sigma, double cut = 0.0);

  double value(Vec z) const;
  double support_radius() const { return cut_; }
  double sup_value() const { return 1.0; }
  double sup_gradient() const { return sup_grad_; }
  /// max(sup chi, sup |grad chi|): the constant entering the uniform
  /// time-derivative bound of kernel speeds.
  double sup_bound() const { return std::max(sup_value(), sup_gradient()); }

  std::string describe() const;

 private:
  double sigma_ = 0.2;
  double cut_ = 0.5;
  double sup_grad_ = 0.0;
};

/// Interior weight psi = alpha(d(x)) with alpha the cubic smoothstep ramp:
/// alpha(s) = 1 for s <= -delta, 0 for s >= 0, 1 - (3r^2 - 2r^3) at
/// r = 1 + s/delta in between.  alpha' vanishes at both ends and has
/// Lipschitz constant 6/delta^2.  delta == 0 selects the sharp interior
/// indicator.
class InteriorCutoff {
 public:
  static InteriorCutoff indicator();
  static InteriorCutoff smoothstep(double delta);

  double alpha(double s) const;
  double alpha_prime(double s) const;
  double value(const SignedDomain& dom, Vec x) const {
    return alpha(dom.signed_distance(x));
  }
  double delta() const { return delta_; }
  bool is_indicator() const { return delta_ == 0.0; }

  std::string describe() const;

 private:
  double delta_ = 0.0;
};

/// Congestion kernel k(mu, x) = V( sum chi(x - y) psi(y) dmu(y) ).
class InteractionKernel {
 public:
  /// Throws DeltaTooLarge when the cutoff ramp leaves the C^{1,1} tube of
  /// the domain.
  InteractionKernel(const SignedDomain* dom, SpeedLaw v, AveragingKernel chi,
                    InteriorCutoff psi);

  /// Speed induced by one density slice at position x.
  double local_speed(std::span<const double> rho_cells, const SpaceGrid& sg,
                     Vec x) const;

  /// Crowd measure sum chi(x-y) psi(y) dmu(y) for one slice.
  double local_crowd(std::span<const double> rho_cells, const SpaceGrid& sg,
                     Vec x) const;

  const SpeedLaw& speed_law() const { return v_; }
  const AveragingKernel& chi() const { return chi_; }
  const InteriorCutoff& psi() const { return psi_; }
  const SignedDomain& domain() const { return *dom_; }

  /// Certified bounds valid for any probability density:
  ///   k in [V(sup chi), V(0)], dk/dt >= -sup|V'| * M * V(0).
  double certified_k_min() const;
  double certified_k_max() const;
  double certified_dt_drop() const;

 private:
  const SignedDomain* dom_;
  SpeedLaw v_;
  AveragingKernel chi_;
  InteriorCutoff psi_;
};

/// Empirical and certified constants of a tabulated speed field.
struct FieldConstants {
  double k_min = 0.0;
  double k_max = 0.0;
  double lip_x = 0.0;       // spatial Lipschitz bound L1
  double lip_grad = 0.0;    // gradient Lipschitz bound L2
  double dt_drop = 0.0;     // dk/dt >= -dt_drop
};

/// Speed field tabulated on a space-time grid with certified constants and
/// a freeze index past which slices no longer change.
class SpeedField {
 public:
  static SpeedField from_profile(const TimeProfile& zeta, TimeGrid tg,
                                 SpaceGrid sg);
  static SpeedField from_closure(std::function<double(double, Vec)> k,
                                 TimeGrid tg, SpaceGrid sg,
                                 std::optional<FieldConstants> certified = {});
  /// Tabulates the kernel speed along a density path.  Strides control the
  /// sampling lattice of the convolution (refined by interpolation);
  /// stride 1 evaluates every node of every slice.
  static SpeedField from_kernel_and_path(const InteractionKernel& kernel,
                                         const DensityPath& path,
                                         int stride_space = 2,
                                         int stride_time = 2, int threads = 1);

  double at(int it, int node) const {
    return k_[static_cast<size_t>(it) * sg_.size() + node];
  }
  std::span<const double> slice(int it) const {
    return {k_.data() + static_cast<size_t>(it) * sg_.size(),
            static_cast<size_t>(sg_.size())};
  }

  /// Space-time interpolated speed (bilinear in x, linear in t, clamped).
  double value(double t, Vec x) const;
  /// Spatial gradient by central differences of nodal values, interpolated.
  Vec gradient(double t, Vec x) const;

  const TimeGrid& time_grid() const { return tg_; }
  const SpaceGrid& space_grid() const { return sg_; }
  const FieldConstants& constants() const { return constants_; }
  /// First slice index from which the field is constant in time.
  int freeze_index() const { return freeze_index_; }
  std::uint64_t hash() const { return hash_; }
  bool time_constant() const { return freeze_index_ == 0; }

  /// Empirical constants measured on the tabulated values (restricted to
  /// nodes within one cell of the closed domain when a domain is given).
  FieldConstants measure_constants(const SignedDomain* dom = nullptr) const;

  /// Empty placeholder; assign a factory result before use.
  SpeedField() = default;

 private:
  void finalize();

  TimeGrid tg_;
  SpaceGrid sg_;
  std::vector<double> k_;
  FieldConstants constants_;
  int freeze_index_ = 0;
  std::uint64_t hash_ = 0;
};

}  // namespace exitflow
