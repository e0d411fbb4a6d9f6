#pragma once

#include <string>

#include "exitflow/errors.hpp"

namespace exitflow {

/// Scalar speed profile zeta(t) for spatially homogeneous dynamics.  All
/// family members expose exact antiderivatives so oracle computations avoid
/// quadrature error entirely.
///
/// Families:
///   constant  zeta(t) = c
///   affine    zeta(t) = max(a + b*t, floor)
///   cosine    zeta(t) = mean + amp*cos(t/eps)
class TimeProfile {
 public:
  enum class Kind { Constant, Affine, Cosine };

  static TimeProfile constant(double c);
  static TimeProfile affine(double a, double b, double floor = 0.0);
  static TimeProfile cosine(double mean, double amp, double eps);

  double value(double t) const;
  /// Exact integral over [t0, t1], t1 >= t0.
  double integral(double t0, double t1) const;

  double min_on(double t0, double t1) const;
  double max_on(double t0, double t1) const;
  /// Lower bound on the slope zeta' over [t0, t1] (non-positive part).
  double slope_min_on(double t0, double t1) const;

  /// Throws BadZeta unless zeta stays above a positive floor on [t0, t1].
  void validate_positive(double t0, double t1) const;

  /// First time after which the profile is constant; +infinity for profiles
  /// that keep varying (growing affine, cosine).
  double freeze_time() const;

  Kind kind() const { return kind_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double a_ = 1.0;     // constant value / affine offset / cosine mean
  double b_ = 0.0;     // affine slope / cosine amplitude
  double c_ = 0.0;     // affine floor / cosine eps
};

}  // namespace exitflow
