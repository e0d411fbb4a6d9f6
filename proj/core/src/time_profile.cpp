#include "exitflow/time_profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace exitflow {

TimeProfile TimeProfile::constant(double c) {
  TimeProfile p;
  p.kind_ = Kind::Constant;
  p.a_ = c;
  return p;
}

TimeProfile TimeProfile::affine(double a, double b, double floor) {
  TimeProfile p;
  p.kind_ = Kind::Affine;
  p.a_ = a;
  p.b_ = b;
  p.c_ = floor;
  return p;
}

TimeProfile TimeProfile::cosine(double mean, double amp, double eps) {
  if (eps <= 0.0) throw BadZeta("cosine profile requires eps > 0");
  TimeProfile p;
  p.kind_ = Kind::Cosine;
  p.a_ = mean;
  p.b_ = amp;
  p.c_ = eps;
  return p;
}

double TimeProfile::value(double t) const {
  switch (kind_) {
    case Kind::Constant: return a_;
    case Kind::Affine: return std::max(a_ + b_ * t, c_);
    case Kind::Cosine: return a_ + b_ * std::cos(t / c_);
  }
  return a_;
}

double TimeProfile::integral(double t0, double t1) const {
  if (t1 < t0) return -integral(t1, t0);
  switch (kind_) {
    case Kind::Constant:
      return a_ * (t1 - t0);
    case Kind::Affine: {
      auto raw = [&](double u0, double u1) {
        return a_ * (u1 - u0) + 0.5 * b_ * (u1 * u1 - u0 * u0);
      };
      if (b_ == 0.0) return std::max(a_, c_) * (t1 - t0);
      const double tc = (c_ - a_) / b_;  // a + b*t == floor
      if (b_ > 0.0) {
        // floored before tc, affine after
        if (t1 <= tc) return c_ * (t1 - t0);
        if (t0 >= tc) return raw(t0, t1);
        return c_ * (tc - t0) + raw(tc, t1);
      }
      // affine before tc, floored after
      if (t1 <= tc) return raw(t0, t1);
      if (t0 >= tc) return c_ * (t1 - t0);
      return raw(t0, tc) + c_ * (t1 - tc);
    }
    case Kind::Cosine:
      return a_ * (t1 - t0) + b_ * c_ * (std::sin(t1 / c_) - std::sin(t0 / c_));
  }
  return 0.0;
}

double TimeProfile::min_on(double t0, double t1) const {
  switch (kind_) {
    case Kind::Constant:
      return a_;
    case Kind::Affine:
      return std::min(value(t0), value(t1));
    case Kind::Cosine: {
      double m = std::min(value(t0), value(t1));
      // interior critical points t = k*pi*eps
      const double pi = 3.14159265358979323846;
      const long k0 = static_cast<long>(std::ceil(t0 / (pi * c_)));
      const long k1 = static_cast<long>(std::floor(t1 / (pi * c_)));
      for (long k = k0; k <= k1; ++k) m = std::min(m, value(k * pi * c_));
      return m;
    }
  }
  return a_;
}

double TimeProfile::max_on(double t0, double t1) const {
  switch (kind_) {
    case Kind::Constant:
      return a_;
    case Kind::Affine:
      return std::max(value(t0), value(t1));
    case Kind::Cosine: {
      double m = std::max(value(t0), value(t1));
      const double pi = 3.14159265358979323846;
      const long k0 = static_cast<long>(std::ceil(t0 / (pi * c_)));
      const long k1 = static_cast<long>(std::floor(t1 / (pi * c_)));
      for (long k = k0; k <= k1; ++k) m = std::max(m, value(k * pi * c_));
      return m;
    }
  }
  return a_;
}

double TimeProfile::slope_min_on(double t0, double t1) const {
  (void)t0;
  (void)t1;
  switch (kind_) {
    case Kind::Constant: return 0.0;
    case Kind::Affine: return std::min(b_, 0.0);
    case Kind::Cosine: return -std::abs(b_) / c_;
  }
  return 0.0;
}

void TimeProfile::validate_positive(double t0, double t1) const {
  const double m = min_on(t0, t1);
  if (m <= 0.0)
    throw BadZeta("speed profile reaches " + std::to_string(m) +
                  " on the horizon; it must stay positive");
}

double TimeProfile::freeze_time() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  switch (kind_) {
    case Kind::Constant:
      return 0.0;
    case Kind::Affine:
      if (b_ == 0.0) return 0.0;
      if (b_ > 0.0) return inf;
      return std::max(0.0, (c_ - a_) / b_);
    case Kind::Cosine:
      return b_ == 0.0 ? 0.0 : inf;
  }
  return inf;
}

std::string TimeProfile::describe() const {
  switch (kind_) {
    case Kind::Constant:
      return "constant(" + std::to_string(a_) + ")";
    case Kind::Affine:
      return "affine(" + std::to_string(a_) + " + " + std::to_string(b_) +
             "*t, floor " + std::to_string(c_) + ")";
    case Kind::Cosine:
      return "cosine(" + std::to_string(a_) + " + " + std::to_string(b_) +
             "*cos(t/" + std::to_string(c_) + "))";
  }
  return "?";
}

}  // namespace exitflow
