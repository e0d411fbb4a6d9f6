#pragma once

#include <cmath>

namespace exitflow {

/// Spatial point or vector.  One- and two-dimensional problems share this
/// type; 1d code keeps y == 0 throughout so the 2d arithmetic stays valid.
struct Vec {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec() = default;
  constexpr Vec(double x_, double y_ = 0.0) : x(x_), y(y_) {}

  constexpr Vec& operator+=(Vec o) { x += o.x; y += o.y; return *this; }
  constexpr Vec& operator-=(Vec o) { x -= o.x; y -= o.y; return *this; }
  constexpr Vec& operator*=(double s) { x *= s; y *= s; return *this; }
};

constexpr Vec operator+(Vec a, Vec b) { return {a.x + b.x, a.y + b.y}; }
constexpr Vec operator-(Vec a, Vec b) { return {a.x - b.x, a.y - b.y}; }
constexpr Vec operator-(Vec a) { return {-a.x, -a.y}; }
constexpr Vec operator*(double s, Vec a) { return {s * a.x, s * a.y}; }
constexpr Vec operator*(Vec a, double s) { return {s * a.x, s * a.y}; }
constexpr Vec operator/(Vec a, double s) { return {a.x / s, a.y / s}; }

constexpr double dot(Vec a, Vec b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec a) { return std::hypot(a.x, a.y); }
constexpr double norm_sq(Vec a) { return a.x * a.x + a.y * a.y; }

/// z-component of the cross product; orientation tests in the plane.
constexpr double cross(Vec a, Vec b) { return a.x * b.y - a.y * b.x; }

inline Vec normalized(Vec a) {
  const double n = norm(a);
  return n > 0.0 ? a / n : Vec{};
}

inline double distance(Vec a, Vec b) { return norm(a - b); }

}  // namespace exitflow
