#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "exitflow/vec.hpp"

namespace exitflow {

/// Uniform node-centered Cartesian grid over a box.  Nodes sit at
/// origin + h*(ix, iy); 1d grids keep ny == 1 and y == origin.y.
struct SpaceGrid {
  int dim = 2;
  double h = 0.0;
  Vec origin;
  int nx = 0;
  int ny = 1;

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  Vec node(int ix, int iy) const { return {origin.x + h * ix, origin.y + h * iy}; }
  Vec node(int i) const { return node(i % nx, i / nx); }

  bool contains_index(int ix, int iy) const {
    return ix >= 0 && ix < nx && iy >= 0 && iy < ny;
  }

  /// Lower corner of the interpolation cell containing p plus fractions.
  /// Clamped to the grid so queries on the rim stay valid.
  struct CellRef {
    int ix, iy;
    double fx, fy;
  };
  CellRef locate(Vec p) const {
    double gx = (p.x - origin.x) / h;
    double gy = dim == 2 ? (p.y - origin.y) / h : 0.0;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    ix = std::max(0, std::min(ix, nx - 2));
    iy = dim == 2 ? std::max(0, std::min(iy, ny - 2)) : 0;
    double fx = std::max(0.0, std::min(gx - ix, 1.0));
    double fy = dim == 2 ? std::max(0.0, std::min(gy - iy, 1.0)) : 0.0;
    return {ix, iy, fx, fy};
  }

  /// Nearest node index to p.
  int nearest(Vec p) const {
    int ix = static_cast<int>(std::lround((p.x - origin.x) / h));
    int iy = dim == 2 ? static_cast<int>(std::lround((p.y - origin.y) / h)) : 0;
    ix = std::max(0, std::min(ix, nx - 1));
    iy = std::max(0, std::min(iy, ny - 1));
    return index(ix, iy);
  }

  /// Multilinear interpolation of nodal values.
  double interpolate(std::span<const double> values, Vec p) const {
    const CellRef c = locate(p);
    const double v00 = values[index(c.ix, c.iy)];
    const double v10 = values[index(c.ix + 1, c.iy)];
    if (dim == 1) return (1.0 - c.fx) * v00 + c.fx * v10;
    const double v01 = values[index(c.ix, c.iy + 1)];
    const double v11 = values[index(c.ix + 1, c.iy + 1)];
    return (1.0 - c.fy) * ((1.0 - c.fx) * v00 + c.fx * v10) +
           c.fy * ((1.0 - c.fx) * v01 + c.fx * v11);
  }

  double cell_volume() const { return dim == 2 ? h * h : h; }

  bool same_layout(const SpaceGrid& o) const {
    return dim == o.dim && nx == o.nx && ny == o.ny &&
           std::abs(h - o.h) < 1e-14 &&
           std::abs(origin.x - o.origin.x) < 1e-12 &&
           std::abs(origin.y - o.origin.y) < 1e-12;
  }
};

/// Uniform time grid t_i = t0 + i*dt, i = 0..nt-1.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int nt = 0;

  double time(int i) const { return t0 + dt * i; }
  double t_end() const { return time(nt - 1); }

  /// Slice index with floor semantics, clamped so i and i+1 are valid.
  int floor_index(double t) const {
    int i = static_cast<int>(std::floor((t - t0) / dt));
    return std::max(0, std::min(i, nt - 2));
  }

  bool same_layout(const TimeGrid& o) const {
    return nt == o.nt && std::abs(dt - o.dt) < 1e-14 && std::abs(t0 - o.t0) < 1e-12;
  }
};

/// Node classification relative to the domain.  Band nodes sit on or just
/// outside the boundary and carry extended boundary data; far nodes are
/// never read by the schemes.
enum class NodeClass : std::uint8_t { Interior = 0, Band = 1, Far = 2 };

}  // namespace exitflow
