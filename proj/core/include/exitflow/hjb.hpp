#pragma once

#include <cstdint>
#include <vector>

#include "exitflow/dynamics.hpp"
#include "exitflow/geometry.hpp"
#include "exitflow/grid.hpp"

namespace exitflow {

struct HjbParams {
  int directions = 16;          // discrete unit controls in 2d (1d uses 2)
  double sweep_tol = 1e-10;     // stationary sweeping convergence
  int max_sweep_rounds = 2000;
  double ridge_value_tol = 1e-9;  // candidate tie tolerance for ridge flags
  int crossing_bisections = 6;    // boundary crossing along a control step
  int threads = 1;
};

enum class GradientStatus { Ok, Ridge, Degenerate };

/// Value function tabulated on the space-time grid of the driving field.
///
/// Node classes: interior nodes carry solved values, band nodes carry the
/// first-order ghost extension of the boundary data across the boundary,
/// g(z) + (x - z) . (grad g - mu n) at the closest boundary point z, and far
/// nodes hold a large sentinel and are never read.  Interpolation in a cell
/// cut by the boundary therefore meets g exactly on the boundary, and band
/// corners expose the boundary limit of the value gradient so interpolated
/// controls stay accurate up to the exit.
class ValueGrid {
 public:
  double at(int it, int node) const {
    return phi_[static_cast<size_t>(it) * sg_.size() + node];
  }
  std::span<const double> slice(int it) const {
    return {phi_.data() + static_cast<size_t>(it) * sg_.size(),
            static_cast<size_t>(sg_.size())};
  }

  /// Space-time interpolated value (multilinear in x, linear in t, clamped
  /// to the covered horizon).
  double value(double t, Vec x) const;

  /// Value gradient at (t, x): per-corner upwind nodal gradients combined
  /// multilinearly, boundary-limit gradients on band corners.  Throws
  /// DegenerateGradient at flagged ridge points or vanishing gradients; use
  /// try_gradient for a non-throwing probe.
  Vec gradient(double t, Vec x) const;
  GradientStatus try_gradient(double t, Vec x, Vec* out) const;

  /// Upwind nodal gradient of one slice (smaller-neighbor rule per axis).
  Vec node_upwind_gradient(int it, int ix, int iy) const;

  bool ridge_flag(int it, int node) const {
    return ridge_[static_cast<size_t>(it) * sg_.size() + node] != 0;
  }
  NodeClass node_class(int node) const { return mask_[node]; }
  bool ridge_near(double t, Vec x) const;

  const TimeGrid& time_grid() const { return tg_; }
  const SpaceGrid& space_grid() const { return sg_; }
  std::uint64_t field_hash() const { return field_hash_; }
  const FieldConstants& field_constants() const { return field_constants_; }

  /// min over interior nodes and adjacent slices of the time difference
  /// quotient; bounded below by c - 1 with c the transversality constant.
  double min_time_quotient() const { return min_time_quotient_; }
  /// Lower bound below which interpolated gradients count as degenerate.
  double gradient_floor() const { return gradient_floor_; }

  int freeze_index() const { return freeze_index_; }
  static constexpr double far_sentinel() { return 1e9; }

  /// Interior max value; diagnostic and far-sentinel guard.
  double max_interior_value() const;

  friend ValueGrid solve_value_function(const SpeedField&, const SignedDomain&,
                                        const BoundaryCost&, const HjbParams&);

 private:
  TimeGrid tg_;
  SpaceGrid sg_;
  std::vector<double> phi_;
  std::vector<std::uint8_t> ridge_;
  std::vector<NodeClass> mask_;
  std::vector<int> band_slot_;      // node -> band index or -1
  std::vector<Vec> band_grad_;      // slice-major over band slots
  // Cut-cell geometry at interior nodes bordering the boundary: per node
  // and axis direction (+x, -x, +y, -y), the crossing fraction of the cell
  // (1 = uncut) and the boundary cost at the crossing point.  Differences
  // toward a cut neighbor use the true sub-cell spacing.
  std::vector<double> cut_frac_;
  std::vector<double> cut_value_;
  int band_count_ = 0;
  std::uint64_t field_hash_ = 0;
  FieldConstants field_constants_;
  double min_time_quotient_ = 0.0;
  double gradient_floor_ = 0.0;
  int freeze_index_ = 0;

  Vec corner_gradient(int it, int ix, int iy) const;
};

/// Uniform exit-time horizon (1 + lip(g) k_max) / (1 - lip(g) k_max) *
/// max_depth / k_min; every optimal trajectory exits within this time.
double terminal_horizon(const SpeedField& field, const SignedDomain& dom,
                        const BoundaryCost& cost);

/// Unique positive root mu of k |grad_g - mu n| = 1; the normal coefficient
/// of the value gradient at the exit point.  Safeguarded Newton.
double solve_transversality_mu(double k, Vec grad_g, Vec n);

/// Backward semi-Lagrangian solve of
///   -d_t phi + k(t,x) |grad phi| - 1 = 0,  phi = g on the boundary,
/// with a fast-sweeping stationary tail past the freeze time of the field.
/// Throws CFLViolation unless k_max dt <= h and NonConvergence if the
/// sweeping stalls.
ValueGrid solve_value_function(const SpeedField& field, const SignedDomain& dom,
                               const BoundaryCost& cost,
                               const HjbParams& params = {});

struct ResidualReport {
  double max_off_ridge = 0.0;
  int worst_node = -1;
  int worst_slice = -1;
  int nodes_checked = 0;
};

/// Discrete residual of the backward equation at interior nodes at least
/// one cell from the boundary, skipping flagged ridge nodes and, when
/// exclusion_radius > 0, everything within that distance of a flagged node.
ResidualReport hj_residual(const ValueGrid& vg, const SpeedField& field,
                           const SignedDomain& dom,
                           double exclusion_radius = 0.0);

}  // namespace exitflow
