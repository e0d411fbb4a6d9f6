#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include "exitflow/density.hpp"
#include "exitflow/trajectories.hpp"

namespace exitflow {

/// Weighted particle cloud with initial density values attached.
struct WeightedPoints {
  std::vector<Vec> x;
  std::vector<double> w;
  std::vector<double> rho0;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(x.size()); }
  double total_weight() const;
};

/// Weighted collection of agent paths; the curves' weights sum to one.
struct LagrangianMeasure {
  std::vector<Trajectory> curves;

  double total_weight() const;
  /// Throws UnnormalizedDensity when weights do not sum to one.
  void check_normalized(double tol = 1e-12) const;
};

/// Position histogram of the measure at one time: interior cell densities
/// plus the mass already absorbed by the boundary.
struct DensitySnapshot {
  double time = 0.0;
  std::vector<double> cells;  // density values (mass / cell volume)
  double exited_mass = 0.0;
};

DensitySnapshot push_forward(const LagrangianMeasure& m, double t,
                             const SpaceGrid& sg);

/// Histograms on every grid time; the mass ledger invariant holds by
/// construction.
DensityPath push_forward_path(const LagrangianMeasure& m, const TimeGrid& tg,
                              const SpaceGrid& sg);

/// Time-dependent velocity with a finite-difference divergence probe.
struct VelocityField {
  std::function<Vec(double, Vec)> eval;
  double fd_step = 1e-3;

  Vec operator()(double t, Vec x) const { return eval(t, x); }
  double divergence(double t, Vec x, int dim) const;
};

/// Exit flow v = -k grad phi / |grad phi| inside the domain, zero outside;
/// ridge and degenerate points report zero velocity.
VelocityField optimal_velocity(const ValueGrid& vg, const SpeedField& field,
                               const SignedDomain& dom);

/// Smooth bump mollification of the exit flow, tabulated on the grid.
/// The normalized discrete kernel uses the radial bump exp(-1/(1-r^2)).
/// Throws EpsilonTooLarge when the eps-neighborhood of the domain is not
/// covered by the grid.
VelocityField mollified_velocity(const ValueGrid& vg, const SpeedField& field,
                                 const SignedDomain& dom, double eps,
                                 int threads = 1);

struct FlowParams {
  double jacobian_cap = 50.0;  // JacobianBlowup beyond |log J| > cap
  double core_margin = 0.0;    // Omega_eps membership: d <= -core_margin
  int threads = 1;
};

/// Flow of a particle cloud along a velocity field with Jacobian tracking:
///   X' = v(t, X),  (log J)' = div v(t, X).
struct FlowResult {
  DensityPath path;               // binned rho0 / J density values
  std::vector<double> final_log_j;
  std::vector<char> in_core;      // stayed in the eps-core the whole time
  std::vector<double> min_density_core;  // per slice: min rho0/J on core paths
  std::vector<double> max_density_core;  // per slice: max rho0/J on core paths
  double max_abs_log_j = 0.0;
  int core_count = 0;
};

FlowResult flow_with_jacobian(const VelocityField& v, const WeightedPoints& pts,
                              const TimeGrid& tg, const SpaceGrid& sg,
                              const SignedDomain& dom, const FlowParams& params);

struct DivergenceStats {
  double min_div = 0.0;
  double max_div = 0.0;
  /// Compression constant (-min div)_+ driving the L^p growth envelope.
  double envelope() const { return std::max(0.0, -min_div); }
};

/// Divergence extremes of v over the eps-core of the domain and the covered
/// horizon.
DivergenceStats divergence_envelope(const VelocityField& v,
                                    const SignedDomain& dom,
                                    const SpaceGrid& sg, const TimeGrid& tg,
                                    double eps, int threads = 1);

/// L^p norm of a cell function over interior cells with d <= -margin;
/// p = infinity gives the max.  Throws BadExponent for p < 1.
double lp_norm_interior(std::span<const double> cells, const SpaceGrid& sg,
                        const SignedDomain& dom, double p,
                        double margin = 0.0);

/// Transport distance between two nonnegative cell histograms: exact CDF
/// integral in 1d, dyadic multiscale surrogate in 2d.  Mass imbalance is
/// charged at the coarsest scale.
double w1_grid(std::span<const double> a, std::span<const double> b,
               const SpaceGrid& sg);

/// sup over grid times of the slice distance between two density paths.
double path_distance(const DensityPath& a, const DensityPath& b);

struct WeakFormReport {
  double max_abs = 0.0;
  double mean_abs = 0.0;
  int n_tests = 0;
  std::vector<double> per_test;
};

/// Weak continuity-equation residual of a density path against a velocity
/// field, tested on a dictionary of smooth interior bumps (three spatial
/// scales, a lattice of centers, one interior time window).
WeakFormReport continuity_residual(const DensityPath& path,
                                   const VelocityField& v,
                                   const SignedDomain& dom);

}  // namespace exitflow
