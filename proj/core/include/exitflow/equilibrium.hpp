#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitflow/transport.hpp"

namespace exitflow {

/// Initial crowd distribution.  Uniform on a ball or box intersected with
/// the domain interior; density values are the normalized indicator.
struct InitialDensity {
  enum class Kind { UniformBall, UniformBox, UniformDomain };
  Kind kind = Kind::UniformDomain;
  Vec center;            // ball
  double radius = 0.0;   // ball
  Vec lo, hi;            // box
  double margin = 0.0;   // domain: keep d <= -margin

  bool supports(const SignedDomain& dom, Vec p) const;
};

/// Stratified sampler: expected per-cell mass is allocated by largest
/// remainder, particles jitter uniformly inside their cell.  Deterministic
/// for a fixed seed and grid.
WeightedPoints sample_initial(const InitialDensity& init,
                              const SignedDomain& dom, const SpaceGrid& sg,
                              int count, std::uint64_t seed);

struct EquilibriumParams {
  enum class Scheme { FictitiousPlay, DampedPicard };
  Scheme scheme = Scheme::FictitiousPlay;
  double theta = 0.5;        // damped Picard mixing weight
  double tol_exploit = 0.0;  // 0: use 5 (h + dt)
  double tol_path = 0.0;     // 0: use h
  int max_iter = 200;
  int store_curves = 1024;
  int stride_space = 2;  // kernel tabulation strides
  int stride_time = 2;
  int threads = 1;
  std::uint64_t seed = 1;
  HjbParams hjb;
};

struct IterationStats {
  int iter = 0;
  double exploitability = -1.0;  // -1 before the first measurement
  double path_delta = -1.0;
  double exited_final = 0.0;
  double br_cost_mean = 0.0;
  int ridge_starts = 0;
};

/// Population state driving the fixed-point iteration: the averaged density
/// path, the induced speed field and value function, and per-particle exit
/// summaries of the current strategy mixture.
struct EquilibriumState {
  DensityPath rho;
  SpeedField field;
  ValueGrid phi;
  WeightedPoints particles;
  std::vector<double> J;    // realized cost per particle
  std::vector<double> tau;  // exit time per particle
  std::vector<Vec> exit;    // exit point per particle
  std::vector<Trajectory> sample_curves;  // stored subsample of the mixture
  std::vector<IterationStats> history;
  bool converged = false;
  int iterations = 0;       // best responses computed
  std::string stop_reason;
  double final_exploitability = -1.0;
  double tol_exploit = 0.0;
  double tol_path = 0.0;
};

struct BestResponse {
  DensityPath path;             // histogram of the responding population
  std::vector<double> J;
  std::vector<double> tau;
  std::vector<Vec> exit;
  std::vector<Trajectory> curves;  // dense subsample (store_curves ids)
  std::vector<int> curve_ids;
  double cost_mean = 0.0;
  int ridge_starts = 0;         // starts nudged off flagged points
};

/// Optimal-control response of every particle against a fixed field/value
/// pair, streamed into a histogram path plus exit summaries.
BestResponse best_response(const ValueGrid& vg, const SpeedField& field,
                           const SignedDomain& dom, const BoundaryCost& cost,
                           const WeightedPoints& pts,
                           const EquilibriumParams& params);

/// max over particles of (realized cost - phi(0, x0))_+ : how much any agent
/// can gain by deviating from the mixture.
double state_exploitability(const EquilibriumState& st);

/// Damped fixed-point iteration on the density path.  Fictitious play
/// averages with weight 1/(n+1); damped Picard mixes with fixed theta.
/// Stops on exploitability, on path stagnation, or flags MaxIterExceeded in
/// stop_reason after max_iter rounds (not an error).
EquilibriumState fixed_point_iterate(const InteractionKernel& kernel,
                                     const SignedDomain& dom,
                                     const BoundaryCost& cost,
                                     const WeightedPoints& pts,
                                     const TimeGrid& tg, const SpaceGrid& sg,
                                     const EquilibriumParams& params);

/// Interaction-range continuation: equilibria for a decreasing list of
/// cutoff widths eps (the interior weight ramp has width delta = eps),
/// tracking the uniform distance between consecutive value functions and a
/// common divergence constant.
struct EpsilonStudy {
  std::vector<double> eps;
  std::vector<double> sup_phi_diff;   // size eps.size() - 1
  std::vector<double> c_div;          // per eps
  std::vector<double> lp2;            // sup_t L^2 of the averaged path
  std::vector<double> lp_inf;         // sup_t L^inf of the binned path
  /// sup_t max pointwise density over the Jacobian-tracked mollified flow,
  /// relative to the initial maximum on the same core paths.  The binned
  /// L^inf above is dominated by per-cell sampling noise (a Poisson spike in
  /// one cell moves the max), so the stability envelope is checked against
  /// this flow estimate, which measures the transported density itself.
  std::vector<double> flow_linf_ratio;
  std::vector<double> exploit;        // final exploitability per eps
  std::vector<int> iterations;
  double exploit_vs_indicator = -1.0;  // smallest-eps mixture vs sharp cutoff
};

EpsilonStudy epsilon_limit_study(const SpeedLaw& speed,
                                 const AveragingKernel& chi,
                                 const SignedDomain& dom,
                                 const BoundaryCost& cost,
                                 const WeightedPoints& pts,
                                 const TimeGrid& tg, const SpaceGrid& sg,
                                 const std::vector<double>& eps_list,
                                 const EquilibriumParams& params);

}  // namespace exitflow
