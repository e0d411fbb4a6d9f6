#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "exitflow/dynamics.hpp"
#include "exitflow/equilibrium.hpp"
#include "exitflow/geometry.hpp"
#include "exitflow/time_profile.hpp"

namespace exitflow {

/// Declarative run description, loaded from JSON (schema_version 1) and
/// serialized back losslessly.  Invalid or inconsistent input raises
/// ConfigInvalid with the offending key in the message.
struct RunConfig {
  int schema_version = 1;
  std::string label = "run";

  // Domain.
  std::string domain_kind = "ball";  // ball | interval | rounded_rectangle
  Vec domain_center;
  double domain_radius = 1.0;
  double interval_a = 0.0, interval_b = 1.0;
  Vec half_widths{1.0, 1.0};
  double corner_radius = 0.0;

  // Dynamics: a direct time profile or a congestion kernel.
  std::string dynamic_kind = "profile";  // profile | kernel
  std::string profile_kind = "constant";  // constant | affine | cosine
  double profile_c = 1.0;                 // constant value
  double profile_a = 1.0, profile_b = 0.0, profile_floor = 0.25;
  double profile_mean = 1.0, profile_amp = 0.4, profile_eps = 0.2;
  double speed_v0 = 1.0, speed_a = 0.0;  // V(s) = v0 / (1 + a s)
  double chi_sigma = 0.2, chi_cut = 0.0;  // 0: default 2.5 sigma
  double psi_delta = 0.0;                 // 0: indicator cutoff

  // Exit cost.
  std::string cost_kind = "zero";  // zero | affine
  double cost_base = 0.0;
  Vec cost_slope, cost_anchor;

  // Discretization.
  double grid_h = 1.0 / 64.0;
  double cfl = 0.5;

  // Initial crowd.
  std::string initial_kind = "uniform_domain";  // + uniform_ball | uniform_box
  Vec initial_center;
  double initial_radius = 0.5;
  Vec initial_lo, initial_hi;
  double initial_margin = 0.0;

  // Population and iteration.
  int particles = 100000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware default
  int store_curves = 1024;
  std::string scheme = "fictitious_play";  // | damped_picard
  double theta = 0.5;
  double tol_exploit = 0.0;  // 0: 5 (h + dt)
  double tol_path = 0.0;     // 0: h
  int max_iter = 200;

  // Interaction-range study (cutoff widths) and mollification radii as
  // fractions of the domain diameter.
  std::vector<double> eps_study = {0.16, 0.08, 0.04};
  std::vector<double> mollify_frac = {0.08, 0.04, 0.02};
};

RunConfig load_config(const std::string& path);
RunConfig parse_config_json(const std::string& text);
std::string serialize_config(const RunConfig& cfg);  // canonical JSON
void save_config(const RunConfig& cfg, const std::string& path);

/// Digest of the canonical serialization; keys run metadata.
std::uint64_t config_digest(const RunConfig& cfg);

// Materialization of the declared objects (each validates its inputs).
SignedDomain make_domain(const RunConfig& cfg);
BoundaryCost make_cost(const RunConfig& cfg);
TimeProfile make_profile(const RunConfig& cfg);
SpeedLaw make_speed_law(const RunConfig& cfg);
AveragingKernel make_chi(const RunConfig& cfg);
InitialDensity make_initial(const RunConfig& cfg);
EquilibriumParams make_equilibrium_params(const RunConfig& cfg);

}  // namespace exitflow
