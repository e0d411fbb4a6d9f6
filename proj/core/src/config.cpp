#include "exitflow/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "exitflow/digest.hpp"
#include "exitflow/parallel.hpp"

namespace exitflow {

using nlohmann::json;

namespace {

Vec vec_from(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.empty() || a.size() > 2)
    throw ConfigInvalid(std::string(key) + " must be [x] or [x, y]");
  Vec v;
  v.x = a[0].get<double>();
  v.y = a.size() == 2 ? a[1].get<double>() : 0.0;
  return v;
}

json vec_to(Vec v) { return json::array({v.x, v.y}); }

template <typename T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void opt_vec(const json& j, const char* key, Vec& out) {
  if (j.contains(key)) out = vec_from(j, key);
}

void expect_one_of(const std::string& value, const char* key,
                   std::initializer_list<const char*> allowed) {
  for (const char* a : allowed)
    if (value == a) return;
  std::ostringstream os;
  os << key << " = '" << value << "' is not one of {";
  bool first = true;
  for (const char* a : allowed) {
    os << (first ? "" : ", ") << a;
    first = false;
  }
  os << "}";
  throw ConfigInvalid(os.str());
}

}  // namespace

RunConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("json parse: ") + e.what());
  }
  RunConfig cfg;
  try {
    opt(j, "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
      throw ConfigInvalid("unsupported schema_version " +
                          std::to_string(cfg.schema_version));
    opt(j, "label", cfg.label);

    if (j.contains("domain")) {
      const json& d = j.at("domain");
      opt(d, "kind", cfg.domain_kind);
      expect_one_of(cfg.domain_kind, "domain.kind",
                    {"ball", "interval", "rounded_rectangle"});
      opt_vec(d, "center", cfg.domain_center);
      opt(d, "radius", cfg.domain_radius);
      opt(d, "a", cfg.interval_a);
      opt(d, "b", cfg.interval_b);
      opt_vec(d, "half_widths", cfg.half_widths);
      opt(d, "corner_radius", cfg.corner_radius);
    }

    if (j.contains("dynamic")) {
      const json& d = j.at("dynamic");
      opt(d, "kind", cfg.dynamic_kind);
      expect_one_of(cfg.dynamic_kind, "dynamic.kind", {"profile", "kernel"});
      opt(d, "profile", cfg.profile_kind);
      expect_one_of(cfg.profile_kind, "dynamic.profile",
                    {"constant", "affine", "cosine"});
      opt(d, "c", cfg.profile_c);
      opt(d, "a", cfg.profile_a);
      opt(d, "b", cfg.profile_b);
      opt(d, "floor", cfg.profile_floor);
      opt(d, "mean", cfg.profile_mean);
      opt(d, "amp", cfg.profile_amp);
      opt(d, "eps", cfg.profile_eps);
      opt(d, "v0", cfg.speed_v0);
      opt(d, "congestion", cfg.speed_a);
      opt(d, "chi_sigma", cfg.chi_sigma);
      opt(d, "chi_cut", cfg.chi_cut);
      opt(d, "psi_delta", cfg.psi_delta);
    }

    if (j.contains("cost")) {
      const json& d = j.at("cost");
      opt(d, "kind", cfg.cost_kind);
      expect_one_of(cfg.cost_kind, "cost.kind", {"zero", "affine"});
      opt(d, "base", cfg.cost_base);
      opt_vec(d, "slope", cfg.cost_slope);
      opt_vec(d, "anchor", cfg.cost_anchor);
    }

    if (j.contains("grid")) {
      const json& d = j.at("grid");
      opt(d, "h", cfg.grid_h);
      opt(d, "cfl", cfg.cfl);
      if (cfg.grid_h <= 0.0) throw ConfigInvalid("grid.h must be positive");
      if (cfg.cfl <= 0.0 || cfg.cfl > 1.0)
        throw ConfigInvalid("grid.cfl must lie in (0, 1]");
    }

    if (j.contains("initial")) {
      const json& d = j.at("initial");
      opt(d, "kind", cfg.initial_kind);
      expect_one_of(cfg.initial_kind, "initial.kind",
                    {"uniform_domain", "uniform_ball", "uniform_box"});
      opt_vec(d, "center", cfg.initial_center);
      opt(d, "radius", cfg.initial_radius);
      opt_vec(d, "lo", cfg.initial_lo);
      opt_vec(d, "hi", cfg.initial_hi);
      opt(d, "margin", cfg.initial_margin);
    }

    opt(j, "particles", cfg.particles);
    if (cfg.particles <= 0) throw ConfigInvalid("particles must be positive");
    opt(j, "seed", cfg.seed);
    opt(j, "threads", cfg.threads);
    opt(j, "store_curves", cfg.store_curves);

    if (j.contains("scheme")) {
      const json& d = j.at("scheme");
      opt(d, "kind", cfg.scheme);
      expect_one_of(cfg.scheme, "scheme.kind",
                    {"fictitious_play", "damped_picard"});
      opt(d, "theta", cfg.theta);
      if (cfg.theta <= 0.0 || cfg.theta > 1.0)
        throw ConfigInvalid("scheme.theta must lie in (0, 1]");
      opt(d, "tol_exploit", cfg.tol_exploit);
      opt(d, "tol_path", cfg.tol_path);
      opt(d, "max_iter", cfg.max_iter);
      if (cfg.max_iter <= 0) throw ConfigInvalid("scheme.max_iter must be positive");
    }

    if (j.contains("eps_study"))
      cfg.eps_study = j.at("eps_study").get<std::vector<double>>();
    if (j.contains("mollify_frac"))
      cfg.mollify_frac = j.at("mollify_frac").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config: ") + e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigInvalid("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["label"] = cfg.label;
  j["domain"] = {{"kind", cfg.domain_kind},
                 {"center", vec_to(cfg.domain_center)},
                 {"radius", cfg.domain_radius},
                 {"a", cfg.interval_a},
                 {"b", cfg.interval_b},
                 {"half_widths", vec_to(cfg.half_widths)},
                 {"corner_radius", cfg.corner_radius}};
  j["dynamic"] = {{"kind", cfg.dynamic_kind},
                  {"profile", cfg.profile_kind},
                  {"c", cfg.profile_c},
                  {"a", cfg.profile_a},
                  {"b", cfg.profile_b},
                  {"floor", cfg.profile_floor},
                  {"mean", cfg.profile_mean},
                  {"amp", cfg.profile_amp},
                  {"eps", cfg.profile_eps},
                  {"v0", cfg.speed_v0},
                  {"congestion", cfg.speed_a},
                  {"chi_sigma", cfg.chi_sigma},
                  {"chi_cut", cfg.chi_cut},
                  {"psi_delta", cfg.psi_delta}};
  j["cost"] = {{"kind", cfg.cost_kind},
               {"base", cfg.cost_base},
               {"slope", vec_to(cfg.cost_slope)},
               {"anchor", vec_to(cfg.cost_anchor)}};
  j["grid"] = {{"h", cfg.grid_h}, {"cfl", cfg.cfl}};
  j["initial"] = {{"kind", cfg.initial_kind},
                  {"center", vec_to(cfg.initial_center)},
                  {"radius", cfg.initial_radius},
                  {"lo", vec_to(cfg.initial_lo)},
                  {"hi", vec_to(cfg.initial_hi)},
                  {"margin", cfg.initial_margin}};
  j["particles"] = cfg.particles;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["store_curves"] = cfg.store_curves;
  j["scheme"] = {{"kind", cfg.scheme},
                 {"theta", cfg.theta},
                 {"tol_exploit", cfg.tol_exploit},
                 {"tol_path", cfg.tol_path},
                 {"max_iter", cfg.max_iter}};
  j["eps_study"] = cfg.eps_study;
  j["mollify_frac"] = cfg.mollify_frac;
  return j.dump(2);
}

void save_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigInvalid("cannot write config file " + path);
  out << serialize_config(cfg) << "\n";
}

std::uint64_t config_digest(const RunConfig& cfg) {
  Fnv1a64 d;
  d.update(serialize_config(cfg));
  return d.value();
}

SignedDomain make_domain(const RunConfig& cfg) {
  if (cfg.domain_kind == "ball")
    return SignedDomain::ball(cfg.domain_center, cfg.domain_radius);
  if (cfg.domain_kind == "interval")
    return SignedDomain::interval(cfg.interval_a, cfg.interval_b);
  return SignedDomain::rounded_rectangle(cfg.domain_center, cfg.half_widths,
                                         cfg.corner_radius);
}

BoundaryCost make_cost(const RunConfig& cfg) {
  if (cfg.cost_kind == "zero") return BoundaryCost::zero();
  return BoundaryCost::affine(cfg.cost_base, cfg.cost_slope, cfg.cost_anchor);
}

TimeProfile make_profile(const RunConfig& cfg) {
  if (cfg.profile_kind == "constant") return TimeProfile::constant(cfg.profile_c);
  if (cfg.profile_kind == "affine")
    return TimeProfile::affine(cfg.profile_a, cfg.profile_b, cfg.profile_floor);
  return TimeProfile::cosine(cfg.profile_mean, cfg.profile_amp,
                             cfg.profile_eps);
}

SpeedLaw make_speed_law(const RunConfig& cfg) {
  if (cfg.speed_a == 0.0) return SpeedLaw::constant(cfg.speed_v0);
  return SpeedLaw::reciprocal(cfg.speed_v0, cfg.speed_a);
}

AveragingKernel make_chi(const RunConfig& cfg) {
  return AveragingKernel::gaussian(cfg.chi_sigma, cfg.chi_cut);
}

InitialDensity make_initial(const RunConfig& cfg) {
  InitialDensity init;
  init.margin = cfg.initial_margin;
  if (cfg.initial_kind == "uniform_ball") {
    init.kind = InitialDensity::Kind::UniformBall;
    init.center = cfg.initial_center;
    init.radius = cfg.initial_radius;
  } else if (cfg.initial_kind == "uniform_box") {
    init.kind = InitialDensity::Kind::UniformBox;
    init.lo = cfg.initial_lo;
    init.hi = cfg.initial_hi;
  } else {
    init.kind = InitialDensity::Kind::UniformDomain;
  }
  return init;
}

EquilibriumParams make_equilibrium_params(const RunConfig& cfg) {
  EquilibriumParams p;
  p.scheme = cfg.scheme == "damped_picard"
                 ? EquilibriumParams::Scheme::DampedPicard
                 : EquilibriumParams::Scheme::FictitiousPlay;
  p.theta = cfg.theta;
  p.tol_exploit = cfg.tol_exploit;
  p.tol_path = cfg.tol_path;
  p.max_iter = cfg.max_iter;
  p.store_curves = cfg.store_curves;
  p.threads = cfg.threads > 0 ? cfg.threads : default_threads();
  p.seed = cfg.seed;
  return p;
}

}  // namespace exitflow
