#include "exitflow/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "exitflow/digest.hpp"
#include "exitflow/parallel.hpp"

namespace exitflow {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double boundary_cost_max(const SignedDomain& dom, const BoundaryCost& cost) {
  double g_max = 0.0;
  const double tol = 1e-5 * std::max(1.0, dom.diameter());
  for (const Vec& z : dom.sample_boundary(256))
    g_max = std::max(g_max, cost.value(dom, z, tol));
  return g_max;
}

}  // namespace

RunSetup make_setup(const RunConfig& cfg) {
  RunSetup s;
  s.cfg = cfg;
  s.dom = make_domain(cfg);
  s.cost = make_cost(cfg);
  s.cost.validate(s.dom);
  s.threads = cfg.threads > 0 ? cfg.threads : default_threads();
  s.kernel_dynamic = cfg.dynamic_kind == "kernel";
  s.g_max = boundary_cost_max(s.dom, s.cost);

  const double lam = s.cost.lipschitz();
  const double depth = s.dom.max_depth();
  double t_end = 0.0;

  if (s.kernel_dynamic) {
    SpeedLaw law = make_speed_law(cfg);
    AveragingKernel chi = make_chi(cfg);
    s.k_max = law.value(0.0);
    s.k_min = law.value(chi.sup_value());
    ensure_cost_compatible(s.cost, s.k_max);
    const double factor = (1.0 + lam * s.k_max) / (1.0 - lam * s.k_max);
    s.t_upper = factor * depth / s.k_min;
    t_end = s.t_upper;  // kernel fields settle once everyone has exited
  } else {
    TimeProfile zeta = make_profile(cfg);
    const double tc = zeta.freeze_time();
    // Global speed floor: evaluated on a window long enough to contain any
    // transient and a full oscillation period.
    const double probe =
        2.0 * std::max(1.0, std::isinf(tc) ? 1.0 : tc) + 20.0 * cfg.profile_eps +
        10.0;
    s.k_min = zeta.min_on(0.0, probe);
    zeta.validate_positive(0.0, probe);
    // The horizon and the speed ceiling depend on each other; a few rounds
    // of the fixed-point settle it for every profile family.
    double t_upper = depth / s.k_min;
    double k_max = zeta.max_on(0.0, t_upper);
    for (int i = 0; i < 4; ++i) {
      ensure_cost_compatible(s.cost, k_max);
      const double factor = (1.0 + lam * k_max) / (1.0 - lam * k_max);
      t_upper = factor * depth / s.k_min;
      const double horizon = std::isinf(tc)
                                 ? 2.0 * t_upper + s.g_max
                                 : std::max(tc, t_upper);
      k_max = zeta.max_on(0.0, horizon);
      t_end = horizon;
    }
    s.k_max = k_max;
    s.t_upper = t_upper;
  }

  const double h = cfg.grid_h;
  double moll_max = 0.0;
  for (double f : cfg.mollify_frac) moll_max = std::max(moll_max, f);
  const double pad = std::max(4.0 * h, moll_max * s.dom.diameter() + 2.0 * h);

  SpaceGrid sg;
  sg.dim = s.dom.dim();
  sg.h = h;
  const Vec lo = s.dom.bbox_lo();
  const Vec hi = s.dom.bbox_hi();
  const double pad_cells = std::ceil(pad / h);
  sg.origin = {lo.x - pad_cells * h, sg.dim == 2 ? lo.y - pad_cells * h : 0.0};
  sg.nx = static_cast<int>(std::ceil((hi.x + pad - sg.origin.x) / h - 1e-9)) + 1;
  sg.ny = sg.dim == 2
              ? static_cast<int>(std::ceil((hi.y + pad - sg.origin.y) / h - 1e-9)) + 1
              : 1;
  s.sg = sg;

  TimeGrid tg;
  tg.t0 = 0.0;
  tg.dt = cfg.cfl * h / s.k_max;
  tg.nt = static_cast<int>(std::ceil(t_end / tg.dt)) + 7;
  s.tg = tg;
  return s;
}

SpeedField profile_field(const RunSetup& s) {
  return SpeedField::from_profile(make_profile(s.cfg), s.tg, s.sg);
}

SpeedField frozen_kernel_field(const RunSetup& s,
                               const InteractionKernel& kernel,
                               const WeightedPoints& pts) {
  std::vector<double> cells(s.sg.size(), 0.0);
  for (int i = 0; i < pts.size(); ++i)
    cells[s.sg.nearest(pts.x[i])] += pts.w[i];
  const double inv_vol = 1.0 / s.sg.cell_volume();
  for (double& c : cells) c *= inv_vol;
  DensityPath path = DensityPath::frozen(s.tg, s.sg, cells);
  return SpeedField::from_kernel_and_path(kernel, path, 2, 2, s.threads);
}

namespace {

struct PipelineIO {
  fs::path dir;
  Manifest manifest;
  double t_start = now_seconds();

  explicit PipelineIO(const RunConfig& cfg, const std::string& out_dir)
      : dir(out_dir) {
    fs::create_directories(dir);
    manifest.set_config_digest(config_digest(cfg));
    manifest.set_seed(cfg.seed);
    const std::string cfg_text = serialize_config(cfg);
    write_text_file((dir / "config.json").string(), cfg_text + "\n");
    manifest.add_artifact_bytes("config.json", cfg_text.data(),
                                cfg_text.size());
  }

  void tensor(const std::string& name, std::span<const double> data,
              const std::vector<std::int64_t>& shape,
              const std::vector<std::string>& axes = {}) {
    write_tensor((dir / name).string(), data, shape, axes);
    manifest.add_artifact(name, data);
  }

  void text(const std::string& name, const std::string& content) {
    write_text_file((dir / name).string(), content);
    manifest.add_artifact_bytes(name, content.data(), content.size());
  }

  int finish(const std::string& outcome, int code) {
    manifest.set_outcome(outcome);
    manifest.set_wall_seconds(now_seconds() - t_start);
    // The deterministic digest excludes wall time; recorded for replay
    // comparison.
    char hex[24];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(
                      manifest.deterministic_digest()));
    json m = json::parse(manifest.to_json());
    m["deterministic_digest"] = hex;
    write_text_file((dir / "manifest.json").string(), m.dump(2) + "\n");
    return code;
  }

  int fail(const std::string& what) {
    write_text_file((dir / "FAILED").string(), what + "\n");
    return finish("FAILED: " + what, 4);
  }
};

std::vector<double> flatten_values(const ValueGrid& vg) {
  const int nt = vg.time_grid().nt;
  const int n = vg.space_grid().size();
  std::vector<double> out;
  out.reserve(static_cast<size_t>(nt) * n);
  for (int it = 0; it < nt; ++it) {
    auto s = vg.slice(it);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

json grid_json(const RunSetup& s) {
  return {{"h", s.sg.h},
          {"nx", s.sg.nx},
          {"ny", s.sg.ny},
          {"origin", {s.sg.origin.x, s.sg.origin.y}},
          {"dt", s.tg.dt},
          {"nt", s.tg.nt},
          {"k_min", s.k_min},
          {"k_max", s.k_max},
          {"t_upper", s.t_upper}};
}

ValueGrid solve_for(const RunSetup& s, const SpeedField& field) {
  HjbParams hp;
  hp.threads = s.threads;
  return solve_value_function(field, s.dom, s.cost, hp);
}

SpeedField field_for(const RunSetup& s, const WeightedPoints* pts) {
  if (!s.kernel_dynamic) return profile_field(s);
  InteractionKernel kernel(&s.dom, make_speed_law(s.cfg), make_chi(s.cfg),
                           s.cfg.psi_delta > 0.0
                               ? InteriorCutoff::smoothstep(s.cfg.psi_delta)
                               : InteriorCutoff::indicator());
  if (pts) return frozen_kernel_field(s, kernel, *pts);
  WeightedPoints sample = sample_initial(make_initial(s.cfg), s.dom, s.sg,
                                         std::min(s.cfg.particles, 20000),
                                         s.cfg.seed);
  return frozen_kernel_field(s, kernel, sample);
}

}  // namespace

int run_solve(const RunConfig& cfg, const std::string& out_dir) {
  PipelineIO io(cfg, out_dir);
  try {
    RunSetup s = make_setup(cfg);
    SpeedField field = field_for(s, nullptr);
    ValueGrid vg = solve_for(s, field);
    ResidualReport res = hj_residual(vg, field, s.dom);

    std::vector<double> phi = flatten_values(vg);
    io.tensor("phi.f64", phi, {s.tg.nt, s.sg.ny, s.sg.nx}, {"t", "y", "x"});

    json metrics;
    metrics["grid"] = grid_json(s);
    metrics["residual_max_off_ridge"] = res.max_off_ridge;
    metrics["residual_nodes"] = res.nodes_checked;
    metrics["min_time_quotient"] = vg.min_time_quotient();
    metrics["freeze_index"] = vg.freeze_index();
    metrics["max_interior_value"] = vg.max_interior_value();
    metrics["field_hash"] = field.hash();
    io.text("metrics.json", metrics.dump(2) + "\n");
    return io.finish("ok", 0);
  } catch (const std::exception& e) {
    return io.fail(e.what());
  }
}

int run_trajectories(const RunConfig& cfg, const std::string& out_dir) {
  PipelineIO io(cfg, out_dir);
  try {
    RunSetup s = make_setup(cfg);
    SpeedField field = field_for(s, nullptr);
    ValueGrid vg = solve_for(s, field);

    const int n_starts = std::min(cfg.particles, 128);
    WeightedPoints pts = sample_initial(make_initial(cfg), s.dom, s.sg,
                                        n_starts, cfg.seed);
    IntegratorParams ip;
    ip.dt = 0.5 * s.tg.dt;
    ip.horizon = std::min(2.0 * s.t_upper + 10.0 * s.tg.dt,
                          s.tg.t_end() - s.tg.t0);
    ip.exit_tol = 1e-3 * s.sg.h;

    std::vector<Trajectory> optimal;
    std::vector<json> rows;
    int shooting_ok = 0, degenerate = 0;
    double worst_gap = 0.0, worst_exit = 0.0;
    for (int i = 0; i < pts.size(); ++i) {
      Trajectory opt;
      try {
        opt = integrate_optimal(vg, field, s.dom, s.cost, pts.x[i], 0.0, ip);
      } catch (const DegenerateStart&) {
        ++degenerate;
        continue;
      }
      json row;
      row["id"] = i;
      row["tau"] = opt.tau;
      row["exit"] = {opt.exit_point.x, opt.exit_point.y};
      row["cost"] = opt.cost;
      row["value"] = vg.value(0.0, pts.x[i]);
      try {
        ShootingResult shot = shooting_match(field, s.dom, s.cost, pts.x[i],
                                             0.0, ip);
        ++shooting_ok;
        row["shot_cost"] = shot.traj.cost;
        row["shot_mismatch"] = shot.mismatch;
        const double gap = std::abs(shot.traj.cost - opt.cost);
        const double ex = norm(shot.traj.exit_point - opt.exit_point);
        worst_gap = std::max(worst_gap, gap);
        worst_exit = std::max(worst_exit, ex);
      } catch (const ShootingFailed&) {
        row["shot_cost"] = nullptr;
      }
      optimal.push_back(std::move(opt));
      rows.push_back(std::move(row));
    }

    const std::string csv_path = (io.dir / "trajectories.csv").string();
    write_trajectories_csv(csv_path, optimal);
    const std::string csv_text = read_text_file(csv_path);
    io.manifest.add_artifact_bytes("trajectories.csv", csv_text.data(),
                                   csv_text.size());

    json metrics;
    metrics["grid"] = grid_json(s);
    metrics["starts"] = pts.size();
    metrics["integrated"] = static_cast<int>(optimal.size());
    metrics["degenerate_starts"] = degenerate;
    metrics["shooting_ok"] = shooting_ok;
    metrics["worst_cost_gap"] = worst_gap;
    metrics["worst_exit_gap"] = worst_exit;
    metrics["summaries"] = rows;
    io.text("metrics.json", metrics.dump(2) + "\n");
    return io.finish("ok", 0);
  } catch (const std::exception& e) {
    return io.fail(e.what());
  }
}

int run_equilibrium(const RunConfig& cfg, const std::string& out_dir) {
  PipelineIO io(cfg, out_dir);
  try {
    RunSetup s = make_setup(cfg);
    if (!s.kernel_dynamic)
      throw ConfigInvalid("equilibrium pipeline needs dynamic.kind = kernel");
    InteractionKernel kernel(&s.dom, make_speed_law(cfg), make_chi(cfg),
                             cfg.psi_delta > 0.0
                                 ? InteriorCutoff::smoothstep(cfg.psi_delta)
                                 : InteriorCutoff::indicator());
    WeightedPoints pts = sample_initial(make_initial(cfg), s.dom, s.sg,
                                        cfg.particles, cfg.seed);
    EquilibriumParams ep = make_equilibrium_params(cfg);
    ep.threads = s.threads;

    EquilibriumState st =
        fixed_point_iterate(kernel, s.dom, s.cost, pts, s.tg, s.sg, ep);

    JsonlLogger log((io.dir / "iterations.jsonl").string());
    std::ostringstream all_lines;
    for (const auto& h : st.history) {
      json line = {{"iter", h.iter},
                   {"exploitability", h.exploitability},
                   {"path_delta", h.path_delta},
                   {"exited_final", h.exited_final},
                   {"br_cost_mean", h.br_cost_mean},
                   {"ridge_starts", h.ridge_starts}};
      const std::string ls = line.dump();
      log.append(ls);
      all_lines << ls << "\n";
    }
    const std::string lines = all_lines.str();
    io.manifest.add_artifact_bytes("iterations.jsonl", lines.data(),
                                   lines.size());

    io.tensor("rho.f64", st.rho.rho, {s.tg.nt, s.sg.ny, s.sg.nx},
              {"t", "y", "x"});
    std::vector<double> phi = flatten_values(st.phi);
    io.tensor("phi.f64", phi, {s.tg.nt, s.sg.ny, s.sg.nx}, {"t", "y", "x"});
    io.tensor("exited.f64", st.rho.exited_mass,
              {static_cast<std::int64_t>(st.rho.exited_mass.size())}, {"t"});

    st.rho.check_nonnegative();
    st.rho.check_mass_ledger(1e-9);

    json metrics;
    metrics["grid"] = grid_json(s);
    metrics["iterations"] = st.iterations;
    metrics["converged"] = st.converged;
    metrics["stop_reason"] = st.stop_reason;
    metrics["final_exploitability"] = st.final_exploitability;
    metrics["tol_exploit"] = st.tol_exploit;
    metrics["tol_path"] = st.tol_path;
    metrics["exited_final"] = st.rho.exited_mass.back();
    io.text("metrics.json", metrics.dump(2) + "\n");
    return io.finish(st.converged ? "ok" : "MaxIterExceeded", 0);
  } catch (const std::exception& e) {
    return io.fail(e.what());
  }
}

int run_epsilon_study(const RunConfig& cfg, const std::string& out_dir) {
  PipelineIO io(cfg, out_dir);
  try {
    RunSetup s = make_setup(cfg);
    if (!s.kernel_dynamic)
      throw ConfigInvalid("epsilon study needs dynamic.kind = kernel");
    WeightedPoints pts = sample_initial(make_initial(cfg), s.dom, s.sg,
                                        cfg.particles, cfg.seed);
    EquilibriumParams ep = make_equilibrium_params(cfg);
    ep.threads = s.threads;
    EpsilonStudy study =
        epsilon_limit_study(make_speed_law(cfg), make_chi(cfg), s.dom, s.cost,
                            pts, s.tg, s.sg, cfg.eps_study, ep);

    json metrics;
    metrics["grid"] = grid_json(s);
    metrics["eps"] = study.eps;
    metrics["sup_phi_diff"] = study.sup_phi_diff;
    metrics["c_div"] = study.c_div;
    metrics["lp2"] = study.lp2;
    metrics["lp_inf"] = study.lp_inf;
    metrics["flow_linf_ratio"] = study.flow_linf_ratio;
    metrics["exploitability"] = study.exploit;
    metrics["iterations"] = study.iterations;
    metrics["exploit_vs_indicator"] = study.exploit_vs_indicator;
    io.text("study.json", metrics.dump(2) + "\n");
    return io.finish("ok", 0);
  } catch (const std::exception& e) {
    return io.fail(e.what());
  }
}

int run_verify(const RunConfig& cfg, const std::string& out_dir) {
  PipelineIO io(cfg, out_dir);
  try {
    std::vector<CheckRecord> checks = verify_checks(cfg);
    json arr = json::array();
    bool all_pass = true;
    for (const auto& c : checks) {
      arr.push_back({{"name", c.name},
                     {"measured", c.measured},
                     {"bound", c.bound},
                     {"pass", c.pass},
                     {"note", c.note}});
      all_pass = all_pass && c.pass;
    }
    json rep;
    rep["checks"] = arr;
    rep["all_pass"] = all_pass;
    io.text("verify.json", rep.dump(2) + "\n");
    return io.finish(all_pass ? "ok" : "verification_failed",
                     all_pass ? 0 : 3);
  } catch (const std::exception& e) {
    return io.fail(e.what());
  }
}

int run_report(const std::string& out_dir) {
  try {
    const fs::path dir(out_dir);
    json manifest = json::parse(read_text_file((dir / "manifest.json").string()));
    std::ostringstream md;
    md << "# Run report\n\n";
    md << "- outcome: " << manifest.value("outcome", "?") << "\n";
    md << "- config digest: " << manifest.value("config_digest", "?") << "\n";
    md << "- deterministic digest: "
       << manifest.value("deterministic_digest", "?") << "\n";
    md << "- seed: " << manifest.value("seed", 0) << "\n";
    md << "- wall seconds: " << manifest.value("wall_seconds", 0.0) << "\n";
    md << "- artifacts:\n";
    for (const auto& a : manifest.value("artifacts", json::array()))
      md << "  - " << a.value("name", "?") << " `" << a.value("fnv1a64", "?")
         << "`\n";
    for (const char* name : {"metrics.json", "study.json", "verify.json"}) {
      const fs::path p = dir / name;
      if (fs::exists(p)) {
        md << "\n## " << name << "\n\n```json\n" << read_text_file(p.string())
           << "```\n";
      }
    }
    write_text_file((dir / "report.md").string(), md.str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "report failed: %s\n", e.what());
    return 4;
  }
}

std::vector<CheckRecord> verify_checks(const RunConfig& cfg) {
  std::vector<CheckRecord> checks;
  RunSetup s = make_setup(cfg);
  SpeedField field = field_for(s, nullptr);
  ValueGrid vg = solve_for(s, field);
  const double h = s.sg.h;
  const double dt = s.tg.dt;
  const double lam = s.cost.lipschitz();
  const FieldConstants& fc = field.constants();
  const double c_cert = 0.25 * fc.k_min * (1.0 / fc.k_max - lam);

  auto add = [&](const std::string& name, double measured, double bound,
                 bool pass, const std::string& note) {
    checks.push_back({name, measured, bound, pass, note});
  };

  add("cfl", fc.k_max * dt, h, fc.k_max * dt <= h * (1.0 + 1e-12),
      "speed times step within one cell");

  ResidualReport res = hj_residual(vg, field, s.dom);
  const double res_bound = 3.0 * std::sqrt(h) * fc.k_max;
  add("hj_residual_off_ridge", res.max_off_ridge, res_bound,
      res.max_off_ridge <= res_bound,
      "discrete equation residual away from flagged kinks");

  // Oracle comparison for centered balls with zero cost and profile speeds.
  if (!s.kernel_dynamic && cfg.domain_kind == "ball" &&
      cfg.cost_kind == "zero" && norm(cfg.domain_center) == 0.0) {
    TimeProfile zeta = make_profile(cfg);
    double worst = 0.0;
    for (int i = 0; i < s.sg.size(); ++i) {
      if (vg.node_class(i) != NodeClass::Interior) continue;
      const Vec p = s.sg.node(i);
      const double exact =
          radial_exit_value(zeta, cfg.domain_radius, 0.0, norm(p));
      worst = std::max(worst, std::abs(vg.at(0, i) - exact));
    }
    add("radial_oracle_max_err", worst, 0.02, worst <= 0.02,
        "closed-form radial exit times at t = 0");
  }

  // Trajectory battery.
  WeightedPoints pts =
      sample_initial(make_initial(cfg), s.dom, s.sg, 200, cfg.seed);
  IntegratorParams ip;
  ip.dt = 0.5 * dt;
  ip.horizon = std::min(2.0 * s.t_upper + 10.0 * dt, s.tg.t_end());
  ip.exit_tol = 1e-3 * h;

  const double factor = (1.0 + lam * fc.k_max) / (1.0 - lam * fc.k_max);
  double worst_tau_excess = -1e30;
  double dpp_min_slack = 1e30;
  int value_ok = 0, integrated = 0;
  std::vector<Trajectory> kept;
  for (int i = 0; i < pts.size(); ++i) {
    Trajectory tr;
    try {
      tr = integrate_optimal(vg, field, s.dom, s.cost, pts.x[i], 0.0, ip);
    } catch (const DegenerateStart&) {
      continue;
    }
    ++integrated;
    const double depth_i = -s.dom.signed_distance(pts.x[i]);
    worst_tau_excess =
        std::max(worst_tau_excess, tr.tau - factor * depth_i / fc.k_min);
    if (std::abs(tr.cost - vg.value(0.0, pts.x[i])) <= 5.0 * (h + dt))
      ++value_ok;
    DppReport dpp = dpp_check(vg, tr, 16);
    dpp_min_slack = std::min(dpp_min_slack, dpp.min_slack);
    if (kept.size() < 64) kept.push_back(std::move(tr));
  }
  add("exit_time_excess", worst_tau_excess, 2.0 * h,
      worst_tau_excess <= 2.0 * h,
      "tau minus the pointwise certified bound");
  const double value_share =
      integrated > 0 ? static_cast<double>(value_ok) / integrated : 0.0;
  add("value_consistency_share", value_share, 0.95, value_share >= 0.95,
      "|J - phi(0, x0)| within 5 (h + dt)");
  add("dpp_min_slack", dpp_min_slack, -5.0 * (h + dt),
      dpp_min_slack >= -5.0 * (h + dt),
      "programming slack along optimal paths");

  MonotonicityReport mono = time_monotonicity(vg, s.t_upper);
  add("monotone_implied_c", mono.implied_c, 0.0, mono.implied_c > 0.0,
      "certified reference c = " + std::to_string(c_cert));

  GradientBoundReport gb = gradient_lower_bound(vg, s.t_upper);
  add("gradient_floor", gb.min_norm, gb.reference, gb.min_norm >= gb.reference,
      "upwind gradient against half the certified floor");

  TransversalityReport tv =
      transversality_report(kept, field, s.dom, s.cost);
  add("transversality_alignment", tv.min_alignment, 0.9 * c_cert,
      tv.min_alignment >= 0.9 * c_cert,
      "grad d . u across the certified tube, " +
          std::to_string(tv.samples) + " samples");

  SemiconcavityReport sc = semiconcavity_estimate(vg, s.t_upper);
  const double sc_bound = 1.3 * s.dom.kappa() / fc.k_min + 0.15;
  add("semiconcavity_off_ridge", sc.off_ridge, sc_bound,
      sc.off_ridge <= sc_bound,
      "with-ridge value " + std::to_string(sc.with_ridge));

  // Shooting and dual consistency on a trimmed start set.
  int shot_ok = 0, shot_tried = 0;
  double dual_worst = 0.0;
  for (size_t i = 0; i < kept.size() && i < 24; ++i) {
    const Trajectory& opt = kept[i];
    ++shot_tried;
    try {
      ShootingResult shot =
          shooting_match(field, s.dom, s.cost, opt.x0, 0.0, ip);
      const bool agree =
          norm(shot.traj.exit_point - opt.exit_point) <= 4.0 * h &&
          std::abs(shot.traj.cost - opt.cost) <= 5.0 * (h + dt);
      if (agree) ++shot_ok;
      DualArc arc = dual_arc(shot.traj, field, s.dom, s.cost);
      for (size_t k = 0; k < arc.t.size(); ++k) {
        const double t = arc.t[k];
        if (t >= shot.traj.exit_time() - 2.0 * dt) continue;
        const Vec x = shot.traj.position(t);
        if (s.dom.signed_distance(x) > -2.0 * h) continue;
        Vec g{};
        if (vg.try_gradient(t, x, &g) != GradientStatus::Ok) continue;
        dual_worst = std::max(dual_worst, norm(arc.p[k] - g));
      }
    } catch (const ShootingFailed&) {
    }
  }
  const double shot_share =
      shot_tried > 0 ? static_cast<double>(shot_ok) / shot_tried : 0.0;
  add("shooting_agreement_share", shot_share, 0.9, shot_share >= 0.9,
      "exit within 4h and cost within 5 (h + dt)");
  add("dual_gradient_gap", dual_worst, 10.0 * h, dual_worst <= 10.0 * h,
      "adjoint against the value gradient at interior samples");

  return checks;
}

}  // namespace exitflow
