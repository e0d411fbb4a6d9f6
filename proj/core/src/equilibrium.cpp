#include "exitflow/equilibrium.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>

#include "exitflow/parallel.hpp"

namespace exitflow {

namespace {

// splitmix64: cheap deterministic per-(round, particle) uniform draw.
double hash_uniform(std::uint64_t seed, std::uint64_t round, std::uint64_t i) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (round * 0x100000001b3ull + i + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z = z ^ (z >> 31);
  return (z >> 11) * 0x1.0p-53;
}

}  // namespace

bool InitialDensity::supports(const SignedDomain& dom, Vec p) const {
  if (dom.signed_distance(p) >= -margin) return false;
  switch (kind) {
    case Kind::UniformBall:
      return norm(p - center) <= radius;
    case Kind::UniformBox:
      return p.x >= lo.x && p.x <= hi.x &&
             (dom.dim() == 1 || (p.y >= lo.y && p.y <= hi.y));
    case Kind::UniformDomain:
      return true;
  }
  return false;
}

WeightedPoints sample_initial(const InitialDensity& init,
                              const SignedDomain& dom, const SpaceGrid& sg,
                              int count, std::uint64_t seed) {
  const int n_cells = sg.size();
  const double vol = sg.cell_volume();

  // Supersampled support fraction per cell.
  std::vector<double> frac(n_cells, 0.0);
  std::vector<Vec> fallback(n_cells);
  const int ss = 3;
  for (int c = 0; c < n_cells; ++c) {
    const Vec ctr = sg.node(c);
    int hits = 0, total = 0;
    for (int ay = 0; ay < (sg.dim == 2 ? ss : 1); ++ay) {
      for (int ax = 0; ax < ss; ++ax) {
        const double ox = (ax + 0.5) / ss - 0.5;
        const double oy = sg.dim == 2 ? (ay + 0.5) / ss - 0.5 : 0.0;
        const Vec p{ctr.x + ox * sg.h, ctr.y + oy * sg.h};
        ++total;
        if (init.supports(dom, p)) {
          if (hits == 0) fallback[c] = p;
          ++hits;
        }
      }
    }
    frac[c] = static_cast<double>(hits) / total;
  }

  double z_mass = 0.0;
  for (double f : frac) z_mass += f * vol;
  if (z_mass <= 0.0)
    throw UnnormalizedDensity("initial density has empty support on the grid");

  // Largest-remainder allocation of the particle budget.
  std::vector<int> alloc(n_cells, 0);
  std::vector<std::pair<double, int>> rem;
  rem.reserve(n_cells);
  int assigned = 0;
  for (int c = 0; c < n_cells; ++c) {
    const double ideal = count * frac[c] * vol / z_mass;
    alloc[c] = static_cast<int>(std::floor(ideal));
    assigned += alloc[c];
    rem.push_back({ideal - alloc[c], c});
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int k = 0; assigned < count && k < n_cells; ++k) {
    if (rem[k].first <= 0.0) break;
    ++alloc[rem[k].second];
    ++assigned;
  }
  // Pathological rounding leftovers go to the heaviest cells.
  for (int k = 0; assigned < count; k = (k + 1) % n_cells) {
    if (frac[rem[k % n_cells].second] > 0.0) {
      ++alloc[rem[k % n_cells].second];
      ++assigned;
    }
  }

  WeightedPoints pts;
  pts.seed = seed;
  pts.x.reserve(count);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  const double rho_val = 1.0 / z_mass;
  for (int c = 0; c < n_cells; ++c) {
    const Vec ctr = sg.node(c);
    for (int m = 0; m < alloc[c]; ++m) {
      Vec p = fallback[c];
      for (int attempt = 0; attempt < 100; ++attempt) {
        const double jx = uni(rng);
        const double jy = sg.dim == 2 ? uni(rng) : 0.0;
        const Vec q{ctr.x + jx * sg.h, ctr.y + jy * sg.h};
        if (init.supports(dom, q)) {
          p = q;
          break;
        }
      }
      pts.x.push_back(p);
      pts.rho0.push_back(rho_val);
    }
  }
  pts.w.assign(pts.x.size(), 1.0 / static_cast<double>(pts.x.size()));
  return pts;
}

namespace {

// Deterministic nudge offsets for starts sitting on a flagged ridge point.
std::array<Vec, 4> nudges(double h, int dim) {
  if (dim == 1)
    return {Vec{0.25 * h, 0.0}, Vec{-0.25 * h, 0.0}, Vec{0.5 * h, 0.0},
            Vec{-0.5 * h, 0.0}};
  return {Vec{0.25 * h, 0.0}, Vec{-0.25 * h, 0.0}, Vec{0.0, 0.25 * h},
          Vec{0.0, -0.25 * h}};
}

}  // namespace

BestResponse best_response(const ValueGrid& vg, const SpeedField& field,
                           const SignedDomain& dom, const BoundaryCost& cost,
                           const WeightedPoints& pts,
                           const EquilibriumParams& params) {
  const TimeGrid& tg = vg.time_grid();
  const SpaceGrid& sg = vg.space_grid();
  const int n = pts.size();
  BestResponse br;
  br.path = DensityPath::zeros(tg, sg);
  br.J.assign(n, 0.0);
  br.tau.assign(n, 0.0);
  br.exit.assign(n, Vec{});
  br.ridge_starts = 0;

  // Dense curves kept for a deterministic id subsample.
  const int n_store = std::min(params.store_curves, n);
  std::vector<char> keep(n, 0);
  for (int j = 0; j < n_store; ++j) {
    const int id = static_cast<int>(
        std::min<std::int64_t>(n - 1, std::int64_t(j) * n / n_store));
    if (!keep[id]) {
      keep[id] = 1;
      br.curve_ids.push_back(id);
    }
  }
  br.curves.resize(br.curve_ids.size());
  std::vector<int> curve_slot(n, -1);
  for (size_t j = 0; j < br.curve_ids.size(); ++j)
    curve_slot[br.curve_ids[j]] = static_cast<int>(j);

  IntegratorParams ip;
  ip.dt = 0.5 * tg.dt;
  ip.horizon = tg.t_end() - tg.t0;
  ip.exit_tol = 1e-3 * sg.h;
  ip.record_stride = 2;  // samples land exactly on the grid times

  const int batch = 256;
  std::vector<Trajectory> trajs(batch);
  std::atomic<int> ridge_count{0};
  std::mutex err_mutex;
  std::exception_ptr first_error = nullptr;

  std::vector<double> exited_w(tg.nt, 0.0);
  const auto nudge_list = nudges(sg.h, sg.dim);

  for (int base = 0; base < n; base += batch) {
    const int hi = std::min(n, base + batch);
    parallel_for(hi - base, params.threads, [&](int a, int b) {
      try {
        for (int k = a; k < b; ++k) {
          const int i = base + k;
          IntegratorParams local = ip;
          if (curve_slot[i] >= 0) local.record_stride = 1;
          Trajectory tr;
          bool done = false;
          try {
            tr = integrate_optimal(vg, field, dom, cost, pts.x[i], tg.t0,
                                   local);
            done = true;
          } catch (const DegenerateStart&) {
            for (const Vec& off : nudge_list) {
              const Vec y = pts.x[i] + off;
              if (dom.signed_distance(y) >= 0.0) continue;
              try {
                tr = integrate_optimal(vg, field, dom, cost, y, tg.t0, local);
                ridge_count.fetch_add(1);
                done = true;
                break;
              } catch (const DegenerateStart&) {
              }
            }
          }
          if (!done)
            throw DegenerateStart("start stuck on a ridge after nudging");
          tr.weight = pts.w[i];
          trajs[k] = std::move(tr);
        }
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
    if (first_error) std::rethrow_exception(first_error);

    // Serial binning of the batch.
    for (int k = 0; k < hi - base; ++k) {
      const int i = base + k;
      Trajectory& tr = trajs[k];
      br.J[i] = tr.cost;
      br.tau[i] = tr.tau;
      br.exit[i] = tr.exit_point;
      br.cost_mean += pts.w[i] * tr.cost;
      for (int it = 0; it < tg.nt; ++it) {
        const double t = tg.time(it);
        if (tr.exited_by(t)) {
          exited_w[it] += pts.w[i];
        } else {
          br.path.at(it, sg.nearest(tr.position(t))) += pts.w[i];
        }
      }
      if (curve_slot[i] >= 0) br.curves[curve_slot[i]] = std::move(tr);
    }
  }

  const double inv_vol = 1.0 / sg.cell_volume();
  for (int it = 0; it < tg.nt; ++it) {
    for (int c = 0; c < sg.size(); ++c) br.path.at(it, c) *= inv_vol;
    br.path.exited_mass[it] = exited_w[it];
  }
  br.ridge_starts = ridge_count.load();
  return br;
}

double state_exploitability(const EquilibriumState& st) {
  double worst = 0.0;
  const double t0 = st.phi.time_grid().t0;
  for (int i = 0; i < st.particles.size(); ++i) {
    const double gain = st.J[i] - st.phi.value(t0, st.particles.x[i]);
    worst = std::max(worst, gain);
  }
  return worst;
}

namespace {

DensityPath initial_frozen_path(const WeightedPoints& pts, const TimeGrid& tg,
                                const SpaceGrid& sg) {
  std::vector<double> cells(sg.size(), 0.0);
  for (int i = 0; i < pts.size(); ++i)
    cells[sg.nearest(pts.x[i])] += pts.w[i];
  const double inv_vol = 1.0 / sg.cell_volume();
  for (double& c : cells) c *= inv_vol;
  return DensityPath::frozen(tg, sg, cells);
}

void blend_path(DensityPath& base, const DensityPath& fresh, double a) {
  for (size_t i = 0; i < base.rho.size(); ++i)
    base.rho[i] = (1.0 - a) * base.rho[i] + a * fresh.rho[i];
  for (size_t i = 0; i < base.exited_mass.size(); ++i)
    base.exited_mass[i] =
        (1.0 - a) * base.exited_mass[i] + a * fresh.exited_mass[i];
}

}  // namespace

EquilibriumState fixed_point_iterate(const InteractionKernel& kernel,
                                     const SignedDomain& dom,
                                     const BoundaryCost& cost,
                                     const WeightedPoints& pts,
                                     const TimeGrid& tg, const SpaceGrid& sg,
                                     const EquilibriumParams& params) {
  EquilibriumState st;
  st.particles = pts;
  st.tol_exploit =
      params.tol_exploit > 0.0 ? params.tol_exploit : 5.0 * (sg.h + tg.dt);
  st.tol_path = params.tol_path > 0.0 ? params.tol_path : sg.h;

  DensityPath rho_bar = initial_frozen_path(pts, tg, sg);
  const int n = pts.size();
  st.J.assign(n, 0.0);
  st.tau.assign(n, 0.0);
  st.exit.assign(n, Vec{});

  HjbParams hjb = params.hjb;
  hjb.threads = params.threads;

  auto build_field = [&](const DensityPath& path) {
    return SpeedField::from_kernel_and_path(kernel, path, params.stride_space,
                                            params.stride_time,
                                            params.threads);
  };

  bool phi_matches_rho = false;
  double last_exploit = -1.0;

  for (int round = 1; round <= params.max_iter; ++round) {
    st.field = build_field(rho_bar);
    st.phi = solve_value_function(st.field, dom, cost, hjb);
    phi_matches_rho = true;

    if (round > 1) {
      last_exploit = state_exploitability(st);
      if (!st.history.empty())
        st.history.back().exploitability = last_exploit;
      if (last_exploit <= st.tol_exploit) {
        st.converged = true;
        st.stop_reason = "exploitability_below_tol";
        break;
      }
    }

    BestResponse br = best_response(st.phi, st.field, dom, cost, pts, params);
    st.iterations = round;

    const double a =
        params.scheme == EquilibriumParams::Scheme::FictitiousPlay
            ? 1.0 / round
            : (round == 1 ? 1.0 : params.theta);
    DensityPath prev = rho_bar;
    blend_path(rho_bar, br.path, a);
    const double delta = path_distance(rho_bar, prev);

    // Strategy-mixture bookkeeping: each particle keeps its old plan with
    // probability 1-a, deterministically per (seed, round, particle).
    for (int i = 0; i < n; ++i) {
      if (hash_uniform(params.seed, round, i) < a) {
        st.J[i] = br.J[i];
        st.tau[i] = br.tau[i];
        st.exit[i] = br.exit[i];
      }
    }
    if (round == 1) {
      st.sample_curves = std::move(br.curves);
    } else {
      for (size_t j = 0; j < br.curves.size(); ++j) {
        const int id = br.curve_ids[j];
        if (hash_uniform(params.seed, round, id) < a)
          st.sample_curves[j] = std::move(br.curves[j]);
      }
    }

    IterationStats stats;
    stats.iter = round;
    stats.exploitability = -1.0;
    stats.path_delta = delta;
    stats.exited_final = br.path.exited_mass.back();
    stats.br_cost_mean = br.cost_mean;
    stats.ridge_starts = br.ridge_starts;
    st.history.push_back(stats);
    phi_matches_rho = false;

    if (round > 1 && delta <= st.tol_path) {
      st.converged = true;
      st.stop_reason = "path_stagnation";
      break;
    }
    if (round == params.max_iter) {
      st.converged = false;
      st.stop_reason = "MaxIterExceeded";
    }
  }

  st.rho = std::move(rho_bar);
  if (!phi_matches_rho) {
    st.field = build_field(st.rho);
    st.phi = solve_value_function(st.field, dom, cost, hjb);
  }
  st.final_exploitability = state_exploitability(st);
  if (st.stop_reason.empty()) st.stop_reason = "exploitability_below_tol";
  return st;
}

EpsilonStudy epsilon_limit_study(const SpeedLaw& speed,
                                 const AveragingKernel& chi,
                                 const SignedDomain& dom,
                                 const BoundaryCost& cost,
                                 const WeightedPoints& pts,
                                 const TimeGrid& tg, const SpaceGrid& sg,
                                 const std::vector<double>& eps_list,
                                 const EquilibriumParams& params) {
  EpsilonStudy study;
  study.eps = eps_list;
  const double moll = std::max(2.0 * sg.h, 0.04 * dom.diameter());

  ValueGrid prev_phi;
  bool have_prev = false;
  DensityPath last_rho;
  std::vector<double> last_J;

  for (double eps : eps_list) {
    InteractionKernel kernel(&dom, speed, chi,
                             InteriorCutoff::smoothstep(eps));
    EquilibriumState st =
        fixed_point_iterate(kernel, dom, cost, pts, tg, sg, params);

    const double t_max = terminal_horizon(st.field, dom, cost);
    double lp2 = 0.0, lpi = 0.0;
    for (int it = 0; it < tg.nt && tg.time(it) <= t_max + tg.dt; ++it) {
      lp2 = std::max(lp2, lp_norm_interior(st.rho.slice(it), sg, dom, 2.0));
      lpi = std::max(lpi, lp_norm_interior(st.rho.slice(it), sg, dom,
                                           std::numeric_limits<double>::infinity()));
    }
    study.lp2.push_back(lp2);
    study.lp_inf.push_back(lpi);
    study.exploit.push_back(st.final_exploitability);
    study.iterations.push_back(st.iterations);

    VelocityField v = mollified_velocity(st.phi, st.field, dom, moll,
                                         params.threads);
    study.c_div.push_back(
        divergence_envelope(v, dom, sg, tg, moll, params.threads).envelope());

    FlowParams fp;
    fp.core_margin = moll;
    fp.threads = params.threads;
    const FlowResult fr = flow_with_jacobian(v, pts, tg, sg, dom, fp);
    double flow_sup = 0.0;
    for (int it = 0; it < tg.nt && tg.time(it) <= t_max + tg.dt; ++it)
      flow_sup = std::max(flow_sup, fr.max_density_core[it]);
    const double flow_init = fr.max_density_core.empty() ? 0.0
                                                         : fr.max_density_core[0];
    study.flow_linf_ratio.push_back(
        flow_init > 0.0 ? flow_sup / flow_init
                        : std::numeric_limits<double>::quiet_NaN());

    if (have_prev) {
      double worst = 0.0;
      for (int it = 0; it < tg.nt && tg.time(it) <= t_max + tg.dt; ++it) {
        for (int c = 0; c < sg.size(); ++c) {
          if (prev_phi.node_class(c) != NodeClass::Interior) continue;
          worst = std::max(worst,
                           std::abs(st.phi.at(it, c) - prev_phi.at(it, c)));
        }
      }
      study.sup_phi_diff.push_back(worst);
    }
    prev_phi = st.phi;
    have_prev = true;
    last_rho = st.rho;
    last_J = st.J;
  }

  // Sharp-cutoff cross-check: value the smallest-eps mixture against the
  // indicator dynamics it approximates.
  InteractionKernel sharp(&dom, speed, chi, InteriorCutoff::indicator());
  SpeedField field_ind = SpeedField::from_kernel_and_path(
      sharp, last_rho, params.stride_space, params.stride_time,
      params.threads);
  HjbParams hjb = params.hjb;
  hjb.threads = params.threads;
  ValueGrid phi_ind = solve_value_function(field_ind, dom, cost, hjb);
  double worst = 0.0;
  for (int i = 0; i < pts.size(); ++i)
    worst = std::max(worst, last_J[i] - phi_ind.value(tg.t0, pts.x[i]));
  study.exploit_vs_indicator = std::max(0.0, worst);
  return study;
}

}  // namespace exitflow
