#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "exitflow/equilibrium.hpp"
#include "test_support.hpp"

using namespace exitflow;
using namespace exitflow::testsupport;

namespace {

struct Setup1d {
  SignedDomain dom = SignedDomain::interval(0.0, 1.0);
  BoundaryCost cost = BoundaryCost::zero();
  SpaceGrid sg = make_grid(1, 0.0, 1.0, 1.0 / 32.0, 4.0);
  TimeGrid tg = make_time_grid(0.9, 1.0 / 64.0);
};

EquilibriumParams small_params(std::uint64_t seed = 3) {
  EquilibriumParams ep;
  ep.threads = 2;
  ep.seed = seed;
  ep.store_curves = 64;
  ep.max_iter = 40;
  ep.hjb.threads = 2;
  return ep;
}

}  // namespace

TEST_CASE("stratified initial sampler") {
  const Setup1d s;
  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformDomain;
  init.margin = 0.1;

  const WeightedPoints pts = sample_initial(init, s.dom, s.sg, 2000, 17);
  CHECK(pts.size() == 2000);
  CHECK(pts.seed == 17);
  CHECK(pts.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < pts.size(); ++i) {
    CHECK(s.dom.signed_distance(pts.x[i]) <= -0.1 + 1e-12);
    CHECK(pts.w[i] > 0.0);
    CHECK(pts.rho0[i] > 0.0);
  }

  // deterministic for a fixed seed, different for another
  const WeightedPoints again = sample_initial(init, s.dom, s.sg, 2000, 17);
  REQUIRE(again.size() == pts.size());
  for (int i = 0; i < pts.size(); ++i)
    CHECK(distance(again.x[i], pts.x[i]) == doctest::Approx(0.0));
  const WeightedPoints other = sample_initial(init, s.dom, s.sg, 2000, 18);
  bool any_moved = false;
  for (int i = 0; i < other.size() && !any_moved; ++i)
    any_moved = distance(other.x[i], pts.x[i]) > 1e-12;
  CHECK(any_moved);

  // stratification: occupied-cell masses stay near the uniform level
  std::vector<double> cell_mass(s.sg.size(), 0.0);
  for (int i = 0; i < pts.size(); ++i)
    cell_mass[s.sg.nearest(pts.x[i])] += pts.w[i];
  const int covered =
      static_cast<int>(std::count_if(cell_mass.begin(), cell_mass.end(),
                                     [](double m) { return m > 0.0; }));
  CHECK(covered >= 24);  // ~0.8 / h cells carry mass
  const double expected = 1.0 / covered;
  for (double m : cell_mass)
    if (m > 0.0) CHECK(m < 3.0 * expected);
}

TEST_CASE("ball-restricted initial sampler") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const SpaceGrid sg = make_grid(2, -1.0, 1.0, 1.0 / 16.0);
  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformBall;
  init.center = {0.2, 0.0};
  init.radius = 0.5;

  const WeightedPoints pts = sample_initial(init, dom, sg, 3000, 5);
  CHECK(pts.total_weight() == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 0; i < pts.size(); ++i) {
    CHECK(distance(pts.x[i], {0.2, 0.0}) <= 0.5 + 1e-12);
    CHECK(dom.inside(pts.x[i]));
    CHECK(init.supports(dom, pts.x[i]));
  }
  CHECK_FALSE(init.supports(dom, {0.9, 0.0}));
}

TEST_CASE("best response against a fixed uniform field") {
  const Setup1d s;
  const SpeedField field =
      SpeedField::from_profile(TimeProfile::constant(1.0), s.tg, s.sg);
  const ValueGrid vg = solve_value_function(field, s.dom, s.cost);

  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformDomain;
  init.margin = 0.1;
  const WeightedPoints pts = sample_initial(init, s.dom, s.sg, 4000, 9);

  const BestResponse br =
      best_response(vg, field, s.dom, s.cost, pts, small_params());

  // mean of min(x, 1-x) over U[0.1, 0.9] is 0.3
  CHECK(br.cost_mean == doctest::Approx(0.3).epsilon(0.02));
  CHECK(static_cast<int>(br.J.size()) == pts.size());
  CHECK(static_cast<int>(br.curves.size()) <= 64);
  CHECK(br.path.exited_mass.back() == doctest::Approx(1.0).epsilon(1e-9));
  br.path.check_mass_ledger(1e-9);

  // realized costs match the value function at the starts
  int agree = 0;
  for (int i = 0; i < pts.size(); ++i)
    if (std::abs(br.J[i] - vg.value(0.0, pts.x[i])) <
        5.0 * (s.sg.h + s.tg.dt))
      ++agree;
  CHECK(agree >= static_cast<int>(0.95 * pts.size()));
}

TEST_CASE("non-interacting population settles immediately") {
  const Setup1d s;
  const InteractionKernel kernel(&s.dom, SpeedLaw::constant(1.0),
                                 AveragingKernel::gaussian(0.2),
                                 InteriorCutoff::indicator());
  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformDomain;
  init.margin = 0.1;
  const WeightedPoints pts = sample_initial(init, s.dom, s.sg, 4000, 3);

  const EquilibriumState st = fixed_point_iterate(kernel, s.dom, s.cost, pts,
                                                  s.tg, s.sg, small_params());
  CHECK(st.converged);
  CHECK(st.iterations == 1);
  CHECK(st.final_exploitability >= 0.0);
  CHECK(st.final_exploitability < 1e-3);
  CHECK(st.stop_reason == "exploitability_below_tol");
  CHECK(st.history.size() == 1);
  st.rho.check_mass_ledger(1e-9);
  CHECK(state_exploitability(st) == doctest::Approx(st.final_exploitability));

  // exploitability recomputes from the stored arrays
  double manual = 0.0;
  for (int i = 0; i < st.particles.size(); ++i)
    manual = std::max(manual, st.J[i] - st.phi.value(0.0, st.particles.x[i]));
  CHECK(std::max(0.0, manual) == doctest::Approx(st.final_exploitability));
}

TEST_CASE("weak interaction converges under both schemes") {
  const Setup1d s;
  const InteractionKernel kernel(&s.dom, SpeedLaw::reciprocal(1.0, 0.25),
                                 AveragingKernel::gaussian(0.2),
                                 InteriorCutoff::indicator());
  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformDomain;
  init.margin = 0.1;
  const WeightedPoints pts = sample_initial(init, s.dom, s.sg, 3000, 3);

  // horizon long enough for the congested crossing
  Setup1d slow = s;
  slow.tg = make_time_grid(1.2, 1.0 / 64.0);

  EquilibriumParams fp = small_params();
  const EquilibriumState a = fixed_point_iterate(kernel, s.dom, s.cost, pts,
                                                 slow.tg, s.sg, fp);
  CHECK(a.converged);
  CHECK(a.final_exploitability <= a.tol_exploit);
  CHECK(a.iterations <= fp.max_iter);
  a.rho.check_mass_ledger(1e-9);

  EquilibriumParams dp = small_params();
  dp.scheme = EquilibriumParams::Scheme::DampedPicard;
  dp.theta = 0.5;
  const EquilibriumState b = fixed_point_iterate(kernel, s.dom, s.cost, pts,
                                                 slow.tg, s.sg, dp);
  CHECK(b.converged);

  // the two fixed-point schemes land on the same averaged path
  CHECK(path_distance(a.rho, b.rho) <= 2.0 * a.tol_path);

  // iteration history is monotone enough to certify progress
  REQUIRE(!a.history.empty());
  CHECK(a.history.back().exploitability <= a.tol_exploit);
  for (const IterationStats& it : a.history) {
    CHECK(it.exited_final > 0.99);
    CHECK(it.ridge_starts >= 0);
  }
}

TEST_CASE("epsilon continuation study runs end to end") {
  const Setup1d s;
  InitialDensity init;
  init.kind = InitialDensity::Kind::UniformDomain;
  init.margin = 0.1;
  const WeightedPoints pts = sample_initial(init, s.dom, s.sg, 1500, 3);

  Setup1d slow = s;
  slow.tg = make_time_grid(1.2, 1.0 / 64.0);

  EquilibriumParams ep = small_params();
  ep.max_iter = 25;
  const EpsilonStudy study = epsilon_limit_study(
      SpeedLaw::reciprocal(1.0, 0.2), AveragingKernel::gaussian(0.2), s.dom,
      s.cost, pts, slow.tg, s.sg, {0.16, 0.08}, ep);

  REQUIRE(study.eps.size() == 2);
  REQUIRE(study.sup_phi_diff.size() == 1);
  CHECK(study.sup_phi_diff[0] >= 0.0);
  CHECK(study.sup_phi_diff[0] < 0.5);
  REQUIRE(study.c_div.size() == 2);
  for (double c : study.c_div) {
    CHECK(c >= 0.0);
    CHECK(std::isfinite(c));
  }
  REQUIRE(study.lp2.size() == 2);
  for (size_t i = 0; i < study.lp2.size(); ++i) {
    CHECK(study.lp2[i] > 0.0);
    CHECK(study.lp_inf[i] >= study.lp2[i] - 1e-9);
  }
  REQUIRE(study.flow_linf_ratio.size() == 2);
  for (double r : study.flow_linf_ratio) {
    // the sup over time includes the initial slice, so the ratio is >= 1
    CHECK(r >= 1.0 - 1e-12);
    CHECK(std::isfinite(r));
  }
  CHECK(study.exploit_vs_indicator >= 0.0);
  CHECK(study.exploit_vs_indicator < 0.5);
}
