#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "exitflow/digest.hpp"
#include "exitflow/hjb.hpp"
#include "test_support.hpp"

using namespace exitflow;
using namespace exitflow::testsupport;

TEST_CASE("transversality root") {
  // zero boundary slope: k mu = 1
  CHECK(solve_transversality_mu(1.0, {}, {1.0, 0.0}) == doctest::Approx(1.0));
  CHECK(solve_transversality_mu(2.0, {}, {0.0, 1.0}) == doctest::Approx(0.5));
  CHECK(solve_transversality_mu(0.25, {}, {1.0, 0.0}) == doctest::Approx(4.0));

  // tangential slope g_t only: mu = sqrt(1/k^2 - |g_t|^2)
  CHECK(solve_transversality_mu(1.0, {0.0, 0.4}, {1.0, 0.0}) ==
        doctest::Approx(std::sqrt(0.84)));

  // slope with a normal component g_n: mu = g_n + sqrt(1/k^2 - |g_t|^2)
  CHECK(solve_transversality_mu(1.0, {0.2, 0.3}, {1.0, 0.0}) ==
        doctest::Approx(0.2 + std::sqrt(1.0 - 0.09)));

  // residual of the defining equation vanishes
  for (double k : {0.5, 1.0, 1.7}) {
    const Vec n{0.6, 0.8};
    const Vec g{0.1, -0.2};
    const double mu = solve_transversality_mu(k, g, n);
    CHECK(k * norm(g - mu * n) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mu > dot(g, n));  // exit direction points outward
  }

  // a slope too steep for the speed leaves no positive root
  CHECK_THROWS_AS(solve_transversality_mu(2.0, {0.0, 0.9}, {1.0, 0.0}),
                  ShootingFailed);
}

TEST_CASE("terminal horizon formula") {
  const SignedDomain ball = SignedDomain::ball({0.0, 0.0}, 1.0);
  const SpaceGrid sg = make_grid(2, -1.0, 1.0, 1.0 / 8.0);
  const TimeGrid tg = make_time_grid(1.0, 1.0 / 16.0);
  const SpeedField f = SpeedField::from_profile(TimeProfile::constant(1.0), tg, sg);

  CHECK(terminal_horizon(f, ball, BoundaryCost::zero()) == doctest::Approx(1.0));
  // lip(g) = 0.4, k_max = 1: factor (1 + 0.4) / (1 - 0.4)
  CHECK(terminal_horizon(f, ball, BoundaryCost::affine(1.0, {0.4, 0.0})) ==
        doctest::Approx(1.4 / 0.6));

  const SpeedField f2 = SpeedField::from_profile(TimeProfile::constant(2.0), tg, sg);
  CHECK(terminal_horizon(f2, ball, BoundaryCost::zero()) == doctest::Approx(0.5));
  CHECK_THROWS_AS(
      terminal_horizon(f2, ball, BoundaryCost::affine(1.0, {0.6, 0.0})),
      CostTooSteep);
}

TEST_CASE("1d interval with unit speed is exact") {
  // pad with an integer cell count so the midpoint lands on a node
  Problem p;
  p.dom = SignedDomain::interval(0.0, 1.0);
  p.cost = BoundaryCost::zero();
  p.sg = make_grid(1, 0.0, 1.0, 1.0 / 32.0, 4.0);
  p.tg = make_time_grid(0.65, 1.0 / 64.0);
  p.field = SpeedField::from_profile(TimeProfile::constant(1.0), p.tg, p.sg);
  const ValueGrid vg = solve(p);

  for (int i = 0; i < p.sg.size(); ++i) {
    if (vg.node_class(i) != NodeClass::Interior) continue;
    const double x = p.sg.node(i).x;
    CHECK(vg.at(0, i) == doctest::Approx(std::min(x, 1.0 - x)).epsilon(1e-9));
    // constant speed: every slice repeats the stationary solution
    CHECK(vg.at(p.tg.nt - 1, i) == doctest::Approx(vg.at(0, i)).epsilon(1e-12));
  }
  CHECK(vg.freeze_index() == 0);
  CHECK(vg.max_interior_value() == doctest::Approx(0.5).epsilon(1e-9));

  // the kink node carries a ridge flag; its neighbors stay clean
  const int mid = p.sg.nearest({0.5, 0.0});
  CHECK(vg.ridge_flag(0, mid));
  CHECK_FALSE(vg.ridge_flag(0, p.sg.nearest({0.25, 0.0})));
  CHECK(vg.ridge_near(0.0, {0.5, 0.0}));

  // interpolated value crosses zero at the boundary (ghost band data)
  CHECK(vg.value(0.0, {0.01, 0.0}) == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(vg.value(0.0, {0.993, 0.0}) == doctest::Approx(0.007).epsilon(1e-7));

  // gradient probes: +1 left of the kink, -1 right of it, ridge at it
  Vec g;
  CHECK(vg.try_gradient(0.0, {0.25, 0.0}, &g) == GradientStatus::Ok);
  CHECK(g.x == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(vg.try_gradient(0.0, {0.75, 0.0}, &g) == GradientStatus::Ok);
  CHECK(g.x == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(vg.try_gradient(0.0, {0.5, 0.0}, &g) == GradientStatus::Ridge);
  CHECK_THROWS_AS(vg.gradient(0.0, {0.5, 0.0}), DegenerateGradient);
}

TEST_CASE("1d interval with affine exit cost") {
  // g(0) = 0.2, g(1) = 0.6: phi(x) = min(x + 0.2, 1 - x + 0.6)
  Problem p;
  p.dom = SignedDomain::interval(0.0, 1.0);
  p.cost = BoundaryCost::affine(0.2, {0.4, 0.0});
  // pad chosen so the kink x = 0.7 lands exactly on a node
  p.sg = make_grid(1, 0.0, 1.0, 1.0 / 32.0, 4.6);
  p.tg = make_time_grid(1.6, 1.0 / 64.0);
  p.field = SpeedField::from_profile(TimeProfile::constant(1.0), p.tg, p.sg);
  const ValueGrid vg = solve(p);

  for (int i = 0; i < p.sg.size(); ++i) {
    if (vg.node_class(i) != NodeClass::Interior) continue;
    const double x = p.sg.node(i).x;
    const double exact = std::min(x + 0.2, 1.0 - x + 0.6);
    CHECK(vg.at(0, i) == doctest::Approx(exact).epsilon(1e-9));
  }
  // kink moved to x = 0.7
  CHECK(vg.ridge_flag(0, p.sg.nearest({0.7, 0.0})));
  CHECK_FALSE(vg.ridge_flag(0, p.sg.nearest({0.5, 0.0})));
}

TEST_CASE("2d ball radial accuracy at coarse resolution") {
  const Problem p = ball_problem(TimeProfile::constant(1.0), 1.0 / 16.0);
  const ValueGrid vg = solve(p);

  double worst = 0.0;
  for (int i = 0; i < p.sg.size(); ++i) {
    if (vg.node_class(i) != NodeClass::Interior) continue;
    const double exact = 1.0 - norm(p.sg.node(i));
    worst = std::max(worst, std::abs(vg.at(0, i) - exact));
  }
  CHECK(worst < 0.06);
  CHECK(vg.min_time_quotient() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(vg.max_interior_value() < 1.0 + 0.06);

  // residual of the discrete equation away from the center ridge
  const ResidualReport rep = hj_residual(vg, p.field, p.dom, 2.0 * p.sg.h);
  CHECK(rep.nodes_checked > 100);
  CHECK(rep.max_off_ridge < 0.35);

  // gradient points inward with unit norm away from the center
  Vec g;
  REQUIRE(vg.try_gradient(0.0, {0.5, 0.0}, &g) == GradientStatus::Ok);
  CHECK(g.x == doctest::Approx(-1.0).epsilon(0.08));
  CHECK(std::abs(g.y) < 0.08);
}

TEST_CASE("time-varying speed lowers the value ahead of acceleration") {
  const TimeProfile rising = TimeProfile::affine(1.0, 0.5, 0.25);
  const Problem pr = ball_problem(rising, 1.0 / 16.0);
  const ValueGrid vr = solve(pr);
  const Problem pc = ball_problem(TimeProfile::constant(1.0), 1.0 / 16.0);
  const ValueGrid vc = solve(pc);

  // with speed rising in time the remaining cost is strictly smaller than
  // the frozen zeta(0) = 1 solution at the center, and phi decreases in t
  const int c = pr.sg.nearest({0.0, 0.0});
  CHECK(vr.at(0, c) < vc.at(0, c) - 0.05);
  CHECK(vr.min_time_quotient() < -1e-3);
  CHECK(vr.min_time_quotient() > -1.0);  // the implied constant stays positive
  CHECK(vr.freeze_index() == pr.tg.nt - 1);
}

TEST_CASE("solver rejects bad discretizations") {
  const SignedDomain ball = SignedDomain::ball({0.0, 0.0}, 1.0);
  const SpaceGrid sg = make_grid(2, -1.0, 1.0, 1.0 / 16.0);

  // CFL: k_max dt must stay below h
  const TimeGrid bad_tg = make_time_grid(0.5, 1.0 / 16.0);
  const SpeedField f2 = SpeedField::from_profile(TimeProfile::constant(2.0),
                                                 bad_tg, sg);
  CHECK_THROWS_AS(solve_value_function(f2, ball, BoundaryCost::zero()),
                  CFLViolation);

  // band wider than the regular tube: grid cannot resolve the domain
  const SignedDomain tiny = SignedDomain::ball({0.0, 0.0}, 0.05);
  const SpaceGrid sg_c = make_grid(2, -0.05, 0.05, 0.05);
  const TimeGrid tg_c = make_time_grid(0.2, 0.02);
  const SpeedField fc = SpeedField::from_profile(TimeProfile::constant(1.0),
                                                 tg_c, sg_c);
  CHECK_THROWS_AS(solve_value_function(fc, tiny, BoundaryCost::zero()),
                  GridMismatch);
}

TEST_CASE("solution is deterministic and thread-count independent") {
  const Problem p = ball_problem(TimeProfile::affine(1.0, 0.5, 0.25), 1.0 / 12.0);
  HjbParams one;
  one.threads = 1;
  HjbParams four;
  four.threads = 4;
  const ValueGrid a = solve_value_function(p.field, p.dom, p.cost, one);
  const ValueGrid b = solve_value_function(p.field, p.dom, p.cost, four);
  const ValueGrid c = solve_value_function(p.field, p.dom, p.cost, four);

  Fnv1a64 da, db, dc;
  for (int it = 0; it < p.tg.nt; ++it) {
    da.update(a.slice(it));
    db.update(b.slice(it));
    dc.update(c.slice(it));
  }
  CHECK(da.value() == db.value());
  CHECK(db.value() == dc.value());
  CHECK(a.field_hash() == p.field.hash());
}
