#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "exitflow/dynamics.hpp"
#include "test_support.hpp"

using namespace exitflow;
using namespace exitflow::testsupport;

TEST_CASE("speed laws") {
  const SpeedLaw c = SpeedLaw::constant(1.5);
  CHECK(c.value(0.0) == doctest::Approx(1.5));
  CHECK(c.value(10.0) == doctest::Approx(1.5));
  CHECK(c.derivative(3.0) == doctest::Approx(0.0));
  CHECK(c.is_constant());
  c.validate(1.0);

  const SpeedLaw r = SpeedLaw::reciprocal(1.0, 2.0);
  CHECK(r.value(0.0) == doctest::Approx(1.0));
  CHECK(r.value(0.5) == doctest::Approx(0.5));
  CHECK(r.derivative(0.5) == doctest::Approx(-0.5));
  CHECK(r.sup_abs_derivative(1.0) == doctest::Approx(2.0));
  CHECK_FALSE(r.is_constant());
  r.validate(1.0);

  CHECK_THROWS_AS(SpeedLaw::constant(0.0), ConfigInvalid);
  CHECK_THROWS_AS(SpeedLaw::reciprocal(1.0, -0.5), ConfigInvalid);
  CHECK(SpeedLaw::reciprocal(1.0, 0.0).is_constant());
}

TEST_CASE("averaging kernel shape") {
  const AveragingKernel chi = AveragingKernel::gaussian(0.2);
  CHECK(chi.support_radius() == doctest::Approx(0.5));
  CHECK(chi.value({0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(chi.value({0.5, 0.0}) == doctest::Approx(0.0));
  CHECK(chi.value({0.6, 0.0}) == doctest::Approx(0.0));
  // inside the untapered region the value is the exact Gaussian bell
  CHECK(chi.value({0.2, 0.0}) == doctest::Approx(std::exp(-0.5)));
  CHECK(chi.value({0.0, 0.2}) == doctest::Approx(std::exp(-0.5)));
  // radially non-increasing
  double prev = chi.value({0.0, 0.0});
  for (int i = 1; i <= 50; ++i) {
    const double cur = chi.value({0.5 * i / 50.0, 0.0});
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(chi.sup_value() == doctest::Approx(1.0));
  CHECK(chi.sup_gradient() > 0.0);
  CHECK(chi.sup_bound() >= chi.sup_gradient());

  const AveragingKernel wide = AveragingKernel::gaussian(0.2, 1.0);
  CHECK(wide.support_radius() == doctest::Approx(1.0));
}

TEST_CASE("interior cutoff ramp") {
  const InteriorCutoff ind = InteriorCutoff::indicator();
  CHECK(ind.is_indicator());
  CHECK(ind.alpha(-0.1) == doctest::Approx(1.0));
  CHECK(ind.alpha(0.0) == doctest::Approx(0.0));
  CHECK(ind.alpha(0.2) == doctest::Approx(0.0));
  CHECK(ind.alpha_prime(-0.1) == doctest::Approx(0.0));

  const InteriorCutoff ramp = InteriorCutoff::smoothstep(0.2);
  CHECK(ramp.delta() == doctest::Approx(0.2));
  CHECK(ramp.alpha(-0.3) == doctest::Approx(1.0));
  CHECK(ramp.alpha(-0.2) == doctest::Approx(1.0));
  CHECK(ramp.alpha(-0.1) == doctest::Approx(0.5));
  CHECK(ramp.alpha(0.0) == doctest::Approx(0.0));
  CHECK(ramp.alpha(0.1) == doctest::Approx(0.0));
  // midpoint slope 6 r (1-r) / delta at r = 1/2
  CHECK(ramp.alpha_prime(-0.1) == doctest::Approx(-7.5));
  // finite-difference agreement inside the ramp
  for (double s : {-0.15, -0.1, -0.05, -0.02}) {
    const double fd = (ramp.alpha(s + 1e-6) - ramp.alpha(s - 1e-6)) / 2e-6;
    CHECK(ramp.alpha_prime(s) == doctest::Approx(fd).epsilon(1e-5));
  }
  // flat at both ends: the ramp is C^1 up to the boundary
  CHECK(ramp.alpha_prime(-0.2) == doctest::Approx(0.0));
  CHECK(ramp.alpha_prime(0.0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(InteriorCutoff::smoothstep(0.0), ConfigInvalid);
}

TEST_CASE("interaction kernel crowd sum against a point mass") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const SpaceGrid sg = make_grid(2, -1.0, 1.0, 1.0 / 16.0);
  const InteractionKernel kernel(&dom, SpeedLaw::reciprocal(1.0, 1.0),
                                 AveragingKernel::gaussian(0.2),
                                 InteriorCutoff::indicator());

  // one cell holding all the mass at a deep interior node
  std::vector<double> rho(sg.size(), 0.0);
  const int i0 = sg.nearest({0.25, -0.125});
  const Vec y0 = sg.node(i0);
  rho[i0] = 1.0 / sg.cell_volume();

  for (Vec x : {Vec{0.25, -0.125}, Vec{0.3, 0.0}, Vec{0.1, -0.2}, Vec{0.8, 0.0}}) {
    const double expected = kernel.chi().value(x - y0);
    CHECK(kernel.local_crowd(rho, sg, x) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(kernel.local_speed(rho, sg, x) ==
          doctest::Approx(1.0 / (1.0 + expected)).epsilon(1e-12));
  }

  // cutoff discounts mass sitting outside the domain
  std::vector<double> rho_out(sg.size(), 0.0);
  rho_out[sg.nearest({1.05, 0.0})] = 1.0 / sg.cell_volume();
  CHECK(kernel.local_crowd(rho_out, sg, {0.9, 0.0}) == doctest::Approx(0.0));

  CHECK_THROWS_AS(
      [&] {
        std::vector<double> bad(sg.size(), 0.0);
        bad[i0] = -1.0;
        return kernel.local_crowd(bad, sg, y0);
      }(),
      NegativeDensity);
}

TEST_CASE("kernel certified bounds") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const InteractionKernel kernel(&dom, SpeedLaw::reciprocal(1.0, 0.6),
                                 AveragingKernel::gaussian(0.2),
                                 InteriorCutoff::smoothstep(0.16));
  CHECK(kernel.certified_k_max() == doctest::Approx(1.0));
  CHECK(kernel.certified_k_min() == doctest::Approx(1.0 / 1.6));
  CHECK(kernel.certified_dt_drop() == doctest::Approx(0.6 * kernel.chi().sup_bound()));

  // ramp wider than the regular tube is rejected
  CHECK_THROWS_AS(InteractionKernel(&dom, SpeedLaw::reciprocal(1.0, 0.6),
                                    AveragingKernel::gaussian(0.2),
                                    InteriorCutoff::smoothstep(1.5)),
                  DeltaTooLarge);
}

TEST_CASE("profile field tabulation and constants") {
  const TimeProfile z = TimeProfile::affine(1.0, 0.5, 0.25);
  const SpaceGrid sg = make_grid(1, 0.0, 1.0, 1.0 / 16.0);
  const TimeGrid tg = make_time_grid(2.0, 1.0 / 64.0);
  const SpeedField f = SpeedField::from_profile(z, tg, sg);

  for (int it : {0, 5, tg.nt - 1})
    for (int i : {0, sg.size() / 2, sg.size() - 1})
      CHECK(f.at(it, i) == doctest::Approx(z.value(tg.time(it))));

  CHECK(f.constants().k_min == doctest::Approx(1.0));
  CHECK(f.constants().k_max == doctest::Approx(z.value(tg.t_end())));
  CHECK(f.constants().lip_x == doctest::Approx(0.0));
  CHECK(f.constants().dt_drop == doctest::Approx(0.0));
  CHECK_FALSE(f.time_constant());
  CHECK(f.freeze_index() == tg.nt - 1);  // keeps growing on the whole window

  const SpeedField fc = SpeedField::from_profile(TimeProfile::constant(2.0), tg, sg);
  CHECK(fc.time_constant());
  CHECK(fc.freeze_index() == 0);

  // a profile that settles mid-window freezes at the contact time
  const SpeedField fd =
      SpeedField::from_profile(TimeProfile::affine(1.5, -0.25, 1.25), tg, sg);
  CHECK(fd.freeze_index() > 0);
  CHECK(fd.freeze_index() < tg.nt - 1);
  const int fs = fd.freeze_index();
  CHECK(std::abs(tg.time(fs) - 1.0) <= tg.dt + 1e-12);
  CHECK(fd.at(fs, 0) == doctest::Approx(fd.at(tg.nt - 1, 0)));
}

TEST_CASE("closure field interpolation") {
  const SpaceGrid sg = make_grid(2, -1.0, 1.0, 1.0 / 32.0);
  const TimeGrid tg = make_time_grid(0.5, 1.0 / 64.0);
  auto k = [](double t, Vec x) { return 1.0 + 0.25 * std::sin(x.x + 0.5 * t) + 0.1 * x.y; };
  const SpeedField f = SpeedField::from_closure(k, tg, sg);

  for (Vec x : {Vec{0.13, -0.41}, Vec{-0.77, 0.29}})
    for (double t : {0.03, 0.21, 0.44})
      CHECK(f.value(t, x) == doctest::Approx(k(t, x)).epsilon(1e-3));

  // central-difference gradient approximates the analytic one
  const Vec g = f.gradient(0.2, {0.1, -0.3});
  CHECK(g.x == doctest::Approx(0.25 * std::cos(0.1 + 0.1)).epsilon(2e-3));
  CHECK(g.y == doctest::Approx(0.1).epsilon(2e-3));

  const FieldConstants fc = f.measure_constants(nullptr);
  CHECK(fc.k_min > 0.5);
  CHECK(fc.k_max < 1.5);
  CHECK(fc.lip_x > 0.0);

  CHECK_THROWS_AS(
      SpeedField::from_closure([](double, Vec) { return -1.0; }, tg, sg),
      ConfigInvalid);
}

TEST_CASE("kernel field matches the direct convolution") {
  const SignedDomain dom = SignedDomain::interval(0.0, 1.0);
  const SpaceGrid sg = make_grid(1, 0.0, 1.0, 1.0 / 32.0);
  const TimeGrid tg = make_time_grid(0.25, 1.0 / 64.0);
  const InteractionKernel kernel(&dom, SpeedLaw::reciprocal(1.0, 0.8),
                                 AveragingKernel::gaussian(0.1),
                                 InteriorCutoff::indicator());

  // density path: a moving bump, normalized per slice
  DensityPath path = DensityPath::zeros(tg, sg);
  for (int it = 0; it < tg.nt; ++it) {
    const int c = sg.nearest({0.3 + 0.5 * tg.time(it), 0.0});
    path.at(it, c) = 1.0 / sg.cell_volume();
  }

  const SpeedField f = SpeedField::from_kernel_and_path(kernel, path, 1, 1, 2);
  for (int it : {0, tg.nt / 2, tg.nt - 1})
    for (int i = 0; i < sg.size(); i += 5)
      CHECK(f.at(it, i) ==
            doctest::Approx(kernel.local_speed(path.slice(it), sg, sg.node(i)))
                .epsilon(1e-12));

  // strided tabulation stays within interpolation distance
  const SpeedField fs = SpeedField::from_kernel_and_path(kernel, path, 2, 2, 2);
  double worst = 0.0;
  for (int it = 0; it < tg.nt; ++it)
    for (int i = 0; i < sg.size(); ++i)
      worst = std::max(worst, std::abs(fs.at(it, i) - f.at(it, i)));
  CHECK(worst < 0.05);

  // empty crowd gives the free-flow speed everywhere
  const DensityPath empty = DensityPath::zeros(tg, sg);
  const SpeedField f0 = SpeedField::from_kernel_and_path(kernel, empty, 1, 1, 1);
  CHECK(f0.at(0, sg.size() / 2) == doctest::Approx(1.0));
}

TEST_CASE("field hash is deterministic") {
  const SpaceGrid sg = make_grid(1, 0.0, 1.0, 1.0 / 16.0);
  const TimeGrid tg = make_time_grid(0.5, 1.0 / 32.0);
  const TimeProfile z = TimeProfile::affine(1.0, 0.5, 0.25);
  const SpeedField a = SpeedField::from_profile(z, tg, sg);
  const SpeedField b = SpeedField::from_profile(z, tg, sg);
  CHECK(a.hash() == b.hash());
  const SpeedField c = SpeedField::from_profile(TimeProfile::constant(1.0), tg, sg);
  CHECK(a.hash() != c.hash());
}
