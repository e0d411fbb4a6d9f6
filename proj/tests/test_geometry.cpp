#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "exitflow/geometry.hpp"

using namespace exitflow;

TEST_CASE("ball signed distance, gradient, projection") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  CHECK(dom.dim() == 2);
  CHECK(dom.signed_distance({0.5, 0.0}) == doctest::Approx(-0.5));
  CHECK(dom.signed_distance({2.0, 0.0}) == doctest::Approx(1.0));
  CHECK(dom.signed_distance({0.6, 0.8}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dom.inside({0.2, 0.3}));
  CHECK_FALSE(dom.inside({1.2, 0.0}));

  const Vec g = dom.distance_gradient({0.5, 0.0});
  CHECK(g.x == doctest::Approx(1.0));
  CHECK(g.y == doctest::Approx(0.0));

  const Vec z = dom.project_to_boundary({0.3, 0.4});
  CHECK(z.x == doctest::Approx(0.6));
  CHECK(z.y == doctest::Approx(0.8));

  const Vec n = dom.outward_normal({0.0, 1.0}, 1e-9);
  CHECK(n.x == doctest::Approx(0.0));
  CHECK(n.y == doctest::Approx(1.0));

  CHECK(dom.max_depth() == doctest::Approx(1.0));
  CHECK(dom.diameter() == doctest::Approx(2.0));
  CHECK(dom.kappa() == doctest::Approx(1.0));
  CHECK(dom.delta0() > 0.0);
  CHECK(dom.delta0() <= 1.0 + 1e-12);
}

TEST_CASE("ball off-center") {
  const SignedDomain dom = SignedDomain::ball({1.0, -2.0}, 0.5);
  CHECK(dom.signed_distance({1.0, -2.0}) == doctest::Approx(-0.5));
  CHECK(dom.signed_distance({1.5, -2.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dom.max_depth() == doctest::Approx(0.5));
  const Vec z = dom.project_to_boundary({1.2, -2.0});
  CHECK(z.x == doctest::Approx(1.5));
  CHECK(z.y == doctest::Approx(-2.0));
}

TEST_CASE("interval distance and normals") {
  const SignedDomain dom = SignedDomain::interval(0.0, 1.0);
  CHECK(dom.dim() == 1);
  CHECK(dom.signed_distance({0.3, 0.0}) == doctest::Approx(-0.3));
  CHECK(dom.signed_distance({0.8, 0.0}) == doctest::Approx(-0.2));
  CHECK(dom.signed_distance({1.2, 0.0}) == doctest::Approx(0.2));
  CHECK(dom.signed_distance({-0.1, 0.0}) == doctest::Approx(0.1));
  CHECK(dom.max_depth() == doctest::Approx(0.5));

  CHECK(dom.outward_normal({0.0, 0.0}, 1e-9).x == doctest::Approx(-1.0));
  CHECK(dom.outward_normal({1.0, 0.0}, 1e-9).x == doctest::Approx(1.0));
  CHECK_THROWS_AS(dom.outward_normal({0.5, 0.0}, 1e-9), NotOnBoundary);

  CHECK(dom.project_to_boundary({0.3, 0.0}).x == doctest::Approx(0.0));
  CHECK(dom.project_to_boundary({0.8, 0.0}).x == doctest::Approx(1.0));

  const auto samples = dom.sample_boundary(8);
  for (const Vec& s : samples)
    CHECK(std::abs(dom.signed_distance(s)) < 1e-12);
}

TEST_CASE("rounded rectangle distance") {
  const SignedDomain dom =
      SignedDomain::rounded_rectangle({0.0, 0.0}, {1.0, 0.5}, 0.1);
  CHECK(dom.signed_distance({0.0, 0.0}) == doctest::Approx(-0.5));
  CHECK(dom.signed_distance({1.0, 0.0}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(dom.signed_distance({1.1, 0.0}) == doctest::Approx(0.1));
  // Corner circle center (0.9, 0.4), radius 0.1.
  const double corner = std::hypot(0.05, 0.05) - 0.1;
  CHECK(dom.signed_distance({0.95, 0.45}) == doctest::Approx(corner));
  CHECK(dom.max_depth() == doctest::Approx(0.5));

  // |grad d| = 1 wherever the gradient exists.
  for (Vec p : {Vec{0.3, 0.2}, Vec{0.9, 0.0}, Vec{0.97, 0.47}, Vec{0.0, 0.45}})
    CHECK(norm(dom.distance_gradient(p)) == doctest::Approx(1.0).epsilon(1e-6));

  const auto samples = dom.sample_boundary(64);
  CHECK(samples.size() == 64);
  for (const Vec& s : samples)
    CHECK(std::abs(dom.signed_distance(s)) < 1e-9);
}

TEST_CASE("custom domain falls back to finite differences") {
  auto sdf = [](Vec p) { return std::hypot(p.x, p.y) - 0.8; };
  const SignedDomain dom = SignedDomain::custom(2, sdf, {-0.8, -0.8},
                                                {0.8, 0.8}, 1.25, 0.8, 2.0);
  CHECK(dom.signed_distance({0.4, 0.0}) == doctest::Approx(-0.4));
  const Vec g = dom.distance_gradient({0.4, 0.0});
  CHECK(g.x == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(g.y == doctest::Approx(0.0).epsilon(1e-5));
  const Vec z = dom.project_to_boundary({0.4, 0.0});
  CHECK(std::abs(dom.signed_distance(z)) < 1e-6);
}

TEST_CASE("projection is consistent with the distance") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-0.95, 0.95);
  for (int i = 0; i < 200; ++i) {
    const Vec p{u(rng), u(rng)};
    if (std::abs(dom.signed_distance(p)) > 0.9 * dom.delta0()) continue;
    const Vec z = dom.project_to_boundary(p);
    CHECK(std::abs(dom.signed_distance(z)) < 1e-10);
    CHECK(distance(p, z) ==
          doctest::Approx(std::abs(dom.signed_distance(p))).epsilon(1e-8));
    CHECK(norm(dom.distance_gradient(p)) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("projection outside the regular tube throws") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  CHECK_THROWS_AS(dom.project_to_boundary({5.0, 0.0}), OutsideTube);
}

TEST_CASE("zero cost") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const BoundaryCost g = BoundaryCost::zero();
  CHECK(g.is_zero());
  CHECK(g.value(dom, {1.0, 0.0}, 1e-9) == doctest::Approx(0.0));
  CHECK(g.lipschitz() == doctest::Approx(0.0));
  CHECK(norm(g.tangential_gradient(dom, {1.0, 0.0}, 1e-9)) ==
        doctest::Approx(0.0));
  g.validate(dom);
}

TEST_CASE("affine cost on the circle") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const BoundaryCost g = BoundaryCost::affine(0.5, {0.3, 0.0});
  CHECK_FALSE(g.is_zero());
  CHECK(g.value(dom, {1.0, 0.0}, 1e-9) == doctest::Approx(0.8));
  CHECK(g.value(dom, {-1.0, 0.0}, 1e-9) == doctest::Approx(0.2));
  CHECK(g.value(dom, {0.0, 1.0}, 1e-9) == doctest::Approx(0.5));
  CHECK(g.lipschitz() == doctest::Approx(0.3));
  CHECK_THROWS_AS(g.value(dom, {0.5, 0.0}, 1e-9), NotOnBoundary);

  // Tangential gradient: ambient slope minus its normal component.
  const Vec gt_top = g.tangential_gradient(dom, {0.0, 1.0}, 1e-9);
  CHECK(gt_top.x == doctest::Approx(0.3));
  CHECK(gt_top.y == doctest::Approx(0.0).epsilon(1e-12));
  const Vec gt_right = g.tangential_gradient(dom, {1.0, 0.0}, 1e-9);
  CHECK(norm(gt_right) == doctest::Approx(0.0).epsilon(1e-12));

  g.validate(dom);
  CHECK(g.semiconcavity(dom) >= 0.0);
}

TEST_CASE("negative boundary cost is rejected") {
  const SignedDomain dom = SignedDomain::ball({0.0, 0.0}, 1.0);
  const BoundaryCost g = BoundaryCost::affine(0.1, {0.5, 0.0});
  CHECK_THROWS(g.validate(dom));
}

TEST_CASE("cost steepness gate") {
  const BoundaryCost ok = BoundaryCost::affine(1.0, {0.4, 0.0});
  ensure_cost_compatible(ok, 2.0);                      // 0.8 < 1
  CHECK_THROWS_AS(ensure_cost_compatible(ok, 2.6), CostTooSteep);
  const BoundaryCost steep = BoundaryCost::affine(1.0, {1.2, 0.0});
  CHECK_THROWS_AS(ensure_cost_compatible(steep, 1.0), CostTooSteep);
}
