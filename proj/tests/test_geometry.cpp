#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "hnmpc/geometry.hpp"

using namespace hnmpc;
using Eigen::Vector2d;

namespace {

Superellipsoid disk(Vector2d c, double r = 1.0) { return {c, 0.0, {r, r}, 2.0}; }

Superellipsoid random_shape(std::mt19937_64& rng, double p) {
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> scale(0.2, 3.0);
  return {{pos(rng), pos(rng)}, ang(rng), {scale(rng), scale(rng)}, p};
}

}  // namespace

TEST(DualExponent, ConjugatePairs) {
  EXPECT_DOUBLE_EQ(dual_exponent(2.0), 2.0);
  EXPECT_DOUBLE_EQ(dual_exponent(3.0), 1.5);
  EXPECT_NEAR(dual_exponent(4.0), 4.0 / 3.0, 1e-15);
  for (double p : {2.0, 2.5, 3.0, 7.0}) {
    EXPECT_NEAR(1.0 / p + 1.0 / dual_exponent(p), 1.0, 1e-15);
  }
}

TEST(DualExponent, RejectsBelowTwo) {
  EXPECT_THROW(dual_exponent(1.5), std::invalid_argument);
  EXPECT_THROW(Superellipsoid({0, 0}, 0, {1, 1}, 1.9), std::invalid_argument);
}

TEST(Superellipsoid, RejectsBadShape) {
  EXPECT_THROW(Superellipsoid({0, 0}, 0, {0, 1}, 2), std::invalid_argument);
  EXPECT_THROW(Superellipsoid({0, 0}, 0, {1, -1}, 2), std::invalid_argument);
  EXPECT_THROW(Superellipsoid({NAN, 0}, 0, {1, 1}, 2), std::invalid_argument);
}

TEST(Superellipsoid, HeadingWrapped) {
  const Superellipsoid s({0, 0}, 3.0 * std::numbers::pi / 2.0, {1, 2}, 3);
  EXPECT_NEAR(s.heading(), -std::numbers::pi / 2.0, 1e-12);
  EXPECT_NEAR(s.rotation_matrix().determinant(), 1.0, 1e-12);
}

TEST(Contains, Examples) {
  const auto unit = disk({0, 0});
  EXPECT_TRUE(contains(unit, {0, 0}));
  EXPECT_FALSE(contains(unit, {1.001, 0}));
  const Superellipsoid s({0, 0}, 0.0, {2, 1}, 3);
  EXPECT_TRUE(contains(s, {2, 0}));
  EXPECT_FALSE(contains(s, {2.01, 0}));
}

TEST(Contains, InvariantUnderRigidMotion) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_shape(rng, 3.0);
    const Vector2d x(u(rng), u(rng));
    const double turn = u(rng);
    const Vector2d shift(u(rng), u(rng));
    const Eigen::Matrix2d r = rotation(turn);
    const Superellipsoid moved(r * s.center() + shift, s.heading() + turn, s.semi_axes(),
                               s.exponent());
    EXPECT_EQ(contains(s, x), contains(moved, r * x + shift));
  }
}

TEST(Support, Examples) {
  EXPECT_DOUBLE_EQ(support(disk({0, 0}), {1, 0}), 1.0);
  // Sampled-boundary maxima from the numpy oracle (tests/oracles).
  const Superellipsoid ellipse({1, 1}, std::numbers::pi / 2.0, {2, 1}, 2);
  EXPECT_NEAR(support(ellipse, {0, 1}), 3.0, 1e-9);
  const Superellipsoid cube({0, 0}, 0.0, {1, 1}, 3);
  EXPECT_NEAR(support(cube, {1, 1}), 1.5874010519681994, 1e-9);
  EXPECT_NEAR(support(cube, {1, 1}), std::pow(2.0, 2.0 / 3.0), 1e-12);
}

TEST(Support, DiskClosedForm) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double r = 0.1 + std::abs(u(rng));
    const Superellipsoid d({u(rng), u(rng)}, u(rng), {r, r}, 2.0);
    const Vector2d a(u(rng), u(rng));
    EXPECT_NEAR(support(d, a), r * a.norm() + a.dot(d.center()), 1e-12);
  }
}

TEST(Support, PositivelyHomogeneous) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> lam(0.01, 50.0);
  for (double p : {2.0, 3.0, 4.0}) {
    for (int i = 0; i < 100; ++i) {
      const auto s = random_shape(rng, p);
      const Vector2d a(u(rng), u(rng));
      const double l = lam(rng);
      EXPECT_NEAR(support(s, l * a), l * support(s, a), 1e-9 * (1.0 + l * a.norm() * 10));
    }
  }
}

TEST(Support, BoundsSampledBoundary) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  for (double p : {2.0, 3.0, 4.0}) {
    for (int i = 0; i < 20; ++i) {
      const auto s = random_shape(rng, p);
      const double phi = ang(rng);
      const Vector2d a(std::cos(phi), std::sin(phi));
      double best = -INFINITY;
      for (const auto& x : sample_boundary(s, 20000)) best = std::max(best, a.dot(x));
      const double h = support(s, a);
      EXPECT_GE(h + 1e-12, best);
      EXPECT_LE(h - best, 1e-3 * std::max(1.0, std::abs(h)));
    }
  }
}

TEST(SeparationMargin, Disks) {
  const auto v = disk({0, 0});
  const auto e = disk({3, 0});
  EXPECT_NEAR(separation_margin(v, e, SeparatingAxis(Vector2d(1, 0))), -1.0, 1e-15);
  EXPECT_NEAR(separation_margin(v, e, SeparatingAxis(Vector2d(0, 1))), 2.0, 1e-15);
}

TEST(SeparationMargin, RejectsMixedExponent) {
  const Superellipsoid v({0, 0}, 0, {1, 1}, 3);
  const Superellipsoid e({5, 0}, 0, {1, 1}, 4);
  EXPECT_THROW(separation_margin(v, e, SeparatingAxis(Vector2d(1, 0))),
               std::invalid_argument);
}

TEST(SeparationMargin, VehicleAgainstSouthObstacle) {
  const Superellipsoid vehicle({-15, 0.8}, 0.0, {2.0, 1.1}, 3);
  const Superellipsoid south({-11, 3}, -0.79, {2, 1}, 3);
  const auto sweep = best_axis(vehicle, south, 1e-3);
  // Angle sweep over sampled boundaries in the numpy oracle: -1.614552 at
  // phi 0.755232.
  EXPECT_NEAR(sweep.margin, -1.614552, 1e-5);
  EXPECT_NEAR(std::atan2(sweep.axis.vector().y(), sweep.axis.vector().x()), 0.755232, 1e-3);
  EXPECT_TRUE(find_separating_axis(vehicle, south, 1e-3).has_value());
}

TEST(FindSeparatingAxis, Examples) {
  const auto a = find_separating_axis(disk({0, 0}), disk({3, 0}), 1e-3);
  ASSERT_TRUE(a.has_value());
  EXPECT_NEAR(a->vector().x(), 1.0, 1e-9);
  EXPECT_NEAR(a->vector().y(), 0.0, 1e-5);
  EXPECT_NEAR(separation_margin(disk({0, 0}), disk({3, 0}), *a), -1.0, 1e-9);

  EXPECT_FALSE(find_separating_axis(disk({0, 0}), disk({0, 0}), 1e-3).has_value());
  EXPECT_THROW(find_separating_axis(disk({0, 0}), disk({3, 0}), 0.02), std::invalid_argument);
  EXPECT_THROW(find_separating_axis(disk({0, 0}), disk({3, 0}), 0.0), std::invalid_argument);
}

TEST(FindSeparatingAxis, NearTangentPairBeatsGrid) {
  const Superellipsoid v({0, 0}, 0.3, {2.0, 1.1}, 3);
  const Superellipsoid e({3.3, 1.2}, -0.5, {1.0, 0.8}, 3);
  const auto a = find_separating_axis(v, e, 1e-3);
  ASSERT_TRUE(a.has_value());
  const double m = separation_margin(v, e, *a);
  EXPECT_LT(m, 0.0);
  for (int i = 0; i < 20000; ++i) {
    const double phi = 2.0 * std::numbers::pi * i / 20000.0;
    EXPECT_LE(m, separation_margin(v, e, SeparatingAxis::from_angle(phi)) + 1e-12);
  }
}

TEST(IntersectsOracle, Examples) {
  EXPECT_TRUE(intersects_oracle(disk({0, 0}), disk({0, 0})));
  EXPECT_FALSE(intersects_oracle(disk({0, 0}), disk({3, 0})));
  EXPECT_TRUE(intersects_oracle(disk({0, 0}), disk({2, 0})));
  EXPECT_TRUE(intersects_oracle(disk({0, 0}), disk({2, 0}), 100000));
  EXPECT_THROW(intersects_oracle(disk({0, 0}), disk({3, 0}), 9999), std::invalid_argument);
}

TEST(IntersectsOracle, OverlappingWithoutContainedCentres) {
  const Superellipsoid a({0, 0}, 0, {3, 0.5}, 3);
  const Superellipsoid b({0, 0}, std::numbers::pi / 2, {3, 0.5}, 3);
  EXPECT_TRUE(intersects_oracle(a, b));
}

TEST(Separation, CertificateImpliesOracleDisjoint) {
  std::mt19937_64 rng(17);
  const double ps[] = {2.0, 3.0, 4.0};
  int certified = 0;
  for (int i = 0; i < 200; ++i) {
    const double p = ps[i % 3];
    const auto v = random_shape(rng, p);
    const auto e = random_shape(rng, p);
    if (const auto axis = find_separating_axis(v, e, 5e-3)) {
      ++certified;
      EXPECT_FALSE(intersects_oracle(v, e)) << "pair " << i;
    }
  }
  EXPECT_GT(certified, 20);
}

TEST(SampleBoundary, PointsOnBoundary) {
  std::mt19937_64 rng(19);
  for (double p : {2.0, 3.0, 4.0}) {
    const auto s = random_shape(rng, p);
    for (const auto& x : sample_boundary(s, 1000)) {
      const Vector2d local = s.rotation_matrix().transpose() * (x - s.center());
      EXPECT_NEAR(pnorm(local.cwiseQuotient(s.semi_axes()), p), 1.0, 1e-12);
    }
  }
}
