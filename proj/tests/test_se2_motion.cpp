#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sketchloc/se2.hpp"

using namespace sketchloc;

namespace {

constexpr double pi = std::numbers::pi;

void expect_pose_near(const Pose2D& a, const Pose2D& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(normalize_angle(a.theta - b.theta), 0.0, tol);
}

Pose2D random_pose(Rng& rng) {
  std::uniform_real_distribution<double> p(-50.0, 50.0), t(-pi, pi);
  return {p(rng), p(rng), t(rng)};
}

}  // namespace

TEST(Angle, NormalizeRange) {
  for (double a : {-10.0, -pi, -pi - 1e-12, 0.0, pi, pi - 1e-12, 3 * pi, 100.0}) {
    const double n = normalize_angle(a);
    EXPECT_GE(n, -pi);
    EXPECT_LT(n, pi);
    EXPECT_NEAR(std::cos(n), std::cos(a), 1e-9);
    EXPECT_NEAR(std::sin(n), std::sin(a), 1e-9);
  }
  EXPECT_EQ(normalize_angle(pi), -pi);
}

TEST(Compose, Identity) { expect_pose_near(compose({0, 0, 0}, {1, 2, 0.3}), {1, 2, 0.3}, 0.0); }

TEST(Compose, QuarterTurn) { expect_pose_near(compose({0, 0, pi / 2}, {1, 0, 0}), {0, 1, pi / 2}, 1e-12); }

TEST(Compose, InverseUndoes) {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Pose2D a = random_pose(rng), b = random_pose(rng);
    expect_pose_near(compose(compose(a, b), inverse(b)), a, 1e-9);
    expect_pose_near(between(a, compose(a, b)), b, 1e-9);
  }
}

TEST(Compose, Associative) {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Pose2D a = random_pose(rng), b = random_pose(rng), c = random_pose(rng);
    expect_pose_near(compose(compose(a, b), c), compose(a, compose(b, c)), 1e-9);
  }
}

TEST(Compose, ThetaAlwaysWrapped) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const Pose2D p = compose(random_pose(rng), random_pose(rng));
    EXPECT_GE(p.theta, -pi);
    EXPECT_LT(p.theta, pi);
  }
}

TEST(Noise, ZeroParamsGiveZero) {
  Rng rng(4);
  const Pose2D e = sample_noise(MotionNoiseParams::zero(), rng);
  EXPECT_EQ(e, (Pose2D{0, 0, 0}));
}

TEST(Noise, CovarianceMatchesSigmaQ) {
  MotionNoiseParams p;  // defaults: 0.1 I, 0.05 rad
  Rng rng(5);
  const int n = 10000;
  double sxx = 0, syy = 0, sxy = 0, mx = 0, my = 0;
  std::vector<Pose2D> v(n);
  for (auto& e : v) {
    e = sample_noise(p, rng);
    mx += e.x;
    my += e.y;
  }
  mx /= n;
  my /= n;
  for (const auto& e : v) {
    sxx += (e.x - mx) * (e.x - mx);
    syy += (e.y - my) * (e.y - my);
    sxy += (e.x - mx) * (e.y - my);
  }
  EXPECT_NEAR(sxx / (n - 1), 0.1, 0.01);
  EXPECT_NEAR(syy / (n - 1), 0.1, 0.01);
  EXPECT_NEAR(sxy / (n - 1), 0.0, 0.01);
}

TEST(Noise, CorrelatedCovariance) {
  MotionNoiseParams p;
  p.sigma_q = {0.2, 0.05, 0.05, 0.1};
  Rng rng(6);
  const int n = 20000;
  double sxx = 0, syy = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const auto e = sample_noise(p, rng);
    sxx += e.x * e.x;
    syy += e.y * e.y;
    sxy += e.x * e.y;
  }
  EXPECT_NEAR(sxx / n, 0.2, 0.02);
  EXPECT_NEAR(syy / n, 0.1, 0.01);
  EXPECT_NEAR(sxy / n, 0.05, 0.01);
}

TEST(Noise, WrappedNormalCircularStd) {
  MotionNoiseParams p;
  Rng rng(7);
  double c = 0, s = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double t = sample_noise(p, rng).theta;
    ASSERT_GE(t, -pi);
    ASSERT_LT(t, pi);
    c += std::cos(t);
    s += std::sin(t);
  }
  const double r = std::hypot(c, s) / n;
  EXPECT_NEAR(std::sqrt(-2.0 * std::log(r)), 0.05, 0.005);
}

TEST(Noise, WideWrappedNormalStaysInRange) {
  MotionNoiseParams p;
  p.sigma_theta = 3.0;
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const double t = sample_noise(p, rng).theta;
    EXPECT_GE(t, -pi);
    EXPECT_LT(t, pi);
  }
}

TEST(Propagate, UnitScaleIdentity) {
  Rng rng(9);
  expect_pose_near(propagate({0, 0, 0}, 1.0, {2, 0, 0}, MotionNoiseParams::zero(), rng), {2, 0, 0}, 0.0);
}

TEST(Propagate, PureScaling) {
  Rng rng(10);
  expect_pose_near(propagate({0, 0, 0}, 0.1, {2, 0, 0.5}, MotionNoiseParams::zero(), rng), {20, 0, 0.5}, 1e-12);
}

TEST(Propagate, HandComposed) {
  Rng rng(11);
  expect_pose_near(propagate({10, 10, pi / 2}, 0.05, {1, 0, 0}, MotionNoiseParams::zero(), rng), {10, 30, pi / 2},
                   1e-9);
}

TEST(Propagate, UnitScaleIsPlainOdometry) {
  Rng rng(12);
  for (int i = 0; i < 100; ++i) {
    const Pose2D x = random_pose(rng);
    const OdomIncrement u{0.3, -0.2, 0.4};
    expect_pose_near(propagate(x, 1.0, u, MotionNoiseParams::zero(), rng), compose(x, u.as_pose()), 1e-12);
  }
}

TEST(Propagate, RejectsNonFinite) {
  Rng rng(13);
  EXPECT_THROW(propagate({}, 1.0, {std::nan(""), 0, 0}, MotionNoiseParams::zero(), rng), ValidationError);
  EXPECT_THROW(propagate({}, 1.0, {0, 0, 4.0}, MotionNoiseParams::zero(), rng), ValidationError);
}

TEST(Propagate, CovarianceScalesWithInverseSquare) {
  for (double s : {0.05, 0.1, 1.0}) {
    MotionNoiseParams p;
    Rng rng(14);
    const int n = 10000;
    double sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
      const Pose2D q = propagate({0, 0, 0}, s, {}, p, rng);
      sxx += q.x * q.x;
      syy += q.y * q.y;
    }
    const double expect = 0.1 / (s * s);
    EXPECT_NEAR(sxx / n / expect, 1.0, 0.15) << "s=" << s;
    EXPECT_NEAR(syy / n / expect, 1.0, 0.15) << "s=" << s;
  }
}

TEST(Scale, FrozenWhenSigmaZero) {
  Rng rng(15);
  EXPECT_EQ(sample_scale(0.37, 0.0, 0.001, 10.0, rng), 0.37);
}

TEST(Scale, OneStepMoments) {
  Rng rng(16);
  const int n = 10000;
  double m = 0, v = 0;
  std::vector<double> xs(n);
  for (auto& x : xs) {
    x = sample_scale(0.5, 0.1, -100.0, 100.0, rng);
    m += x;
  }
  m /= n;
  for (double x : xs) v += (x - m) * (x - m);
  EXPECT_NEAR(m, 0.5, 0.01);
  EXPECT_NEAR(std::sqrt(v / (n - 1)), 0.1, 0.01);
}

TEST(Scale, ClampBoundary) {
  EXPECT_EQ(step_scale(0.001, -5.0, 0.001, 10.0), 0.001);
  EXPECT_EQ(step_scale(9.9, 5.0, 0.001, 10.0), 10.0);
}

TEST(Scale, MartingaleWithWideClamps) {
  Rng rng(17);
  const int n = 10000, steps = 20;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    double s = 1.0;
    for (int k = 0; k < steps; ++k) s = sample_scale(s, 0.1, -1e6, 1e6, rng);
    sum += s;
    sum2 += s * s;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_LT(std::abs(mean - 1.0), 3.0 * se);
}

TEST(MotionParams, Validation) {
  MotionNoiseParams p;
  EXPECT_NO_THROW(p.validate());
  p.sigma_q = {0.1, 0.2, 0.2, 0.1};  // not PSD
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.sigma_q = {0.1, 0.01, 0.0, 0.1};  // not symmetric
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.s_min = 2.0;
  p.s_max = 1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = {};
  p.sigma_s = -1.0;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(MotionParams, DefaultsAreTheDocumentedValues) {
  const MotionNoiseParams p;
  EXPECT_EQ(p.sigma_q[0], 0.1);
  EXPECT_EQ(p.sigma_q[3], 0.1);
  EXPECT_EQ(p.sigma_theta, 0.05);
  EXPECT_EQ(p.sigma_s, 0.1);
  EXPECT_EQ(p.s_min, 0.001);
  EXPECT_EQ(p.s_max, 10.0);
}
