#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "sketchloc/beam_model.hpp"
#include "sketchloc/sensor_log.hpp"
#include "sketchloc/sim2d.hpp"

using namespace sketchloc;

namespace {

BeamModelParams weights_only(double hit, double dyn, double max, double rnd) {
  BeamModelParams p;
  p.w_hit = hit;
  p.w_dyn = dyn;
  p.w_max = max;
  p.w_rnd = rnd;
  return p;
}

double quadrature(const BeamModelParams& p, double z_hat) {
  const auto f = [&](double z) { return beam_density(z, z_hat, p); };
  std::vector<double> cuts{0.0, z_hat, p.z_max - p.delta, p.z_max, p.z_max + p.delta};
  for (double k : {-8.0, -3.0, -1.0, 1.0, 3.0, 8.0}) {
    const double c = z_hat + k * p.sigma_z;
    if (c > 0.0 && c < p.z_max + p.delta) cuts.push_back(c);
  }
  return oracle::integrate_pieces(f, cuts, 400);
}

// Closed walls around a 40 x 30 interior so every beam hits something.
SketchMap box_map() {
  auto m = SketchMap::empty(50, 40);
  for (int x = 5; x <= 45; ++x) {
    m.set(x, 5, Cell::Occupied);
    m.set(x, 35, Cell::Occupied);
  }
  for (int y = 5; y <= 35; ++y) {
    m.set(5, y, Cell::Occupied);
    m.set(45, y, Cell::Occupied);
  }
  m.set(20, 20, Cell::Occupied);
  return m;
}

RangeScan full_scan(const std::vector<double>& ranges, double fov) {
  RangeScan s;
  s.ranges = ranges;
  s.angles = beam_angles(ranges.size(), fov);
  return s;
}

}  // namespace

TEST(BeamDensity, PureUniformComponent) {
  const auto p = weights_only(0, 0, 1, 0);
  for (double z : {0.0, 0.5, 7.0, 19.99, 20.0}) EXPECT_DOUBLE_EQ(beam_density(z, 5.0, p), 1.0 / 20.0);
  EXPECT_EQ(beam_density(20.5, 5.0, p), 0.0);
}

TEST(BeamDensity, TruncatedExponentialSupportEndsAtExpected) {
  auto p = weights_only(0, 1, 0, 0);
  p.lambda = 0.1;
  EXPECT_EQ(beam_density(12.0, 10.0, p), 0.0);
  EXPECT_GT(beam_density(9.0, 10.0, p), 0.0);
  // z_hat = 0: no support at all, never NaN.
  EXPECT_EQ(beam_density(0.0, 0.0, p), 0.0);
}

TEST(BeamDensity, TruncatedExponentialClosedForm) {
  const double lambda = 0.3, a = 7.0, z = 2.0;
  EXPECT_NEAR(density::truncated_exponential(z, lambda, a),
              lambda * std::exp(-lambda * z) / (1.0 - std::exp(-lambda * a)), 1e-15);
}

TEST(BeamDensity, DefaultParamsIntegrateToOne) {
  BeamModelParams p;
  for (double z_hat : {0.5, 3.0, 10.0, 19.5, 20.0}) {
    EXPECT_NEAR(quadrature(p, z_hat), 1.0, 0.02) << "z_hat=" << z_hat;
  }
}

TEST(BeamDensity, RandomParamsIntegrateToOne) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    BeamModelParams p = weights_only(u(rng) + 0.01, u(rng), u(rng), u(rng));
    p.normalize_weights();
    p.z_max = 5.0 + 30.0 * u(rng);
    p.sigma_z = 0.02 + 0.5 * u(rng);
    p.lambda = 0.01 + 2.0 * u(rng);
    p.delta = 0.001 + 0.2 * u(rng);
    p.validate();
    const double z_hat = (0.1 + 0.8 * u(rng)) * p.z_max;
    EXPECT_NEAR(quadrature(p, z_hat), 1.0, 0.02);
  }
}

TEST(BeamDensity, WeightsAreNormalizedByDefault) {
  BeamModelParams p;
  EXPECT_NEAR(p.weight_sum(), 1.0, 1e-12);
  EXPECT_NEAR(p.w_dyn, 0.5 / 1.205, 1e-12);
  EXPECT_EQ(p.beams_per_scan, 10);
}

TEST(BeamParams, Validation) {
  BeamModelParams p;
  EXPECT_NO_THROW(p.validate());
  auto q = p;
  q.w_hit += 0.1;
  EXPECT_THROW(q.validate(), ValidationError);
  q = p;
  q.sigma_z = 0.0;
  EXPECT_THROW(q.validate(), ValidationError);
  q = p;
  q.delta = 25.0;
  EXPECT_THROW(q.validate(), ValidationError);
  q = p;
  q.beams_per_scan = 0;
  EXPECT_THROW(q.validate(), ValidationError);
  q = weights_only(0, 0, 0, 0);
  EXPECT_THROW(q.normalize_weights(), ValidationError);
  q = weights_only(-1, 1, 1, 1);
  EXPECT_THROW(q.normalize_weights(), ValidationError);
}

TEST(BeamParams, PixelUnits) {
  BeamModelParams p;
  const auto px = p.in_pixel_units(0.05);
  EXPECT_DOUBLE_EQ(px.sigma_z, 2.0);
  EXPECT_DOUBLE_EQ(px.z_max, 400.0);
  EXPECT_DOUBLE_EQ(px.delta, 0.2);
  EXPECT_DOUBLE_EQ(px.lambda, 0.005);
  EXPECT_EQ(px.w_hit, p.w_hit);
}

TEST(ScaledDensity, JacobianMakesItAMetricDensity) {
  BeamModelParams p;
  for (double s : {0.02, 0.1, 1.0}) {
    const auto px = p.in_pixel_units(s);
    const double z_hat_px = 6.0 / s;
    LikelihoodOptions o;
    const auto f = [&](double z) { return std::exp(scaled_beam_log_density(z, z_hat_px, s, px, o)); };
    const double total =
        oracle::integrate_pieces(f, {0.0, 5.0, 5.5, 6.0, 6.5, 7.0, p.z_max - p.delta, p.z_max, p.z_max + p.delta}, 400);
    EXPECT_NEAR(total, 1.0, 0.02) << "s=" << s;
  }
}

TEST(ScanLikelihood, HomogeneousMaxRangeBeams) {
  const auto map = SketchMap::empty(100, 100);
  BeamModelParams p;
  LikelihoodOptions o;
  o.scale_jacobian = false;
  const auto scan = full_scan(std::vector<double>(360, p.z_max), 2 * std::numbers::pi);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(1.0, 99.0), th(-3.0, 3.0), sc(0.05, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double s = sc(rng);
    const auto px = p.in_pixel_units(s);
    const double expect = p.beams_per_scan * std::log(beam_density(p.z_max / s, p.z_max / s, px));
    EXPECT_NEAR(scan_log_likelihood(scan, {pos(rng), pos(rng), th(rng)}, s, map, p, o), expect, 1e-9);
  }
}

TEST(ScanLikelihood, TruePoseBeatsPerturbedPose) {
  const auto map = box_map();
  const WorldMap world{map, 1.0, 0.0, 0.0};
  SensorSpec sensor;
  sensor.beams = 360;
  sensor.fov = 2 * std::numbers::pi;
  BeamModelParams p;
  p.beams_per_scan = 36;
  std::mt19937_64 rng(1);
  for (const Pose2D truth : {Pose2D{12.3, 14.1, 0.2}, Pose2D{30.5, 25.5, -1.0}, Pose2D{38.0, 10.0, 2.5}}) {
    const auto scan = full_scan(simulate_scan(world, truth, sensor, 0.0, rng), sensor.fov);
    const double at = scan_log_likelihood(scan, truth, 1.0, map, p);
    const double d = 5.0 * p.sigma_z;
    for (const Pose2D off : {Pose2D{d, 0, 0}, Pose2D{-d, 0, 0}, Pose2D{0, d, 0}, Pose2D{0, -d, 0}}) {
      const Pose2D moved{truth.x + off.x, truth.y + off.y, truth.theta};
      EXPECT_GE(at, scan_log_likelihood(scan, moved, 1.0, map, p));
    }
    // Each beam sits on the hit peak, so the total is the sum of peak densities.
    LikelihoodOptions o;
    double peak = 0.0;
    const auto sub = SubsampledScan::from(scan, p.beams_per_scan);
    for (std::size_t i = 0; i < sub.ranges.size(); ++i) {
      const double z_hat = raycast(map, truth.x, truth.y, truth.theta + sub.angles[i], p.z_max);
      peak += scaled_beam_log_density(z_hat, z_hat, 1.0, p, o);
    }
    EXPECT_NEAR(at, peak, 1e-9);
  }
}

TEST(ScanLikelihood, IssuesExactlyBeamsPerScanRaycasts) {
  const auto map = box_map();
  BeamModelParams p;
  const auto scan = full_scan(std::vector<double>(360, 3.0), 2 * std::numbers::pi);
  int calls = 0;
  const auto counting = [&](const SketchMap& m, double x, double y, double a, double r) {
    ++calls;
    return raycast(m, x, y, a, r);
  };
  scan_log_likelihood(scan, {20.0, 15.0, 0.0}, 0.1, map, p, {}, counting);
  EXPECT_EQ(calls, 10);
}

TEST(ScanLikelihood, OutOfMapUsesFloorWithoutRaycasting) {
  const auto map = box_map();
  BeamModelParams p;
  LikelihoodOptions o;
  o.out_of_map_log_likelihood = -777.0;
  const auto scan = full_scan(std::vector<double>(10, 3.0), std::numbers::pi);
  int calls = 0;
  const auto counting = [&](const SketchMap& m, double x, double y, double a, double r) {
    ++calls;
    return raycast(m, x, y, a, r);
  };
  EXPECT_EQ(scan_log_likelihood(scan, {-3.0, 10.0, 0.0}, 0.1, map, p, o, counting), -777.0);
  EXPECT_EQ(scan_log_likelihood(scan, {10.0, 400.0, 0.0}, 0.1, map, p, o, counting), -777.0);
  EXPECT_EQ(calls, 0);
}

TEST(ScanLikelihood, MismatchedScanIsRejected) {
  RangeScan bad;
  bad.ranges = {1.0, 2.0};
  bad.angles = {0.0};
  EXPECT_THROW(scan_log_likelihood(bad, {20, 20, 0}, 1.0, box_map(), BeamModelParams{}), ValidationError);
}

TEST(ScanLikelihood, TranslationEquivariance) {
  // Shifting both the map content and the pose leaves the likelihood unchanged.
  const auto a = box_map();
  auto b = SketchMap::empty(60, 50);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) b.set(x + 7, y + 4, a.at(x, y));
  }
  BeamModelParams p;
  const auto scan = full_scan(std::vector<double>{1.0, 2.5, 0.7, 3.0, 1.1, 0.4, 2.2, 1.9, 0.3, 2.8}, std::numbers::pi);
  const Pose2D pose{25.0, 12.0, 0.4};
  EXPECT_NEAR(scan_log_likelihood(scan, pose, 0.1, a, p), scan_log_likelihood(scan, {32.0, 16.0, 0.4}, 0.1, b, p),
              1e-9);
}

TEST(Subsample, EvenlySpacedAndDeterministic) {
  const auto idx = subsample_beam_indices(360, 10);
  ASSERT_EQ(idx.size(), 10u);
  for (std::size_t k = 0; k < idx.size(); ++k) EXPECT_EQ(idx[k], k * 36);
  EXPECT_EQ(idx, subsample_beam_indices(360, 10));
  EXPECT_EQ(subsample_beam_indices(5, 10).size(), 5u);
  EXPECT_TRUE(subsample_beam_indices(5, 0).empty());
}
