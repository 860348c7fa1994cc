#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sketchloc/scenarios.hpp"
#include "sketchloc/sensor_log.hpp"
#include "sketchloc/sim2d.hpp"

using namespace sketchloc;

namespace {

constexpr double pi = std::numbers::pi;

// 10 m x 6 m at 5 cm with a wall all the way round and one at x = 7 m.
WorldMap corridor() {
  auto g = SketchMap::empty(200, 120);
  for (int x = 0; x < 200; ++x) {
    g.set(x, 0, Cell::Occupied);
    g.set(x, 119, Cell::Occupied);
  }
  for (int y = 0; y < 120; ++y) {
    g.set(0, y, Cell::Occupied);
    g.set(199, y, Cell::Occupied);
    if (y < 60) g.set(140, y, Cell::Occupied);
  }
  return {std::move(g), 0.05, 0.0, 0.0};
}

TrajectorySpec simple_traj() {
  TrajectorySpec t;
  t.waypoints = {{1.0, 1.0}, {5.0, 1.0}, {5.0, 4.0}, {9.0, 4.5}};
  return t;
}

}  // namespace

TEST(World, FlatWallAtTwoMetres) {
  const auto w = corridor();
  // Wall cell 140 spans [7.0, 7.05); robot at x = 5.0.
  EXPECT_NEAR(w.raycast(5.0, 1.0, 0.0, 20.0), 2.0, w.resolution);
}

TEST(World, FreeAndContains) {
  const auto w = corridor();
  EXPECT_TRUE(w.free_at(1.0, 1.0));
  EXPECT_FALSE(w.free_at(7.02, 1.0));
  EXPECT_FALSE(w.contains(-0.1, 1.0));
  EXPECT_FALSE(w.free_at(20.0, 1.0));
}

TEST(Unicycle, ReachesEveryWaypoint) {
  const auto t = simple_traj();
  const auto path = unicycle_path(t);
  const auto& last = path.back();
  EXPECT_LE(std::hypot(last.x - 9.0, last.y - 4.5), t.capture_radius + 1e-9);
  for (std::size_t i = 1; i < path.size(); ++i) {
    EXPECT_LE(std::hypot(path[i].x - path[i - 1].x, path[i].y - path[i - 1].y), t.speed + 1e-12);
    EXPECT_LE(std::abs(normalize_angle(path[i].theta - path[i - 1].theta)), t.turn_rate + 1e-12);
  }
}

TEST(SimulateRun, NoiseFreeOdometryMatchesTruth) {
  Rng rng(1);
  const auto log = simulate_run(corridor(), simple_traj(), MotionNoiseParams::zero(), 0.0, rng);
  const auto steps = replay_steps(log);
  ASSERT_GT(steps.size(), 10u);
  Pose2D chain = *steps.front().truth;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    chain = compose(chain, steps[k].odometry.as_pose());
    ASSERT_TRUE(steps[k].truth.has_value());
    EXPECT_NEAR(chain.x, steps[k].truth->x, 1e-9);
    EXPECT_NEAR(chain.y, steps[k].truth->y, 1e-9);
    EXPECT_NEAR(normalize_angle(chain.theta - steps[k].truth->theta), 0.0, 1e-9);
  }
}

TEST(SimulateRun, RecordLayout) {
  Rng rng(2);
  const auto t = simple_traj();
  const auto log = simulate_run(corridor(), t, MotionNoiseParams{}, 0.02, rng);
  const std::size_t n = unicycle_path(t).size();
  EXPECT_EQ(log.count(RecordKind::Odom), n);
  EXPECT_EQ(log.count(RecordKind::Laser), log.count(RecordKind::TruePos));
  EXPECT_EQ(log.count(RecordKind::Laser), (n - 1) / 5 + 1 + ((n - 1) % 5 != 0));
}

TEST(SimulateRun, RangesWithinSensorLimits) {
  Rng rng(3);
  auto t = simple_traj();
  t.sensor.z_max = 4.0;
  const auto log = simulate_run(corridor(), t, MotionNoiseParams{}, 0.5, rng);
  for (const auto& r : log.records) {
    if (r.kind != RecordKind::Laser) continue;
    ASSERT_EQ(r.ranges.size(), 180u);
    for (double z : r.ranges) {
      EXPECT_GE(z, 0.0);
      EXPECT_LE(z, 4.0);
    }
  }
}

TEST(SimulateRun, Deterministic) {
  Rng a(4), b(4);
  const auto la = simulate_run(corridor(), simple_traj(), MotionNoiseParams{}, 0.03, a);
  const auto lb = simulate_run(corridor(), simple_traj(), MotionNoiseParams{}, 0.03, b);
  EXPECT_EQ(write_carmen(la), write_carmen(lb));
  Rng c(5);
  EXPECT_NE(write_carmen(la), write_carmen(simulate_run(corridor(), simple_traj(), MotionNoiseParams{}, 0.03, c)));
}

TEST(SimulateRun, BlockedSegmentNamesThePair) {
  Rng rng(6);
  TrajectorySpec t;
  t.waypoints = {{1.0, 1.0}, {6.0, 1.0}, {8.0, 1.0}};
  try {
    simulate_run(corridor(), t, MotionNoiseParams::zero(), 0.0, rng);
    FAIL() << "expected InfeasibleTrajectoryError";
  } catch (const InfeasibleTrajectoryError& e) {
    EXPECT_NE(std::string(e.what()).find("1 and 2"), std::string::npos) << e.what();
  }
}

TEST(SimulateRun, WaypointInsideWall) {
  Rng rng(7);
  TrajectorySpec t;
  t.waypoints = {{1.0, 1.0}, {7.02, 1.0}};
  EXPECT_THROW(simulate_run(corridor(), t, MotionNoiseParams::zero(), 0.0, rng), InfeasibleTrajectoryError);
  t.waypoints = {{1.0, 1.0}};
  EXPECT_THROW(simulate_run(corridor(), t, MotionNoiseParams::zero(), 0.0, rng), ValidationError);
}

TEST(BeamAngles, EvenlySpaced) {
  const auto a = beam_angles(181, pi);
  EXPECT_DOUBLE_EQ(a.front(), -pi / 2);
  EXPECT_NEAR(a.back(), pi / 2, 1e-12);
  for (std::size_t i = 1; i < a.size(); ++i) EXPECT_NEAR(a[i] - a[i - 1], pi / 180, 1e-12);
  const auto full = beam_angles(4, 2 * pi);
  EXPECT_NEAR(full[1] - full[0], pi / 2, 1e-12);
  EXPECT_EQ(beam_angles(1, pi), std::vector<double>{0.0});
}

TEST(Carmen, RoundTrip) {
  Rng rng(8);
  const auto log = simulate_run(corridor(), simple_traj(), MotionNoiseParams{}, 0.03, rng);
  const std::string text = write_carmen(log, "seed 8");
  const auto back = read_carmen(text);
  ASSERT_EQ(back.records.size(), log.records.size());
  EXPECT_DOUBLE_EQ(back.z_max, log.z_max);
  EXPECT_NEAR(back.fov, log.fov, 1e-12);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    EXPECT_EQ(back.records[i].kind, log.records[i].kind);
    EXPECT_EQ(back.records[i].pose, log.records[i].pose);
    EXPECT_EQ(back.records[i].ranges, log.records[i].ranges);
  }
  EXPECT_EQ(write_carmen(back, "seed 8"), text);
}

TEST(Carmen, MalformedLines) {
  EXPECT_THROW(read_carmen("FLASER 3 1 2\n"), FormatError);
  EXPECT_THROW(read_carmen("ODOM 1 2\n"), FormatError);
  EXPECT_THROW(read_carmen("ODOM a b c 0 0 0 1 sim 1\n"), FormatError);
}

TEST(Carmen, UnknownMessagesAreSkipped) {
  const auto log = read_carmen("# comment\nSONAR 1 2 3\nODOM 1 2 0.5 0 0 0 3 sim 3\n");
  ASSERT_EQ(log.records.size(), 1u);
  EXPECT_EQ(log.records[0].pose, (Pose2D{1, 2, 0.5}));
}

TEST(Scenarios, RoomPathsAreFeasible) {
  const auto sc = scenarios::make_scenario(scenarios::room_plan(), scenarios::room_warp());
  for (const auto& path : scenarios::room_paths()) {
    TrajectorySpec t;
    t.waypoints = path;
    EXPECT_NO_THROW(validate_trajectory(sc.world, t));
  }
  EXPECT_GT(sc.sketch.count(Cell::Occupied), 0u);
}

TEST(Scenarios, ApartmentRoutesAreFeasible) {
  const auto plan = scenarios::apartment_plan();
  const auto sc = scenarios::make_scenario(plan, scenarios::apartment_warp());
  const auto routes = scenarios::random_routes(plan, 10, 2015);
  ASSERT_EQ(routes.size(), 10u);
  for (const auto& [from, to] : routes) {
    EXPECT_NE(from, to);
    TrajectorySpec t;
    t.waypoints = scenarios::route(plan, from, to);
    EXPECT_NO_THROW(validate_trajectory(sc.world, t)) << from << "->" << to;
    EXPECT_EQ(scenarios::room_of(plan, t.waypoints.back().x, t.waypoints.back().y), to);
  }
  EXPECT_EQ(sc.regions.rooms().size(), 5u);
}

TEST(Scenarios, WarpAndHeading) {
  scenarios::SketchWarp w;
  w.stretch_x = 1.2;
  w.stretch_y = 0.8;
  const auto [u, v] = w.apply(2.0, 3.0);
  EXPECT_DOUBLE_EQ(u, w.margin_px + 20.0 * 1.2 * 2.0);
  EXPECT_DOUBLE_EQ(v, w.margin_px + 20.0 * 0.8 * 3.0);
  scenarios::Scenario sc;
  sc.warp = w;
  // Pure anisotropic stretch bends a 45 degree heading toward x.
  EXPECT_NEAR(sc.to_sketch(Pose2D{2.0, 3.0, pi / 4}).theta, std::atan2(0.8, 1.2), 1e-6);
  EXPECT_NEAR(w.nominal_scale(), 1.0 / (20.0 * std::sqrt(0.96)), 1e-15);
}

TEST(Scenarios, CalibrationSamplesRejectBlockedPoses) {
  const auto sc = scenarios::make_scenario(scenarios::room_plan(), scenarios::room_warp());
  Rng rng(9);
  SensorSpec s;
  const auto ok = scenarios::calibration_samples(sc, "r", {Pose2D{2.0, 2.0, 0.0}}, s, 0.0, rng);
  EXPECT_EQ(ok.size(), 180u);
  EXPECT_THROW(scenarios::calibration_samples(sc, "r", {Pose2D{-1.0, 2.0, 0.0}}, s, 0.0, rng),
               InfeasibleTrajectoryError);
}
