#pragma once

// Deterministic 2D world simulator: unicycle waypoint following, noisy
// odometry and ray-cast range scans, all in metric coordinates.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sketchloc/error.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"
#include "sketchloc/sensor_log.hpp"

namespace sketchloc {

class InfeasibleTrajectoryError : public Error {
 public:
  using Error::Error;
};

/// Metric occupancy grid. Cell (i, j) covers origin + res * [i, i+1) x [j, j+1).
struct WorldMap {
  SketchMap grid;
  double resolution = 0.05;  // m/cell
  double origin_x = 0.0;
  double origin_y = 0.0;

  void validate() const {
    if (!(resolution > 0.0)) throw ValidationError("world resolution must be positive");
    if (grid.width() <= 0 || grid.height() <= 0) throw ValidationError("world grid is empty");
  }

  double width_m() const { return grid.width() * resolution; }
  double height_m() const { return grid.height() * resolution; }

  bool contains(double x, double y) const {
    return grid.contains((x - origin_x) / resolution, (y - origin_y) / resolution);
  }

  bool free_at(double x, double y) const {
    if (!contains(x, y)) return false;
    const int cx = static_cast<int>(std::floor((x - origin_x) / resolution));
    const int cy = static_cast<int>(std::floor((y - origin_y) / resolution));
    return !grid.blocks(cx, cy);
  }

  /// Metric range to the first occupied cell, or max_range.
  double raycast(double x, double y, double angle, double max_range) const {
    return sketchloc::raycast(grid, (x - origin_x) / resolution, (y - origin_y) / resolution, angle,
                              max_range / resolution) *
           resolution;
  }
};

struct SensorSpec {
  int beams = 180;
  double fov = std::numbers::pi;
  double z_max = 20.0;
  int scan_period = 5;  // steps between scans
};

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
};

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  double speed = 0.05;      // m/step
  double turn_rate = 0.15;  // rad/step cap
  double capture_radius = 0.2;
  double dt = 0.1;          // s/step, timestamps only
  int max_steps = 200000;
  SensorSpec sensor;
};

/// Checks waypoints lie in free space and consecutive ones see each other.
inline void validate_trajectory(const WorldMap& world, const TrajectorySpec& traj) {
  world.validate();
  if (traj.waypoints.size() < 2) throw ValidationError("trajectory needs at least two waypoints");
  if (!(traj.speed > 0.0) || !(traj.turn_rate > 0.0)) throw ValidationError("speed and turn rate must be positive");
  if (traj.sensor.beams < 1 || traj.sensor.scan_period < 1) throw ValidationError("invalid sensor spec");
  for (std::size_t i = 0; i < traj.waypoints.size(); ++i) {
    const auto& w = traj.waypoints[i];
    if (!world.free_at(w.x, w.y)) {
      throw InfeasibleTrajectoryError("waypoint " + std::to_string(i) + " is not in free space");
    }
  }
  for (std::size_t i = 0; i + 1 < traj.waypoints.size(); ++i) {
    const auto& a = traj.waypoints[i];
    const auto& b = traj.waypoints[i + 1];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) continue;
    const double hit = world.raycast(a.x, a.y, std::atan2(b.y - a.y, b.x - a.x), len + world.resolution);
    if (hit < len) {
      throw InfeasibleTrajectoryError("segment between waypoints " + std::to_string(i) + " and " +
                                      std::to_string(i + 1) + " is blocked");
    }
  }
}

/// Ground-truth poses of a noise-free unicycle that turns in place toward the
/// next waypoint, then drives straight to it.
inline std::vector<Pose2D> unicycle_path(const TrajectorySpec& traj) {
  const auto& wp = traj.waypoints;
  std::vector<Pose2D> path;
  Pose2D pose{wp[0].x, wp[0].y, std::atan2(wp[1].y - wp[0].y, wp[1].x - wp[0].x)};
  path.push_back(pose);
  std::size_t target = 1;
  while (target < wp.size()) {
    if (static_cast<int>(path.size()) > traj.max_steps) throw InfeasibleTrajectoryError("trajectory exceeds max_steps");
    const double dx = wp[target].x - pose.x;
    const double dy = wp[target].y - pose.y;
    const double dist = std::hypot(dx, dy);
    if (dist <= traj.capture_radius) {
      ++target;
      continue;
    }
    const double err = normalize_angle(std::atan2(dy, dx) - pose.theta);
    if (std::abs(err) > traj.turn_rate) {
      pose.theta = normalize_angle(pose.theta + (err > 0 ? traj.turn_rate : -traj.turn_rate));
    } else {
      pose.theta = normalize_angle(pose.theta + err);
      const double d = std::min(traj.speed, dist);
      pose.x += d * std::cos(pose.theta);
      pose.y += d * std::sin(pose.theta);
    }
    path.push_back(pose);
  }
  return path;
}

template <std::uniform_random_bit_generator G>
std::vector<double> simulate_scan(const WorldMap& world, const Pose2D& pose, const SensorSpec& sensor,
                                  double range_noise_sigma, G& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto angles = beam_angles(static_cast<std::size_t>(sensor.beams), sensor.fov);
  std::vector<double> ranges(angles.size());
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const double r = world.raycast(pose.x, pose.y, pose.theta + angles[i], sensor.z_max);
    ranges[i] = std::clamp(r + range_noise_sigma * n01(rng), 0.0, sensor.z_max);
  }
  return ranges;
}

/// Drives the trajectory and records ODOM every step, FLASER + TRUEPOS every
/// scan_period steps (and at the final step). Odometry starts at the true pose.
template <std::uniform_random_bit_generator G>
SensorLog simulate_run(const WorldMap& world, const TrajectorySpec& traj, const MotionNoiseParams& odom_noise,
                       double range_noise_sigma, G& rng) {
  validate_trajectory(world, traj);
  const std::vector<Pose2D> truth = unicycle_path(traj);
  SensorLog log;
  log.fov = traj.sensor.fov;
  log.z_max = traj.sensor.z_max;
  Pose2D odom = truth.front();
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (k > 0) odom = compose(odom, compose(between(truth[k - 1], truth[k]), sample_noise(odom_noise, rng)));
    const double t = static_cast<double>(k) * traj.dt;
    log.records.push_back({RecordKind::Odom, odom, odom, {}, t});
    const bool scan = k % static_cast<std::size_t>(traj.sensor.scan_period) == 0 || k + 1 == truth.size();
    if (!scan) continue;
    log.records.push_back(
        {RecordKind::Laser, odom, odom, simulate_scan(world, truth[k], traj.sensor, range_noise_sigma, rng), t});
    log.records.push_back({RecordKind::TruePos, truth[k], odom, {}, t});
  }
  return log;
}

}  // namespace sketchloc
