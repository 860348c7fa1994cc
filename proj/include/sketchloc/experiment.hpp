#pragma once

// Seeded evaluation protocol on the synthetic worlds: learn beam parameters
// from calibration scans, drive a route, run the filter from a 150 px box
// around the true start and judge the room of the final estimate.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "sketchloc/eval.hpp"
#include "sketchloc/localizer.hpp"
#include "sketchloc/param_learning.hpp"
#include "sketchloc/scenarios.hpp"
#include "sketchloc/sensor_log.hpp"
#include "sketchloc/sim2d.hpp"

namespace sketchloc {

/// Settings for the synthetic benchmarks. The motion noise is sized for a
/// sketch drawn at ~20 px/m (s ~ 0.05); see README for the reasoning.
struct BenchmarkPreset {
  FilterConfig filter;
  SensorSpec sensor;
  MotionNoiseParams odom_noise;  // what the simulated robot's odometry suffers
  double range_noise = 0.03;
  double init_box_px = 150.0;
  EstimateMode estimate = EstimateMode::WeightedMean;
  int learn_rounds = 8;
  double grid_lo = 0.02, grid_hi = 0.15, grid_step = 0.0025;
  std::uint64_t calibration_seed = 99;
};

inline BenchmarkPreset benchmark_preset() {
  BenchmarkPreset p;
  p.filter.motion.sigma_q = {0.02, 0.0, 0.0, 0.02};
  p.filter.motion.sigma_theta = 0.05;
  p.filter.motion.sigma_s = 0.01;
  p.filter.particles = 500000;
  p.filter.kld.n_min = 2000;
  p.filter.kld.n_max = 500000;
  p.odom_noise = MotionNoiseParams::zero();
  p.odom_noise.sigma_q = {2.5e-5, 0.0, 0.0, 2.5e-5};
  p.odom_noise.sigma_theta = 0.003;
  return p;
}

/// Heading 0 and pi/2 at every waypoint of every path.
inline std::vector<Pose2D> calibration_poses(const std::vector<std::vector<Waypoint>>& paths) {
  std::vector<Pose2D> out;
  for (const auto& path : paths) {
    for (const auto& w : path) {
      out.push_back({w.x, w.y, 0.0});
      out.push_back({w.x, w.y, std::numbers::pi / 2.0});
    }
  }
  return out;
}

/// Grid search plus EM on calibration scans taken in the scenario's world.
inline LearnReport learn_for_scenario(const scenarios::Scenario& sc, const std::vector<Pose2D>& poses,
                                      const BenchmarkPreset& preset, const BeamModelParams& p0 = {}) {
  Rng rng(preset.calibration_seed);
  auto samples = scenarios::calibration_samples(sc, "sketch", poses, preset.sensor, preset.range_noise, rng);
  raycast_expected(samples, {{"sketch", sc.sketch}});
  return learn_beam_params(samples, linear_grid(preset.grid_lo, preset.grid_hi, preset.grid_step), p0,
                           preset.filter.likelihood, {}, preset.learn_rounds);
}

struct RouteRun {
  RunResult result;
  SensorLog log;
  std::vector<StepReport> steps;
};

inline std::uint64_t filter_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL; }

/// Simulates one route with `seed`, localizes on the sketch and judges the
/// final estimate against the room the robot really ended in.
inline RouteRun run_route(const scenarios::Scenario& sc, const std::vector<Waypoint>& waypoints,
                          const FilterConfig& filter, const BenchmarkPreset& preset, std::uint64_t seed,
                          const std::string& route_name, const std::string& sketch_name) {
  TrajectorySpec traj;
  traj.waypoints = waypoints;
  traj.sensor = preset.sensor;
  Rng sim_rng(seed);
  RouteRun run;
  run.log = simulate_run(sc.world, traj, preset.odom_noise, preset.range_noise, sim_rng);
  const auto steps = replay_steps(run.log);
  if (steps.empty()) throw ValidationError("route produced no scans");

  Localizer loc(sc.sketch, filter, filter_seed(seed));
  InitRegion region;
  const auto [sx, sy] = sc.to_sketch(waypoints.front().x, waypoints.front().y);
  region.rect = PixelRect::centered(sx, sy, preset.init_box_px, preset.init_box_px);
  loc.initialize(region);
  for (const auto& st : steps) {
    run.steps.push_back(loc.step(st.odometry, st.scan));
    run.result.trace.push_back(loc.reported_pose(run.steps.back(), preset.estimate));
  }
  const Pose2D truth = *steps.back().truth;
  RunResult& r = run.result;
  r.route = route_name;
  r.sketch = sketch_name;
  r.seed = seed;
  r.final_pose = r.trace.back();
  r.final_scale = run.steps.back().estimate.scale;
  r.target_room = scenarios::room_of(sc.plan, truth.x, truth.y);
  r.success = judge_success(r.final_pose, r.target_room, sc.regions);
  return run;
}

}  // namespace sketchloc
