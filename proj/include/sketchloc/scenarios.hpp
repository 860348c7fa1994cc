#pragma once

// Synthetic evaluation worlds: vector floor plans rasterized into a metric
// world grid, and hand-drawn-looking sketches produced through a smooth,
// anisotropic warp with pen jitter.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sketchloc/eval.hpp"
#include "sketchloc/image_io.hpp"
#include "sketchloc/param_learning.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/sim2d.hpp"

namespace sketchloc::scenarios {

struct Segment {
  double x0, y0, x1, y1;
};

struct MetricRect {
  std::string id;
  double x0, y0, x1, y1;
};

/// How a room is entered: its centre, a point just inside the door and the
/// matching point in the shared hallway.
struct RoomAccess {
  Waypoint center, inside, hallway;
};

struct FloorPlan {
  double width = 0.0, height = 0.0;  // metres
  std::vector<Segment> walls;        // drawn in the sketch
  std::vector<Segment> clutter;      // exists in the world only
  std::vector<MetricRect> rooms;
  std::map<std::string, RoomAccess> access;
};

inline void add_box(std::vector<Segment>& segs, double x0, double y0, double x1, double y1) {
  segs.push_back({x0, y0, x1, y0});
  segs.push_back({x1, y0, x1, y1});
  segs.push_back({x1, y1, x0, y1});
  segs.push_back({x0, y1, x0, y0});
}

/// Horizontal wall from x0 to x1 at y with door gaps [a, b].
inline void add_wall_with_doors(std::vector<Segment>& segs, double y, double x0, double x1,
                                std::vector<std::pair<double, double>> doors) {
  std::sort(doors.begin(), doors.end());
  double x = x0;
  for (const auto& [a, b] : doors) {
    if (a > x) segs.push_back({x, y, a, y});
    x = b;
  }
  if (x < x1) segs.push_back({x, y, x1, y});
}

inline double point_segment_distance(double px, double py, const Segment& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((px - s.x0) * vx + (py - s.y0) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (s.x0 + t * vx), py - (s.y0 + t * vy));
}

/// Occupancy grid with walls and clutter of the given thickness.
inline WorldMap rasterize(const FloorPlan& plan, double resolution = 0.05, double thickness = 0.1) {
  const int w = static_cast<int>(std::ceil(plan.width / resolution)) + 1;
  const int h = static_cast<int>(std::ceil(plan.height / resolution)) + 1;
  WorldMap world{SketchMap::empty(w, h), resolution, -0.5 * resolution, -0.5 * resolution};
  std::vector<Segment> all = plan.walls;
  all.insert(all.end(), plan.clutter.begin(), plan.clutter.end());
  const double half = 0.5 * thickness;
  for (const auto& s : all) {
    const int cx0 = std::max(0, static_cast<int>(std::floor((std::min(s.x0, s.x1) - half - world.origin_x) / resolution)));
    const int cx1 = std::min(w - 1, static_cast<int>(std::floor((std::max(s.x0, s.x1) + half - world.origin_x) / resolution)));
    const int cy0 = std::max(0, static_cast<int>(std::floor((std::min(s.y0, s.y1) - half - world.origin_y) / resolution)));
    const int cy1 = std::min(h - 1, static_cast<int>(std::floor((std::max(s.y0, s.y1) + half - world.origin_y) / resolution)));
    for (int cy = cy0; cy <= cy1; ++cy) {
      for (int cx = cx0; cx <= cx1; ++cx) {
        const double x = world.origin_x + (cx + 0.5) * resolution;
        const double y = world.origin_y + (cy + 0.5) * resolution;
        if (point_segment_distance(x, y, s) <= half) world.grid.set(cx, cy, Cell::Occupied);
      }
    }
  }
  return world;
}

/// Metric -> pixel mapping of a sketch: anisotropic stretch plus a smooth
/// sinusoidal bend, so the local scale varies across the drawing.
struct SketchWarp {
  double px_per_m = 20.0;
  double stretch_x = 1.0;
  double stretch_y = 1.0;
  double bend_px = 0.0;
  double bend_period_m = 9.0;
  double margin_px = 12.0;

  std::pair<double, double> apply(double x, double y) const {
    constexpr double tau = 2.0 * std::numbers::pi;
    const double u = margin_px + px_per_m * stretch_x * x + bend_px * std::sin(tau * y / bend_period_m);
    const double v = margin_px + px_per_m * stretch_y * y + bend_px * std::sin(tau * x / bend_period_m + 1.0);
    return {u, v};
  }

  int width_for(const FloorPlan& plan) const {
    return static_cast<int>(std::ceil(2.0 * margin_px + px_per_m * stretch_x * plan.width + 2.0 * bend_px));
  }
  int height_for(const FloorPlan& plan) const {
    return static_cast<int>(std::ceil(2.0 * margin_px + px_per_m * stretch_y * plan.height + 2.0 * bend_px));
  }

  /// Nominal metres per pixel (geometric mean over the two axes).
  double nominal_scale() const { return 1.0 / (px_per_m * std::sqrt(stretch_x * stretch_y)); }
};

struct PenStyle {
  double radius_px = 1.0;  // stroke half-width
  double jitter_px = 1.0;  // amplitude of the smooth perpendicular wobble
  std::uint64_t seed = 7;
};

inline void stamp_disc(GrayImage& img, double cx, double cy, double r) {
  const int x0 = static_cast<int>(std::floor(cx - r)), x1 = static_cast<int>(std::ceil(cx + r));
  const int y0 = static_cast<int>(std::floor(cy - r)), y1 = static_cast<int>(std::ceil(cy + r));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy <= r * r) {
        img.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(x)] = 0;
      }
    }
  }
}

/// Renders the plan's walls (not its clutter) as black pen strokes on white.
inline GrayImage draw_sketch(const FloorPlan& plan, const SketchWarp& warp, const PenStyle& pen = {}) {
  GrayImage img;
  img.width = warp.width_for(plan);
  img.height = warp.height_for(plan);
  img.pixels.assign(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height), 255);
  std::mt19937_64 rng(pen.seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (const auto& s : plan.walls) {
    const double len = std::hypot(s.x1 - s.x0, s.y1 - s.y0);
    const int pieces = std::max(2, static_cast<int>(std::ceil(len / 0.02)));
    const double nx = len > 0 ? -(s.y1 - s.y0) / len : 0.0;
    const double ny = len > 0 ? (s.x1 - s.x0) / len : 0.0;
    // Low-frequency wobble: random phase and amplitude per stroke.
    const double amp = pen.jitter_px * n01(rng);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
    const double cycles = std::max(0.5, len / 3.0);
    for (int i = 0; i <= pieces; ++i) {
      const double t = static_cast<double>(i) / pieces;
      const auto [u, v] = warp.apply(s.x0 + t * (s.x1 - s.x0), s.y0 + t * (s.y1 - s.y0));
      const double off = amp * std::sin(2.0 * std::numbers::pi * cycles * t + phase) * std::sin(std::numbers::pi * t);
      stamp_disc(img, u + off * nx, v + off * ny, pen.radius_px);
    }
  }
  return img;
}

/// Bounding box of the warped rectangle boundary.
inline PixelRect warp_rect(const SketchWarp& warp, double x0, double y0, double x1, double y1) {
  PixelRect r{1e300, 1e300, -1e300, -1e300};
  constexpr int n = 64;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const std::pair<double, double> pts[4] = {warp.apply(x0 + t * (x1 - x0), y0), warp.apply(x0 + t * (x1 - x0), y1),
                                              warp.apply(x0, y0 + t * (y1 - y0)), warp.apply(x1, y0 + t * (y1 - y0))};
    for (const auto& [u, v] : pts) {
      r.x0 = std::min(r.x0, u);
      r.y0 = std::min(r.y0, v);
      r.x1 = std::max(r.x1, u);
      r.y1 = std::max(r.y1, v);
    }
  }
  return r;
}

inline RoomRegions warp_rooms(const FloorPlan& plan, const SketchWarp& warp) {
  RoomRegions regions;
  for (const auto& r : plan.rooms) regions.add(r.id, warp_rect(warp, r.x0, r.y0, r.x1, r.y1));
  return regions;
}

/// Room the metric point lies in (first match), or empty.
inline std::string room_of(const FloorPlan& plan, double x, double y) {
  for (const auto& r : plan.rooms) {
    if (x >= r.x0 && x <= r.x1 && y >= r.y0 && y <= r.y1) return r.id;
  }
  return {};
}

/// Single 10 m x 8 m room with a divider, a cabinet and a pillar; four
/// quadrant regions.
inline FloorPlan room_plan() {
  FloorPlan p;
  p.width = 10.0;
  p.height = 8.0;
  add_box(p.walls, 0.0, 0.0, 10.0, 8.0);
  p.walls.push_back({6.0, 0.0, 6.0, 3.0});  // divider
  add_box(p.walls, 0.0, 6.0, 1.6, 8.0);     // cabinet in a corner
  add_box(p.walls, 3.0, 3.0, 3.5, 3.5);     // pillar
  add_box(p.walls, 8.2, 0.0, 10.0, 0.8);    // desk
  add_box(p.clutter, 4.0, 7.3, 4.5, 7.7);   // chair missing from the sketch
  p.rooms = {{"1", 0.0, 0.0, 5.0, 4.0}, {"2", 5.0, 0.0, 10.0, 4.0}, {"3", 0.0, 4.0, 5.0, 8.0}, {"4", 5.0, 4.0, 10.0, 8.0}};
  return p;
}

/// The four proof-of-concept paths, all starting in the lower right corner.
inline std::vector<std::vector<Waypoint>> room_paths() {
  return {
      {{9.0, 7.0}, {7.0, 5.5}, {2.0, 1.5}},
      {{9.0, 7.0}, {8.5, 3.0}, {7.5, 1.8}},
      {{9.0, 7.0}, {5.5, 7.0}, {3.0, 5.2}},
      {{9.0, 7.0}, {2.5, 4.8}, {2.0, 2.0}, {4.5, 1.5}, {7.0, 5.2}},
  };
}

/// Five rooms off a shared hallway, 16 m x 10 m, with furniture drawn in the
/// sketch and a few clutter objects that are not.
inline FloorPlan apartment_plan() {
  FloorPlan p;
  p.width = 16.0;
  p.height = 10.0;
  add_box(p.walls, 0.0, 0.0, 16.0, 10.0);
  add_wall_with_doors(p.walls, 4.5, 0.0, 16.0, {{2.5, 3.4}, {8.0, 8.9}, {13.0, 13.9}});
  add_wall_with_doors(p.walls, 5.7, 0.0, 16.0, {{4.0, 4.9}, {10.5, 11.4}});
  p.walls.push_back({6.0, 0.0, 6.0, 4.5});
  p.walls.push_back({11.0, 0.0, 11.0, 4.5});
  p.walls.push_back({7.0, 5.7, 7.0, 10.0});
  add_box(p.walls, 0.0, 0.4, 2.5, 1.3);      // sofa
  add_box(p.walls, 6.0, 0.0, 10.5, 0.6);     // counter
  add_box(p.walls, 10.4, 0.6, 11.0, 2.2);    // counter return
  add_box(p.walls, 13.6, 0.5, 16.0, 2.5);    // bed
  add_box(p.walls, 2.0, 7.5, 3.5, 8.5);      // table
  add_box(p.walls, 15.2, 6.5, 16.0, 9.5);    // shelves
  p.walls.push_back({11.5, 10.0, 11.5, 8.0});  // partition
  add_box(p.clutter, 8.0, 2.0, 8.4, 2.4);
  add_box(p.clutter, 5.5, 8.8, 5.9, 9.2);
  add_box(p.clutter, 14.5, 5.9, 14.9, 6.3);
  p.rooms = {{"1", 0.0, 0.0, 6.0, 4.5},
             {"2", 6.0, 0.0, 11.0, 4.5},
             {"3", 11.0, 0.0, 16.0, 4.5},
             {"4", 0.0, 5.7, 7.0, 10.0},
             {"5", 7.0, 5.7, 16.0, 10.0}};
  const double hall_y = 5.1;
  p.access["1"] = {{3.5, 2.6}, {2.95, 3.8}, {2.95, hall_y}};
  p.access["2"] = {{8.5, 2.6}, {8.45, 3.8}, {8.45, hall_y}};
  p.access["3"] = {{12.5, 2.8}, {13.45, 3.8}, {13.45, hall_y}};
  p.access["4"] = {{4.6, 8.0}, {4.45, 6.4}, {4.45, hall_y}};
  p.access["5"] = {{13.0, 7.8}, {10.95, 6.4}, {10.95, hall_y}};
  return p;
}

/// Centre of room `from` through the hallway to the centre of room `to`.
inline std::vector<Waypoint> route(const FloorPlan& plan, const std::string& from, const std::string& to) {
  const auto& a = plan.access.at(from);
  const auto& b = plan.access.at(to);
  std::vector<Waypoint> w{a.center, a.inside, a.hallway};
  if (b.hallway.x != a.hallway.x || b.hallway.y != a.hallway.y) w.push_back(b.hallway);
  w.push_back(b.inside);
  w.push_back(b.center);
  return w;
}

/// `count` distinct ordered room pairs drawn with a fixed seed.
inline std::vector<std::pair<std::string, std::string>> random_routes(const FloorPlan& plan, std::size_t count,
                                                                      std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> all;
  for (const auto& [a, _] : plan.access) {
    for (const auto& [b, __] : plan.access) {
      if (a != b) all.emplace_back(a, b);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min(count, all.size()));
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
    return room_id_less(x.first, y.first) || (x.first == y.first && room_id_less(x.second, y.second));
  });
  return all;
}

/// A floor plan with its world grid, one sketch and the sketch's room regions.
struct Scenario {
  FloorPlan plan;
  WorldMap world;
  SketchWarp warp;
  GrayImage sketch_image;
  SketchMap sketch;
  RoomRegions regions;

  std::pair<double, double> to_sketch(double x, double y) const { return warp.apply(x, y); }

  /// World pose mapped into the sketch; the heading follows the local warp.
  Pose2D to_sketch(const Pose2D& p) const {
    constexpr double h = 1e-3;
    const auto [u, v] = warp.apply(p.x, p.y);
    const auto [u1, v1] = warp.apply(p.x + h * std::cos(p.theta), p.y + h * std::sin(p.theta));
    return {u, v, std::atan2(v1 - v, u1 - u)};
  }
};

inline Scenario make_scenario(FloorPlan plan, const SketchWarp& warp, const PenStyle& pen = {}) {
  Scenario s;
  s.world = rasterize(plan);
  s.warp = warp;
  s.sketch_image = draw_sketch(plan, warp, pen);
  s.sketch = map_from_gray(s.sketch_image);
  s.regions = warp_rooms(plan, warp);
  s.plan = std::move(plan);
  return s;
}

/// Range readings taken at fixed world poses, tagged with the matching
/// sketch pose. Input for the parameter learner.
template <std::uniform_random_bit_generator G>
std::vector<CalibrationSample> calibration_samples(const Scenario& sc, const std::string& sketch_id,
                                                   const std::vector<Pose2D>& world_poses, const SensorSpec& sensor,
                                                   double range_noise_sigma, G& rng) {
  std::vector<CalibrationSample> out;
  const auto angles = beam_angles(static_cast<std::size_t>(sensor.beams), sensor.fov);
  for (const auto& wp : world_poses) {
    if (!sc.world.free_at(wp.x, wp.y)) throw InfeasibleTrajectoryError("calibration pose is not in free space");
    const auto ranges = simulate_scan(sc.world, wp, sensor, range_noise_sigma, rng);
    const Pose2D sp = sc.to_sketch(wp);
    for (std::size_t i = 0; i < ranges.size(); ++i) out.push_back({sketch_id, sp, angles[i], ranges[i], 0.0});
  }
  return out;
}

/// Hand-drawn look used by the proof-of-concept room: the drawn aspect ratio
/// is about 20% off (x stretched, y squashed by 10% each) plus a bend.
inline SketchWarp room_warp() {
  SketchWarp w;
  w.px_per_m = 20.0;
  w.stretch_x = 1.1;
  w.stretch_y = 0.9;
  w.bend_px = 4.0;
  return w;
}

inline SketchWarp apartment_warp(double aspect_distortion = 0.0) {
  SketchWarp w;
  w.px_per_m = 20.0;
  w.stretch_x = 1.1 * (1.0 + aspect_distortion);
  w.stretch_y = 0.9 / (1.0 + aspect_distortion);
  w.bend_px = 5.0;
  return w;
}

}  // namespace sketchloc::scenarios
