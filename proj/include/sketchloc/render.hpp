#pragma once

// Overlay frames: the sketch in gray, particles in blue, the estimate in red
// with a heading tick, and the true pose in green when known.

#include <algorithm>
#include <cmath>
#include <optional>

#include "sketchloc/image_io.hpp"
#include "sketchloc/particle_filter.hpp"
#include "sketchloc/raster_map.hpp"

namespace sketchloc {

struct RenderOptions {
  std::size_t max_particles = 4000;  // drawn with a fixed stride above this
  int marker_radius = 3;
  double heading_length = 12.0;
};

namespace detail {

inline void draw_disc(RgbImage& img, double cx, double cy, int r, std::uint8_t R, std::uint8_t G, std::uint8_t B) {
  const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= r * r) img.set(x0 + dx, y0 + dy, R, G, B);
    }
  }
}

inline void draw_segment(RgbImage& img, double x0, double y0, double x1, double y1, std::uint8_t R, std::uint8_t G,
                         std::uint8_t B) {
  const int n = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    img.set(static_cast<int>(std::floor(x0 + t * (x1 - x0))), static_cast<int>(std::floor(y0 + t * (y1 - y0))), R, G,
            B);
  }
}

inline void draw_pose(RgbImage& img, const Pose2D& p, const RenderOptions& o, std::uint8_t R, std::uint8_t G,
                      std::uint8_t B) {
  draw_disc(img, p.x, p.y, o.marker_radius, R, G, B);
  draw_segment(img, p.x, p.y, p.x + o.heading_length * std::cos(p.theta), p.y + o.heading_length * std::sin(p.theta), R,
               G, B);
}

}  // namespace detail

inline RgbImage render_frame(const SketchMap& map, const ParticleSet& set, const Pose2D& estimate,
                             const std::optional<Pose2D>& truth = std::nullopt, const RenderOptions& opts = {}) {
  RgbImage img(map.width(), map.height());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Cell c = map.at(x, y);
      const std::uint8_t g = c == Cell::Occupied ? 0 : c == Cell::Unknown ? 180 : 255;
      img.set(x, y, g, g, g);
    }
  }
  const std::size_t n = set.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + opts.max_particles - 1) / std::max<std::size_t>(1, opts.max_particles));
  for (std::size_t i = 0; i < n; i += stride) {
    const auto& p = set.particles[i].pose;
    img.set(static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y)), 40, 90, 255);
  }
  if (truth) detail::draw_pose(img, *truth, opts, 0, 170, 0);
  detail::draw_pose(img, estimate, opts, 230, 0, 0);
  return img;
}

}  // namespace sketchloc
