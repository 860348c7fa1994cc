#pragma once

// Sketch/occupancy rasters in pixel coordinates and grid ray casting.
//
// Pixel (i, j) covers the half-open square [i, i+1) x [j, j+1); continuous
// coordinates use x along columns and y along rows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sketchloc/error.hpp"
#include "sketchloc/image_io.hpp"

namespace sketchloc {

/// Axis-aligned rectangle in continuous pixel coordinates, [x0, x1] x [y0, y1].
struct PixelRect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  static PixelRect centered(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

enum class Cell : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };

/// Inclusive band of gray levels classified as Unknown.
struct GrayBand {
  std::uint8_t lo = 0;
  std::uint8_t hi = 0;
  bool contains(std::uint8_t g) const { return g >= lo && g <= hi; }
};

struct MapLoadOptions {
  std::uint8_t occupied_threshold = 127;
  std::optional<GrayBand> unknown_levels;
  bool unknown_blocks = false;
};

class SketchMap {
 public:
  SketchMap() = default;

  SketchMap(int width, int height, std::vector<Cell> cells, std::uint8_t occupied_threshold = 127,
            bool unknown_blocks = false)
      : width_(width),
        height_(height),
        occupied_threshold_(occupied_threshold),
        unknown_blocks_(unknown_blocks),
        cells_(std::move(cells)) {
    if (width_ <= 0 || height_ <= 0) throw ValidationError("map dimensions must be positive");
    if (cells_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
      throw ValidationError("cell count does not match map dimensions");
    }
  }

  /// An all-Free map.
  static SketchMap empty(int width, int height) {
    return SketchMap(width, height,
                     std::vector<Cell>(static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)),
                                       Cell::Free));
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::uint8_t occupied_threshold() const { return occupied_threshold_; }
  bool unknown_blocks() const { return unknown_blocks_; }
  void set_unknown_blocks(bool b) { unknown_blocks_ = b; }
  std::span<const Cell> cells() const { return cells_; }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x < static_cast<double>(width_) && y < static_cast<double>(height_);
  }

  Cell at(int x, int y) const { return cells_[index(x, y)]; }
  void set(int x, int y, Cell c) { cells_[index(x, y)] = c; }

  bool blocks(int x, int y) const {
    const Cell c = at(x, y);
    return c == Cell::Occupied || (unknown_blocks_ && c == Cell::Unknown);
  }

  std::size_t count(Cell c) const { return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), c)); }

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::uint8_t occupied_threshold_ = 127;
  bool unknown_blocks_ = false;
  std::vector<Cell> cells_;
};

inline Cell classify_gray(std::uint8_t gray, const MapLoadOptions& opts) {
  if (opts.unknown_levels && opts.unknown_levels->contains(gray)) return Cell::Unknown;
  return gray <= opts.occupied_threshold ? Cell::Occupied : Cell::Free;
}

inline SketchMap map_from_gray(const GrayImage& img, const MapLoadOptions& opts = {}) {
  if (img.width <= 0 || img.height <= 0) throw ValidationError("image has zero dimension");
  std::vector<Cell> cells(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), cells.begin(),
                 [&opts](std::uint8_t g) { return classify_gray(g, opts); });
  return SketchMap(img.width, img.height, std::move(cells), opts.occupied_threshold, opts.unknown_blocks);
}

/// Decodes a PGM or PNG raster and classifies each pixel.
inline SketchMap load_map(std::span<const std::uint8_t> image_bytes, const MapLoadOptions& opts = {}) {
  return map_from_gray(decode_gray_image(image_bytes), opts);
}

/// Distance in pixels from `(ox, oy)` along `angle` to the entry point of the
/// first blocking cell, or `max_range` when nothing blocks before the range
/// limit or the map border. A ray starting inside a blocking cell returns 0.
inline double raycast(const SketchMap& map, double ox, double oy, double angle, double max_range) {
  if (!map.contains(ox, oy)) throw OutOfBoundsError("raycast origin outside map");
  int ix = static_cast<int>(std::floor(ox));
  int iy = static_cast<int>(std::floor(oy));
  if (map.blocks(ix, iy)) return 0.0;

  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const int step_x = dx > 0.0 ? 1 : -1;
  const int step_y = dy > 0.0 ? 1 : -1;
  const double delta_x = dx != 0.0 ? 1.0 / std::abs(dx) : inf;
  const double delta_y = dy != 0.0 ? 1.0 / std::abs(dy) : inf;
  double t_max_x = dx > 0.0 ? (ix + 1 - ox) * delta_x : dx < 0.0 ? (ox - ix) * delta_x : inf;
  double t_max_y = dy > 0.0 ? (iy + 1 - oy) * delta_y : dy < 0.0 ? (oy - iy) * delta_y : inf;

  while (true) {
    double t;
    if (t_max_x < t_max_y) {
      t = t_max_x;
      ix += step_x;
      t_max_x += delta_x;
    } else {
      t = t_max_y;
      iy += step_y;
      t_max_y += delta_y;
    }
    if (t >= max_range || !map.in_bounds(ix, iy)) return max_range;
    if (map.blocks(ix, iy)) return t;
  }
}

struct BoundingBox {
  int min_x = 0, min_y = 0, max_x = -1, max_y = -1;  // inclusive cell indices
  int width() const { return max_x - min_x + 1; }
  int height() const { return max_y - min_y + 1; }
};

inline BoundingBox occupied_bounds(const SketchMap& map) {
  BoundingBox box{map.width(), map.height(), -1, -1};
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (map.at(x, y) != Cell::Occupied) continue;
      box.min_x = std::min(box.min_x, x);
      box.min_y = std::min(box.min_y, y);
      box.max_x = std::max(box.max_x, x);
      box.max_y = std::max(box.max_y, y);
    }
  }
  if (box.max_x < 0) throw EmptyMapError("map has no occupied cells");
  return box;
}

/// Longer over shorter side of the tight bounding box of Occupied cells (>= 1).
inline double map_aspect_ratio(const SketchMap& map) {
  const BoundingBox box = occupied_bounds(map);
  const double w = box.width();
  const double h = box.height();
  return std::max(w, h) / std::min(w, h);
}

}  // namespace sketchloc
