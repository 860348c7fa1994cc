#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They deliberately avoid the library's own numerics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "sketchloc/beam_model.hpp"
#include "sketchloc/raster_map.hpp"

namespace oracle {

/// Marches along the ray in 0.01 px steps and reports the first sample that
/// falls in a blocking cell. When one step jumps diagonally (both cell
/// indices change) the ray may clip a third cell near the shared corner, so
/// that step is re-marched at 1e-6 px.
inline double march(const sketchloc::SketchMap& map, double ox, double oy, double angle, double max_range) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  const auto cell = [&](double t) {
    return std::pair{static_cast<int>(std::floor(ox + t * dx)), static_cast<int>(std::floor(oy + t * dy))};
  };
  std::pair<int, int> prev = cell(0.0);
  for (double t = 0.0; t < max_range; t += 0.01) {
    const auto c = cell(t);
    if (t > 0.0 && c.first != prev.first && c.second != prev.second) {
      for (double f = t - 0.01; f < t; f += 1e-6) {
        const auto [fx, fy] = cell(f);
        if (!map.in_bounds(fx, fy)) return max_range;
        if (map.blocks(fx, fy)) return f;
      }
    }
    prev = c;
    if (!map.in_bounds(c.first, c.second)) return max_range;
    if (map.blocks(c.first, c.second)) return t;
  }
  return max_range;
}

/// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Adaptive-free integration that splits at known kinks so that narrow
/// features (a Gaussian, a window) are resolved. Piece endpoints are nudged
/// one ulp inward so a jump at a cut is read from the correct side.
inline double integrate_pieces(const std::function<double(double)>& f, std::vector<double> cuts, int n_per_piece) {
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    const double a = std::nextafter(cuts[i], cuts[i + 1]), b = std::nextafter(cuts[i + 1], cuts[i]);
    total += simpson(f, a, b, n_per_piece);
  }
  return total;
}

/// Wilson-Hilferty KLD sample bound written out directly.
inline std::size_t kld_bound(std::size_t k, double eps, double z) {
  if (k <= 1) return 0;
  const double km1 = static_cast<double>(k - 1);
  const double a = 2.0 / (9.0 * km1);
  const double cube = std::pow(1.0 - a + std::sqrt(a) * z, 3.0);
  return static_cast<std::size_t>(std::ceil(km1 / (2.0 * eps) * cube));
}

inline sketchloc::SketchMap random_map(int w, int h, double fill, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution occ(fill);
  std::vector<sketchloc::Cell> cells(static_cast<std::size_t>(w * h));
  for (auto& c : cells) c = occ(rng) ? sketchloc::Cell::Occupied : sketchloc::Cell::Free;
  return sketchloc::SketchMap(w, h, std::move(cells));
}

/// Draws one range from the four-component mixture by picking a component
/// and inverting its CDF.
template <class G>
double sample_mixture(const sketchloc::BeamModelParams& p, double z_hat, G& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double pick = u(rng) * (p.w_hit + p.w_dyn + p.w_max + p.w_rnd);
  if (pick < p.w_hit) return std::normal_distribution<double>(z_hat, p.sigma_z)(rng);
  if (pick < p.w_hit + p.w_dyn) {
    // F(z) = (1 - e^{-lz}) / (1 - e^{-l a}) on [0, a]
    const double v = u(rng);
    return -std::log(1.0 - v * (1.0 - std::exp(-p.lambda * z_hat))) / p.lambda;
  }
  if (pick < p.w_hit + p.w_dyn + p.w_max) return u(rng) * p.z_max;
  return p.z_max - p.delta + 2.0 * p.delta * u(rng);
}

}  // namespace oracle
