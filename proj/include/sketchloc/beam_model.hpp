#pragma once

// Four-component beam likelihood evaluated in the pixel frame of a sketch.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "sketchloc/error.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"

namespace sketchloc {

struct BeamModelParams {
  double sigma_z = 0.1;  // hit noise
  double lambda = 0.1;   // truncated-exponential rate, 1/length
  double delta = 0.01;   // half-width of the window around z_max
  double z_max = 20.0;   // sensor max range
  // Learned weights (0.005, 0.5, 0.3, 0.4) sum to 1.205; stored normalized.
  double w_hit = 0.005 / 1.205;
  double w_dyn = 0.5 / 1.205;
  double w_max = 0.3 / 1.205;
  double w_rnd = 0.4 / 1.205;
  int beams_per_scan = 10;

  double weight_sum() const { return w_hit + w_dyn + w_max + w_rnd; }

  void normalize_weights() {
    if (w_hit < 0.0 || w_dyn < 0.0 || w_max < 0.0 || w_rnd < 0.0) throw ValidationError("mixture weights must be >= 0");
    const double sum = weight_sum();
    if (!(sum > 0.0)) throw ValidationError("mixture weights sum to zero");
    w_hit /= sum;
    w_dyn /= sum;
    w_max /= sum;
    w_rnd /= sum;
  }

  void validate() const {
    if (w_hit < 0.0 || w_dyn < 0.0 || w_max < 0.0 || w_rnd < 0.0) throw ValidationError("mixture weights must be >= 0");
    if (std::abs(weight_sum() - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
    if (!(sigma_z > 0.0)) throw ValidationError("sigma_z must be > 0");
    if (!(lambda > 0.0)) throw ValidationError("lambda must be > 0");
    if (!(delta > 0.0 && delta < z_max)) throw ValidationError("delta must satisfy 0 < delta < z_max");
    if (beams_per_scan < 1) throw ValidationError("beams_per_scan must be >= 1");
  }

  /// Same model with every length measured in pixels of size `s` metres.
  BeamModelParams in_pixel_units(double s) const {
    BeamModelParams p = *this;
    p.sigma_z = sigma_z / s;
    p.lambda = lambda * s;
    p.delta = delta / s;
    p.z_max = z_max / s;
    return p;
  }
};

struct RangeScan {
  std::vector<double> ranges;  // metres
  std::vector<double> angles;  // radians, sensor frame
  double timestamp = 0.0;

  void validate() const {
    if (ranges.size() != angles.size()) throw ValidationError("scan ranges and angles differ in length");
  }
};

namespace density {

inline double gaussian(double z, double mean, double sigma) {
  const double d = (z - mean) / sigma;
  return std::exp(-0.5 * d * d) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

/// lambda e^{-lambda z} / (1 - e^{-lambda a}) on [0, a]; zero elsewhere or when a <= 0.
inline double truncated_exponential(double z, double lambda, double a) {
  if (a <= 0.0 || z < 0.0 || z > a) return 0.0;
  return lambda * std::exp(-lambda * z) / -std::expm1(-lambda * a);
}

inline double uniform(double z, double lo, double hi) { return (z >= lo && z <= hi) ? 1.0 / (hi - lo) : 0.0; }

}  // namespace density

/// Mixture density p(z | z_hat) with all lengths in the units of `p`.
inline double beam_density(double z, double z_hat, const BeamModelParams& p) {
  return p.w_hit * density::gaussian(z, z_hat, p.sigma_z) +
         p.w_dyn * density::truncated_exponential(z, p.lambda, z_hat) +
         p.w_max * density::uniform(z, 0.0, p.z_max) +
         p.w_rnd * density::uniform(z, p.z_max - p.delta, p.z_max + p.delta);
}

struct LikelihoodOptions {
  // Divide each beam density by s (change of variables from pixels back to
  // metres). Without it particles are rewarded by s^K for large scales.
  bool scale_jacobian = true;
  // Log-likelihood returned for poses outside the map.
  double out_of_map_log_likelihood = -1000.0;
  double density_floor = 1e-300;
};

/// Log-density of a metric range `z` given an expected range `z_hat_px` in
/// pixels at scale `s` metres per pixel.
inline double scaled_beam_log_density(double z, double z_hat_px, double s, const BeamModelParams& pixel_params,
                                      const LikelihoodOptions& opts) {
  double d = beam_density(z / s, z_hat_px, pixel_params);
  if (opts.scale_jacobian) d /= s;
  return std::log(std::max(d, opts.density_floor));
}

/// Evenly spaced beam indices: floor(k * n / count) for k < count, or all of them.
inline std::vector<std::size_t> subsample_beam_indices(std::size_t n, int count) {
  std::vector<std::size_t> idx;
  const std::size_t k = static_cast<std::size_t>(std::max(count, 0));
  if (n <= k) {
    idx.resize(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(k);
  for (std::size_t i = 0; i < k; ++i) idx.push_back(i * n / k);
  return idx;
}

struct GridCaster {
  double operator()(const SketchMap& map, double x, double y, double angle, double max_range) const {
    return raycast(map, x, y, angle, max_range);
  }
};

/// Pre-selected beams of one scan, reused across particles.
struct SubsampledScan {
  std::vector<double> ranges;
  std::vector<double> angles;

  static SubsampledScan from(const RangeScan& scan, int beams_per_scan) {
    scan.validate();
    SubsampledScan out;
    for (std::size_t i : subsample_beam_indices(scan.ranges.size(), beams_per_scan)) {
      out.ranges.push_back(scan.ranges[i]);
      out.angles.push_back(scan.angles[i]);
    }
    return out;
  }
};

template <typename Caster>
double scan_log_likelihood(const SubsampledScan& beams, const Pose2D& pose, double s, const SketchMap& map,
                           const BeamModelParams& p, const LikelihoodOptions& opts, Caster&& cast) {
  if (!map.contains(pose.x, pose.y)) return opts.out_of_map_log_likelihood;
  const BeamModelParams px = p.in_pixel_units(s);
  double total = 0.0;
  for (std::size_t i = 0; i < beams.ranges.size(); ++i) {
    const double z = std::clamp(beams.ranges[i], 0.0, p.z_max + p.delta);
    const double z_hat = cast(map, pose.x, pose.y, pose.theta + beams.angles[i], px.z_max);
    total += scaled_beam_log_density(z, z_hat, s, px, opts);
  }
  return total;
}

template <typename Caster>
double scan_log_likelihood(const RangeScan& scan, const Pose2D& pose, double s, const SketchMap& map,
                           const BeamModelParams& p, const LikelihoodOptions& opts, Caster&& cast) {
  return scan_log_likelihood(SubsampledScan::from(scan, p.beams_per_scan), pose, s, map, p, opts,
                             std::forward<Caster>(cast));
}

inline double scan_log_likelihood(const RangeScan& scan, const Pose2D& pose, double s, const SketchMap& map,
                                  const BeamModelParams& p, const LikelihoodOptions& opts = {}) {
  return scan_log_likelihood(scan, pose, s, map, p, opts, GridCaster{});
}

}  // namespace sketchloc
