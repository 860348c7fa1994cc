#pragma once

// Sequential importance resampling over (pose, scale) with log-domain weights.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <unordered_set>
#include <vector>

#include "sketchloc/beam_model.hpp"
#include "sketchloc/error.hpp"
#include "sketchloc/parallel.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"

namespace sketchloc {

struct ScaledParticle {
  Pose2D pose;          // pixels
  double scale = 1.0;   // m/px
  double log_weight = 0.0;
};

struct ParticleSet {
  std::vector<ScaledParticle> particles;
  bool normalized = false;

  std::size_t size() const { return particles.size(); }
  bool empty() const { return particles.empty(); }
};

/// Raised when every particle receives the out-of-map likelihood floor.
class DegenerateWeightsError : public Error {
 public:
  DegenerateWeightsError(const std::string& what, std::size_t particles, double max_log_likelihood)
      : Error(what), particles_(particles), max_log_likelihood_(max_log_likelihood) {}
  std::size_t particles() const { return particles_; }
  double max_log_likelihood() const { return max_log_likelihood_; }

 private:
  std::size_t particles_;
  double max_log_likelihood_;
};

struct InitRegion {
  PixelRect rect;
  double theta_lo = -std::numbers::pi;
  double theta_hi = std::numbers::pi;
  double scale_lo = 0.01;
  double scale_hi = 1.0;

  void validate() const {
    if (!(rect.x1 > rect.x0 && rect.y1 > rect.y0)) throw ValidationError("init region rectangle is degenerate");
    if (theta_hi < theta_lo) throw ValidationError("init theta range is inverted");
    if (!(scale_lo > 0.0) || scale_hi < scale_lo) throw ValidationError("init scale range is invalid");
  }

  /// Intersects the rectangle with the map extent.
  InitRegion clipped_to(const SketchMap& map) const {
    InitRegion r = *this;
    r.rect.x0 = std::clamp(rect.x0, 0.0, static_cast<double>(map.width()));
    r.rect.x1 = std::clamp(rect.x1, 0.0, static_cast<double>(map.width()));
    r.rect.y0 = std::clamp(rect.y0, 0.0, static_cast<double>(map.height()));
    r.rect.y1 = std::clamp(rect.y1, 0.0, static_cast<double>(map.height()));
    return r;
  }
};

struct KldConfig {
  std::array<double, 4> bin_size{10.0, 10.0, 0.35, 0.05};  // px, px, rad, m/px
  double epsilon = 0.05;
  double z_quantile = 2.326;  // upper 1% standard-normal quantile
  std::size_t n_min = 500;
  std::size_t n_max = 20000;

  void validate() const {
    for (double b : bin_size) {
      if (!(b > 0.0)) throw ValidationError("KLD bin sizes must be positive");
    }
    if (!(epsilon > 0.0) || !(z_quantile > 0.0)) throw ValidationError("KLD epsilon and quantile must be positive");
    if (n_min < 1 || n_min > n_max) throw ValidationError("KLD requires 1 <= n_min <= n_max");
  }
};

namespace detail {

template <std::uniform_random_bit_generator G>
double uniform01(G& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double interpolate(double lo, double hi, double u) { return lo + (hi - lo) * u; }

}  // namespace detail

template <std::uniform_random_bit_generator G>
ParticleSet initialize(const InitRegion& region, std::size_t n, G& rng) {
  region.validate();
  if (n < 1) throw ValidationError("need at least one particle");
  ParticleSet set;
  set.particles.resize(n);
  const double lw = -std::log(static_cast<double>(n));
  for (auto& p : set.particles) {
    p.pose.x = detail::interpolate(region.rect.x0, region.rect.x1, detail::uniform01(rng));
    p.pose.y = detail::interpolate(region.rect.y0, region.rect.y1, detail::uniform01(rng));
    p.pose.theta = normalize_angle(detail::interpolate(region.theta_lo, region.theta_hi, detail::uniform01(rng)));
    p.scale = detail::interpolate(region.scale_lo, region.scale_hi, detail::uniform01(rng));
    p.log_weight = lw;
  }
  set.normalized = true;
  return set;
}

/// Samples the motion proposal for every particle. With several workers each
/// chunk draws from its own engine seeded from `rng`, so results depend on
/// the seed and the worker count only.
template <std::uniform_random_bit_generator G>
void predict(ParticleSet& set, const OdomIncrement& u, const MotionNoiseParams& mp, G& rng, int workers = 1) {
  u.validate();
  const auto advance = [&](ScaledParticle& p, auto& engine) {
    const double s_prev = p.scale;
    p.pose = apply_scaled_motion(p.pose, s_prev, compose(u.as_pose(), sample_noise(mp, engine)));
    p.scale = sample_scale(s_prev, mp.sigma_s, mp.s_min, mp.s_max, engine);
  };
  if (workers <= 1) {
    for (auto& p : set.particles) advance(p, rng);
    return;
  }
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(workers));
  for (auto& s : seeds) s = rng();
  parallel_chunks(set.size(), workers, [&](std::size_t b, std::size_t e, std::size_t w) {
    Rng engine(seeds[w]);
    for (std::size_t i = b; i < e; ++i) advance(set.particles[i], engine);
  });
}

inline double log_sum_exp(const std::vector<ScaledParticle>& ps) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : ps) m = std::max(m, p.log_weight);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (const auto& p : ps) acc += std::exp(p.log_weight - m);
  return m + std::log(acc);
}

/// Shifts log-weights so that their exponentials sum to one.
inline void normalize(ParticleSet& set) {
  if (set.empty()) throw ValidationError("particle set is empty");
  const double lse = log_sum_exp(set.particles);
  if (!std::isfinite(lse)) throw DegenerateWeightsError("particle weights are not finite", set.size(), lse);
  for (auto& p : set.particles) p.log_weight -= lse;
  set.normalized = true;
}

struct UpdateStats {
  double max_log_likelihood = 0.0;
  double mean_log_likelihood = 0.0;
};

/// Adds the scan log-likelihood to every particle and renormalizes.
/// Throws DegenerateWeightsError when no particle scores above the out-of-map floor.
inline UpdateStats update_weights(ParticleSet& set, const RangeScan& scan, const SketchMap& map,
                                  const BeamModelParams& bp, const LikelihoodOptions& opts = {}, int workers = 1) {
  if (set.empty()) throw ValidationError("particle set is empty");
  const SubsampledScan beams = SubsampledScan::from(scan, bp.beams_per_scan);
  std::vector<double> ll(set.size());
  parallel_chunks(set.size(), workers, [&](std::size_t b, std::size_t e, std::size_t) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& p = set.particles[i];
      ll[i] = scan_log_likelihood(beams, p.pose, p.scale, map, bp, opts, GridCaster{});
    }
  });
  UpdateStats stats{-std::numeric_limits<double>::infinity(), 0.0};
  for (double v : ll) {
    stats.max_log_likelihood = std::max(stats.max_log_likelihood, v);
    stats.mean_log_likelihood += v / static_cast<double>(ll.size());
  }
  if (!std::isfinite(stats.max_log_likelihood) || stats.max_log_likelihood <= opts.out_of_map_log_likelihood) {
    throw DegenerateWeightsError("all particles scored at the likelihood floor", set.size(), stats.max_log_likelihood);
  }
  for (std::size_t i = 0; i < ll.size(); ++i) set.particles[i].log_weight += ll[i];
  normalize(set);
  return stats;
}

inline std::vector<double> weights(const ParticleSet& set) {
  std::vector<double> w(set.size());
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : set.particles) m = std::max(m, p.log_weight);
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(set.particles[i].log_weight - m);
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

inline double effective_sample_size(const ParticleSet& set) {
  double sq = 0.0;
  for (double w : weights(set)) sq += w * w;
  return 1.0 / sq;
}

inline void set_uniform_weights(std::vector<ScaledParticle>& ps) {
  const double lw = -std::log(static_cast<double>(ps.size()));
  for (auto& p : ps) p.log_weight = lw;
}

/// Systematic (low-variance) resampling: one uniform offset, N evenly spaced pointers.
template <std::uniform_random_bit_generator G>
ParticleSet resample_low_variance(const ParticleSet& set, G& rng) {
  if (set.empty()) throw ValidationError("particle set is empty");
  const std::vector<double> w = weights(set);
  const std::size_t n = set.size();
  const double step = 1.0 / static_cast<double>(n);
  const double r = detail::uniform01(rng) * step;
  ParticleSet out;
  out.particles.reserve(n);
  double c = w[0];
  std::size_t i = 0;
  for (std::size_t m = 0; m < n; ++m) {
    const double u = r + static_cast<double>(m) * step;
    while (u > c && i + 1 < n) c += w[++i];
    out.particles.push_back(set.particles[i]);
  }
  set_uniform_weights(out.particles);
  out.normalized = true;
  return out;
}

/// Sample size bound that keeps the KL divergence between the sample-based
/// histogram over `k` occupied bins and the true posterior below epsilon with
/// probability 1 - delta (z_quantile is the upper 1 - delta normal quantile).
inline std::size_t kld_required_n(std::size_t k, const KldConfig& cfg) {
  if (k <= 1) return cfg.n_min;
  const double km1 = static_cast<double>(k - 1);
  const double a = 2.0 / (9.0 * km1);
  const double b = 1.0 - a + std::sqrt(a) * cfg.z_quantile;
  const double n = std::ceil(km1 / (2.0 * cfg.epsilon) * b * b * b);
  if (n >= static_cast<double>(cfg.n_max)) return cfg.n_max;
  return std::max(cfg.n_min, static_cast<std::size_t>(n));
}

namespace detail {

struct BinHash {
  std::size_t operator()(const std::array<std::int64_t, 4>& b) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (auto v : b) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

inline std::array<std::int64_t, 4> bin_of(const ScaledParticle& p, const std::array<double, 4>& size) {
  return {static_cast<std::int64_t>(std::floor(p.pose.x / size[0])),
          static_cast<std::int64_t>(std::floor(p.pose.y / size[1])),
          static_cast<std::int64_t>(std::floor(p.pose.theta / size[2])),
          static_cast<std::int64_t>(std::floor(p.scale / size[3]))};
}

}  // namespace detail

/// Number of distinct KLD bins occupied by the set.
inline std::size_t occupied_bins(const ParticleSet& set, const KldConfig& cfg) {
  std::unordered_set<std::array<std::int64_t, 4>, detail::BinHash> bins;
  for (const auto& p : set.particles) bins.insert(detail::bin_of(p, cfg.bin_size));
  return bins.size();
}

/// Adaptive resampling: draws weight-proportional particles one at a time and
/// stops once the count reaches the KLD bound for the bins occupied so far.
template <std::uniform_random_bit_generator G>
ParticleSet kld_resample(const ParticleSet& set, const KldConfig& cfg, G& rng) {
  cfg.validate();
  if (set.empty()) throw ValidationError("particle set is empty");
  const std::vector<double> w = weights(set);
  std::vector<double> cdf(w.size());
  std::partial_sum(w.begin(), w.end(), cdf.begin());
  const double total = cdf.back();

  std::unordered_set<std::array<std::int64_t, 4>, detail::BinHash> bins;
  ParticleSet out;
  out.particles.reserve(std::min(cfg.n_max, std::max(cfg.n_min, set.size())));
  while (out.size() < cfg.n_max) {
    const double u = detail::uniform01(rng) * total;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    const auto& picked = set.particles[static_cast<std::size_t>(it - cdf.begin())];
    out.particles.push_back(picked);
    bins.insert(detail::bin_of(picked, cfg.bin_size));
    if (out.size() >= cfg.n_min && out.size() >= kld_required_n(bins.size(), cfg)) break;
  }
  set_uniform_weights(out.particles);
  out.normalized = true;
  return out;
}

struct Estimate {
  Pose2D pose;
  double scale = 0.0;
  std::array<double, 3> cov_xy{0.0, 0.0, 0.0};  // xx, xy, yy
  double theta_circular_variance = 0.0;         // 1 - mean resultant length
  double scale_variance = 0.0;
};

/// Weighted mean of position and scale, circular mean of heading.
inline Estimate estimate(const ParticleSet& set) {
  if (set.empty()) throw ValidationError("particle set is empty");
  const std::vector<double> w = weights(set);
  Estimate e;
  double c = 0.0, s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& p = set.particles[i];
    e.pose.x += w[i] * p.pose.x;
    e.pose.y += w[i] * p.pose.y;
    e.scale += w[i] * p.scale;
    c += w[i] * std::cos(p.pose.theta);
    s += w[i] * std::sin(p.pose.theta);
  }
  e.pose.theta = normalize_angle(std::atan2(s, c));
  e.theta_circular_variance = 1.0 - std::hypot(c, s);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto& p = set.particles[i];
    const double dx = p.pose.x - e.pose.x;
    const double dy = p.pose.y - e.pose.y;
    const double ds = p.scale - e.scale;
    e.cov_xy[0] += w[i] * dx * dx;
    e.cov_xy[1] += w[i] * dx * dy;
    e.cov_xy[2] += w[i] * dy * dy;
    e.scale_variance += w[i] * ds * ds;
  }
  return e;
}

inline const ScaledParticle& best_particle(const ParticleSet& set) {
  if (set.empty()) throw ValidationError("particle set is empty");
  return *std::max_element(set.particles.begin(), set.particles.end(),
                           [](const auto& a, const auto& b) { return a.log_weight < b.log_weight; });
}

}  // namespace sketchloc
