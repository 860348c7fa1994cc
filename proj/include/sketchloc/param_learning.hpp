#pragma once

// Beam-model calibration: per-sketch scale grid search and maximum-likelihood
// fitting of the mixture parameters by expectation-maximization.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "sketchloc/beam_model.hpp"
#include "sketchloc/error.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"
#include "sketchloc/text.hpp"

namespace sketchloc {

struct CalibrationSample {
  std::string sketch_id;
  Pose2D pose;              // pixels
  double beam_angle = 0.0;  // sensor frame
  double z = 0.0;           // measured range, metres
  double z_hat = 0.0;       // ray-cast range on the sketch, pixels (unbounded)
};

/// Sum over samples of the scaled beam log-density at scale `s`.
inline double scale_score(const std::vector<CalibrationSample>& samples, double s, const BeamModelParams& p0,
                          const LikelihoodOptions& opts = {}) {
  const BeamModelParams px = p0.in_pixel_units(s);
  double total = 0.0;
  for (const auto& c : samples) total += scaled_beam_log_density(c.z, std::min(c.z_hat, px.z_max), s, px, opts);
  return total;
}

/// Grid value maximizing scale_score; ties resolve to the smallest scale.
inline double best_scale_grid(const std::vector<CalibrationSample>& samples, const std::vector<double>& grid,
                              const BeamModelParams& p0, const LikelihoodOptions& opts = {}) {
  if (samples.empty()) throw ValidationError("grid search needs at least one sample");
  if (grid.empty()) throw ValidationError("grid search needs at least one scale");
  double best_s = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (double s : grid) {
    if (!(s > 0.0)) throw ValidationError("grid scales must be positive");
    const double score = scale_score(samples, s, p0, opts);
    if (first || score > best || (score == best && s < best_s)) {
      best = score;
      best_s = s;
      first = false;
    }
  }
  return best_s;
}

/// Inclusive arithmetic grid lo, lo + step, ..., up to hi (within step/2).
inline std::vector<double> linear_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) throw ValidationError("invalid grid bounds");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

/// A measured range paired with its expected range, both in metres.
struct RangePair {
  double z = 0.0;
  double z_hat = 0.0;
};

struct FitOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // stop when the log-likelihood gain drops below this
  double sigma_floor = 1e-4;
  double weight_floor = 1e-6;
  double lambda_min = 1e-6;
  std::size_t recommended_samples = 100;
};

struct FitReport {
  BeamModelParams params;
  std::vector<double> log_likelihood;  // before each iteration, then final
  int iterations = 0;
  bool converged = false;
  bool monotone = true;
  std::vector<std::string> floored_components;
  std::vector<std::string> warnings;
};

namespace detail {

struct Components {
  double hit, dyn, max, rnd;
};

inline Components component_densities(double z, double z_hat, const BeamModelParams& p) {
  return {density::gaussian(z, z_hat, p.sigma_z), density::truncated_exponential(z, p.lambda, z_hat),
          density::uniform(z, 0.0, p.z_max), density::uniform(z, p.z_max - p.delta, p.z_max + p.delta)};
}

inline double mixture_log_likelihood(const std::vector<RangePair>& data, const BeamModelParams& p) {
  double ll = 0.0;
  for (const auto& d : data) ll += std::log(std::max(beam_density(d.z, d.z_hat, p), 1e-300));
  return ll;
}

/// Maximizes sum_k n_k log w_k subject to sum w = 1 and w_k >= floor.
inline std::array<double, 4> floored_weights(const std::array<double, 4>& counts, double floor) {
  std::array<bool, 4> pinned{false, false, false, false};
  std::array<double, 4> w{};
  for (int pass = 0; pass < 4; ++pass) {
    double free_mass = 1.0, free_count = 0.0;
    for (int k = 0; k < 4; ++k) {
      if (pinned[k]) {
        free_mass -= floor;
      } else {
        free_count += counts[k];
      }
    }
    bool changed = false;
    for (int k = 0; k < 4; ++k) {
      if (pinned[k]) {
        w[k] = floor;
        continue;
      }
      w[k] = free_count > 0.0 ? free_mass * counts[k] / free_count : free_mass;
      if (w[k] < floor) {
        pinned[k] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (int k = 0; k < 4; ++k) w[k] = std::max(w[k], pinned[k] ? floor : w[k]);
  return w;
}

/// Derivative of the responsibility-weighted truncated-exponential
/// log-likelihood with respect to lambda. Decreasing in lambda.
inline double texp_gradient(double lambda, const std::vector<RangePair>& data, const std::vector<double>& r) {
  double g = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (r[j] == 0.0) continue;
    const double a = data[j].z_hat;
    g += r[j] * (1.0 / lambda - data[j].z - a / std::expm1(lambda * a));
  }
  return g;
}

inline double texp_curvature(double lambda, const std::vector<RangePair>& data, const std::vector<double>& r) {
  double h = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    if (r[j] == 0.0) continue;
    const double x = lambda * data[j].z_hat;
    const double sh = std::sinh(0.5 * x);
    const double ratio = x < 700.0 ? (x * x) / (4.0 * sh * sh) : 0.0;
    h += r[j] * (ratio - 1.0) / (lambda * lambda);
  }
  return h;
}

/// Safeguarded Newton on the (concave) lambda objective.
inline double solve_lambda(double lambda0, const std::vector<RangePair>& data, const std::vector<double>& r,
                           double lambda_min) {
  if (texp_gradient(lambda_min, data, r) <= 0.0) return lambda_min;
  double lo = lambda_min;
  double hi = std::max(lambda0, 2.0 * lambda_min);
  while (texp_gradient(hi, data, r) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) return hi;
  }
  double x = std::clamp(lambda0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double g = texp_gradient(x, data, r);
    if (g > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double h = texp_curvature(x, data, r);
    double next = h < 0.0 ? x - g / h : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * std::max(1.0, x) || hi - lo <= 1e-14 * hi) return next;
    x = next;
  }
  return x;
}

}  // namespace detail

/// EM over the four-component mixture. Weights, sigma_z and lambda are
/// learned; delta and z_max stay fixed.
inline FitReport fit_beam_params(const std::vector<RangePair>& data, const BeamModelParams& init,
                                 const FitOptions& opts = {}) {
  if (data.empty()) throw ValidationError("fit needs at least one sample");
  FitReport rep;
  if (data.size() < opts.recommended_samples) {
    rep.warnings.push_back("only " + std::to_string(data.size()) + " samples; at least " +
                           std::to_string(opts.recommended_samples) + " recommended");
  }
  BeamModelParams p = init;
  p.normalize_weights();
  p.sigma_z = std::max(p.sigma_z, opts.sigma_floor);
  p.lambda = std::max(p.lambda, opts.lambda_min);

  const std::size_t n = data.size();
  std::vector<double> r_hit(n), r_dyn(n);
  std::array<double, 4> counts{};
  double ll = detail::mixture_log_likelihood(data, p);
  rep.log_likelihood.push_back(ll);
  std::array<bool, 4> floored{false, false, false, false};

  for (int it = 0; it < opts.max_iterations; ++it) {
    counts = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      const auto f = detail::component_densities(data[j].z, data[j].z_hat, p);
      const double a = p.w_hit * f.hit, b = p.w_dyn * f.dyn, c = p.w_max * f.max, d = p.w_rnd * f.rnd;
      const double total = a + b + c + d;
      if (!(total > 0.0)) {
        r_hit[j] = r_dyn[j] = 0.0;
        continue;
      }
      r_hit[j] = a / total;
      r_dyn[j] = b / total;
      counts[0] += r_hit[j];
      counts[1] += r_dyn[j];
      counts[2] += c / total;
      counts[3] += d / total;
    }

    const auto w = detail::floored_weights(counts, opts.weight_floor);
    for (int k = 0; k < 4; ++k) floored[k] = floored[k] || counts[k] / static_cast<double>(n) < opts.weight_floor;
    p.w_hit = w[0];
    p.w_dyn = w[1];
    p.w_max = w[2];
    p.w_rnd = w[3];

    if (counts[0] > 0.0) {
      double ss = 0.0;
      for (std::size_t j = 0; j < n; ++j) ss += r_hit[j] * (data[j].z - data[j].z_hat) * (data[j].z - data[j].z_hat);
      p.sigma_z = std::max(std::sqrt(ss / counts[0]), opts.sigma_floor);
    }
    if (counts[1] > 0.0) p.lambda = detail::solve_lambda(p.lambda, data, r_dyn, opts.lambda_min);

    const double next = detail::mixture_log_likelihood(data, p);
    rep.log_likelihood.push_back(next);
    rep.iterations = it + 1;
    if (next < ll - 1e-9 * std::max(1.0, std::abs(ll))) rep.monotone = false;
    const double gain = next - ll;
    ll = next;
    if (gain < opts.tolerance) {
      rep.converged = true;
      break;
    }
  }
  static constexpr const char* names[4] = {"hit", "dyn", "max", "rnd"};
  for (int k = 0; k < 4; ++k) {
    if (floored[k]) rep.floored_components.emplace_back(names[k]);
  }
  rep.params = p;
  return rep;
}

/// Parses `sketch_id,pose_x,pose_y,pose_theta,beam_angle,z`; a header row is
/// skipped. z_hat is left at zero until ray-cast.
inline std::vector<CalibrationSample> parse_calibration_csv(std::string_view content) {
  std::vector<CalibrationSample> out;
  std::size_t line_no = 0, start = 0;
  bool first_row = true;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const std::string_view line = text::trim(content.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto f = text::split(line, ',');
    if (f.size() != 6) throw FormatError("calibration line " + std::to_string(line_no) + ": expected 6 fields");
    const bool header = first_row && text::trim(f[0]) == "sketch_id";
    first_row = false;
    if (header) continue;
    try {
      CalibrationSample c;
      c.sketch_id = std::string(text::trim(f[0]));
      c.pose = {text::parse_double(f[1]), text::parse_double(f[2]), text::parse_double(f[3])};
      c.beam_angle = text::parse_double(f[4]);
      c.z = text::parse_double(f[5]);
      if (c.z < 0.0) throw FormatError("negative range");
      out.push_back(std::move(c));
    } catch (const FormatError& e) {
      throw FormatError("calibration line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::string calibration_csv_header() { return "sketch_id,pose_x,pose_y,pose_theta,beam_angle,z\n"; }

/// CSV text accepted by parse_calibration_csv; `comment` goes on a leading # line.
inline std::string write_calibration_csv(const std::vector<CalibrationSample>& samples, std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += calibration_csv_header();
  for (const auto& c : samples) {
    out += c.sketch_id + "," + text::format_double(c.pose.x) + "," + text::format_double(c.pose.y) + "," +
           text::format_double(c.pose.theta) + "," + text::format_double(c.beam_angle) + "," +
           text::format_double(c.z) + "\n";
  }
  return out;
}

/// Fills z_hat for every sample by ray casting on its sketch (no range cap).
inline void raycast_expected(std::vector<CalibrationSample>& samples, const std::map<std::string, SketchMap>& sketches) {
  for (auto& c : samples) {
    auto it = sketches.find(c.sketch_id);
    if (it == sketches.end()) throw ValidationError("no sketch loaded for id '" + c.sketch_id + "'");
    c.z_hat = raycast(it->second, c.pose.x, c.pose.y, c.pose.theta + c.beam_angle,
                      std::numeric_limits<double>::infinity());
  }
}

struct CalibrationGroup {
  std::string sketch_id;
  Pose2D pose;
  std::size_t samples = 0;
  double best_scale = 0.0;
};

struct LearnReport {
  std::vector<CalibrationGroup> groups;
  FitReport fit;
};

/// Grid-searches the best scale for every (sketch, pose) group, converts the
/// expected ranges to metres with it, and fits the mixture to all pairs.
/// With rounds > 1 the grid search is repeated under the freshly fitted
/// parameters (coordinate ascent over scales and mixture).
inline LearnReport learn_beam_params(const std::vector<CalibrationSample>& samples, const std::vector<double>& grid,
                                     const BeamModelParams& p0, const LikelihoodOptions& lopts = {},
                                     const FitOptions& fopts = {}, int rounds = 1) {
  if (samples.empty()) throw ValidationError("no calibration samples");
  if (rounds < 1) throw ValidationError("learning rounds must be >= 1");
  std::map<std::tuple<std::string, double, double, double>, std::vector<CalibrationSample>> groups;
  std::vector<std::tuple<std::string, double, double, double>> order;
  for (const auto& c : samples) {
    const auto key = std::make_tuple(c.sketch_id, c.pose.x, c.pose.y, c.pose.theta);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(c);
  }
  LearnReport rep;
  BeamModelParams p = p0;
  for (int round = 0; round < rounds; ++round) {
    rep.groups.clear();
    std::vector<RangePair> pairs;
    for (const auto& key : order) {
      const auto& g = groups[key];
      const double s = best_scale_grid(g, grid, p, lopts);
      rep.groups.push_back({g.front().sketch_id, g.front().pose, g.size(), s});
      for (const auto& c : g) pairs.push_back({c.z, std::min(c.z_hat * s, p.z_max)});
    }
    rep.fit = fit_beam_params(pairs, p, fopts);
    p = rep.fit.params;
  }
  return rep;
}

}  // namespace sketchloc
