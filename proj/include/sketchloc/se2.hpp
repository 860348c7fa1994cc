#pragma once

// SE(2) pose algebra and the pixel-frame motion proposal.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "sketchloc/error.hpp"

namespace sketchloc {

/// Default random engine; every stochastic routine also accepts any URBG.
using Rng = std::mt19937_64;

/// Wraps an angle into [-pi, pi).
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = a - two_pi * std::floor((a + std::numbers::pi) / two_pi);
  if (r >= std::numbers::pi) r -= two_pi;
  if (r < -std::numbers::pi) r += two_pi;
  return r;
}

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// a ⊕ b: express b, given in a's frame, in a's parent frame.
inline Pose2D compose(const Pose2D& a, const Pose2D& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, normalize_angle(a.theta + b.theta)};
}

inline Pose2D inverse(const Pose2D& p) {
  const double c = std::cos(p.theta);
  const double s = std::sin(p.theta);
  return {-c * p.x - s * p.y, s * p.x - c * p.y, normalize_angle(-p.theta)};
}

/// Relative motion that takes `from` to `to`, expressed in `from`'s frame.
inline Pose2D between(const Pose2D& from, const Pose2D& to) { return compose(inverse(from), to); }

/// Incremental odometry in the robot frame, metric units.
struct OdomIncrement {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  Pose2D as_pose() const { return {dx, dy, dtheta}; }
  static OdomIncrement from_pose(const Pose2D& p) { return {p.x, p.y, p.theta}; }

  void validate() const {
    if (!std::isfinite(dx) || !std::isfinite(dy) || !std::isfinite(dtheta)) {
      throw ValidationError("odometry increment is not finite");
    }
    if (std::abs(dtheta) > std::numbers::pi) throw ValidationError("odometry rotation exceeds pi per step");
  }
};

struct MotionNoiseParams {
  // Translational covariance in m^2, row-major 2x2.
  std::array<double, 4> sigma_q{0.1, 0.0, 0.0, 0.1};
  double sigma_theta = 0.05;  // rad
  double sigma_s = 0.1;       // m/px per step
  double s_min = 0.001;       // m/px
  double s_max = 10.0;        // m/px

  static MotionNoiseParams zero() {
    MotionNoiseParams p;
    p.sigma_q = {0.0, 0.0, 0.0, 0.0};
    p.sigma_theta = 0.0;
    p.sigma_s = 0.0;
    return p;
  }

  void validate() const {
    const double a = sigma_q[0], b = sigma_q[1], c = sigma_q[2], d = sigma_q[3];
    if (std::abs(b - c) > 1e-12 * (1.0 + std::abs(b))) throw ValidationError("sigma_q must be symmetric");
    if (a < 0.0 || d < 0.0 || a * d - b * c < -1e-15) throw ValidationError("sigma_q must be positive semi-definite");
    if (!(sigma_theta >= 0.0)) throw ValidationError("sigma_theta must be >= 0");
    if (!(sigma_s >= 0.0)) throw ValidationError("sigma_s must be >= 0");
    if (!(s_min > 0.0 && s_min < s_max)) throw ValidationError("scale bounds must satisfy 0 < s_min < s_max");
  }
};

/// Lower-triangular factor of a 2x2 PSD matrix: {l11, l21, l22}.
inline std::array<double, 3> cholesky2(const std::array<double, 4>& m) {
  const double l11 = std::sqrt(std::max(0.0, m[0]));
  const double l21 = l11 > 0.0 ? m[2] / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, m[3] - l21 * l21));
  return {l11, l21, l22};
}

/// Zero-mean odometry perturbation: q ~ N(0, sigma_q), theta ~ WN(0, sigma_theta^2).
/// The wrapped normal is sampled as a plain normal folded onto [-pi, pi).
template <std::uniform_random_bit_generator G>
Pose2D sample_noise(const MotionNoiseParams& p, G& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto l = cholesky2(p.sigma_q);
  const double u = n01(rng);
  const double v = n01(rng);
  const double w = n01(rng);
  return {l[0] * u, l[1] * u + l[2] * v, normalize_angle(p.sigma_theta * w)};
}

/// Applies odometry projected into the pixel frame:
/// pose ⊕ S⁻¹(u ⊕ e), S = diag(s, s, 1). Rotation is never scaled.
inline Pose2D apply_scaled_motion(const Pose2D& pose, double s, const Pose2D& metric_motion) {
  return compose(pose, Pose2D{metric_motion.x / s, metric_motion.y / s, metric_motion.theta});
}

template <std::uniform_random_bit_generator G>
Pose2D propagate(const Pose2D& pose, double s, const OdomIncrement& u, const MotionNoiseParams& p, G& rng) {
  u.validate();
  const Pose2D e = sample_noise(p, rng);
  return apply_scaled_motion(pose, s, compose(u.as_pose(), e));
}

/// Brownian scale step s + eps, eps ~ N(0, sigma_s^2), clamped to [s_min, s_max].
inline double step_scale(double s, double eps, double s_min, double s_max) { return std::clamp(s + eps, s_min, s_max); }

template <std::uniform_random_bit_generator G>
double sample_scale(double s, double sigma_s, double s_min, double s_max, G& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  return step_scale(s, sigma_s * n01(rng), s_min, s_max);
}

}  // namespace sketchloc
