#pragma once

// Filter driver: predict / weight / estimate / resample per scan, with the
// resampling policy, adaptive particle count and divergence recovery.

#include <optional>
#include <string>

#include "sketchloc/beam_model.hpp"
#include "sketchloc/particle_filter.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"

namespace sketchloc {

enum class ResampleMode { EveryStep, EssThreshold };
enum class EstimateMode { WeightedMean, MaxWeight };

struct RecoveryPolicy {
  bool enabled = true;
  double box_px = 150.0;  // side of the square re-seeded around the last estimate
};

struct FilterConfig {
  MotionNoiseParams motion;
  BeamModelParams beam;
  LikelihoodOptions likelihood;
  KldConfig kld;
  bool use_kld = true;
  ResampleMode resample = ResampleMode::EveryStep;
  double ess_fraction = 0.5;
  std::size_t particles = 5000;  // initial count
  RecoveryPolicy recovery;
  int workers = 1;

  void validate() const {
    motion.validate();
    beam.validate();
    kld.validate();
    if (particles < 1) throw ValidationError("particle count must be >= 1");
    if (!(ess_fraction > 0.0 && ess_fraction <= 1.0)) throw ValidationError("ess_fraction must be in (0, 1]");
  }
};

struct StepReport {
  Estimate estimate;
  Pose2D best_pose;
  double best_scale = 0.0;
  std::size_t particles = 0;  // count that was weighted this step
  double ess = 0.0;
  bool resampled = false;
  bool recovered = false;     // set was re-seeded after degenerating
};

class Localizer {
 public:
  Localizer(const SketchMap& map, FilterConfig cfg, std::uint64_t seed) : map_(&map), cfg_(std::move(cfg)), rng_(seed) {
    cfg_.validate();
  }

  void initialize(const InitRegion& region) {
    region_ = region.clipped_to(*map_);
    set_ = sketchloc::initialize(region_, cfg_.particles, rng_);
    last_ = estimate(set_);
  }

  StepReport step(const OdomIncrement& u, const RangeScan& scan) {
    if (set_.empty()) throw ValidationError("localizer not initialized");
    StepReport report;
    predict(set_, u, cfg_.motion, rng_, cfg_.workers);
    try {
      update_weights(set_, scan, *map_, cfg_.beam, cfg_.likelihood, cfg_.workers);
    } catch (const DegenerateWeightsError&) {
      if (!cfg_.recovery.enabled) throw;
      reseed_around(last_.pose);
      update_weights(set_, scan, *map_, cfg_.beam, cfg_.likelihood, cfg_.workers);
      report.recovered = true;
      ++recoveries_;
    }
    report.particles = set_.size();
    report.ess = effective_sample_size(set_);
    report.estimate = estimate(set_);
    const auto& best = best_particle(set_);
    report.best_pose = best.pose;
    report.best_scale = best.scale;
    last_ = report.estimate;

    const bool resample = cfg_.resample == ResampleMode::EveryStep ||
                          report.ess < cfg_.ess_fraction * static_cast<double>(set_.size());
    if (resample) {
      set_ = cfg_.use_kld ? kld_resample(set_, cfg_.kld, rng_) : resample_low_variance(set_, rng_);
      report.resampled = true;
    }
    return report;
  }

  Pose2D reported_pose(const StepReport& r, EstimateMode mode) const {
    return mode == EstimateMode::WeightedMean ? r.estimate.pose : r.best_pose;
  }

  const ParticleSet& particles() const { return set_; }
  const FilterConfig& config() const { return cfg_; }
  std::size_t recoveries() const { return recoveries_; }

 private:
  void reseed_around(const Pose2D& center) {
    InitRegion r = region_;
    r.rect = PixelRect::centered(center.x, center.y, cfg_.recovery.box_px, cfg_.recovery.box_px);
    r = r.clipped_to(*map_);
    if (!(r.rect.x1 > r.rect.x0 && r.rect.y1 > r.rect.y0)) r = region_;
    set_ = sketchloc::initialize(r, cfg_.particles, rng_);
  }

  const SketchMap* map_;
  FilterConfig cfg_;
  Rng rng_;
  ParticleSet set_;
  InitRegion region_;
  Estimate last_;
  std::size_t recoveries_ = 0;
};

}  // namespace sketchloc
