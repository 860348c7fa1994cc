#pragma once

// Run configuration: INI-style text, one [block] per module, `key = value`
// lines, `#` comments. Unknown blocks or keys are rejected so typos surface.
// dump_config() writes the fully resolved configuration in a canonical form;
// its hash tags every artifact.

#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "sketchloc/error.hpp"
#include "sketchloc/localizer.hpp"
#include "sketchloc/map_metadata.hpp"
#include "sketchloc/param_learning.hpp"
#include "sketchloc/sim2d.hpp"
#include "sketchloc/text.hpp"

namespace sketchloc {

/// Raw parsed text: block -> key -> value, keeping track of what was read.
class ConfigFile {
 public:
  static ConfigFile parse(std::string_view content) {
    ConfigFile f;
    std::string block;
    std::size_t line_no = 0;
    for (auto raw : text::split(content, '\n')) {
      ++line_no;
      if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      const auto line = text::trim(raw);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) throw ConfigError(where(line_no) + "malformed block header");
        block = std::string(text::trim(line.substr(1, line.size() - 2)));
        f.blocks_[block];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ConfigError(where(line_no) + "expected key = value");
      if (block.empty()) throw ConfigError(where(line_no) + "key outside of a [block]");
      const auto key = std::string(text::trim(line.substr(0, eq)));
      if (key.empty()) throw ConfigError(where(line_no) + "empty key");
      auto& b = f.blocks_[block];
      if (b.count(key)) throw ConfigError(where(line_no) + "duplicate key '" + key + "' in [" + block + "]");
      b[key] = std::string(text::trim(line.substr(eq + 1)));
    }
    return f;
  }

  bool has_block(const std::string& block) const { return blocks_.count(block) != 0; }

  std::optional<std::string> get(const std::string& block, const std::string& key) {
    auto b = blocks_.find(block);
    if (b == blocks_.end()) return std::nullopt;
    auto it = b->second.find(key);
    if (it == b->second.end()) return std::nullopt;
    used_.insert(block + "." + key);
    return it->second;
  }

  /// Keys of `block` starting with `prefix`, marked as read.
  std::map<std::string, std::string> with_prefix(const std::string& block, const std::string& prefix) {
    std::map<std::string, std::string> out;
    auto b = blocks_.find(block);
    if (b == blocks_.end()) return out;
    for (const auto& [k, v] : b->second) {
      if (k.size() > prefix.size() && k.starts_with(prefix)) {
        out[k.substr(prefix.size())] = v;
        used_.insert(block + "." + k);
      }
    }
    return out;
  }

  void read(const std::string& block, const std::string& key, double& v) {
    if (auto s = get(block, key)) v = convert<double>(block, key, *s);
  }
  void read(const std::string& block, const std::string& key, int& v) {
    if (auto s = get(block, key)) v = static_cast<int>(convert<long long>(block, key, *s));
  }
  template <class U>
    requires(std::is_unsigned_v<U> && !std::is_same_v<U, bool>)
  void read(const std::string& block, const std::string& key, U& v) {
    if (auto s = get(block, key)) {
      const long long n = convert<long long>(block, key, *s);
      if (n < 0) throw ConfigError("[" + block + "] " + key + " must be >= 0");
      v = static_cast<U>(n);
    }
  }
  void read(const std::string& block, const std::string& key, bool& v) {
    if (auto s = get(block, key)) {
      try {
        v = detail::parse_bool(*s);
      } catch (const Error& e) {
        throw ConfigError("[" + block + "] " + key + ": " + e.what());
      }
    }
  }
  void read(const std::string& block, const std::string& key, std::string& v) {
    if (auto s = get(block, key)) v = *s;
  }

  /// Throws on any block or key that nothing consumed.
  void reject_unused() const {
    for (const auto& [block, keys] : blocks_) {
      for (const auto& [k, _] : keys) {
        if (!used_.count(block + "." + k)) throw ConfigError("unknown key '" + k + "' in [" + block + "]");
      }
    }
  }

  void reject_unknown_blocks(const std::set<std::string>& known) const {
    for (const auto& [block, _] : blocks_) {
      if (!known.count(block)) throw ConfigError("unknown block [" + block + "]");
    }
  }

 private:
  static std::string where(std::size_t line) { return "config line " + std::to_string(line) + ": "; }

  template <class T>
  static T convert(const std::string& block, const std::string& key, const std::string& s) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        return text::parse_double(s);
      } else {
        return text::parse_int(s);
      }
    } catch (const Error& e) {
      throw ConfigError("[" + block + "] " + key + ": " + e.what());
    }
  }

  std::map<std::string, std::map<std::string, std::string>> blocks_;
  std::set<std::string> used_;
};

struct InitConfig {
  std::optional<PixelRect> rect;  // explicit rectangle, or
  std::optional<std::array<double, 2>> center;
  double size = 150.0;            // side of the square around `center`
  double theta_lo = -std::numbers::pi, theta_hi = std::numbers::pi;
  double scale_lo = 0.01, scale_hi = 1.0;

  InitRegion region() const {
    InitRegion r;
    if (rect) {
      r.rect = *rect;
    } else if (center) {
      r.rect = PixelRect::centered((*center)[0], (*center)[1], size, size);
    } else {
      throw ConfigError("[init] needs x0,y0,x1,y1 or center_x,center_y");
    }
    r.theta_lo = theta_lo;
    r.theta_hi = theta_hi;
    r.scale_lo = scale_lo;
    r.scale_hi = scale_hi;
    return r;
  }
};

/// Synthetic run description for `simulate`.
struct SimConfig {
  std::string scenario = "room";     // room | apartment | custom
  double distortion = 0.0;           // extra aspect distortion of the apartment sketch
  std::string route = "0";           // room: path index; apartment: "from->to"
  std::vector<Waypoint> waypoints;   // custom: metric waypoints
  std::string world;                 // custom: world raster
  double world_resolution = 0.05;    // custom: m/cell
  double speed = 0.05, turn_rate = 0.15, capture_radius = 0.2, dt = 0.1;
  SensorSpec sensor;
  double odom_sigma_q = 2.5e-5;      // m^2 per step, isotropic
  double odom_sigma_theta = 0.003;   // rad per step
  double range_noise = 0.03;         // m
  bool calibration = false;          // also write calibration scans
};

struct LearnConfig {
  std::string calibration;                    // CSV path
  std::map<std::string, std::string> sketches;  // sketch id -> raster path
  double grid_lo = 0.02, grid_hi = 0.15, grid_step = 0.0025;
  int rounds = 1;
  FitOptions fit;
};

struct EvalConfig {
  std::vector<std::string> results;              // final-estimate JSON files or directories
  std::string reference;                         // reference map raster for the ratio analysis
  std::map<std::string, std::string> sketches;   // sketch label -> raster path
};

struct RunConfig {
  std::string base_dir = ".";  // relative paths are resolved against this
  std::string map, metadata, log;
  std::uint64_t seed = 0;
  int render_stride = 0;
  EstimateMode estimate = EstimateMode::WeightedMean;
  std::string route_label, sketch_label, target_room;
  InitConfig init;
  FilterConfig filter;
  bool normalize_weights = true;
  std::string learned_beam;  // fit report whose mixture replaces the [beam] values
  SimConfig sim;
  LearnConfig learn;
  EvalConfig eval;

  std::string resolve(const std::string& path) const {
    if (path.empty()) return path;
    const std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
  }
};

namespace detail {

inline std::vector<double> parse_list(std::string_view v, std::size_t n, const std::string& what) {
  const auto parts = text::split(v, ',');
  if (parts.size() != n) throw ConfigError(what + ": expected " + std::to_string(n) + " comma-separated numbers");
  std::vector<double> out;
  for (auto p : parts) {
    try {
      out.push_back(text::parse_double(p));
    } catch (const Error& e) {
      throw ConfigError(what + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<Waypoint> parse_waypoints(std::string_view v) {
  std::vector<Waypoint> out;
  for (auto part : text::split(v, ';')) {
    if (text::trim(part).empty()) continue;
    const auto xy = parse_list(part, 2, "[sim] waypoints");
    out.push_back({xy[0], xy[1]});
  }
  return out;
}

}  // namespace detail

/// Parses a configuration. Every value defaults to the library defaults.
inline RunConfig parse_run_config(std::string_view content, const std::string& base_dir = ".") {
  ConfigFile f = ConfigFile::parse(content);
  f.reject_unknown_blocks({"run", "init", "motion", "beam", "filter", "kld", "sim", "learn", "eval"});
  RunConfig c;
  c.base_dir = base_dir;

  f.read("run", "map", c.map);
  f.read("run", "metadata", c.metadata);
  f.read("run", "log", c.log);
  f.read("run", "seed", c.seed);
  f.read("run", "render_stride", c.render_stride);
  f.read("run", "route", c.route_label);
  f.read("run", "sketch", c.sketch_label);
  f.read("run", "target_room", c.target_room);
  if (auto e = f.get("run", "estimate")) {
    if (*e == "mean") c.estimate = EstimateMode::WeightedMean;
    else if (*e == "max_weight") c.estimate = EstimateMode::MaxWeight;
    else throw ConfigError("[run] estimate must be mean or max_weight");
  }
  if (c.render_stride < 0) throw ConfigError("[run] render_stride must be >= 0");

  auto& in = c.init;
  std::optional<std::string> x0 = f.get("init", "x0"), y0 = f.get("init", "y0"), x1 = f.get("init", "x1"),
                             y1 = f.get("init", "y1");
  if (x0 || y0 || x1 || y1) {
    if (!(x0 && y0 && x1 && y1)) throw ConfigError("[init] needs all of x0, y0, x1, y1");
    in.rect = PixelRect{detail::parse_list(*x0, 1, "[init] x0")[0], detail::parse_list(*y0, 1, "[init] y0")[0],
                        detail::parse_list(*x1, 1, "[init] x1")[0], detail::parse_list(*y1, 1, "[init] y1")[0]};
  }
  std::optional<std::string> cx = f.get("init", "center_x"), cy = f.get("init", "center_y");
  if (cx || cy) {
    if (!(cx && cy)) throw ConfigError("[init] needs both center_x and center_y");
    in.center = std::array<double, 2>{detail::parse_list(*cx, 1, "[init] center_x")[0],
                                      detail::parse_list(*cy, 1, "[init] center_y")[0]};
  }
  if (in.rect && in.center) throw ConfigError("[init] give either a rectangle or a center, not both");
  f.read("init", "size", in.size);
  f.read("init", "theta_lo", in.theta_lo);
  f.read("init", "theta_hi", in.theta_hi);
  f.read("init", "scale_lo", in.scale_lo);
  f.read("init", "scale_hi", in.scale_hi);

  auto& m = c.filter.motion;
  f.read("motion", "sigma_q_xx", m.sigma_q[0]);
  f.read("motion", "sigma_q_xy", m.sigma_q[1]);
  m.sigma_q[2] = m.sigma_q[1];
  f.read("motion", "sigma_q_yy", m.sigma_q[3]);
  f.read("motion", "sigma_theta", m.sigma_theta);
  f.read("motion", "sigma_s", m.sigma_s);
  f.read("motion", "scale_min", m.s_min);
  f.read("motion", "scale_max", m.s_max);

  auto& b = c.filter.beam;
  f.read("beam", "w_hit", b.w_hit);
  f.read("beam", "w_dyn", b.w_dyn);
  f.read("beam", "w_max", b.w_max);
  f.read("beam", "w_rnd", b.w_rnd);
  f.read("beam", "sigma_z", b.sigma_z);
  f.read("beam", "lambda", b.lambda);
  f.read("beam", "delta", b.delta);
  f.read("beam", "z_max", b.z_max);
  f.read("beam", "beams_per_scan", b.beams_per_scan);
  f.read("beam", "normalize", c.normalize_weights);
  f.read("beam", "learned", c.learned_beam);
  f.read("beam", "scale_jacobian", c.filter.likelihood.scale_jacobian);
  f.read("beam", "out_of_map_log_likelihood", c.filter.likelihood.out_of_map_log_likelihood);

  auto& fl = c.filter;
  f.read("filter", "particles", fl.particles);
  f.read("filter", "kld", fl.use_kld);
  if (auto r = f.get("filter", "resample")) {
    if (*r == "every_step") fl.resample = ResampleMode::EveryStep;
    else if (*r == "ess") fl.resample = ResampleMode::EssThreshold;
    else throw ConfigError("[filter] resample must be every_step or ess");
  }
  f.read("filter", "ess_fraction", fl.ess_fraction);
  f.read("filter", "workers", fl.workers);
  f.read("filter", "recovery", fl.recovery.enabled);
  f.read("filter", "recovery_box", fl.recovery.box_px);

  auto& k = fl.kld;
  f.read("kld", "epsilon", k.epsilon);
  f.read("kld", "z", k.z_quantile);
  f.read("kld", "n_min", k.n_min);
  f.read("kld", "n_max", k.n_max);
  f.read("kld", "bin_x", k.bin_size[0]);
  f.read("kld", "bin_y", k.bin_size[1]);
  f.read("kld", "bin_theta", k.bin_size[2]);
  f.read("kld", "bin_scale", k.bin_size[3]);

  auto& s = c.sim;
  f.read("sim", "scenario", s.scenario);
  f.read("sim", "distortion", s.distortion);
  f.read("sim", "route", s.route);
  if (auto w = f.get("sim", "waypoints")) s.waypoints = detail::parse_waypoints(*w);
  f.read("sim", "world", s.world);
  f.read("sim", "world_resolution", s.world_resolution);
  f.read("sim", "speed", s.speed);
  f.read("sim", "turn_rate", s.turn_rate);
  f.read("sim", "capture_radius", s.capture_radius);
  f.read("sim", "dt", s.dt);
  f.read("sim", "beams", s.sensor.beams);
  f.read("sim", "fov", s.sensor.fov);
  f.read("sim", "z_max", s.sensor.z_max);
  f.read("sim", "scan_period", s.sensor.scan_period);
  f.read("sim", "odom_sigma_q", s.odom_sigma_q);
  f.read("sim", "odom_sigma_theta", s.odom_sigma_theta);
  f.read("sim", "range_noise", s.range_noise);
  f.read("sim", "calibration", s.calibration);
  if (s.scenario != "room" && s.scenario != "apartment" && s.scenario != "custom") {
    throw ConfigError("[sim] scenario must be room, apartment or custom");
  }

  auto& l = c.learn;
  f.read("learn", "calibration", l.calibration);
  l.sketches = f.with_prefix("learn", "sketch.");
  f.read("learn", "grid_lo", l.grid_lo);
  f.read("learn", "grid_hi", l.grid_hi);
  f.read("learn", "grid_step", l.grid_step);
  f.read("learn", "rounds", l.rounds);
  f.read("learn", "max_iterations", l.fit.max_iterations);
  f.read("learn", "tolerance", l.fit.tolerance);

  auto& e = c.eval;
  if (auto r = f.get("eval", "results")) {
    for (auto p : text::split(*r, ',')) {
      if (!text::trim(p).empty()) e.results.emplace_back(text::trim(p));
    }
  }
  f.read("eval", "reference", e.reference);
  e.sketches = f.with_prefix("eval", "sketch.");

  f.reject_unused();

  if (c.normalize_weights) {
    try {
      b.normalize_weights();
    } catch (const Error& err) {
      throw ConfigError(std::string("[beam] ") + err.what());
    }
  }
  try {
    c.filter.validate();
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
  if (!(in.size > 0.0)) throw ConfigError("[init] size must be > 0");
  if (in.theta_hi < in.theta_lo || !(in.scale_lo > 0.0) || in.scale_hi < in.scale_lo) {
    throw ConfigError("[init] theta or scale range is invalid");
  }
  if (!(l.grid_step > 0.0) || !(l.grid_lo > 0.0) || l.grid_hi < l.grid_lo) throw ConfigError("[learn] scale grid is invalid");
  if (l.rounds < 1) throw ConfigError("[learn] rounds must be >= 1");
  if (s.sensor.beams < 1 || s.sensor.scan_period < 1 || !(s.sensor.fov > 0.0) || !(s.sensor.z_max > 0.0)) {
    throw ConfigError("[sim] sensor settings are invalid");
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  const std::string content = text::read_file(path);
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_run_config(content, dir.empty() ? std::string(".") : dir.string());
}

/// Canonical text of every setting except the seed, in a form parse_run_config
/// accepts.
inline std::string dump_config(const RunConfig& c) {
  std::string out;
  const auto num = [](double v) { return text::format_double(v); };
  const auto line = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  const auto flag = [](bool v) { return std::string(v ? "true" : "false"); };

  out += "[run]\n";
  line("map", c.map);
  line("metadata", c.metadata);
  line("log", c.log);
  line("render_stride", std::to_string(c.render_stride));
  line("estimate", c.estimate == EstimateMode::WeightedMean ? "mean" : "max_weight");
  line("route", c.route_label);
  line("sketch", c.sketch_label);
  line("target_room", c.target_room);

  out += "\n[init]\n";
  if (c.init.rect) {
    line("x0", num(c.init.rect->x0));
    line("y0", num(c.init.rect->y0));
    line("x1", num(c.init.rect->x1));
    line("y1", num(c.init.rect->y1));
  }
  if (c.init.center) {
    line("center_x", num((*c.init.center)[0]));
    line("center_y", num((*c.init.center)[1]));
  }
  line("size", num(c.init.size));
  line("theta_lo", num(c.init.theta_lo));
  line("theta_hi", num(c.init.theta_hi));
  line("scale_lo", num(c.init.scale_lo));
  line("scale_hi", num(c.init.scale_hi));

  const auto& m = c.filter.motion;
  out += "\n[motion]\n";
  line("sigma_q_xx", num(m.sigma_q[0]));
  line("sigma_q_xy", num(m.sigma_q[1]));
  line("sigma_q_yy", num(m.sigma_q[3]));
  line("sigma_theta", num(m.sigma_theta));
  line("sigma_s", num(m.sigma_s));
  line("scale_min", num(m.s_min));
  line("scale_max", num(m.s_max));

  const auto& b = c.filter.beam;
  out += "\n[beam]\n";
  out += "# default weights before normalization: hit 0.005, dyn 0.5, max 0.3, rnd 0.4 (sum 1.205)\n";
  line("w_hit", num(b.w_hit));
  line("w_dyn", num(b.w_dyn));
  line("w_max", num(b.w_max));
  line("w_rnd", num(b.w_rnd));
  line("sigma_z", num(b.sigma_z));
  line("lambda", num(b.lambda));
  line("delta", num(b.delta));
  line("z_max", num(b.z_max));
  line("beams_per_scan", std::to_string(b.beams_per_scan));
  line("normalize", flag(c.normalize_weights));
  if (!c.learned_beam.empty()) line("learned", c.learned_beam);
  line("scale_jacobian", flag(c.filter.likelihood.scale_jacobian));
  line("out_of_map_log_likelihood", num(c.filter.likelihood.out_of_map_log_likelihood));

  const auto& fl = c.filter;
  out += "\n[filter]\n";
  line("particles", std::to_string(fl.particles));
  line("kld", flag(fl.use_kld));
  line("resample", fl.resample == ResampleMode::EveryStep ? "every_step" : "ess");
  line("ess_fraction", num(fl.ess_fraction));
  line("workers", std::to_string(fl.workers));
  line("recovery", flag(fl.recovery.enabled));
  line("recovery_box", num(fl.recovery.box_px));

  const auto& k = fl.kld;
  out += "\n[kld]\n";
  line("epsilon", num(k.epsilon));
  line("z", num(k.z_quantile));
  line("n_min", std::to_string(k.n_min));
  line("n_max", std::to_string(k.n_max));
  line("bin_x", num(k.bin_size[0]));
  line("bin_y", num(k.bin_size[1]));
  line("bin_theta", num(k.bin_size[2]));
  line("bin_scale", num(k.bin_size[3]));

  const auto& s = c.sim;
  out += "\n[sim]\n";
  line("scenario", s.scenario);
  line("distortion", num(s.distortion));
  line("route", s.route);
  if (!s.waypoints.empty()) {
    std::string w;
    for (const auto& p : s.waypoints) w += (w.empty() ? "" : "; ") + num(p.x) + "," + num(p.y);
    line("waypoints", w);
  }
  if (!s.world.empty()) line("world", s.world);
  line("world_resolution", num(s.world_resolution));
  line("speed", num(s.speed));
  line("turn_rate", num(s.turn_rate));
  line("capture_radius", num(s.capture_radius));
  line("dt", num(s.dt));
  line("beams", std::to_string(s.sensor.beams));
  line("fov", num(s.sensor.fov));
  line("z_max", num(s.sensor.z_max));
  line("scan_period", std::to_string(s.sensor.scan_period));
  line("odom_sigma_q", num(s.odom_sigma_q));
  line("odom_sigma_theta", num(s.odom_sigma_theta));
  line("range_noise", num(s.range_noise));
  line("calibration", flag(s.calibration));

  const auto& l = c.learn;
  out += "\n[learn]\n";
  if (!l.calibration.empty()) line("calibration", l.calibration);
  for (const auto& [id, p] : l.sketches) line("sketch." + id, p);
  line("grid_lo", num(l.grid_lo));
  line("grid_hi", num(l.grid_hi));
  line("grid_step", num(l.grid_step));
  line("rounds", std::to_string(l.rounds));
  line("max_iterations", std::to_string(l.fit.max_iterations));
  line("tolerance", num(l.fit.tolerance));

  const auto& e = c.eval;
  out += "\n[eval]\n";
  if (!e.results.empty()) {
    std::string r;
    for (const auto& p : e.results) r += (r.empty() ? "" : ",") + p;
    line("results", r);
  }
  if (!e.reference.empty()) line("reference", e.reference);
  for (const auto& [id, p] : e.sketches) line("sketch." + id, p);
  return out;
}

inline std::string config_hash(const RunConfig& c) { return text::hex64(text::fnv1a(dump_config(c))); }

}  // namespace sketchloc
