// sketchloc: localize | simulate | learn | eval
//
// Every artifact carries the configuration hash and the seed. Batch mode
// (--runs N) uses seeds seed, seed+1, ... and writes run_<seed>/ subfolders.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "sketchloc/sketchloc.hpp"

namespace fs = std::filesystem;
using namespace sketchloc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Job {
  RunConfig cfg;
  std::string hash;
  std::uint64_t seed = 0;
  fs::path out;
};

std::string tag(const Job& j) { return "config_hash=" + j.hash + " seed=" + std::to_string(j.seed); }

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory '" + p.string() + "': " + ec.message());
}

void write_text(const fs::path& p, std::string_view content) { text::write_file(p.string(), content); }

void write_png(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  text::write_file(p.string(), std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string need(const RunConfig& cfg, const std::string& value, const std::string& what) {
  if (value.empty()) throw ConfigError("missing " + what);
  return cfg.resolve(value);
}

/// The resolved configuration, seed first, so a run can be reproduced from its folder.
void write_config_record(const Job& j) {
  write_text(j.out / "config.ini", "# " + tag(j) + "\n" + dump_config(j.cfg));
}

Json header_json(const Job& j) { return Json{{"config_hash", j.hash}, {"seed", j.seed}}; }

// ---------------------------------------------------------------- localize

int cmd_localize(const Job& j) {
  const RunConfig& c = j.cfg;
  MapMetadata meta;
  if (!c.metadata.empty()) meta = parse_map_metadata(text::read_file(need(c, c.metadata, "[run] metadata")));
  const SketchMap map = load_map(text::read_bytes(need(c, c.map, "[run] map")), meta.load);
  meta.rooms.validate_within(map.width(), map.height());
  const SensorLog log = read_carmen(text::read_file(need(c, c.log, "[run] log")));
  const auto steps = replay_steps(log);

  FilterConfig filter = c.filter;
  if (!c.learned_beam.empty()) {
    const auto path = c.resolve(c.learned_beam);
    Json fit;
    try {
      fit = Json::parse(text::read_file(path));
      const auto learned = beam_params_from_json(fit.at("params"));
      filter.beam.w_hit = learned.w_hit;
      filter.beam.w_dyn = learned.w_dyn;
      filter.beam.w_max = learned.w_max;
      filter.beam.w_rnd = learned.w_rnd;
      filter.beam.sigma_z = learned.sigma_z;
      filter.beam.lambda = learned.lambda;
    } catch (const Json::exception& e) {
      throw FormatError(path + ": " + e.what());
    }
  }
  Localizer loc(map, filter, j.seed);
  loc.initialize(c.init.region());

  ensure_dir(j.out);
  write_config_record(j);
  std::string csv = "# sketchloc trajectory " + tag(j) + "\nstep,x_px,y_px,theta,scale,n_particles,ess\n";
  std::optional<StepReport> last;
  std::optional<std::string> degenerated;
  std::size_t frames = 0;
  for (std::size_t k = 0; k < steps.size(); ++k) {
    StepReport rep;
    try {
      rep = loc.step(steps[k].odometry, steps[k].scan);
    } catch (const DegenerateWeightsError& e) {
      degenerated = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
    const Pose2D p = loc.reported_pose(rep, c.estimate);
    csv += std::to_string(k) + "," + text::format_double(p.x) + "," + text::format_double(p.y) + "," +
           text::format_double(p.theta) + "," + text::format_double(rep.estimate.scale) + "," +
           std::to_string(rep.particles) + "," + text::format_double(rep.ess) + "\n";
    if (c.render_stride > 0 && k % static_cast<std::size_t>(c.render_stride) == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05zu.png", k);
      write_png(j.out / name, encode_png(render_frame(map, loc.particles(), p)));
      ++frames;
    }
    last = rep;
  }
  write_text(j.out / "trajectory.csv", csv);

  Json out = header_json(j);
  out["steps_logged"] = steps.size();
  out["recoveries"] = loc.recoveries();
  out["degenerated"] = degenerated ? Json(*degenerated) : Json(nullptr);
  out["frames"] = frames;
  out["estimate_mode"] = c.estimate == EstimateMode::WeightedMean ? "mean" : "max_weight";
  if (last) {
    RunResult r;
    r.route = c.route_label;
    r.sketch = c.sketch_label;
    r.seed = j.seed;
    r.final_pose = loc.reported_pose(*last, c.estimate);
    r.final_scale = last->estimate.scale;
    r.target_room = c.target_room;
    r.success = !c.target_room.empty() && judge_success(r.final_pose, c.target_room, meta.rooms);
    out.update(run_result_json(r));
    const auto room = locate_room(r.final_pose, meta.rooms);
    out["located_room"] = room ? Json(*room) : Json(nullptr);
    out["final_best_pose"] = pose_json(last->best_pose);
    out["final_best_scale"] = last->best_scale;
    out["final_particles"] = last->particles;
    out["final_ess"] = last->ess;
    out["scale_std"] = std::sqrt(last->estimate.scale_variance);
    out["theta_circular_variance"] = last->estimate.theta_circular_variance;
  }
  write_text(j.out / "final.json", dump_json(out));
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimWorld {
  scenarios::Scenario sc;
  bool warped = true;  // false: the sketch is the world raster itself
  std::vector<Waypoint> waypoints;
  std::string route_label;
  std::vector<std::vector<Waypoint>> calibration_paths;
};

SimWorld build_world(const RunConfig& c) {
  using namespace scenarios;
  const SimConfig& s = c.sim;
  SimWorld w;
  if (s.scenario == "room") {
    w.sc = make_scenario(room_plan(), room_warp());
    const auto paths = room_paths();
    long long idx = 0;
    try {
      idx = text::parse_int(s.route);
    } catch (const Error&) {
      throw ConfigError("[sim] route for the room scenario is a path index 0-" + std::to_string(paths.size() - 1));
    }
    if (idx < 0 || idx >= static_cast<long long>(paths.size())) {
      throw ConfigError("[sim] route index out of range 0-" + std::to_string(paths.size() - 1));
    }
    w.waypoints = paths[static_cast<std::size_t>(idx)];
    w.route_label = "path" + s.route;
    w.calibration_paths = paths;
  } else if (s.scenario == "apartment") {
    w.sc = make_scenario(apartment_plan(), apartment_warp(s.distortion));
    const auto arrow = s.route.find("->");
    if (arrow == std::string::npos) throw ConfigError("[sim] route for the apartment is 'from->to'");
    const std::string from(text::trim(std::string_view(s.route).substr(0, arrow)));
    const std::string to(text::trim(std::string_view(s.route).substr(arrow + 2)));
    if (!w.sc.plan.access.count(from) || !w.sc.plan.access.count(to) || from == to) {
      throw ConfigError("[sim] route needs two different apartment rooms (1-5)");
    }
    w.waypoints = route(w.sc.plan, from, to);
    w.route_label = from + "->" + to;
    for (const auto& [a, b] : random_routes(w.sc.plan, 10, 2015)) w.calibration_paths.push_back(route(w.sc.plan, a, b));
  } else {
    if (s.world.empty()) throw ConfigError("[sim] custom scenario needs world = <raster>");
    if (s.waypoints.size() < 2) throw ConfigError("[sim] custom scenario needs at least two waypoints");
    const auto grid = load_map(text::read_bytes(c.resolve(s.world)));
    w.sc.world = {grid, s.world_resolution, 0.0, 0.0};
    w.sc.world.validate();
    w.sc.sketch = grid;
    w.sc.sketch_image = GrayImage{grid.width(), grid.height(), {}};
    for (int y = 0; y < grid.height(); ++y) {
      for (int x = 0; x < grid.width(); ++x) w.sc.sketch_image.pixels.push_back(grid.blocks(x, y) ? 0 : 255);
    }
    w.sc.warp.px_per_m = 1.0 / s.world_resolution;
    w.sc.warp.margin_px = 0.0;
    w.warped = false;
    w.waypoints = s.waypoints;
    w.route_label = "custom";
    w.calibration_paths = {s.waypoints};
  }
  return w;
}

int cmd_simulate(const Job& j) {
  const RunConfig& c = j.cfg;
  const SimConfig& s = c.sim;
  SimWorld w = build_world(c);

  TrajectorySpec traj;
  traj.waypoints = w.waypoints;
  traj.speed = s.speed;
  traj.turn_rate = s.turn_rate;
  traj.capture_radius = s.capture_radius;
  traj.dt = s.dt;
  traj.sensor = s.sensor;
  MotionNoiseParams noise = MotionNoiseParams::zero();
  noise.sigma_q = {s.odom_sigma_q, 0.0, 0.0, s.odom_sigma_q};
  noise.sigma_theta = s.odom_sigma_theta;
  Rng rng(j.seed);
  const SensorLog log = simulate_run(w.sc.world, traj, noise, s.range_noise, rng);

  ensure_dir(j.out);
  write_config_record(j);
  write_text(j.out / "run.log", write_carmen(log, "sketchloc simulate " + tag(j)));
  write_png(j.out / "sketch.png", encode_png(w.sc.sketch_image));
  MapMetadata meta;
  meta.rooms = w.sc.regions;
  write_text(j.out / "sketch.meta", "# " + tag(j) + "\n" + write_map_metadata(meta));

  // A localize/learn configuration for the generated data, carrying over the
  // filter blocks of this configuration.
  RunConfig next = c;
  next.base_dir = j.out.string();
  next.map = "sketch.png";
  next.metadata = "sketch.meta";
  next.log = "run.log";
  next.route_label = w.route_label;
  next.sketch_label = c.sketch_label.empty() ? s.scenario : c.sketch_label;
  const Waypoint start = w.waypoints.front();
  const auto [sx, sy] = w.sc.to_sketch(start.x, start.y);
  next.init.rect.reset();
  next.init.center = std::array<double, 2>{sx, sy};
  Json truth = header_json(j);
  truth["route"] = w.route_label;
  truth["start_px"] = {sx, sy};
  truth["nominal_scale"] = w.warped ? w.sc.warp.nominal_scale() : s.world_resolution;
  if (w.warped) {
    const Pose2D end = log.records.back().pose;
    next.target_room = scenarios::room_of(w.sc.plan, end.x, end.y);
    truth["target_room"] = next.target_room;
  }
  if (s.calibration) {
    Rng crng(j.seed ^ 0xC0FFEEULL);
    const auto samples = scenarios::calibration_samples(w.sc, "sketch", calibration_poses(w.calibration_paths),
                                                        s.sensor, s.range_noise, crng);
    write_text(j.out / "calibration.csv", write_calibration_csv(samples, "sketchloc calibration " + tag(j)));
    next.learn.calibration = "calibration.csv";
    next.learn.sketches = {{"sketch", "sketch.png"}};
  }
  write_text(j.out / "truth.json", dump_json(truth));
  write_text(j.out / "localize.ini", "# generated by sketchloc simulate " + tag(j) + "\n[run]\nseed = " +
                                         std::to_string(j.seed) + "\n" + dump_config(next).substr(6));
  return kExitOk;
}

// ---------------------------------------------------------------- learn

int cmd_learn(const Job& j) {
  const RunConfig& c = j.cfg;
  auto samples = parse_calibration_csv(text::read_file(need(c, c.learn.calibration, "[learn] calibration")));
  if (c.learn.sketches.empty()) throw ConfigError("[learn] needs at least one sketch.<id> = <raster>");
  std::map<std::string, SketchMap> sketches;
  for (const auto& [id, path] : c.learn.sketches) sketches.emplace(id, load_map(text::read_bytes(c.resolve(path))));
  raycast_expected(samples, sketches);
  const auto rep = learn_beam_params(samples, linear_grid(c.learn.grid_lo, c.learn.grid_hi, c.learn.grid_step),
                                     c.filter.beam, c.filter.likelihood, c.learn.fit, c.learn.rounds);
  ensure_dir(j.out);
  write_config_record(j);
  Json out = header_json(j);
  out.update(fit_report_json(rep));
  out["samples"] = samples.size();
  write_text(j.out / "fit.json", dump_json(out));
  const auto& p = rep.fit.params;
  std::string beam = "# learned beam model " + tag(j) + "\n[beam]\n";
  beam += "w_hit = " + text::format_double(p.w_hit) + "\nw_dyn = " + text::format_double(p.w_dyn) +
          "\nw_max = " + text::format_double(p.w_max) + "\nw_rnd = " + text::format_double(p.w_rnd) +
          "\nsigma_z = " + text::format_double(p.sigma_z) + "\nlambda = " + text::format_double(p.lambda) + "\n";
  write_text(j.out / "beam.ini", beam);
  return kExitOk;
}

// ---------------------------------------------------------------- eval

std::vector<fs::path> result_files(const RunConfig& c) {
  std::vector<fs::path> files;
  for (const auto& r : c.eval.results) {
    const fs::path p = c.resolve(r);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().filename() == "final.json") files.push_back(e.path());
      }
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw IoError("no such result file or directory '" + p.string() + "'");
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_eval(const Job& j) {
  const RunConfig& c = j.cfg;
  const auto files = result_files(c);
  if (files.empty()) throw ConfigError("[eval] results matched no final.json files");
  std::vector<RunResult> results;
  for (const auto& f : files) {
    Json doc;
    try {
      doc = Json::parse(text::read_file(f.string()));
    } catch (const Json::exception& e) {
      throw FormatError(f.string() + ": " + e.what());
    }
    if (!doc.contains("final_pose")) continue;  // run ended before its first scan
    results.push_back(run_result_from_json(doc));
  }
  const SuccessTable table = success_table(results);
  ensure_dir(j.out);
  write_config_record(j);
  write_text(j.out / "success_table.csv", "# sketchloc success table " + tag(j) + "\n" + table.to_csv());
  Json out = header_json(j);
  out["files"] = files.size();
  out["table"] = success_table_json(table);

  if (!c.eval.reference.empty() && !c.eval.sketches.empty()) {
    const SketchMap reference = load_map(text::read_bytes(c.resolve(c.eval.reference)));
    std::map<std::string, SketchMap> maps;
    std::vector<SketchOutcome> outcomes;
    for (const auto& [name, path] : c.eval.sketches) maps.emplace(name, load_map(text::read_bytes(c.resolve(path))));
    for (const auto& [name, m] : maps) {
      outcomes.push_back({name, &m, &reference, table.sketch_total(name).percent()});
    }
    const RatioSeries series = ratio_vs_success(outcomes);
    write_text(j.out / "ratio_series.csv", "# sketchloc ratio series " + tag(j) + "\n" + series.to_csv());
    out["ratio_series"] = ratio_series_json(series);
  }
  write_text(j.out / "eval.json", dump_json(out));
  return kExitOk;
}

// ---------------------------------------------------------------- driver

int classify(const std::exception_ptr& ep, std::string& message) {
  try {
    std::rethrow_exception(ep);
  } catch (const ConfigError& e) {
    message = e.what();
    return kExitConfig;
  } catch (const ValidationError& e) {
    message = e.what();
    return kExitConfig;
  } catch (const InfeasibleTrajectoryError& e) {
    message = e.what();
    return kExitConfig;
  } catch (const IoError& e) {
    message = e.what();
    return kExitIo;
  } catch (const FormatError& e) {
    message = e.what();
    return kExitIo;
  } catch (const EmptyMapError& e) {
    message = e.what();
    return kExitIo;
  } catch (const std::exception& e) {
    message = e.what();
    return kExitFailure;
  }
}

int run_jobs(const std::string& command, const std::vector<Job>& jobs, int parallel) {
  using Fn = int (*)(const Job&);
  const Fn fn = command == "localize" ? cmd_localize
              : command == "simulate" ? cmd_simulate
              : command == "learn"    ? cmd_learn
                                      : cmd_eval;
  std::vector<int> codes(jobs.size(), kExitOk);
  std::vector<std::string> messages(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        codes[i] = fn(jobs[i]);
      } catch (...) {
        codes[i] = classify(std::current_exception(), messages[i]);
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallel, static_cast<int>(jobs.size())));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  int worst = kExitOk;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (codes[i] != kExitOk) {
      std::cerr << "sketchloc " << command << " (seed " << jobs[i].seed << "): " << messages[i] << "\n";
      worst = std::max(worst, codes[i]);
    } else {
      std::cout << command << " seed " << jobs[i].seed << " -> " << jobs[i].out.string() << "\n";
    }
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo localization on hand-drawn sketch maps"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "out";
  std::optional<std::uint64_t> seed;
  int runs = 1, parallel = 1;
  std::optional<int> render_stride;
  std::string command;
  for (const char* name : {"localize", "simulate", "learn", "eval"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--seed", seed, "seed (overrides [run] seed)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--runs", runs, "number of seeded runs")->check(CLI::PositiveNumber);
    sub->add_option("--parallel", parallel, "concurrent runs")->check(CLI::PositiveNumber);
    sub->add_option("--render-stride", render_stride, "write an overlay frame every N scans (0: none)")
        ->check(CLI::NonNegativeNumber);
    sub->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
    if (render_stride) cfg.render_stride = *render_stride;
  } catch (...) {
    std::string message;
    const int code = classify(std::current_exception(), message);
    std::cerr << "sketchloc: " << config_path << ": " << message << "\n";
    return code;
  }
  const std::uint64_t first = seed.value_or(cfg.seed);
  const std::string hash = config_hash(cfg);
  std::vector<Job> jobs;
  for (int r = 0; r < runs; ++r) {
    Job j{cfg, hash, first + static_cast<std::uint64_t>(r), fs::path(out_dir)};
    if (runs > 1) j.out /= "run_" + std::to_string(j.seed);
    jobs.push_back(std::move(j));
  }
  return run_jobs(command, jobs, parallel);
}
