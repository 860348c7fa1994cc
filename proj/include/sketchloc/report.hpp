#pragma once

// JSON forms of run results, fit reports and success tables. Keys are sorted
// and numbers use the shortest round-trip form, so equal inputs give equal bytes.

#include <string>
#include <vector>

#include "json.hpp"
#include "sketchloc/eval.hpp"
#include "sketchloc/param_learning.hpp"

namespace sketchloc {

using Json = nlohmann::json;

inline Json pose_json(const Pose2D& p) { return Json{{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

inline Json beam_params_json(const BeamModelParams& p) {
  return Json{{"w_hit", p.w_hit}, {"w_dyn", p.w_dyn},     {"w_max", p.w_max}, {"w_rnd", p.w_rnd},
              {"sigma_z", p.sigma_z}, {"lambda", p.lambda}, {"delta", p.delta}, {"z_max", p.z_max},
              {"beams_per_scan", p.beams_per_scan}};
}

inline BeamModelParams beam_params_from_json(const Json& j) {
  BeamModelParams p;
  p.w_hit = j.at("w_hit").get<double>();
  p.w_dyn = j.at("w_dyn").get<double>();
  p.w_max = j.at("w_max").get<double>();
  p.w_rnd = j.at("w_rnd").get<double>();
  p.sigma_z = j.at("sigma_z").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.delta = j.at("delta").get<double>();
  p.z_max = j.at("z_max").get<double>();
  p.beams_per_scan = j.at("beams_per_scan").get<int>();
  return p;
}

inline Json fit_report_json(const LearnReport& rep) {
  Json groups = Json::array();
  for (const auto& g : rep.groups) {
    groups.push_back({{"sketch_id", g.sketch_id}, {"pose", pose_json(g.pose)}, {"samples", g.samples},
                      {"best_scale", g.best_scale}});
  }
  const auto& f = rep.fit;
  return Json{{"params", beam_params_json(f.params)},
              {"weight_sum", f.params.weight_sum()},
              {"iterations", f.iterations},
              {"converged", f.converged},
              {"monotone", f.monotone},
              {"log_likelihood", f.log_likelihood},
              {"floored_components", f.floored_components},
              {"warnings", f.warnings},
              {"groups", groups}};
}

/// Fields written by `localize` that `eval` reads back.
inline Json run_result_json(const RunResult& r) {
  return Json{{"route", r.route},
              {"sketch", r.sketch},
              {"seed", r.seed},
              {"final_pose", pose_json(r.final_pose)},
              {"final_scale", r.final_scale},
              {"target_room", r.target_room},
              {"success", r.success}};
}

inline RunResult run_result_from_json(const Json& j) {
  try {
    RunResult r;
    r.route = j.at("route").get<std::string>();
    r.sketch = j.at("sketch").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& p = j.at("final_pose");
    r.final_pose = {p.at("x").get<double>(), p.at("y").get<double>(), p.at("theta").get<double>()};
    r.final_scale = j.at("final_scale").get<double>();
    r.target_room = j.at("target_room").get<std::string>();
    r.success = j.at("success").get<bool>();
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("result file: ") + e.what());
  }
}

inline Json success_table_json(const SuccessTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.routes) {
    for (const auto& s : t.sketches) {
      const auto c = t.cell(r, s);
      if (c.runs == 0) continue;
      rows.push_back({{"route", r}, {"sketch", s}, {"runs", c.runs}, {"successes", c.successes}, {"percent", c.percent()}});
    }
  }
  Json totals = Json::object();
  for (const auto& s : t.sketches) totals[s] = t.sketch_total(s).percent();
  const auto all = t.total();
  return Json{{"cells", rows}, {"sketch_totals", totals}, {"runs", all.runs}, {"successes", all.successes},
              {"total_percent", all.percent()}};
}

inline Json ratio_series_json(const RatioSeries& s) {
  Json pts = Json::array();
  for (const auto& p : s.points) {
    pts.push_back({{"sketch", p.name}, {"ratio", p.ratio}, {"reference_ratio", p.reference_ratio},
                   {"ratio_difference", p.ratio_difference}, {"success_percent", p.success_percent}});
  }
  return Json{{"points", pts}, {"spearman", s.spearman}};
}

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace sketchloc
