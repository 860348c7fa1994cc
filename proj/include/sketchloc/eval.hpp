#pragma once

// Room-level evaluation: room lookup, success tables and the aspect-ratio
// difference analysis.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sketchloc/error.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/se2.hpp"
#include "sketchloc/text.hpp"

namespace sketchloc {

/// Orders room ids numerically when both are integers, lexicographically
/// otherwise; numeric ids sort before names.
inline bool room_id_less(const std::string& a, const std::string& b) {
  const auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  const bool na = numeric(a), nb = numeric(b);
  if (na && nb) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
  if (na != nb) return na;
  return a < b;
}

class RoomRegions {
 public:
  void add(const std::string& id, const PixelRect& rect) {
    if (id.empty()) throw ValidationError("room id must not be empty");
    if (!(rect.x1 >= rect.x0 && rect.y1 >= rect.y0)) throw ValidationError("room '" + id + "' rectangle is inverted");
    if (find(id)) throw ValidationError("duplicate room id '" + id + "'");
    rooms_.emplace_back(id, rect);
    std::sort(rooms_.begin(), rooms_.end(), [](const auto& a, const auto& b) { return room_id_less(a.first, b.first); });
  }

  const PixelRect* find(const std::string& id) const {
    for (const auto& [rid, rect] : rooms_) {
      if (rid == id) return &rect;
    }
    return nullptr;
  }

  /// Throws unless every rectangle lies within a width x height raster.
  void validate_within(int width, int height) const {
    for (const auto& [id, r] : rooms_) {
      if (r.x0 < 0.0 || r.y0 < 0.0 || r.x1 > width || r.y1 > height) {
        throw ValidationError("room '" + id + "' lies outside the map");
      }
    }
  }

  const std::vector<std::pair<std::string, PixelRect>>& rooms() const { return rooms_; }
  bool empty() const { return rooms_.empty(); }

 private:
  std::vector<std::pair<std::string, PixelRect>> rooms_;  // sorted by room_id_less
};

/// Lowest-id room containing (x, y), if any.
inline std::optional<std::string> locate_room(const Pose2D& pose, const RoomRegions& regions) {
  for (const auto& [id, rect] : regions.rooms()) {
    if (rect.contains(pose.x, pose.y)) return id;
  }
  return std::nullopt;
}

struct RunResult {
  std::string route;   // e.g. "1->6"
  std::string sketch;  // sketch name, column of the success table
  std::uint64_t seed = 0;
  Pose2D final_pose;
  double final_scale = 0.0;
  std::string target_room;
  bool success = false;
  std::vector<Pose2D> trace;
};

inline bool judge_success(const Pose2D& final_pose, const std::string& target_room, const RoomRegions& regions) {
  const PixelRect* r = regions.find(target_room);
  return r != nullptr && r->contains(final_pose.x, final_pose.y);
}

struct SuccessCell {
  std::size_t runs = 0;
  std::size_t successes = 0;
  double percent() const { return runs == 0 ? 0.0 : 100.0 * static_cast<double>(successes) / static_cast<double>(runs); }
};

/// Route-by-sketch success matrix with run-weighted totals per sketch.
struct SuccessTable {
  std::vector<std::string> routes;    // in first-seen order
  std::vector<std::string> sketches;  // in first-seen order
  std::map<std::pair<std::string, std::string>, SuccessCell> cells;

  SuccessCell cell(const std::string& route, const std::string& sketch) const {
    auto it = cells.find({route, sketch});
    return it == cells.end() ? SuccessCell{} : it->second;
  }

  SuccessCell sketch_total(const std::string& sketch) const {
    SuccessCell t;
    for (const auto& r : routes) {
      const auto c = cell(r, sketch);
      t.runs += c.runs;
      t.successes += c.successes;
    }
    return t;
  }

  SuccessCell total() const {
    SuccessCell t;
    for (const auto& [k, c] : cells) {
      t.runs += c.runs;
      t.successes += c.successes;
    }
    return t;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << "route";
    for (const auto& s : sketches) out << ',' << s;
    out << '\n';
    for (const auto& r : routes) {
      out << r;
      for (const auto& s : sketches) {
        const auto c = cell(r, s);
        out << ',';
        if (c.runs > 0) out << text::format_double(c.percent());
      }
      out << '\n';
    }
    out << "total";
    for (const auto& s : sketches) out << ',' << text::format_double(sketch_total(s).percent());
    out << '\n';
    return out.str();
  }
};

inline SuccessTable success_table(const std::vector<RunResult>& results) {
  SuccessTable t;
  for (const auto& r : results) {
    if (std::find(t.routes.begin(), t.routes.end(), r.route) == t.routes.end()) t.routes.push_back(r.route);
    if (std::find(t.sketches.begin(), t.sketches.end(), r.sketch) == t.sketches.end()) t.sketches.push_back(r.sketch);
    auto& c = t.cells[{r.route, r.sketch}];
    ++c.runs;
    c.successes += r.success ? 1 : 0;
  }
  return t;
}

/// Average ranks (1-based), ties share their mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns NaN when either series is constant.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman needs two equal series of length >= 2");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

struct RatioPoint {
  std::string name;
  double ratio = 0.0;
  double reference_ratio = 0.0;
  double ratio_difference = 0.0;
  double success_percent = 0.0;
};

struct RatioSeries {
  std::vector<RatioPoint> points;  // ascending ratio difference
  double spearman = 0.0;

  std::string to_csv() const {
    std::ostringstream out;
    out << "sketch,ratio,reference_ratio,ratio_difference,success_percent\n";
    for (const auto& p : points) {
      out << p.name << ',' << text::format_double(p.ratio) << ',' << text::format_double(p.reference_ratio) << ','
          << text::format_double(p.ratio_difference) << ',' << text::format_double(p.success_percent) << '\n';
    }
    return out.str();
  }
};

struct SketchOutcome {
  std::string name;
  const SketchMap* sketch = nullptr;
  const SketchMap* reference = nullptr;
  double success_percent = 0.0;
};

inline RatioSeries ratio_vs_success(const std::vector<SketchOutcome>& outcomes) {
  if (outcomes.size() < 2) throw ValidationError("ratio analysis needs at least two sketches");
  RatioSeries series;
  for (const auto& o : outcomes) {
    if (o.sketch == nullptr || o.reference == nullptr) throw ValidationError("missing sketch or reference map");
    RatioPoint p;
    p.name = o.name;
    p.ratio = map_aspect_ratio(*o.sketch);
    p.reference_ratio = map_aspect_ratio(*o.reference);
    p.ratio_difference = std::abs(p.ratio - p.reference_ratio);
    p.success_percent = o.success_percent;
    series.points.push_back(p);
  }
  std::stable_sort(series.points.begin(), series.points.end(),
                   [](const auto& a, const auto& b) { return a.ratio_difference < b.ratio_difference; });
  std::vector<double> d, s;
  for (const auto& p : series.points) {
    d.push_back(p.ratio_difference);
    s.push_back(p.success_percent);
  }
  series.spearman = spearman(d, s);
  return series;
}

}  // namespace sketchloc
