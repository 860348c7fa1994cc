#pragma once

// SensorLog: odometry, laser and ground-truth records in CARMEN-style text.
//
//   ODOM x y theta tv rv accel timestamp hostname logger_timestamp
//   FLASER n r1 ... rn x y theta odom_x odom_y odom_theta timestamp hostname logger_timestamp
//   TRUEPOS x y theta odom_x odom_y odom_theta timestamp hostname logger_timestamp
//
// Laser geometry comes from PARAM lines (field of view in degrees, max range
// in metres); a 180 degree front scanner is assumed when they are absent.

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sketchloc/beam_model.hpp"
#include "sketchloc/error.hpp"
#include "sketchloc/se2.hpp"
#include "sketchloc/text.hpp"

namespace sketchloc {

enum class RecordKind { Odom, Laser, TruePos };

struct LogRecord {
  RecordKind kind = RecordKind::Odom;
  Pose2D pose;  // odometry pose (ODOM), laser pose (FLASER) or true pose (TRUEPOS)
  Pose2D odom;  // odometry pose at the time of the record
  std::vector<double> ranges;
  double timestamp = 0.0;
};

struct SensorLog {
  double fov = std::numbers::pi;  // radians
  double z_max = 20.0;            // metres
  std::vector<LogRecord> records;

  std::size_t count(RecordKind k) const {
    std::size_t n = 0;
    for (const auto& r : records) n += r.kind == k;
    return n;
  }
};

/// Beam angles evenly spaced across the field of view, endpoints included
/// (a full circle omits the duplicate endpoint).
inline std::vector<double> beam_angles(std::size_t n, double fov) {
  std::vector<double> a(n);
  if (n == 1) return {0.0};
  const bool full = fov >= 2.0 * std::numbers::pi - 1e-9;
  const double step = full ? fov / static_cast<double>(n) : fov / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) a[i] = -0.5 * fov + step * static_cast<double>(i);
  return a;
}

inline std::string write_carmen(const SensorLog& log, std::string_view header_comment = {}) {
  using text::format_double;
  std::ostringstream out;
  out << "# sketchloc sensor log\n";
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  out << "PARAM robot_front_laser_max " << format_double(log.z_max) << "\n";
  out << "PARAM laser_front_laser_fov " << format_double(log.fov * 180.0 / std::numbers::pi) << "\n";
  const auto pose = [&out](const Pose2D& p) {
    out << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.theta);
  };
  for (const auto& r : log.records) {
    const std::string ts = format_double(r.timestamp);
    switch (r.kind) {
      case RecordKind::Odom:
        out << "ODOM ";
        pose(r.pose);
        out << " 0 0 0 " << ts << " sim " << ts << "\n";
        break;
      case RecordKind::Laser:
        out << "FLASER " << r.ranges.size();
        for (double z : r.ranges) out << ' ' << format_double(z);
        out << ' ';
        pose(r.pose);
        out << ' ';
        pose(r.odom);
        out << ' ' << ts << " sim " << ts << "\n";
        break;
      case RecordKind::TruePos:
        out << "TRUEPOS ";
        pose(r.pose);
        out << ' ';
        pose(r.odom);
        out << ' ' << ts << " sim " << ts << "\n";
        break;
    }
  }
  return out.str();
}

inline SensorLog read_carmen(std::string_view content) {
  SensorLog log;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const auto tok = text::split_ws(line);
    if (tok.empty() || tok[0].front() == '#') continue;
    const auto num = [&](std::size_t i) {
      if (i >= tok.size()) throw FormatError("log line " + std::to_string(line_no) + ": too few fields");
      return text::parse_double(tok[i]);
    };
    try {
      if (tok[0] == "PARAM") {
        if (tok.size() < 3) continue;
        if (tok[1] == "robot_front_laser_max") log.z_max = num(2);
        if (tok[1] == "laser_front_laser_fov") log.fov = num(2) * std::numbers::pi / 180.0;
      } else if (tok[0] == "ODOM") {
        LogRecord r;
        r.kind = RecordKind::Odom;
        r.pose = {num(1), num(2), num(3)};
        r.odom = r.pose;
        r.timestamp = num(7);
        log.records.push_back(std::move(r));
      } else if (tok[0] == "FLASER") {
        LogRecord r;
        r.kind = RecordKind::Laser;
        const auto n = static_cast<std::size_t>(text::parse_int(tok.at(1)));
        r.ranges.reserve(n);
        for (std::size_t i = 0; i < n; ++i) r.ranges.push_back(num(2 + i));
        r.pose = {num(2 + n), num(3 + n), num(4 + n)};
        r.odom = {num(5 + n), num(6 + n), num(7 + n)};
        r.timestamp = num(8 + n);
        log.records.push_back(std::move(r));
      } else if (tok[0] == "TRUEPOS") {
        LogRecord r;
        r.kind = RecordKind::TruePos;
        r.pose = {num(1), num(2), num(3)};
        r.odom = {num(4), num(5), num(6)};
        r.timestamp = num(7);
        log.records.push_back(std::move(r));
      }
    } catch (const std::out_of_range&) {
      throw FormatError("log line " + std::to_string(line_no) + ": too few fields");
    } catch (const FormatError& e) {
      throw FormatError("log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

/// One filter step reconstructed from a log: odometry since the previous
/// scan, the scan itself, and ground truth when the log carries it.
struct ReplayStep {
  OdomIncrement odometry;
  RangeScan scan;
  Pose2D odom_pose;
  std::optional<Pose2D> truth;
};

inline std::vector<ReplayStep> replay_steps(const SensorLog& log) {
  std::vector<ReplayStep> steps;
  std::optional<Pose2D> prev_odom;
  const auto& recs = log.records;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    if (r.kind == RecordKind::Odom && !prev_odom) prev_odom = r.pose;
    if (r.kind != RecordKind::Laser) continue;
    ReplayStep s;
    s.odom_pose = r.odom;
    s.odometry = prev_odom ? OdomIncrement::from_pose(between(*prev_odom, r.odom)) : OdomIncrement{};
    prev_odom = r.odom;
    s.scan.ranges = r.ranges;
    s.scan.angles = beam_angles(r.ranges.size(), log.fov);
    s.scan.timestamp = r.timestamp;
    if (i + 1 < recs.size() && recs[i + 1].kind == RecordKind::TruePos && recs[i + 1].timestamp == r.timestamp) {
      s.truth = recs[i + 1].pose;
    }
    steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace sketchloc
