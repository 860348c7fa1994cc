#pragma once

// Map sidecar: plain `key = value` lines next to a sketch raster.
//
//   occupied_threshold = 127
//   unknown_levels = 200,230     # optional inclusive gray band
//   unknown_blocks = false
//   room.1 = 10,10,120,90        # x0,y0,x1,y1 in pixels

#include <string>
#include <string_view>

#include "sketchloc/error.hpp"
#include "sketchloc/eval.hpp"
#include "sketchloc/raster_map.hpp"
#include "sketchloc/text.hpp"

namespace sketchloc {

struct MapMetadata {
  MapLoadOptions load;
  RoomRegions rooms;
};

namespace detail {

inline bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw FormatError("expected a boolean, got '" + std::string(v) + "'");
}

inline std::uint8_t parse_gray(std::string_view v) {
  const long long g = text::parse_int(text::trim(v));
  if (g < 0 || g > 255) throw FormatError("gray level out of range [0,255]: " + std::string(v));
  return static_cast<std::uint8_t>(g);
}

}  // namespace detail

inline MapMetadata parse_map_metadata(std::string_view content) {
  MapMetadata meta;
  std::size_t line_no = 0;
  for (auto raw : text::split(content, '\n')) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError("metadata line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    try {
      if (key == "occupied_threshold") {
        meta.load.occupied_threshold = detail::parse_gray(value);
      } else if (key == "unknown_levels") {
        const auto parts = text::split(value, ',');
        if (parts.size() != 2) throw FormatError("unknown_levels needs lo,hi");
        GrayBand band{detail::parse_gray(parts[0]), detail::parse_gray(parts[1])};
        if (band.lo > band.hi) throw FormatError("unknown_levels band is inverted");
        meta.load.unknown_levels = band;
      } else if (key == "unknown_blocks") {
        meta.load.unknown_blocks = detail::parse_bool(value);
      } else if (key.starts_with("room.")) {
        const auto id = std::string(key.substr(5));
        if (id.empty()) throw FormatError("room id is empty");
        const auto parts = text::split(value, ',');
        if (parts.size() != 4) throw FormatError("room needs x0,y0,x1,y1");
        PixelRect r{text::parse_double(text::trim(parts[0])), text::parse_double(text::trim(parts[1])),
                    text::parse_double(text::trim(parts[2])), text::parse_double(text::trim(parts[3]))};
        if (!(r.x1 > r.x0 && r.y1 > r.y0)) throw FormatError("room rectangle is empty or inverted");
        meta.rooms.add(id, r);
      } else {
        throw FormatError("unknown key '" + std::string(key) + "'");
      }
    } catch (const Error& e) {
      throw FormatError("metadata line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return meta;
}

inline std::string write_map_metadata(const MapMetadata& meta) {
  std::string out = "occupied_threshold = " + std::to_string(meta.load.occupied_threshold) + "\n";
  if (meta.load.unknown_levels) {
    out += "unknown_levels = " + std::to_string(meta.load.unknown_levels->lo) + "," +
           std::to_string(meta.load.unknown_levels->hi) + "\n";
  }
  out += std::string("unknown_blocks = ") + (meta.load.unknown_blocks ? "true" : "false") + "\n";
  for (const auto& [id, r] : meta.rooms.rooms()) {
    out += "room." + id + " = " + text::format_double(r.x0) + "," + text::format_double(r.y0) + "," +
           text::format_double(r.x1) + "," + text::format_double(r.y1) + "\n";
  }
  return out;
}

}  // namespace sketchloc
