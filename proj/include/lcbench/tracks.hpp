#pragma once

// Two-lane highway trajectory recordings: loading/writing the tracks CSV
// schema (a HighD-compatible subset), neighbor resolution and center-line
// crossing detection. Recordings are immutable after construction and safe
// for concurrent reads.

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcbench/common.hpp"

namespace lcbench {

enum class Lane { right, left };
enum class VehicleClass { car, truck };
enum class CarriagewayDirection { upper, lower };

inline const char* to_string(Lane l) { return l == Lane::right ? "right" : "left"; }
inline const char* to_string(VehicleClass c) { return c == VehicleClass::car ? "Car" : "Truck"; }

inline Lane parse_lane(std::string_view s) {
  std::string v = lower(trim(s));
  if (v == "right") return Lane::right;
  if (v == "left") return Lane::left;
  throw ParseError("unknown lane '" + std::string(s) + "' (expected right|left)");
}

/// Recording-level metadata, read from the sidecar key-value file.
struct RecordingMeta {
  std::string recording_id = "0";
  double frame_rate = 25.0;           // frames/s
  double road_length = 420.0;         // m
  std::vector<double> lane_markings;  // 3 values: edge, center-line, edge
  CarriagewayDirection direction = CarriagewayDirection::lower;
  // Derived at load: true when the right (slow) lane occupies the low-y band.
  // Upper carriageways have the median on the high-y side, lower ones on the
  // low-y side; an explicit `right_lane = low|high` key overrides.
  bool right_lane_low_y = false;

  double centerline() const { return lane_markings.at(1); }

  Lane lane_of_y(double y) const {
    bool low = y < centerline();
    return (low == right_lane_low_y) ? Lane::right : Lane::left;
  }

  /// Lateral center of a lane band.
  double lane_center(Lane lane) const {
    bool low = (lane == Lane::right) == right_lane_low_y;
    return low ? 0.5 * (lane_markings.at(0) + lane_markings.at(1))
               : 0.5 * (lane_markings.at(1) + lane_markings.at(2));
  }

  void validate() const {
    if (!(frame_rate > 0)) throw IntegrityError("meta: frame_rate must be > 0");
    if (!(road_length > 0)) throw IntegrityError("meta: road_length must be > 0");
    if (lane_markings.size() != 3)
      throw IntegrityError("meta: expected 3 lane markings (two-lane road), got " +
                           std::to_string(lane_markings.size()));
    for (size_t i = 1; i < lane_markings.size(); ++i)
      if (!(lane_markings[i] > lane_markings[i - 1]))
        throw IntegrityError("meta: lane_markings must be strictly increasing");
  }
};

/// One vehicle at one frame, in the normalized coordinate frame
/// (+x is always the direction of travel).
struct TrackFrame {
  std::int64_t vehicle_id = 0;
  std::int64_t frame = 0;
  double x = 0, y = 0;      // m (longitudinal / lateral position)
  double vx = 0, vy = 0;    // m/s
  double ax = 0, ay = 0;    // m/s^2
  Lane lane = Lane::right;
  double length = 0;        // m, longitudinal extent
  double lat_extent = 0;    // m, lateral extent
  VehicleClass vclass = VehicleClass::car;
};

struct Trajectory {
  std::int64_t vehicle_id = 0;
  std::vector<TrackFrame> frames;  // contiguous, ascending frame index

  std::int64_t first_frame() const { return frames.front().frame; }
  std::int64_t last_frame() const { return frames.back().frame; }
  bool contains(std::int64_t frame) const {
    return !frames.empty() && frame >= first_frame() && frame <= last_frame();
  }
  const TrackFrame& at_frame(std::int64_t frame) const {
    return frames[static_cast<size_t>(frame - first_frame())];
  }
};

struct Recording {
  RecordingMeta meta;
  std::vector<Trajectory> trajectories;  // sorted by vehicle_id

  const Trajectory* find(std::int64_t vehicle_id) const {
    auto it = std::lower_bound(
        trajectories.begin(), trajectories.end(), vehicle_id,
        [](const Trajectory& t, std::int64_t id) { return t.vehicle_id < id; });
    if (it == trajectories.end() || it->vehicle_id != vehicle_id) return nullptr;
    return &*it;
  }
};

/// The four surrounding vehicles of a subject at one frame. Slots are null
/// when no such vehicle exists (absence is a legal value).
struct NeighborSet {
  const TrackFrame* p = nullptr;   // predecessor, same lane
  const TrackFrame* f = nullptr;   // follower, same lane
  const TrackFrame* pa = nullptr;  // predecessor, adjacent lane
  const TrackFrame* fa = nullptr;  // follower, adjacent lane
};

// ---------------------------------------------------------------------------
// Metadata sidecar
// ---------------------------------------------------------------------------

inline RecordingMeta parse_meta(const KeyValueMap& kv) {
  RecordingMeta m;
  if (auto it = kv.find("recording_id"); it != kv.end()) m.recording_id = it->second;
  m.frame_rate = parse_double(require_key(kv, "frame_rate", "metadata"), "frame_rate");
  m.road_length = parse_double(require_key(kv, "road_length", "metadata"), "road_length");
  for (const auto& tok : split(require_key(kv, "lane_markings", "metadata"), ','))
    m.lane_markings.push_back(parse_double(trim(tok), "lane_markings"));
  std::string dir = lower(trim(require_key(kv, "direction", "metadata")));
  if (dir == "upper") m.direction = CarriagewayDirection::upper;
  else if (dir == "lower") m.direction = CarriagewayDirection::lower;
  else throw ParseError("metadata: direction must be upper|lower, got '" + dir + "'");
  m.right_lane_low_y = (m.direction == CarriagewayDirection::upper);
  if (auto it = kv.find("right_lane"); it != kv.end()) {
    std::string v = lower(trim(it->second));
    if (v == "low") m.right_lane_low_y = true;
    else if (v == "high") m.right_lane_low_y = false;
    else throw ParseError("metadata: right_lane must be low|high");
  }
  m.validate();
  return m;
}

inline RecordingMeta load_meta(const std::string& path) {
  return parse_meta(load_key_values(path));
}

inline void write_meta(std::ostream& out, const RecordingMeta& m) {
  out << "recording_id = " << m.recording_id << "\n";
  out << "frame_rate = " << fmt_g17(m.frame_rate) << "\n";
  out << "road_length = " << fmt_g17(m.road_length) << "\n";
  out << "lane_markings = " << fmt_g17(m.lane_markings[0]) << ","
      << fmt_g17(m.lane_markings[1]) << "," << fmt_g17(m.lane_markings[2]) << "\n";
  out << "direction = "
      << (m.direction == CarriagewayDirection::upper ? "upper" : "lower") << "\n";
  out << "right_lane = " << (m.right_lane_low_y ? "low" : "high") << "\n";
}

// ---------------------------------------------------------------------------
// Tracks CSV
// ---------------------------------------------------------------------------

namespace detail {

inline VehicleClass parse_vclass(std::string_view s, std::int64_t line_no) {
  std::string v = lower(trim(s));
  if (v == "car") return VehicleClass::car;
  if (v == "truck") return VehicleClass::truck;
  throw ParseError("line " + std::to_string(line_no) + ": unknown vehicle class '" +
                   std::string(s) + "'");
}

struct TrackColumns {
  int frame = -1, id = -1, x = -1, y = -1, vx = -1, vy = -1, ax = -1, ay = -1;
  int lane_id = -1, width = -1, height = -1, vclass = -1;
};

inline TrackColumns resolve_columns(const std::vector<std::string>& header) {
  TrackColumns c;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string h = trim(header[i]);
    if (h == "frame") c.frame = i;
    else if (h == "id") c.id = i;
    else if (h == "x") c.x = i;
    else if (h == "y") c.y = i;
    else if (h == "xVelocity") c.vx = i;
    else if (h == "yVelocity") c.vy = i;
    else if (h == "xAcceleration") c.ax = i;
    else if (h == "yAcceleration") c.ay = i;
    else if (h == "laneId") c.lane_id = i;
    else if (h == "width") c.width = i;
    else if (h == "height") c.height = i;
    else if (h == "class") c.vclass = i;
    // extra columns ignored
  }
  auto need = [](int idx, const char* name) {
    if (idx < 0) throw ParseError(std::string("tracks header: missing column '") + name + "'");
  };
  need(c.frame, "frame"); need(c.id, "id"); need(c.x, "x"); need(c.y, "y");
  need(c.vx, "xVelocity"); need(c.vy, "yVelocity");
  need(c.ax, "xAcceleration"); need(c.ay, "yAcceleration");
  need(c.lane_id, "laneId"); need(c.width, "width"); need(c.height, "height");
  need(c.vclass, "class");
  return c;
}

}  // namespace detail

/// Load a tracks CSV. Rows become TrackFrames grouped per vehicle; the
/// coordinate frame is normalized so +x is the direction of travel (upper
/// carriageways are mirrored). Lane is taken from laneId when it is 1
/// (right) or 2 (left) and derived from y otherwise.
inline Recording load_recording(std::istream& in, RecordingMeta meta) {
  meta.validate();
  const bool mirror = (meta.direction == CarriagewayDirection::upper);

  std::string line;
  std::int64_t line_no = 0;
  // header (skip leading comment lines)
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    header = split(t, ',');
    break;
  }
  if (header.empty()) throw ParseError("tracks file: missing header row");
  const detail::TrackColumns col = detail::resolve_columns(header);

  std::map<std::int64_t, Trajectory> by_vehicle;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cells = split(t, ',');
    if (cells.size() < header.size())
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " columns, got " +
                       std::to_string(cells.size()));
    auto where = [&](const char* f) { return std::string(f) + " (line " + std::to_string(line_no) + ")"; };
    TrackFrame fr;
    fr.frame = parse_int(trim(cells[col.frame]), where("frame"));
    fr.vehicle_id = parse_int(trim(cells[col.id]), where("id"));
    fr.x = parse_double(trim(cells[col.x]), where("x"));
    fr.y = parse_double(trim(cells[col.y]), where("y"));
    fr.vx = parse_double(trim(cells[col.vx]), where("xVelocity"));
    fr.vy = parse_double(trim(cells[col.vy]), where("yVelocity"));
    fr.ax = parse_double(trim(cells[col.ax]), where("xAcceleration"));
    fr.ay = parse_double(trim(cells[col.ay]), where("yAcceleration"));
    fr.length = parse_double(trim(cells[col.width]), where("width"));
    fr.lat_extent = parse_double(trim(cells[col.height]), where("height"));
    fr.vclass = detail::parse_vclass(cells[col.vclass], line_no);
    if (mirror) {
      fr.x = meta.road_length - fr.x;
      fr.vx = -fr.vx;
      fr.ax = -fr.ax;
    }
    if (!(fr.length > 0))
      throw IntegrityError("vehicle " + std::to_string(fr.vehicle_id) +
                           ": non-positive length at line " + std::to_string(line_no));
    const long long lane_id = parse_int(trim(cells[col.lane_id]), where("laneId"));
    const Lane derived = meta.lane_of_y(fr.y);
    if (lane_id == 1 || lane_id == 2) {
      fr.lane = lane_id == 1 ? Lane::right : Lane::left;
      if (fr.lane != derived)
        throw IntegrityError("vehicle " + std::to_string(fr.vehicle_id) +
                             ": laneId inconsistent with y at line " +
                             std::to_string(line_no));
    } else {
      fr.lane = derived;
    }
    by_vehicle[fr.vehicle_id].frames.push_back(fr);
  }

  Recording rec;
  rec.meta = meta;
  rec.trajectories.reserve(by_vehicle.size());
  for (auto& [id, traj] : by_vehicle) {
    traj.vehicle_id = id;
    for (size_t i = 1; i < traj.frames.size(); ++i) {
      if (traj.frames[i].frame != traj.frames[i - 1].frame + 1)
        throw IntegrityError("vehicle " + std::to_string(id) +
                             ": frames not contiguous/ascending near frame " +
                             std::to_string(traj.frames[i - 1].frame));
    }
    rec.trajectories.push_back(std::move(traj));
  }
  return rec;
}

inline Recording load_recording(const std::string& tracks_path,
                                const RecordingMeta& meta) {
  std::ifstream in(tracks_path);
  if (!in) throw ParseError("cannot open tracks file: " + tracks_path);
  return load_recording(in, meta);
}

inline const char* tracks_header() {
  return "frame,id,x,y,xVelocity,yVelocity,xAcceleration,yAcceleration,"
         "laneId,width,height,class";
}

/// Write the normalized view of a recording back to the tracks schema.
inline void write_recording(std::ostream& out, const Recording& rec,
                            const std::string& config_echo = "") {
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << tracks_header() << "\n";
  for (const auto& traj : rec.trajectories) {
    for (const auto& fr : traj.frames) {
      out << fr.frame << ',' << fr.vehicle_id << ',' << fmt_g9(fr.x) << ','
          << fmt_g9(fr.y) << ',' << fmt_g9(fr.vx) << ',' << fmt_g9(fr.vy) << ','
          << fmt_g9(fr.ax) << ',' << fmt_g9(fr.ay) << ','
          << (fr.lane == Lane::right ? 1 : 2) << ',' << fmt_g9(fr.length) << ','
          << fmt_g9(fr.lat_extent) << ',' << to_string(fr.vclass) << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Neighbor resolution
// ---------------------------------------------------------------------------

/// Nearest vehicle per slot at `frame`, ties in x broken by smaller
/// vehicle_id. A vehicle exactly level with the subject counts as ahead.
inline NeighborSet resolve_neighbors(const Recording& rec,
                                     std::int64_t vehicle_id,
                                     std::int64_t frame) {
  const Trajectory* subject = rec.find(vehicle_id);
  if (!subject || !subject->contains(frame))
    throw IntegrityError("resolve_neighbors: vehicle " + std::to_string(vehicle_id) +
                         " not present at frame " + std::to_string(frame));
  const TrackFrame& s = subject->at_frame(frame);

  NeighborSet ns;
  double best_ahead[2] = {0, 0}, best_behind[2] = {0, 0};
  const TrackFrame* ahead[2] = {nullptr, nullptr};
  const TrackFrame* behind[2] = {nullptr, nullptr};

  for (const auto& traj : rec.trajectories) {
    if (traj.vehicle_id == vehicle_id || !traj.contains(frame)) continue;
    const TrackFrame& o = traj.at_frame(frame);
    const int same = (o.lane == s.lane) ? 0 : 1;
    const double dx = o.x - s.x;
    if (dx >= 0) {
      if (!ahead[same] || dx < best_ahead[same] ||
          (dx == best_ahead[same] && o.vehicle_id < ahead[same]->vehicle_id)) {
        ahead[same] = &o;
        best_ahead[same] = dx;
      }
    } else {
      if (!behind[same] || -dx < best_behind[same] ||
          (-dx == best_behind[same] && o.vehicle_id < behind[same]->vehicle_id)) {
        behind[same] = &o;
        best_behind[same] = -dx;
      }
    }
  }
  ns.p = ahead[0];
  ns.f = behind[0];
  ns.pa = ahead[1];
  ns.fa = behind[1];
  return ns;
}

// ---------------------------------------------------------------------------
// Center-line crossings
// ---------------------------------------------------------------------------

enum class ChangeDirection { fold_down, overtake };  // FD: left->right, OV: right->left

inline const char* to_string(ChangeDirection d) {
  return d == ChangeDirection::overtake ? "OV" : "FD";
}

struct CrossingEvent {
  std::int64_t frame = 0;  // first frame past the center-line
  ChangeDirection direction = ChangeDirection::overtake;
};

/// One event per sign change of (y - centerline). Direction follows the
/// European convention: right->left is an overtake, left->right a fold-down.
inline std::vector<CrossingEvent> centerline_crossings(const Trajectory& traj,
                                                       const RecordingMeta& meta) {
  if (traj.frames.empty())
    throw IntegrityError("centerline_crossings: empty trajectory");
  std::vector<CrossingEvent> events;
  const double c = meta.centerline();
  int prev_side = 0;
  for (const auto& fr : traj.frames) {
    const double d = fr.y - c;
    const int side = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (side == 0) continue;
    if (prev_side != 0 && side != prev_side) {
      // previous side was the right lane <=> this crossing is an overtake
      const bool from_low = prev_side < 0;
      const bool from_right = (from_low == meta.right_lane_low_y);
      events.push_back({fr.frame, from_right ? ChangeDirection::overtake
                                             : ChangeDirection::fold_down});
    }
    prev_side = side;
  }
  return events;
}

}  // namespace lcbench
