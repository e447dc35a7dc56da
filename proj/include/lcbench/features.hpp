#pragma once

// Maneuver samples: the label plus the 24 explanatory variables measured a
// horizon tau before the center-line crossing (or at the trajectory midpoint
// for lane keepers). Pure functions over immutable recordings.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "lcbench/common.hpp"
#include "lcbench/tracks.hpp"

namespace lcbench {

enum class Maneuver { LKR, LKL, FD, OV };

inline const char* to_string(Maneuver m) {
  switch (m) {
    case Maneuver::LKR: return "LKR";
    case Maneuver::LKL: return "LKL";
    case Maneuver::FD: return "FD";
    default: return "OV";
  }
}

inline Maneuver parse_maneuver(std::string_view s) {
  std::string v = trim(s);
  if (v == "LKR") return Maneuver::LKR;
  if (v == "LKL") return Maneuver::LKL;
  if (v == "FD") return Maneuver::FD;
  if (v == "OV") return Maneuver::OV;
  throw ParseError("unknown maneuver '" + v + "'");
}

/// 1 for a lane change (FD/OV), 0 for lane keeping.
inline int maneuver_label(Maneuver m) {
  return (m == Maneuver::FD || m == Maneuver::OV) ? 1 : 0;
}

/// Lane the maneuver is observed on (FD happens on the left lane, OV on the
/// right; lane keepers carry their lane in the name).
inline Lane maneuver_lane(Maneuver m) {
  return (m == Maneuver::LKR || m == Maneuver::OV) ? Lane::right : Lane::left;
}

enum class NeighborSlot { P = 0, F = 1, PA = 2, FA = 3 };
inline const char* slot_name(int s) {
  static const char* names[4] = {"P", "F", "PA", "FA"};
  return names[s];
}

struct NeighborFeatures {
  bool present = false;
  double dx = 0;        // spacing |x_S - x|, m
  double dv = 0;        // speed difference v_S - v, m/s
  double time_gap = 0;  // (dx - (l + l_S)/2) / v, s
  double ax = 0;        // neighbor longitudinal acceleration, m/s^2
  int vclass = 0;       // 0 car, 1 truck
};

/// One labeled observation.
struct ManeuverSample {
  std::string recording_id;
  std::int64_t vehicle_id = 0;
  std::int64_t frame = 0;  // measurement frame
  Maneuver maneuver = Maneuver::LKR;
  Lane lane = Lane::right;  // lane at the measurement frame
  double tau = 0;           // s, horizon to the crossing (0 for LK samples)
  double vx = 0, vy = 0, ax = 0, ay = 0;
  double length = 0;  // subject length, m
  std::array<NeighborFeatures, 4> nb{};  // P, F, PA, FA
};

enum class FeatureSubset { mobil8, full24 };
enum class KinematicsSource { finite_difference, recorded };

inline const char* to_string(FeatureSubset s) {
  return s == FeatureSubset::mobil8 ? "mobil8" : "full24";
}
inline FeatureSubset parse_subset(std::string_view s) {
  std::string v = lower(trim(s));
  if (v == "mobil8") return FeatureSubset::mobil8;
  if (v == "full24") return FeatureSubset::full24;
  throw ParseError("unknown feature subset '" + v + "' (mobil8|full24)");
}

/// Fill-in values for absent neighbors. 500 m encodes a free road beyond the
/// sight range; the virtual neighbor is a point-length car moving with the
/// subject.
struct ImputationConstants {
  double dx = 500.0;
  double dv = 0.0;
  double ax = 0.0;
  int vclass = 0;
};

struct FeatureSpec {
  FeatureSubset subset = FeatureSubset::full24;
  double tau = 2.0;  // s
  ImputationConstants imputation;
  KinematicsSource kinematics = KinematicsSource::finite_difference;
  bool include_truck_subjects = false;
  double delta_t = 0.1;  // s, finite-difference step

  void validate() const {
    if (!(tau >= 0)) throw ConfigError("feature spec: tau must be >= 0");
    if (!(delta_t > 0)) throw ConfigError("feature spec: delta_t must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

struct Kinematics {
  double vx = 0, vy = 0, ax = 0, ay = 0;
};

/// Half-step in frames for a centered difference of width delta_t.
inline std::int64_t fd_half_step(double delta_t, double frame_rate) {
  return std::max<std::int64_t>(1, std::llround(0.5 * delta_t * frame_rate));
}

/// Centered differences of positions (velocities) and of those velocities
/// (accelerations). The step is delta_t expressed in frames; on grids where
/// delta_t/2 is below one frame the effective step is one frame. Returns
/// nullopt when the trajectory lacks the needed history (sample skipped).
inline std::optional<Kinematics> finite_difference_kinematics(
    const Trajectory& traj, std::int64_t frame, double delta_t,
    double frame_rate) {
  const std::int64_t h = fd_half_step(delta_t, frame_rate);
  if (frame - 2 * h < traj.first_frame() || frame + 2 * h > traj.last_frame())
    return std::nullopt;
  const double dt_eff = 2.0 * static_cast<double>(h) / frame_rate;
  auto vel = [&](std::int64_t f, double& vx, double& vy) {
    const TrackFrame& a = traj.at_frame(f + h);
    const TrackFrame& b = traj.at_frame(f - h);
    vx = (a.x - b.x) / dt_eff;
    vy = (a.y - b.y) / dt_eff;
  };
  Kinematics k;
  vel(frame, k.vx, k.vy);
  double vxp, vyp, vxm, vym;
  vel(frame + h, vxp, vyp);
  vel(frame - h, vxm, vym);
  k.ax = (vxp - vxm) / dt_eff;
  k.ay = (vyp - vym) / dt_eff;
  return k;
}

namespace detail {

inline Kinematics recorded_kinematics(const TrackFrame& fr) {
  return {fr.vx, fr.vy, fr.ax, fr.ay};
}

/// Kinematics per spec source; finite differences fall back to the recorded
/// columns when the trajectory is too short around `frame`.
inline Kinematics neighbor_kinematics(const Trajectory& traj,
                                      std::int64_t frame,
                                      const FeatureSpec& spec,
                                      double frame_rate) {
  if (spec.kinematics == KinematicsSource::finite_difference) {
    if (auto k = finite_difference_kinematics(traj, frame, spec.delta_t, frame_rate))
      return *k;
  }
  return recorded_kinematics(traj.at_frame(frame));
}

inline double time_gap(double dx, double len_subject, double len_neighbor,
                       double vx) {
  return (dx - 0.5 * (len_subject + len_neighbor)) / std::max(vx, 1e-6);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

/// Fill absent-neighbor slots with the spec's constants. The present mask is
/// preserved for audit.
inline ManeuverSample impute_missing(ManeuverSample s, const FeatureSpec& spec) {
  const ImputationConstants& imp = spec.imputation;
  for (auto& nb : s.nb) {
    if (nb.present) continue;
    nb.dx = imp.dx;
    nb.dv = imp.dv;
    nb.ax = imp.ax;
    nb.vclass = imp.vclass;
    nb.time_gap = detail::time_gap(imp.dx, s.length, 0.0, s.vx);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

struct ExtractStats {
  std::size_t samples = 0;
  std::size_t lane_change_samples = 0;
  std::size_t skipped_history = 0;      // not enough history before crossing
  std::size_t skipped_kinematics = 0;   // finite-difference margin missing
  std::size_t skipped_inconsistent = 0; // lane at measurement contradicts event
  std::size_t truck_subjects_excluded = 0;
};

namespace detail {

inline ManeuverSample build_sample(const Recording& rec, const Trajectory& traj,
                                   std::int64_t frame, Maneuver maneuver,
                                   double tau, const FeatureSpec& spec,
                                   const Kinematics& kin) {
  const TrackFrame& s = traj.at_frame(frame);
  ManeuverSample out;
  out.recording_id = rec.meta.recording_id;
  out.vehicle_id = traj.vehicle_id;
  out.frame = frame;
  out.maneuver = maneuver;
  out.lane = s.lane;
  out.tau = tau;
  out.vx = kin.vx;
  out.vy = kin.vy;
  out.ax = kin.ax;
  out.ay = kin.ay;
  out.length = s.length;

  const NeighborSet ns = resolve_neighbors(rec, traj.vehicle_id, frame);
  const TrackFrame* slots[4] = {ns.p, ns.f, ns.pa, ns.fa};
  for (int i = 0; i < 4; ++i) {
    if (!slots[i]) continue;
    const TrackFrame& o = *slots[i];
    const Trajectory* otraj = rec.find(o.vehicle_id);
    const Kinematics ok =
        neighbor_kinematics(*otraj, frame, spec, rec.meta.frame_rate);
    NeighborFeatures& nb = out.nb[static_cast<size_t>(i)];
    nb.present = true;
    nb.dx = std::fabs(o.x - s.x);
    nb.dv = ok.vx - kin.vx;
    nb.time_gap = time_gap(nb.dx, s.length, o.length, kin.vx);
    nb.ax = ok.ax;
    nb.vclass = o.vclass == VehicleClass::truck ? 1 : 0;
  }
  return out;
}

}  // namespace detail

/// Extract labeled samples from a recording: one FD/OV sample per crossing
/// event with at least tau seconds of prior history, and one LKR/LKL sample
/// per lane-keeping car at its trajectory midpoint. Only cars become
/// subjects unless the spec says otherwise; trucks always contribute as
/// neighbors. Output order is fixed by (vehicle_id, frame). Samples are
/// returned raw (absent neighbors unimputed).
inline std::vector<ManeuverSample> extract_samples(const Recording& rec,
                                                   const FeatureSpec& spec,
                                                   ExtractStats* stats = nullptr) {
  spec.validate();
  ExtractStats local;
  std::vector<ManeuverSample> out;
  const double fps = rec.meta.frame_rate;
  const std::int64_t h = fd_half_step(spec.delta_t, fps);
  const bool need_fd = spec.kinematics == KinematicsSource::finite_difference;

  auto subject_kinematics =
      [&](const Trajectory& traj, std::int64_t frame) -> std::optional<Kinematics> {
    if (need_fd) {
      auto k = finite_difference_kinematics(traj, frame, spec.delta_t, fps);
      if (!k) local.skipped_kinematics++;
      return k;
    }
    return detail::recorded_kinematics(traj.at_frame(frame));
  };

  for (const auto& traj : rec.trajectories) {
    if (traj.frames.empty()) continue;
    if (traj.frames.front().vclass == VehicleClass::truck &&
        !spec.include_truck_subjects) {
      local.truck_subjects_excluded++;
      continue;
    }
    const auto events = centerline_crossings(traj, rec.meta);
    if (events.empty()) {
      const std::int64_t mid =
          traj.first_frame() + (traj.last_frame() - traj.first_frame()) / 2;
      auto kin = subject_kinematics(traj, mid);
      if (!kin) continue;
      const Maneuver m = traj.at_frame(mid).lane == Lane::right ? Maneuver::LKR
                                                                : Maneuver::LKL;
      out.push_back(detail::build_sample(rec, traj, mid, m, spec.tau, spec, *kin));
      local.samples++;
      continue;
    }
    for (const auto& ev : events) {
      const std::int64_t mf = ev.frame - std::llround(spec.tau * fps);
      if (mf < traj.first_frame() || (need_fd && mf - 2 * h < traj.first_frame())) {
        local.skipped_history++;
        continue;
      }
      const Maneuver m = ev.direction == ChangeDirection::overtake ? Maneuver::OV
                                                                   : Maneuver::FD;
      if (traj.at_frame(mf).lane != maneuver_lane(m)) {
        local.skipped_inconsistent++;
        continue;
      }
      auto kin = subject_kinematics(traj, mf);
      if (!kin) continue;
      out.push_back(detail::build_sample(rec, traj, mf, m, spec.tau, spec, *kin));
      local.samples++;
      local.lane_change_samples++;
    }
  }
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------------------
// Feature vectors
// ---------------------------------------------------------------------------

inline std::size_t feature_count(FeatureSubset s) {
  return s == FeatureSubset::mobil8 ? 8u : 24u;
}

inline std::vector<std::string> feature_names(FeatureSubset s) {
  std::vector<std::string> names;
  if (s == FeatureSubset::full24)
    names = {"v_x", "v_y", "a_x", "a_y"};
  for (int i = 0; i < 4; ++i) {
    const std::string suf = std::string("_") + slot_name(i);
    names.push_back("dx" + suf);
    names.push_back("dv" + suf);
    if (s == FeatureSubset::full24) {
      names.push_back("T" + suf);
      names.push_back("ax" + suf);
      names.push_back("C" + suf);
    }
  }
  return names;
}

/// Canonical feature vector of a (imputed) sample. The mobil8 values are an
/// exact subset of the full24 values.
inline std::vector<double> featurize(const ManeuverSample& s, FeatureSubset sub) {
  std::vector<double> x;
  x.reserve(feature_count(sub));
  if (sub == FeatureSubset::full24) {
    x.push_back(s.vx);
    x.push_back(s.vy);
    x.push_back(s.ax);
    x.push_back(s.ay);
  }
  for (const auto& nb : s.nb) {
    x.push_back(nb.dx);
    x.push_back(nb.dv);
    if (sub == FeatureSubset::full24) {
      x.push_back(nb.time_gap);
      x.push_back(nb.ax);
      x.push_back(static_cast<double>(nb.vclass));
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Sample table IO
// ---------------------------------------------------------------------------

inline const char* sample_table_header() {
  return "recording_id,vehicle_id,frame,maneuver,lane,tau,v_x,v_y,a_x,a_y,length,"
         "dx_P,dv_P,T_P,ax_P,C_P,present_P,"
         "dx_F,dv_F,T_F,ax_F,C_F,present_F,"
         "dx_PA,dv_PA,T_PA,ax_PA,C_PA,present_PA,"
         "dx_FA,dv_FA,T_FA,ax_FA,C_FA,present_FA";
}

/// Deterministic delimited export; doubles are written so they round-trip
/// exactly.
inline void write_samples(std::ostream& out,
                          const std::vector<ManeuverSample>& samples,
                          const std::string& config_echo = "") {
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << sample_table_header() << "\n";
  for (const auto& s : samples) {
    out << s.recording_id << ',' << s.vehicle_id << ',' << s.frame << ','
        << to_string(s.maneuver) << ',' << to_string(s.lane) << ','
        << fmt_g17(s.tau) << ',' << fmt_g17(s.vx) << ',' << fmt_g17(s.vy) << ','
        << fmt_g17(s.ax) << ',' << fmt_g17(s.ay) << ',' << fmt_g17(s.length);
    for (const auto& nb : s.nb) {
      out << ',' << fmt_g17(nb.dx) << ',' << fmt_g17(nb.dv) << ','
          << fmt_g17(nb.time_gap) << ',' << fmt_g17(nb.ax) << ',' << nb.vclass
          << ',' << (nb.present ? 1 : 0);
    }
    out << "\n";
  }
}

inline std::vector<ManeuverSample> read_samples(std::istream& in) {
  std::vector<ManeuverSample> out;
  std::string line;
  std::int64_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (!header_seen) {
      if (t != sample_table_header())
        throw ParseError("sample table: unexpected header at line " +
                         std::to_string(line_no));
      header_seen = true;
      continue;
    }
    const auto c = split(t, ',');
    if (c.size() != 35)
      throw ParseError("sample table line " + std::to_string(line_no) +
                       ": expected 35 columns, got " + std::to_string(c.size()));
    ManeuverSample s;
    auto at = [&](size_t i) { return trim(c[i]); };
    s.recording_id = at(0);
    s.vehicle_id = parse_int(at(1), "vehicle_id");
    s.frame = parse_int(at(2), "frame");
    s.maneuver = parse_maneuver(at(3));
    s.lane = parse_lane(at(4));
    s.tau = parse_double(at(5), "tau");
    s.vx = parse_double(at(6), "v_x");
    s.vy = parse_double(at(7), "v_y");
    s.ax = parse_double(at(8), "a_x");
    s.ay = parse_double(at(9), "a_y");
    s.length = parse_double(at(10), "length");
    for (int i = 0; i < 4; ++i) {
      NeighborFeatures& nb = s.nb[static_cast<size_t>(i)];
      const size_t base = 11 + 6 * static_cast<size_t>(i);
      nb.dx = parse_double(at(base), "dx");
      nb.dv = parse_double(at(base + 1), "dv");
      nb.time_gap = parse_double(at(base + 2), "T");
      nb.ax = parse_double(at(base + 3), "ax");
      nb.vclass = static_cast<int>(parse_int(at(base + 4), "C"));
      nb.present = parse_int(at(base + 5), "present") != 0;
    }
    out.push_back(std::move(s));
  }
  if (!header_seen) throw ParseError("sample table: missing header");
  return out;
}

inline std::vector<ManeuverSample> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open sample table: " + path);
  return read_samples(in);
}

}  // namespace lcbench
