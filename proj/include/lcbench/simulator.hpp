#pragma once

// Two-lane ring-road traffic simulator: IDM longitudinal dynamics per
// vehicle, MOBIL lane-change decisions at 1 Hz with the shared per-lane
// parameters, kinematic cosine lateral profiles, and synthetic benchmark
// generation with ground-truth labels. Vehicles drive with their own
// (jittered) IDM parameters but decide with the shared per-lane MOBIL
// parameters, which is what makes the emitted decisions an exact calibration
// oracle.
//
// The emitted recording is a segment view: a vehicle passing the ring origin
// continues as a fresh vehicle id, like a new vehicle entering the measured
// road section, so per-id trajectories stay contiguous and wrap-free.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcbench/common.hpp"
#include "lcbench/features.hpp"
#include "lcbench/mobil.hpp"
#include "lcbench/tracks.hpp"

namespace lcbench {

struct ClassMix {
  IdmParams mean;
  double jitter_frac = 0.05;  // uniform +- fraction on every parameter
};

struct ScenarioConfig {
  double road_length = 1000.0;  // m, periodic
  int cars_right = 10;
  int cars_left = 10;
  int trucks = 5;  // trucks drive the right lane and never change lanes
  ClassMix car{{33.0, 1.2, 1.4, 2.0, 4.5}, 0.05};
  ClassMix truck{{23.5, 1.7, 0.9, 1.5, 10.0}, 0.05};
  MobilParams mobil_right{{63.16, 1.04, 1.45, 2.60, 7.27}, 0.53, 1.56};
  MobilParams mobil_left{{58.77, 3.97, 2.76, 1.37, 6.17}, 0.64, -1.14};
  double dt = 0.1;                    // s
  double duration = 300.0;            // s
  double lane_change_duration = 3.0;  // s, smooth cosine lateral profile
  double decision_period = 1.0;       // s between MOBIL evaluations per car
  double accel_noise_sd = 0.0;        // m/s^2
  double decision_noise = 0.0;        // probability of flipping a decision
  double label_noise = 0.05;          // noisy_nonlinear label flip probability
  std::uint64_t seed = 1;
  std::string recording_id = "sim";

  void validate() const {
    if (!(road_length > 0)) throw ConfigError("scenario: road_length must be > 0");
    if (cars_right < 0 || cars_left < 0 || trucks < 0)
      throw ConfigError("scenario: negative vehicle count");
    if (cars_right + cars_left + trucks == 0)
      throw ConfigError("scenario: no vehicles");
    if (!(dt > 0)) throw ConfigError("scenario: dt must be > 0");
    if (!(duration >= 0)) throw ConfigError("scenario: duration must be >= 0");
    if (!(lane_change_duration > 0))
      throw ConfigError("scenario: lane_change_duration must be > 0");
    if (!(decision_period >= dt))
      throw ConfigError("scenario: decision_period must be >= dt");
    if (!(decision_noise >= 0 && decision_noise <= 1))
      throw ConfigError("scenario: decision_noise must be in [0,1]");
    mobil_right.validate();
    mobil_left.validate();
  }

  RecordingMeta meta() const {
    RecordingMeta m;
    m.recording_id = recording_id;
    m.frame_rate = 1.0 / dt;
    m.road_length = road_length;
    m.lane_markings = {0.0, 4.0, 8.0};
    m.direction = CarriagewayDirection::lower;
    m.right_lane_low_y = false;  // right lane is the high-y band
    return m;
  }
};

struct SimEvent {
  std::int64_t vehicle_id = 0;  // segment id at the crossing frame
  std::int64_t decision_frame = 0;
  std::int64_t crossing_frame = 0;
  ChangeDirection direction = ChangeDirection::overtake;
};

struct SimResult {
  Recording recording;
  std::vector<SimEvent> events;
  // One sample per MOBIL evaluation: features as the decision saw them,
  // maneuver = the executed (post-noise) decision mapped onto the lane.
  std::vector<ManeuverSample> decision_samples;
};

// ---------------------------------------------------------------------------

namespace detail {

struct SimVehicle {
  std::int64_t emit_id = 0;
  VehicleClass vclass = VehicleClass::car;
  IdmParams drive;
  Lane lane = Lane::right;
  double x = 0, v = 0;
  double a_applied = 0;
  double y = 0, vy = 0, ay = 0;
  bool changing = false;
  Lane from_lane = Lane::right, to_lane = Lane::left;
  std::int64_t change_start = 0;
  std::int64_t decision_frame = 0;  // of the pending change
  bool crossed = false;             // centerline crossed during this change
  int phase = 0;

  bool occupies(Lane l) const {
    if (changing) return l == from_lane || l == to_lane;
    return l == lane;
  }
};

inline double ring_gap(double from_x, double to_x, double road_length) {
  double g = to_x - from_x;
  while (g <= 0) g += road_length;
  while (g > road_length) g -= road_length;
  return g;
}

/// Equilibrium speed for a constant gap: the root of a(v,v,gap) in [0, v0].
inline double idm_equilibrium_speed(const IdmParams& p, double gap) {
  double lo = 0.0, hi = p.v0;
  if (idm_acceleration_clamped(lo, lo, gap, p) <= 0) return 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (idm_acceleration_clamped(mid, mid, gap, p) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Equilibrium center-to-center spacing at a given speed (bisection on the
/// gap). Used by tests as an independent oracle cross-check.
inline double idm_equilibrium_spacing(const IdmParams& p, double v,
                                      double max_dx = 1e5) {
  double lo = p.length + 1e-6, hi = max_dx;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (idm_acceleration_clamped(v, v, mid, p) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Run the scenario. The returned recording round-trips through the tracks
/// schema unchanged; events and decision samples reference segment-local
/// vehicle ids.
inline SimResult simulate(const ScenarioConfig& cfg) {
  cfg.validate();
  const RecordingMeta meta = cfg.meta();
  const double L = cfg.road_length;
  const auto frames = static_cast<std::int64_t>(std::llround(cfg.duration / cfg.dt));
  const auto period_frames =
      std::max<std::int64_t>(1, std::llround(cfg.decision_period / cfg.dt));
  const auto change_frames =
      std::max<std::int64_t>(1, std::llround(cfg.lane_change_duration / cfg.dt));
  const ImputationConstants imputation;

  Rng init_rng(substream_seed(cfg.seed, 1));
  Rng noise_rng(substream_seed(cfg.seed, 2));
  Rng decision_rng(substream_seed(cfg.seed, 3));

  // --- populate lanes at equilibrium spacing
  std::vector<detail::SimVehicle> fleet;
  std::int64_t next_id = 1;
  auto jittered = [&](const ClassMix& mix) {
    IdmParams p = mix.mean;
    auto j = [&](double v) { return v * (1.0 + mix.jitter_frac * (2.0 * init_rng.uniform() - 1.0)); };
    p.v0 = j(p.v0);
    p.T = j(p.T);
    p.alpha = j(p.alpha);
    p.beta = j(p.beta);
    p.length = j(p.length);
    return p;
  };
  auto populate = [&](Lane lane, int cars, int trucks) {
    const int total = cars + trucks;
    if (total == 0) return;
    const double spacing = L / total;
    int truck_left = trucks;
    const int truck_every = trucks > 0 ? std::max(1, total / trucks) : total + 1;
    for (int k = 0; k < total; ++k) {
      detail::SimVehicle veh;
      const bool is_truck = truck_left > 0 && (k % truck_every) == truck_every - 1;
      if (is_truck) --truck_left;
      veh.vclass = is_truck ? VehicleClass::truck : VehicleClass::car;
      veh.drive = jittered(is_truck ? cfg.truck : cfg.car);
      if (!(spacing > veh.drive.length + 1.0))
        throw ConfigError("scenario: over-dense lane, equilibrium spacing " +
                          fmt_g9(spacing) + " m below length + 1 m");
      veh.lane = lane;
      veh.x = spacing * k;
      veh.v = detail::idm_equilibrium_speed(veh.drive, spacing);
      veh.y = meta.lane_center(lane);
      veh.emit_id = next_id++;
      fleet.push_back(veh);
    }
  };
  populate(Lane::right, cfg.cars_right, cfg.trucks);
  populate(Lane::left, cfg.cars_left, 0);
  for (std::size_t i = 0; i < fleet.size(); ++i)
    fleet[i].phase = static_cast<int>(i % static_cast<std::size_t>(period_frames));

  // --- neighbor scans on the ring
  auto leader_on = [&](Lane lane, std::size_t self) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_gap = 0;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
      if (j == self || !fleet[j].occupies(lane)) continue;
      const double g = detail::ring_gap(fleet[self].x, fleet[j].x, L);
      if (!best || g < best_gap) {
        best = j;
        best_gap = g;
      }
    }
    return best;
  };
  auto follower_on = [&](Lane lane, std::size_t self) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_gap = 0;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
      if (j == self || !fleet[j].occupies(lane)) continue;
      const double g = detail::ring_gap(fleet[j].x, fleet[self].x, L);
      if (!best || g < best_gap) {
        best = j;
        best_gap = g;
      }
    }
    return best;
  };

  SimResult result;
  result.recording.meta = meta;
  std::map<std::int64_t, Trajectory> segments;
  auto other = [](Lane l) { return l == Lane::right ? Lane::left : Lane::right; };

  for (std::int64_t frame = 0; frame < frames; ++frame) {
    // --- MOBIL decisions (staggered, cars only, not while changing)
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      detail::SimVehicle& veh = fleet[i];
      if (veh.vclass != VehicleClass::car || veh.changing) continue;
      if (frame % period_frames != veh.phase) continue;

      MobilInputs in;
      in.v = veh.v;
      const Lane own = veh.lane, adj = other(own);
      const std::optional<std::size_t> slots[4] = {
          leader_on(own, i), follower_on(own, i), leader_on(adj, i),
          follower_on(adj, i)};
      ManeuverSample sample;
      sample.recording_id = meta.recording_id;
      sample.vehicle_id = veh.emit_id;
      sample.frame = frame;
      sample.lane = own;
      sample.tau = 0;
      sample.vx = veh.v;
      sample.vy = 0;
      sample.ax = veh.a_applied;
      sample.ay = 0;
      sample.length = veh.drive.length;
      for (int sl = 0; sl < 4; ++sl) {
        NeighborFeatures& nb = sample.nb[static_cast<size_t>(sl)];
        if (!slots[sl]) continue;
        const detail::SimVehicle& o = fleet[*slots[sl]];
        nb.present = true;
        const bool ahead = sl == 0 || sl == 2;
        nb.dx = ahead ? detail::ring_gap(veh.x, o.x, L)
                      : detail::ring_gap(o.x, veh.x, L);
        nb.dv = o.v - veh.v;
        nb.time_gap = (nb.dx - 0.5 * (veh.drive.length + o.drive.length)) /
                      std::max(veh.v, 1e-6);
        nb.ax = o.a_applied;
        nb.vclass = o.vclass == VehicleClass::truck ? 1 : 0;
        in.dx[static_cast<size_t>(sl)] = nb.dx;
        in.dv[static_cast<size_t>(sl)] = nb.dv;
      }
      for (int sl = 0; sl < 4; ++sl) {
        if (slots[sl]) continue;
        in.dx[static_cast<size_t>(sl)] = imputation.dx;
        in.dv[static_cast<size_t>(sl)] = imputation.dv;
      }

      const MobilParams& mp = own == Lane::right ? cfg.mobil_right : cfg.mobil_left;
      bool change = decide_from_margins(mobil_margins(in, mp, own));
      if (cfg.decision_noise > 0 && decision_rng.bernoulli(cfg.decision_noise))
        change = !change;

      sample.maneuver = own == Lane::right ? (change ? Maneuver::OV : Maneuver::LKR)
                                           : (change ? Maneuver::FD : Maneuver::LKL);
      result.decision_samples.push_back(std::move(sample));

      if (change) {
        veh.changing = true;
        veh.from_lane = own;
        veh.to_lane = adj;
        veh.change_start = frame;
        veh.decision_frame = frame;
        veh.crossed = false;
        veh.lane = adj;  // claims the target lane immediately
      }
    }

    // --- accelerations (after decisions so claims are visible)
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      detail::SimVehicle& veh = fleet[i];
      auto accel_against = [&](Lane lane) {
        const auto lead = leader_on(lane, i);
        if (!lead)
          return detail::idm_acceleration_clamped(veh.v, veh.v, imputation.dx,
                                                  veh.drive);
        const detail::SimVehicle& o = fleet[*lead];
        return detail::idm_acceleration_clamped(
            veh.v, o.v, detail::ring_gap(veh.x, o.x, L), veh.drive);
      };
      double a = veh.changing
                     ? std::min(accel_against(veh.from_lane), accel_against(veh.to_lane))
                     : accel_against(veh.lane);
      if (cfg.accel_noise_sd > 0) a += noise_rng.normal(0.0, cfg.accel_noise_sd);
      veh.a_applied = a;
    }

    // --- lateral state and record emission
    for (auto& veh : fleet) {
      if (veh.changing) {
        const double s = static_cast<double>(frame - veh.change_start) /
                         static_cast<double>(change_frames);
        const double y0 = meta.lane_center(veh.from_lane);
        const double y1 = meta.lane_center(veh.to_lane);
        const double dy = y1 - y0;
        const double D = cfg.lane_change_duration;
        if (s >= 1.0) {
          veh.changing = false;
          veh.y = y1;
          veh.vy = 0;
          veh.ay = 0;
        } else {
          veh.y = y0 + dy * 0.5 * (1.0 - std::cos(M_PI * s));
          veh.vy = dy * M_PI / (2.0 * D) * std::sin(M_PI * s);
          veh.ay = dy * M_PI * M_PI / (2.0 * D * D) * std::cos(M_PI * s);
          if (!veh.crossed && s >= 0.5) {
            veh.crossed = true;
            result.events.push_back({veh.emit_id, veh.decision_frame, frame,
                                     veh.from_lane == Lane::right
                                         ? ChangeDirection::overtake
                                         : ChangeDirection::fold_down});
          }
        }
      }
      TrackFrame fr;
      fr.vehicle_id = veh.emit_id;
      fr.frame = frame;
      fr.x = veh.x;
      fr.y = veh.y;
      fr.vx = veh.v;
      fr.vy = veh.vy;
      fr.ax = veh.a_applied;
      fr.ay = veh.ay;
      fr.lane = meta.lane_of_y(veh.y);
      fr.length = veh.drive.length;
      fr.lat_extent = 2.0;
      fr.vclass = veh.vclass;
      segments[veh.emit_id].frames.push_back(fr);
    }

    // --- explicit Euler step, ring wrap renews the emitted id
    for (auto& veh : fleet) {
      veh.x += veh.v * cfg.dt;
      veh.v = std::max(0.0, veh.v + veh.a_applied * cfg.dt);
      if (veh.x >= L) {
        veh.x -= L;
        veh.emit_id = next_id++;
      }
    }
  }

  result.recording.trajectories.reserve(segments.size());
  for (auto& [id, traj] : segments) {
    traj.vehicle_id = id;
    result.recording.trajectories.push_back(std::move(traj));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Benchmark generation
// ---------------------------------------------------------------------------

enum class LabelRule { mobil_truth, noisy_nonlinear };

/// Non-monotone two-ridge decision rule used by the noisy_nonlinear
/// benchmark. It lies inside the 2-hidden-unit network family and outside
/// both the linear-classifier and the MOBIL families.
inline int hidden_nonlinear_rule(const ManeuverSample& s) {
  constexpr int P = 0, PA = 2, FA = 3;
  const double zdx_p = (s.nb[P].dx - 60.0) / 40.0;
  const double zdv_p = s.nb[P].dv / 4.0;
  const double zdx_pa = (s.nb[PA].dx - 60.0) / 40.0;
  const double zdv_pa = s.nb[PA].dv / 4.0;
  const double zdx_fa = (s.nb[FA].dx - 60.0) / 40.0;
  const double zdv_fa = s.nb[FA].dv / 4.0;
  double g;
  if (s.lane == Lane::right) {
    // pull: slow predecessor close ahead; veto: fast adjacent follower close
    const double pull = detail::sigmoid(-2.2 * zdv_p - 1.6 * zdx_p - 0.4);
    const double veto = detail::sigmoid(1.8 * zdv_fa - 1.5 * zdx_fa - 0.2);
    g = 3.0 * pull - 2.4 * veto - 1.25;
  } else {
    // pull: free right lane ahead; veto: mid-range predecessor on that lane
    const double pull = detail::sigmoid(1.7 * zdx_pa + 1.9 * zdv_pa - 0.5);
    const double veto = detail::sigmoid(-1.6 * zdx_pa + 1.2 * zdv_p - 0.3);
    g = 3.0 * pull - 2.2 * veto - 1.1;
  }
  return g > 0 ? 1 : 0;
}

struct BenchmarkData {
  std::vector<ManeuverSample> samples;
  SimResult sim;
};

/// Run the scenario and produce a labeled sample set. mobil_truth keeps the
/// generator's own executed decisions as labels (the calibration oracle);
/// noisy_nonlinear relabels each decision-epoch sample with the hidden rule
/// plus label_noise flips, making linear models strictly suboptimal.
inline BenchmarkData generate_benchmark(const ScenarioConfig& cfg, LabelRule rule) {
  BenchmarkData out;
  out.sim = simulate(cfg);
  out.samples = out.sim.decision_samples;
  if (rule == LabelRule::noisy_nonlinear) {
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
      ManeuverSample& s = out.samples[i];
      const ManeuverSample imputed = impute_missing(s, FeatureSpec{});
      int label = hidden_nonlinear_rule(imputed);
      Rng rng(substream_seed(cfg.seed ^ 0x6ab5, i));
      if (cfg.label_noise > 0 && rng.bernoulli(cfg.label_noise)) label = 1 - label;
      s.maneuver = s.lane == Lane::right ? (label ? Maneuver::OV : Maneuver::LKR)
                                         : (label ? Maneuver::FD : Maneuver::LKL);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenario and events file IO
// ---------------------------------------------------------------------------

inline ScenarioConfig parse_scenario(const KeyValueMap& kv) {
  ScenarioConfig cfg;
  auto num = [&](const char* key, double& slot) {
    if (auto it = kv.find(key); it != kv.end()) slot = parse_double(it->second, key);
  };
  auto integer = [&](const char* key, int& slot) {
    if (auto it = kv.find(key); it != kv.end())
      slot = static_cast<int>(parse_int(it->second, key));
  };
  auto idm = [&](const std::string& prefix, IdmParams& p) {
    auto f = [&](const char* suffix, double& slot) {
      if (auto it = kv.find(prefix + suffix); it != kv.end())
        slot = parse_double(it->second, prefix + suffix);
    };
    f(".v0", p.v0);
    f(".T", p.T);
    f(".alpha", p.alpha);
    f(".beta", p.beta);
    f(".length", p.length);
  };
  num("road_length", cfg.road_length);
  integer("cars_right", cfg.cars_right);
  integer("cars_left", cfg.cars_left);
  integer("trucks", cfg.trucks);
  idm("car", cfg.car.mean);
  num("car.jitter", cfg.car.jitter_frac);
  idm("truck", cfg.truck.mean);
  num("truck.jitter", cfg.truck.jitter_frac);
  idm("mobil_right", cfg.mobil_right.idm);
  num("mobil_right.politeness", cfg.mobil_right.politeness);
  num("mobil_right.threshold", cfg.mobil_right.threshold);
  idm("mobil_left", cfg.mobil_left.idm);
  num("mobil_left.politeness", cfg.mobil_left.politeness);
  num("mobil_left.threshold", cfg.mobil_left.threshold);
  num("dt", cfg.dt);
  num("duration", cfg.duration);
  num("lane_change_duration", cfg.lane_change_duration);
  num("decision_period", cfg.decision_period);
  num("accel_noise_sd", cfg.accel_noise_sd);
  num("decision_noise", cfg.decision_noise);
  num("label_noise", cfg.label_noise);
  if (auto it = kv.find("seed"); it != kv.end())
    cfg.seed = static_cast<std::uint64_t>(parse_int(it->second, "seed"));
  if (auto it = kv.find("recording_id"); it != kv.end()) cfg.recording_id = it->second;
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  return parse_scenario(load_key_values(path));
}

inline void write_events(std::ostream& out, const std::vector<SimEvent>& events,
                         const std::string& config_echo = "") {
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << "vehicle_id,decision_frame,crossing_frame,direction\n";
  for (const auto& e : events)
    out << e.vehicle_id << ',' << e.decision_frame << ',' << e.crossing_frame
        << ',' << to_string(e.direction) << "\n";
}

}  // namespace lcbench
