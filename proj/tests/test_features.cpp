#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "lcbench/features.hpp"
#include "lcbench/tracks.hpp"

using namespace lcbench;

namespace {

RecordingMeta test_meta() {
  RecordingMeta m;
  m.recording_id = "t1";
  m.frame_rate = 25.0;
  m.road_length = 420.0;
  m.lane_markings = {0.0, 4.0, 8.0};
  m.direction = CarriagewayDirection::lower;
  m.right_lane_low_y = false;
  return m;
}

constexpr double kRightY = 6.0;
constexpr double kLeftY = 2.0;

Trajectory traj_from_fn(std::int64_t id, std::int64_t first, std::int64_t count,
                        double (*x_of_t)(double), double y,
                        double fps = 25.0) {
  Trajectory t;
  t.vehicle_id = id;
  const RecordingMeta meta = test_meta();
  for (std::int64_t i = 0; i < count; ++i) {
    TrackFrame f;
    f.vehicle_id = id;
    f.frame = first + i;
    f.x = x_of_t(static_cast<double>(f.frame) / fps);
    f.y = y;
    f.length = 4.5;
    f.lat_extent = 2.0;
    f.lane = meta.lane_of_y(y);
    t.frames.push_back(f);
  }
  return t;
}

}  // namespace

TEST_CASE("finite differences are exact for linear motion") {
  auto traj = traj_from_fn(1, 0, 11, [](double t) { return 30.0 * t; }, kRightY);
  const auto k = finite_difference_kinematics(traj, 5, 0.1, 25.0);
  REQUIRE(k.has_value());
  CHECK(k->vx == Catch::Approx(30.0).margin(1e-9));
  CHECK(k->ax == Catch::Approx(0.0).margin(1e-9));
}

TEST_CASE("finite differences are exact for quadratic motion") {
  auto traj = traj_from_fn(1, 0, 11, [](double t) { return t * t; }, kRightY);
  const auto k = finite_difference_kinematics(traj, 5, 0.1, 25.0);
  REQUIRE(k.has_value());
  // x = t^2 at t = 5/25 s: v = 2t = 0.4, a = 2 (centered differences exact)
  CHECK(k->vx == Catch::Approx(0.4).margin(1e-9));
  CHECK(k->ax == Catch::Approx(2.0).margin(1e-9));
}

TEST_CASE("finite differences track a sine within O(dt^2)") {
  auto traj =
      traj_from_fn(1, 0, 201, [](double t) { return 10.0 * std::sin(t); }, kRightY);
  const double fps = 25.0;
  const std::int64_t h = fd_half_step(0.1, fps);
  const double dt_eff = 2.0 * static_cast<double>(h) / fps;
  double max_v_err = 0, max_a_err = 0;
  for (std::int64_t f = 10; f <= 190; ++f) {
    const auto k = finite_difference_kinematics(traj, f, 0.1, fps);
    REQUIRE(k.has_value());
    const double t = static_cast<double>(f) / fps;
    max_v_err = std::max(max_v_err, std::fabs(k->vx - 10.0 * std::cos(t)));
    max_a_err = std::max(max_a_err, std::fabs(k->ax + 10.0 * std::sin(t)));
  }
  // third/fourth derivative bound: A dt^2 / 6 for v, ~A dt^2 / 3 for a
  CHECK(max_v_err < 10.0 * dt_eff * dt_eff / 6.0 * 1.5);
  CHECK(max_a_err < 10.0 * dt_eff * dt_eff / 3.0 * 1.5);
}

TEST_CASE("finite differences signal missing history") {
  auto traj = traj_from_fn(1, 0, 5, [](double t) { return 30.0 * t; }, kRightY);
  CHECK_FALSE(finite_difference_kinematics(traj, 0, 0.1, 25.0).has_value());
  CHECK_FALSE(finite_difference_kinematics(traj, 4, 0.1, 25.0).has_value());
  CHECK(finite_difference_kinematics(traj, 2, 0.1, 25.0).has_value());
}

namespace {

Recording crossing_fixture(std::int64_t first_frame = 100) {
  // subject crosses the centerline at frame 200 exactly
  Recording rec;
  rec.meta = test_meta();
  Trajectory t;
  t.vehicle_id = 1;
  for (std::int64_t f = first_frame; f <= 250; ++f) {
    TrackFrame fr;
    fr.vehicle_id = 1;
    fr.frame = f;
    fr.x = 30.0 * static_cast<double>(f) / 25.0;
    fr.y = f < 200 ? kRightY : kLeftY;
    fr.length = 4.5;
    fr.lat_extent = 2.0;
    fr.lane = rec.meta.lane_of_y(fr.y);
    t.frames.push_back(fr);
  }
  rec.trajectories.push_back(std::move(t));
  return rec;
}

}  // namespace

TEST_CASE("lane-change samples are measured tau seconds before the crossing") {
  const Recording rec = crossing_fixture();
  FeatureSpec spec;
  spec.tau = 2.0;
  const auto samples = extract_samples(rec, spec);
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].maneuver == Maneuver::OV);
  CHECK(samples[0].frame == 150);  // 200 - 2 s * 25 fps
  CHECK(samples[0].lane == Lane::right);
  CHECK(samples[0].vx == Catch::Approx(30.0).margin(1e-9));
}

TEST_CASE("horizon property holds for every extracted lane-change sample") {
  const Recording rec = crossing_fixture(50);
  for (double tau : {2.0, 3.0, 4.0}) {
    FeatureSpec spec;
    spec.tau = tau;
    const auto samples = extract_samples(rec, spec);
    REQUIRE(samples.size() == 1);
    const auto crossings = centerline_crossings(rec.trajectories[0], rec.meta);
    CHECK(crossings[0].frame - samples[0].frame ==
          std::llround(tau * rec.meta.frame_rate));
  }
}

TEST_CASE("crossings without enough history are skipped and counted") {
  const Recording rec = crossing_fixture();
  FeatureSpec spec;
  spec.tau = 5.0;  // needs frame 75, trajectory starts at 100
  ExtractStats stats;
  const auto samples = extract_samples(rec, spec, &stats);
  CHECK(samples.empty());
  CHECK(stats.skipped_history == 1);
}

TEST_CASE("lane keepers are sampled once at the trajectory midpoint") {
  Recording rec;
  rec.meta = test_meta();
  Trajectory t;
  t.vehicle_id = 4;
  for (std::int64_t f = 0; f < 101; ++f) {
    TrackFrame fr;
    fr.vehicle_id = 4;
    fr.frame = f;
    fr.x = 30.0 * static_cast<double>(f) / 25.0;
    fr.y = kLeftY;
    fr.length = 4.5;
    fr.lane = Lane::left;
    t.frames.push_back(fr);
  }
  rec.trajectories.push_back(std::move(t));
  const auto samples = extract_samples(rec, FeatureSpec{});
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].maneuver == Maneuver::LKL);
  CHECK(samples[0].frame == 50);
}

TEST_CASE("truck subjects are excluded unless requested") {
  Recording rec;
  rec.meta = test_meta();
  Trajectory t;
  t.vehicle_id = 9;
  for (std::int64_t f = 0; f < 41; ++f) {
    TrackFrame fr;
    fr.vehicle_id = 9;
    fr.frame = f;
    fr.x = 25.0 * static_cast<double>(f) / 25.0;
    fr.y = kRightY;
    fr.length = 12.0;
    fr.lane = Lane::right;
    fr.vclass = VehicleClass::truck;
    t.frames.push_back(fr);
  }
  rec.trajectories.push_back(std::move(t));
  ExtractStats stats;
  FeatureSpec spec;
  CHECK(extract_samples(rec, spec, &stats).empty());
  CHECK(stats.truck_subjects_excluded == 1);
  spec.include_truck_subjects = true;
  CHECK(extract_samples(rec, spec).size() == 1);
}

TEST_CASE("imputation fills only absent slots and preserves the mask") {
  ManeuverSample s;
  s.vx = 30.0;
  s.length = 4.0;
  s.nb[0].present = true;  // P present
  s.nb[0].dx = 42.0;
  s.nb[0].dv = -1.5;
  s.nb[0].time_gap = 1.2;
  s.nb[0].ax = 0.3;
  s.nb[3].present = true;  // FA present
  s.nb[3].dx = 55.0;

  FeatureSpec spec;
  const ManeuverSample out = impute_missing(s, spec);
  CHECK(out.nb[0].dx == 42.0);
  CHECK(out.nb[0].dv == -1.5);
  CHECK(out.nb[3].dx == 55.0);
  CHECK(out.nb[1].dx == 500.0);
  CHECK(out.nb[1].dv == 0.0);
  CHECK(out.nb[1].ax == 0.0);
  CHECK(out.nb[1].vclass == 0);
  CHECK(out.nb[1].time_gap ==
        Catch::Approx((500.0 - 2.0) / 30.0));  // (dx - l/2) / v
  CHECK(out.nb[2].dx == 500.0);
  CHECK_FALSE(out.nb[1].present);
  CHECK_FALSE(out.nb[2].present);
  CHECK(out.nb[0].present);

  // all-present input is untouched
  ManeuverSample full = s;
  for (auto& nb : full.nb) nb.present = true;
  const ManeuverSample same = impute_missing(full, spec);
  for (int i = 0; i < 4; ++i) {
    CHECK(same.nb[i].dx == full.nb[i].dx);
    CHECK(same.nb[i].dv == full.nb[i].dv);
  }
}

TEST_CASE("mobil8 features are an exact subset of full24") {
  ManeuverSample s;
  s.vx = 31.0;
  s.vy = 0.2;
  s.ax = -0.1;
  s.ay = 0.05;
  s.length = 4.2;
  Rng rng(7);
  for (auto& nb : s.nb) {
    nb.present = true;
    nb.dx = rng.uniform(5, 200);
    nb.dv = rng.uniform(-5, 5);
    nb.time_gap = rng.uniform(0.5, 5);
    nb.ax = rng.uniform(-2, 2);
    nb.vclass = rng.bernoulli(0.3);
  }
  const auto full = featurize(s, FeatureSubset::full24);
  const auto m8 = featurize(s, FeatureSubset::mobil8);
  REQUIRE(full.size() == 24);
  REQUIRE(m8.size() == 8);
  const auto names_full = feature_names(FeatureSubset::full24);
  const auto names_m8 = feature_names(FeatureSubset::mobil8);
  for (std::size_t i = 0; i < m8.size(); ++i) {
    const auto it = std::find(names_full.begin(), names_full.end(), names_m8[i]);
    REQUIRE(it != names_full.end());
    CHECK(m8[i] == full[static_cast<std::size_t>(it - names_full.begin())]);
  }
}

TEST_CASE("sample table round-trips bit-exactly") {
  Rng rng(99);
  std::vector<ManeuverSample> samples;
  for (int i = 0; i < 50; ++i) {
    ManeuverSample s;
    s.recording_id = "t1";
    s.vehicle_id = i;
    s.frame = 100 + i;
    s.maneuver = static_cast<Maneuver>(i % 4);
    s.lane = maneuver_lane(s.maneuver);
    s.tau = 2.0;
    s.vx = rng.normal(30, 3);
    s.vy = rng.normal(0, 0.2);
    s.ax = rng.normal(0, 1);
    s.ay = rng.normal(0, 0.2);
    s.length = rng.uniform(3.5, 12);
    for (auto& nb : s.nb) {
      nb.present = rng.bernoulli(0.8);
      nb.dx = rng.uniform(1, 400);
      nb.dv = rng.normal(0, 4);
      nb.time_gap = rng.normal(2, 1);
      nb.ax = rng.normal(0, 1);
      nb.vclass = rng.bernoulli(0.2);
    }
    samples.push_back(s);
  }
  std::ostringstream out;
  write_samples(out, samples);
  std::istringstream in(out.str());
  const auto back = read_samples(in);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(back[i].vehicle_id == samples[i].vehicle_id);
    CHECK(back[i].maneuver == samples[i].maneuver);
    CHECK(back[i].vx == samples[i].vx);  // bit-exact
    for (int j = 0; j < 4; ++j) {
      CHECK(back[i].nb[j].dx == samples[i].nb[j].dx);
      CHECK(back[i].nb[j].time_gap == samples[i].nb[j].time_gap);
      CHECK(back[i].nb[j].present == samples[i].nb[j].present);
    }
  }
}

TEST_CASE("label/lane consistency on a zig-zag trajectory") {
  Recording rec;
  rec.meta = test_meta();
  Trajectory t;
  t.vehicle_id = 1;
  for (std::int64_t f = 0; f < 400; ++f) {
    TrackFrame fr;
    fr.vehicle_id = 1;
    fr.frame = f;
    fr.x = 30.0 * static_cast<double>(f) / 25.0;
    fr.y = (f < 150 ? kRightY : (f < 300 ? kLeftY : kRightY));
    fr.length = 4.5;
    fr.lane = rec.meta.lane_of_y(fr.y);
    t.frames.push_back(fr);
  }
  rec.trajectories.push_back(std::move(t));
  FeatureSpec spec;
  spec.tau = 2.0;
  const auto samples = extract_samples(rec, spec);
  REQUIRE(samples.size() == 2);
  for (const auto& s : samples) {
    if (s.maneuver == Maneuver::OV) CHECK(s.lane == Lane::right);
    if (s.maneuver == Maneuver::FD) CHECK(s.lane == Lane::left);
  }
}
