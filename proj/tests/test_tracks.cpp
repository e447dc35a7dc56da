#include <catch2/catch_amalgamated.hpp>

#include <sstream>

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
  m.right_lane_low_y = false;  // right lane is the high-y band, center 6
  return m;
}

constexpr double kRightY = 6.0;
constexpr double kLeftY = 2.0;

std::string row(std::int64_t frame, std::int64_t id, double x, double y,
                double vx = 30.0, double length = 4.5,
                const char* vclass = "Car") {
  std::ostringstream os;
  os << frame << ',' << id << ',' << x << ',' << y << ',' << vx
     << ",0,0,0," << (y > 4.0 ? 1 : 2) << ',' << length << ",2," << vclass << '\n';
  return os.str();
}

Recording rec_from_csv(const std::string& body) {
  std::istringstream in(std::string(tracks_header()) + "\n" + body);
  return load_recording(in, test_meta());
}

Trajectory make_traj(std::int64_t id, std::int64_t first_frame,
                     const std::vector<std::pair<double, double>>& xy,
                     VehicleClass vc = VehicleClass::car) {
  Trajectory t;
  t.vehicle_id = id;
  const RecordingMeta meta = test_meta();
  for (std::size_t i = 0; i < xy.size(); ++i) {
    TrackFrame f;
    f.vehicle_id = id;
    f.frame = first_frame + static_cast<std::int64_t>(i);
    f.x = xy[i].first;
    f.y = xy[i].second;
    f.vx = 30.0;
    f.length = 4.5;
    f.lat_extent = 2.0;
    f.lane = meta.lane_of_y(f.y);
    f.vclass = vc;
    t.frames.push_back(f);
  }
  return t;
}

}  // namespace

TEST_CASE("load_recording groups rows into per-vehicle trajectories") {
  std::string body;
  for (int f = 0; f < 100; ++f) {
    body += row(f, 1, 100.0 + f, kRightY);
    body += row(f, 2, 200.0 + f, kLeftY);
  }
  const Recording rec = rec_from_csv(body);
  REQUIRE(rec.trajectories.size() == 2);
  CHECK(rec.trajectories[0].vehicle_id == 1);
  CHECK(rec.trajectories[0].frames.size() == 100);
  CHECK(rec.trajectories[1].frames.size() == 100);
  CHECK(rec.trajectories[0].frames[0].lane == Lane::right);
  CHECK(rec.trajectories[1].frames[0].lane == Lane::left);
}

TEST_CASE("load_recording accepts an empty file with a valid header") {
  const Recording rec = rec_from_csv("");
  CHECK(rec.trajectories.empty());
}

TEST_CASE("load_recording rejects a zero-length vehicle naming it") {
  const std::string body = row(0, 7, 100.0, kRightY, 30.0, 0.0);
  try {
    rec_from_csv(body);
    FAIL("expected IntegrityError");
  } catch (const IntegrityError& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("load_recording rejects malformed rows with the line number") {
  std::istringstream in(std::string(tracks_header()) +
                        "\n1,2,bogus,6,30,0,0,0,1,4.5,2,Car\n");
  try {
    load_recording(in, test_meta());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("load_recording rejects non-contiguous frames") {
  std::string body = row(0, 3, 100.0, kRightY) + row(2, 3, 101.0, kRightY);
  REQUIRE_THROWS_AS(rec_from_csv(body), IntegrityError);
}

TEST_CASE("upper carriageway recordings are mirrored to +x travel") {
  RecordingMeta meta = test_meta();
  meta.direction = CarriagewayDirection::upper;
  meta.right_lane_low_y = true;
  std::istringstream in(std::string(tracks_header()) +
                        "\n0,1,400,2,-30,0,-0.5,0,0,4.5,2,Car\n");
  const Recording rec = load_recording(in, meta);
  const TrackFrame& f = rec.trajectories[0].frames[0];
  CHECK(f.x == Catch::Approx(20.0));
  CHECK(f.vx == Catch::Approx(30.0));
  CHECK(f.ax == Catch::Approx(0.5));
  CHECK(f.lane == Lane::right);  // y=2 is the low band
}

TEST_CASE("write/load round-trip is stable at the printed precision") {
  std::string body;
  for (int f = 0; f < 5; ++f)
    body += row(f, 1, 100.123456 + 1.7 * f, kRightY, 31.25) +
            row(f, 2, 50.5 + 2.1 * f, kLeftY, 33.0, 12.5, "Truck");
  const Recording rec = rec_from_csv(body);

  std::ostringstream first;
  write_recording(first, rec);
  std::istringstream again(first.str());
  const Recording rec2 = load_recording(again, test_meta());
  std::ostringstream second;
  write_recording(second, rec2);
  CHECK(first.str() == second.str());
}

TEST_CASE("resolve_neighbors: single vehicle has no neighbors") {
  Recording rec;
  rec.meta = test_meta();
  rec.trajectories.push_back(make_traj(1, 0, {{100, kRightY}}));
  const NeighborSet ns = resolve_neighbors(rec, 1, 0);
  CHECK(ns.p == nullptr);
  CHECK(ns.f == nullptr);
  CHECK(ns.pa == nullptr);
  CHECK(ns.fa == nullptr);
}

TEST_CASE("resolve_neighbors: nearest vehicle ahead wins") {
  Recording rec;
  rec.meta = test_meta();
  rec.trajectories.push_back(make_traj(1, 0, {{100, kRightY}}));
  rec.trajectories.push_back(make_traj(2, 0, {{150, kRightY}}));
  rec.trajectories.push_back(make_traj(3, 0, {{200, kRightY}}));
  const NeighborSet ns = resolve_neighbors(rec, 1, 0);
  REQUIRE(ns.p != nullptr);
  CHECK(ns.p->vehicle_id == 2);
  CHECK(ns.f == nullptr);
}

TEST_CASE("resolve_neighbors: adjacent follower only") {
  Recording rec;
  rec.meta = test_meta();
  rec.trajectories.push_back(make_traj(1, 0, {{100, kRightY}}));
  rec.trajectories.push_back(make_traj(2, 0, {{130, kRightY}}));
  rec.trajectories.push_back(make_traj(3, 0, {{60, kLeftY}}));
  const NeighborSet ns = resolve_neighbors(rec, 1, 0);
  REQUIRE(ns.fa != nullptr);
  CHECK(ns.fa->vehicle_id == 3);
  CHECK(ns.pa == nullptr);
  REQUIRE(ns.p != nullptr);
  CHECK(ns.p->vehicle_id == 2);
}

TEST_CASE("resolve_neighbors matches a brute-force scan on 3-vehicle fixtures") {
  // enumerate both lanes and several orderings for two non-subject vehicles
  const double xs[] = {40.0, 99.0, 100.0, 101.0, 160.0};
  const double lanes[] = {kRightY, kLeftY};
  for (double y2 : lanes)
    for (double y3 : lanes)
      for (double x2 : xs)
        for (double x3 : xs) {
          Recording rec;
          rec.meta = test_meta();
          rec.trajectories.push_back(make_traj(1, 0, {{100.0, kRightY}}));
          rec.trajectories.push_back(make_traj(2, 0, {{x2, y2}}));
          rec.trajectories.push_back(make_traj(3, 0, {{x3, y3}}));
          const NeighborSet ns = resolve_neighbors(rec, 1, 0);

          // brute force over the two candidates
          const TrackFrame* want[4] = {nullptr, nullptr, nullptr, nullptr};
          double best[4];
          for (const auto& traj : rec.trajectories) {
            if (traj.vehicle_id == 1) continue;
            const TrackFrame& o = traj.frames[0];
            const bool same = o.lane == Lane::right;
            const double dx = o.x - 100.0;
            const int slot = dx >= 0 ? (same ? 0 : 2) : (same ? 1 : 3);
            const double key = std::fabs(dx);
            if (!want[slot] || key < best[slot] ||
                (key == best[slot] && o.vehicle_id < want[slot]->vehicle_id)) {
              want[slot] = &o;
              best[slot] = key;
            }
          }
          const TrackFrame* got[4] = {ns.p, ns.f, ns.pa, ns.fa};
          for (int s = 0; s < 4; ++s) {
            if (want[s] == nullptr) {
              CHECK(got[s] == nullptr);
            } else {
              REQUIRE(got[s] != nullptr);
              CHECK(got[s]->vehicle_id == want[s]->vehicle_id);
            }
          }
        }
}

TEST_CASE("resolve_neighbors is anti-symmetric for distinct positions") {
  Recording rec;
  rec.meta = test_meta();
  rec.trajectories.push_back(make_traj(1, 0, {{100, kRightY}}));
  rec.trajectories.push_back(make_traj(2, 0, {{140, kRightY}}));
  rec.trajectories.push_back(make_traj(3, 0, {{80, kRightY}}));
  const NeighborSet a = resolve_neighbors(rec, 1, 0);
  REQUIRE(a.p != nullptr);
  REQUIRE(a.p->vehicle_id == 2);
  const NeighborSet b = resolve_neighbors(rec, 2, 0);
  REQUIRE(b.f != nullptr);
  CHECK(b.f->vehicle_id == 1);
}

TEST_CASE("centerline_crossings: constant lane yields no events") {
  Recording rec;
  rec.meta = test_meta();
  std::vector<std::pair<double, double>> xy;
  for (int i = 0; i < 50; ++i) xy.push_back({100.0 + i, kRightY});
  rec.trajectories.push_back(make_traj(1, 0, xy));
  CHECK(centerline_crossings(rec.trajectories[0], rec.meta).empty());
}

TEST_CASE("centerline_crossings: one crossing from the right lane is an OV") {
  std::vector<std::pair<double, double>> xy;
  for (int i = 0; i < 20; ++i)
    xy.push_back({100.0 + i, kRightY - 0.25 * i});  // 6.0 down through 4.0
  const Trajectory traj = make_traj(1, 0, xy);
  const auto events = centerline_crossings(traj, test_meta());
  REQUIRE(events.size() == 1);
  CHECK(events[0].direction == ChangeDirection::overtake);
  // first frame strictly past the line: y = 6 - 0.25 f < 4  =>  f = 9
  CHECK(events[0].frame == 9);
}

TEST_CASE("centerline_crossings: zig-zag gives alternating events") {
  std::vector<std::pair<double, double>> xy;
  // right -> left -> right -> left: three crossings, hand-counted
  const double ys[] = {6, 6, 2, 2, 6, 6, 2, 2};
  for (int i = 0; i < 8; ++i) xy.push_back({100.0 + i, ys[i]});
  const Trajectory traj = make_traj(1, 0, xy);
  const auto events = centerline_crossings(traj, test_meta());
  REQUIRE(events.size() == 3);
  CHECK(events[0].direction == ChangeDirection::overtake);
  CHECK(events[1].direction == ChangeDirection::fold_down);
  CHECK(events[2].direction == ChangeDirection::overtake);
}

TEST_CASE("crossing count equals lane-label changes") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> xy;
    double y = rng.bernoulli(0.5) ? kRightY : kLeftY;
    for (int i = 0; i < 60; ++i) {
      if (rng.bernoulli(0.1)) y = (y == kRightY) ? kLeftY : kRightY;
      xy.push_back({100.0 + i, y});
    }
    const Trajectory traj = make_traj(1, 0, xy);
    std::size_t label_changes = 0;
    for (std::size_t i = 1; i < traj.frames.size(); ++i)
      label_changes += traj.frames[i].lane != traj.frames[i - 1].lane;
    CHECK(centerline_crossings(traj, test_meta()).size() == label_changes);
  }
}
