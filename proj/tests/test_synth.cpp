#include <gtest/gtest.h>

#include <algorithm>

#include "hwloc/fuse.hpp"
#include "hwloc/synth.hpp"

using namespace hwloc;

namespace {

synth::SceneSpec two_doors_per_side() {
  synth::SceneSpec s = synth::testbed_scene();
  s.left_doors = {{5.0}, {8.5}};
  s.right_doors = {{6.0}, {9.5}};
  s.posters.clear();
  s.camera = {s.center_x, 1.0, std::numbers::pi / 2};
  return s;
}

bool same_corners(const synth::GroundTruth& a, const synth::GroundTruth& b) {
  if (a.corners.size() != b.corners.size()) return false;
  for (std::size_t i = 0; i < a.corners.size(); ++i) {
    const auto& p = a.corners[i];
    const auto& q = b.corners[i];
    if (p.u != q.u || p.v != q.v || p.floor != q.floor || p.landmark_id != q.landmark_id) {
      return false;
    }
  }
  return a.landmarks_in_view == b.landmarks_in_view;
}

}  // namespace

TEST(Render, TwoDoorsPerSideGiveEightJambCorners) {
  const auto s = two_doors_per_side();
  const auto plan = synth::make_floor_plan(s, synth::kTestbedWidth, synth::kTestbedDepth);
  const auto out = synth::render_hallway(s, synth::default_camera());
  int jambs = 0;
  for (const auto& c : out.truth.corners) {
    if (!c.floor) continue;
    const auto it = std::find_if(plan.landmarks.begin(), plan.landmarks.end(),
                                 [&](const Landmark& l) { return l.id == c.landmark_id; });
    ASSERT_NE(it, plan.landmarks.end());
    jambs += it->kind == LandmarkKind::kDoorwayJamb;
  }
  EXPECT_EQ(jambs, 8);
}

TEST(Render, BitIdenticalPerSeed) {
  auto s = two_doors_per_side();
  const auto cam = synth::default_camera();
  const auto a = synth::render_hallway(s, cam);
  const auto b = synth::render_hallway(s, cam);
  EXPECT_EQ(a.image.data(), b.image.data());
  s.seed += 1;
  EXPECT_NE(synth::render_hallway(s, cam).image.data(), a.image.data());
}

TEST(Render, FloorCornersProjectBackOntoLandmarks) {
  const auto cam = synth::default_camera();
  const auto plan = synth::testbed_plan();
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto b = synth::random_testbed_bundle(seed, cam);
    for (const auto& c : b.truth.corners) {
      if (!c.floor) continue;
      const auto it = std::find_if(plan.landmarks.begin(), plan.landmarks.end(),
                                   [&](const Landmark& l) { return l.id == c.landmark_id; });
      ASSERT_NE(it, plan.landmarks.end());
      const auto m = to_map(b.truth.pose, image_to_ground(c.u, c.v, cam));
      EXPECT_NEAR(m.x, it->position.x, 1e-6);
      EXPECT_NEAR(m.y, it->position.y, 1e-6);
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Render, DefectsNeverChangeTruth) {
  const auto cam = synth::default_camera();
  const auto base = synth::testbed_scene();
  const auto clean = synth::render_hallway(base, cam);
  for (auto p : {synth::DefectPreset::kA, synth::DefectPreset::kB, synth::DefectPreset::kC,
                 synth::DefectPreset::kD, synth::DefectPreset::kE}) {
    const auto dirty = synth::render_hallway(synth::apply_preset(base, p), cam);
    EXPECT_TRUE(same_corners(clean.truth, dirty.truth)) << synth::to_string(p);
    EXPECT_NE(dirty.image.data(), clean.image.data()) << synth::to_string(p);
  }
}

TEST(Render, CameraOutsideHallwayThrows) {
  auto s = synth::testbed_scene();
  s.camera.x = s.left_x() - 0.5;
  EXPECT_THROW(synth::render_hallway(s, synth::default_camera()), synth::SceneError);
  s = synth::testbed_scene();
  s.camera.y = s.y1 + 1.0;
  EXPECT_THROW(synth::render_hallway(s, synth::default_camera()), synth::SceneError);
}

TEST(Render, InvalidSpecRejected) {
  auto s = synth::testbed_scene();
  s.left_doors.push_back({s.y1 + 3.0});
  EXPECT_THROW(synth::render_hallway(s, synth::default_camera()), synth::SceneError);
  s = synth::testbed_scene();
  s.shadows.push_back({{{6, 3}, {7, 3}, {7, 4}}, 1.5, 0.0});
  EXPECT_THROW(synth::render_hallway(s, synth::default_camera()), synth::SceneError);
}

// Defect-free hallway: micro-landmarks sit on doorway and hallway floor
// corners; door tops and poster corners are not on the floor and are dropped.
TEST(Render, MicroLandmarksKeepFloorCornersOnly) {
  const auto cam = synth::default_camera();
  const auto out = synth::render_hallway(synth::testbed_scene(), cam);
  PipelineConfig cfg;
  cfg.micro.horizon_row = cam.horizon_row();
  const auto vision = run_vision(out.image, cfg);
  const auto& micro = vision.micro.corners;
  auto near = [&](const synth::TruthCorner& t) {
    return std::any_of(micro.begin(), micro.end(), [&](const CornerPoint& c) {
      return std::hypot(c.coord.u - t.u, c.coord.v - t.v) <= 3.0;
    });
  };
  const synth::ResolvabilityRules rules;
  const int W = out.image.width(), H = out.image.height(), m = rules.border_margin;
  int floor = 0, found = 0, other = 0;
  for (const auto& t : out.truth.corners) {
    if (t.floor) {
      if (!t.resolvable) continue;
      ++floor;
      found += near(t);
    } else if (t.u >= m && t.v >= m && t.u <= W - 1 - m && t.v <= H - 1 - m &&
               t.depth <= rules.max_depth) {
      ++other;
      EXPECT_FALSE(near(t)) << "non-floor corner kept at " << t.u << "," << t.v;
    }
  }
  ASSERT_GT(floor, 4);
  EXPECT_GT(other, 0);
  EXPECT_GE(found, static_cast<int>(std::ceil(0.9 * floor)));
}

TEST(Rss, Examples) {
  synth::PathLossModel m;
  m.noise_sigma = 0.0;
  const std::vector<Point2> aps{{0, 0}};
  EXPECT_DOUBLE_EQ(synth::simulate_rss(aps, {0, 0}, m, 1).readings.at("ap0"), -40.0);
  EXPECT_DOUBLE_EQ(synth::simulate_rss(aps, {0.3, 0.4}, m, 1).readings.at("ap0"), -40.0);
  EXPECT_NEAR(synth::simulate_rss(aps, {10, 0}, m, 1).readings.at("ap0"), -70.0, 1e-12);
  EXPECT_DOUBLE_EQ(synth::simulate_rss(aps, {1000, 0}, m, 1).readings.at("ap0"), -120.0);
  EXPECT_THROW(synth::simulate_rss(std::vector<Point2>{}, {0, 0}, m, 1), std::invalid_argument);
}

TEST(Rss, DeterministicPerSeed) {
  const auto aps = synth::testbed_access_points();
  const auto a = synth::simulate_rss(aps, {3, 7}, {}, 42);
  EXPECT_EQ(a.readings, synth::simulate_rss(aps, {3, 7}, {}, 42).readings);
  EXPECT_NE(a.readings, synth::simulate_rss(aps, {3, 7}, {}, 43).readings);
  EXPECT_EQ(a.readings.size(), aps.size());
}

TEST(SceneJson, RoundTrip) {
  auto s = synth::apply_preset(synth::testbed_scene(), synth::DefectPreset::kC);
  s = synth::apply_preset(s, synth::DefectPreset::kE);
  s.highlights.push_back({{7.0, 9.0}, 0.4, 0.6, {0.4, 0.35, 0.25}});
  const auto j = synth::to_json(s);
  const auto back = synth::scene_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(synth::to_json(back).dump(), j.dump());
  const auto cam = synth::default_camera();
  EXPECT_EQ(synth::render_hallway(back, cam).image.data(),
            synth::render_hallway(s, cam).image.data());
}

TEST(SceneJson, BadSideRejected) {
  auto j = nlohmann::json::parse(synth::to_json(synth::testbed_scene()).dump());
  j["posters"][0]["side"] = "up";
  EXPECT_THROW(synth::scene_from_json(j), synth::SceneError);
}
