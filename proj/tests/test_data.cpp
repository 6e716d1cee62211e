#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "core/rng.hpp"
#include "data/dataset.hpp"
#include "data/render.hpp"
#include "data/scene.hpp"
#include "data/trajectory.hpp"

using namespace cinelab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "cinelab_test_data" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SceneSpec basic_scene() {
  SceneSpec s;
  s.seed = 1234;
  s.bg_size = 256;
  s.object_shape = Shape::kEllipse;
  s.object_color = 0;
  s.object_size_frac = 0.10;
  s.horizon_frac = 0.5;
  s.scene_word = 0;
  return s;
}

CameraTrajectory static_trajectory(int T) {
  CameraTrajectory traj;
  traj.cx.assign(T, 128.0);
  traj.cy.assign(T, 128.0);
  traj.z.assign(T, 1.0);
  traj.roll_deg.assign(T, 0.0);
  traj.focus.assign(T, 0.5);
  return traj;
}

}  // namespace

TEST_CASE("label names round-trip for all 20 categories") {
  for (auto f : all_framings()) CHECK(parse_framing(framing_name(f)) == f);
  for (auto a : all_angles()) CHECK(parse_angle(angle_name(a)) == a);
  for (auto m : all_movements()) CHECK(parse_movement(movement_name(m)) == m);
  CHECK_THROWS_AS(parse_movement("warp drive"), LabelError);
}

TEST_CASE("framing bands and guard gaps") {
  CHECK(framing_from_height_frac(0.80) == Framing::kCloseUp);
  CHECK(framing_from_height_frac(0.50) == Framing::kMedium);
  CHECK(framing_from_height_frac(0.30) == Framing::kFull);
  CHECK(framing_from_height_frac(0.10) == Framing::kLong);
  CHECK_FALSE(framing_from_height_frac(0.20).has_value());
  CHECK_FALSE(framing_from_height_frac(0.68).has_value());
}

TEST_CASE("angle bands, dutch precedence, bird without horizon") {
  CHECK(angle_from_horizon(0.75, 0.0) == Angle::kLow);
  CHECK(angle_from_horizon(0.50, 0.0) == Angle::kEye);
  CHECK(angle_from_horizon(0.25, 0.0) == Angle::kHigh);
  CHECK(angle_from_horizon(std::nullopt, 0.0) == Angle::kBird);
  CHECK(angle_from_horizon(0.50, 20.0) == Angle::kDutch);
  CHECK(angle_from_horizon(std::nullopt, -20.0) == Angle::kDutch);
  CHECK(angle_from_horizon(0.50, 5.0) == Angle::kEye);
}

TEST_CASE("movement compatibility rules") {
  CHECK(movements_compatible({Movement::kPanRight}));
  CHECK(movements_compatible({Movement::kStill}));
  CHECK(movements_compatible({Movement::kZoomIn, Movement::kPanLeft}));
  CHECK(movements_compatible({Movement::kDollyIn, Movement::kPanLeft, Movement::kTiltUp}));
  CHECK_FALSE(movements_compatible({}));
  CHECK_FALSE(movements_compatible({Movement::kPanLeft, Movement::kPanRight}));
  CHECK_FALSE(movements_compatible({Movement::kZoomIn, Movement::kDollyOut}));
  CHECK_FALSE(movements_compatible({Movement::kStill, Movement::kPanRight}));
  CHECK_FALSE(movements_compatible({Movement::kTracking, Movement::kZoomIn}));
  CHECK_FALSE(movements_compatible({Movement::kRackFocus, Movement::kPanLeft}));
}

TEST_CASE("trajectory kinematics per movement") {
  const int T = 16;
  SUBCASE("pan right moves the window right at 1-3 px/frame") {
    auto traj = make_trajectory({Movement::kPanRight}, T, 5);
    double rate = (traj.cx[T - 1] - traj.cx[0]) / (T - 1);
    CHECK(rate >= 1.0);
    CHECK(rate <= 3.0);
    CHECK(traj.cy[0] == traj.cy[T - 1]);
    CHECK(traj.z[0] == traj.z[T - 1]);
  }
  SUBCASE("zoom keeps rho 1, dolly raises it to 1.5 and uses the upper rate band") {
    auto zoom = make_trajectory({Movement::kZoomIn}, T, 6);
    CHECK(zoom.rho == 1.0);
    double dz = std::log(zoom.z[1] / zoom.z[0]);
    CHECK(dz >= 0.02);
    CHECK(dz <= 0.05);
    auto dolly = make_trajectory({Movement::kDollyOut}, T, 7);
    CHECK(dolly.rho == 1.5);
    double dd = std::log(dolly.z[1] / dolly.z[0]);
    CHECK(dd <= -0.035);
    CHECK(dd >= -0.05);
  }
  SUBCASE("rack focus sweeps the focus parameter across [0,1]") {
    auto traj = make_trajectory({Movement::kRackFocus}, T, 8);
    double lo = *std::min_element(traj.focus.begin(), traj.focus.end());
    double hi = *std::max_element(traj.focus.begin(), traj.focus.end());
    CHECK(lo == doctest::Approx(0.0));
    CHECK(hi == doctest::Approx(1.0));
  }
  SUBCASE("incompatible sets throw") {
    CHECK_THROWS_AS(make_trajectory({Movement::kStill, Movement::kPanRight}, T, 9), LabelError);
  }
}

TEST_CASE("scene captions are grounded and well-formed") {
  SceneSpec s = basic_scene();
  s.object_color = 0;
  s.object_shape = Shape::kEllipse;
  s.scene_word = 0;
  CHECK(scene_caption(s) == "A red ellipse drifts over hills.");

  auto vocab = caption_vocabulary();
  std::set<std::string> vset(vocab.begin(), vocab.end());
  for (const char* w : {"red", "ellipse", "drifts", "hills", "dolly", "panning", "shot"})
    CHECK(vset.count(w) == 1);
}

TEST_CASE("render is deterministic in (spec, trajectory)") {
  SceneSpec s = basic_scene();
  auto traj = make_trajectory({Movement::kPanRight}, 8, 21, 100, 128);
  VideoClip a = render_clip(s, traj, 64, 64);
  VideoClip b = render_clip(s, traj, 64, 64);
  CHECK(a.frames == b.frames);
  SceneSpec s2 = s;
  s2.seed ^= 1;
  VideoClip c = render_clip(s2, traj, 64, 64);
  CHECK(a.frames != c.frames);
}

TEST_CASE("integer pan shifts background pixels exactly") {
  SceneSpec s = basic_scene();
  const int T = 4;
  auto traj = static_trajectory(T);
  for (int t = 0; t < T; ++t) traj.cx[t] = 100.0 + 2.0 * t;  // 2 px/frame pan
  VideoClip clip = render_clip(s, traj, 64, 64);
  Image8 f0 = clip.frame(0), f1 = clip.frame(1);
  // rows far above the (centered) object are pure background
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x + 2 < 64; ++x)
      for (int c = 0; c < 3; ++c) CHECK(f1.at(y, x, c) == f0.at(y, x + 2, c));
}

TEST_CASE("viewport leaving the background raises RenderError") {
  SceneSpec s = basic_scene();
  auto traj = static_trajectory(8);
  for (int t = 0; t < 8; ++t) traj.cx[t] = 200.0 + 10.0 * t;  // runs off the 256 px bg
  CHECK_THROWS_AS(render_clip(s, traj, 64, 64), RenderError);
}

TEST_CASE("annotation record json round-trip and validation") {
  AnnotationRecord r;
  r.video_caption = "A red ellipse drifts over hills.";
  r.framing = Framing::kFull;
  r.angle = Angle::kHigh;
  r.movements = {Movement::kZoomIn, Movement::kPanLeft};
  r.main_cinematic_language = "zoom in";
  r.interval_start = 0;
  r.interval_end = 15;
  r.camera_truth.assign(15, {1.0, 0.0, 0.03, 0.0, 0.0});
  r.validate(16);

  AnnotationRecord back = AnnotationRecord::from_json(r.to_json());
  CHECK(back.video_caption == r.video_caption);
  CHECK(back.framing == r.framing);
  CHECK(back.angle == r.angle);
  CHECK(back.movements == r.movements);
  CHECK(back.camera_truth.size() == 15);
  CHECK(back.camera_truth[0].dlogz == doctest::Approx(0.03));

  CHECK(cinematic_caption(r) ==
        "A red ellipse drifts over hills. The shot type is: high angle, zoom in, panning left, "
        "full shot.");

  AnnotationRecord bad = r;
  bad.main_cinematic_language = "wrong";
  CHECK_THROWS_AS(bad.validate(16), InvariantError);
  bad = r;
  bad.interval_end = 16;
  CHECK_THROWS_AS(bad.validate(16), InvariantError);

  json j = r.to_json();
  j.erase("video_caption");
  CHECK_THROWS_AS(AnnotationRecord::from_json(j), MetadataError);
}

TEST_CASE("dataset generation, layout, loading and error reporting") {
  GenConfig cfg;
  cfg.frames = 8;
  cfg.counts = {{"panning right", 3}, {"zoom in", 3}, {"still", 2}};
  cfg.splits = {{"train", 0.75}, {"val", 0.25}};
  fs::path root = temp_dir("ds");
  DatasetManifest m = generate_dataset(cfg, root.string(), 99);

  CHECK(m.total() == 8);
  int listed = 0;
  for (const auto& [split, ids] : m.splits) listed += static_cast<int>(ids.size());
  CHECK(listed == 8);
  CHECK(m.splits.at("train").size() == 6);
  CHECK(m.splits.at("val").size() == 2);

  DatasetManifest loaded = DatasetManifest::load(root.string());
  CHECK(loaded.seed == 99);
  CHECK(loaded.config_hash == m.config_hash);

  // round-trip a clip and check caption uniqueness across the dataset
  std::set<std::string> captions;
  for (const auto& [split, ids] : m.splits)
    for (const auto& id : ids) {
      auto [clip, rec] = load_clip((root / split / id).string());
      CHECK(clip.t == 8);
      CHECK(clip.h == 64);
      rec.validate(clip.t);
      CHECK(captions.insert(cinematic_caption(rec)).second);
    }

  // determinism: regenerating gives byte-identical frames
  fs::path root2 = temp_dir("ds2");
  generate_dataset(cfg, root2.string(), 99);
  auto read_bytes = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  };
  fs::path rel = fs::path("train") / m.splits.at("train").front() / "frame_00.png";
  CHECK(read_bytes(root / rel) == read_bytes(root2 / rel));

  SUBCASE("missing frame file is reported with its index") {
    fs::path victim = root / "train" / m.splits.at("train").front();
    fs::remove(victim / "frame_03.png");
    CHECK_THROWS_WITH_AS(load_clip(victim.string()), doctest::Contains("3"), MissingFrameError);
  }
  SUBCASE("malformed metadata is reported") {
    fs::path victim = root / "train" / m.splits.at("train")[1];
    std::ofstream(victim / "meta.json") << "{\"video_caption\": 12}";
    CHECK_THROWS_AS(load_clip(victim.string()), MetadataError);
  }
  SUBCASE("empty category counts are rejected") {
    GenConfig bad = cfg;
    bad.counts.clear();
    CHECK_THROWS_AS(generate_dataset(bad, temp_dir("ds3").string(), 1), InvariantError);
  }
}

TEST_CASE("category names parse and join") {
  auto set = parse_category("zoom in+panning right");
  REQUIRE(set.size() == 2);
  CHECK(set[0] == Movement::kZoomIn);
  CHECK(set[1] == Movement::kPanRight);
  CHECK(category_name(set) == "zoom in+panning right");
  CHECK_THROWS_AS(parse_category("zoom in+warp"), LabelError);
}
