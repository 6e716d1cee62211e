#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/jsonio.hpp"
#include "core/rng.hpp"
#include "data/render.hpp"
#include "data/scene.hpp"
#include "data/trajectory.hpp"

namespace cinelab {

struct MissingFrameError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MetadataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ground-truth content motion between consecutive frames (screen-space
// convention: positive dx = content moved right).
struct CameraTruthStep {
  double dx = 0, dy = 0, dlogz = 0, droll = 0, df = 0;
};

struct AnnotationRecord {
  std::string video_caption;
  Framing framing = Framing::kLong;
  Angle angle = Angle::kEye;
  std::vector<Movement> movements;  // generator order
  std::string main_cinematic_language;
  bool typical = true;
  int interval_start = 0, interval_end = 0;
  std::vector<CameraTruthStep> camera_truth;  // length T-1

  // Checks the record invariants against a clip of T frames.
  void validate(int num_frames) const;

  json to_json() const;
  static AnnotationRecord from_json(const json& j);
};

// "{video_caption} The shot type is: {angle}, {movement, ...}, {framing}."
std::string cinematic_caption(const AnnotationRecord& record);

struct GenConfig {
  int frames = 16;
  int height = 64, width = 64;
  int bg_size = 256;
  // category -> clip count; a category is a movement name or a "+"-joined
  // composite like "zoom in+panning right".
  std::map<std::string, int> counts;
  std::map<std::string, double> splits = {{"train", 0.8}, {"val", 0.2}};
  bool pad_interval = false;  // motion only inside a random sub-interval

  json to_json() const;
  static GenConfig from_json(const json& j);
};

struct DatasetManifest {
  std::string root;
  std::map<std::string, std::vector<std::string>> splits;  // split -> clip ids
  std::map<std::string, int> counts;                       // category -> count
  std::string config_hash;
  std::uint64_t seed = 0;

  json to_json() const;
  static DatasetManifest from_json(const json& j);
  static DatasetManifest load(const std::string& root);

  int total() const;
};

struct GeneratedClip {
  SceneSpec scene;
  CameraTrajectory traj;
  VideoClip clip;
  AnnotationRecord record;
};

// Renders one labeled clip for a movement set; scene attributes are drawn from
// rng under the compatibility constraints (e.g. dolly pairs with medium
// framing so the parallax signal stays measurable).
GeneratedClip generate_labeled_clip(const std::vector<Movement>& movements, const GenConfig& cfg,
                                    Rng& rng, bool pad_interval = false);

// Writes the on-disk dataset tree and manifest.json. Deterministic in
// (config, seed).
DatasetManifest generate_dataset(const GenConfig& cfg, const std::string& out_root,
                                 std::uint64_t seed);

// Reads one clip directory (frame_%02d.png + meta.json); validates invariants.
std::pair<VideoClip, AnnotationRecord> load_clip(const std::string& clip_dir);

std::vector<Movement> parse_category(const std::string& category);
std::string category_name(const std::vector<Movement>& movements);

}  // namespace cinelab
