#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace cinelab {

void AnnotationRecord::validate(int num_frames) const {
  if (video_caption.empty()) throw InvariantError("empty video_caption");
  if (movements.empty()) throw InvariantError("empty movement list");
  if (interval_start > interval_end)
    throw InvariantError("interval start > end");
  if (interval_start < 0 || interval_end > num_frames - 1)
    throw InvariantError("interval [" + std::to_string(interval_start) + "," +
                         std::to_string(interval_end) + "] out of bounds for T=" +
                         std::to_string(num_frames));
  std::set<std::string> categories = {framing_name(framing), angle_name(angle)};
  for (Movement m : movements) categories.insert(movement_name(m));
  if (!categories.count(main_cinematic_language))
    throw InvariantError("main_cinematic_language not among labels: " + main_cinematic_language);
  if (!camera_truth.empty() && static_cast<int>(camera_truth.size()) != num_frames - 1)
    throw InvariantError("camera_truth length mismatch");
}

json AnnotationRecord::to_json() const {
  json movements_j = json::array();
  for (Movement m : movements) movements_j.push_back(movement_name(m));
  json truth = json::array();
  for (const auto& s : camera_truth)
    truth.push_back({{"dx", s.dx}, {"dy", s.dy}, {"dlogz", s.dlogz}, {"droll", s.droll}, {"df", s.df}});
  return {
      {"video_caption", video_caption},
      {"cinematic_language",
       {{"framing", framing_name(framing)}, {"angle", angle_name(angle)}, {"movements", movements_j}}},
      {"main_cinematic_language", main_cinematic_language},
      {"typical", typical},
      {"interval", {interval_start, interval_end}},
      {"camera_truth", truth},
  };
}

AnnotationRecord AnnotationRecord::from_json(const json& j) {
  AnnotationRecord r;
  try {
    r.video_caption = j.at("video_caption").get<std::string>();
    const auto& cl = j.at("cinematic_language");
    r.framing = parse_framing(cl.at("framing").get<std::string>());
    r.angle = parse_angle(cl.at("angle").get<std::string>());
    for (const auto& m : cl.at("movements")) r.movements.push_back(parse_movement(m.get<std::string>()));
    r.main_cinematic_language = j.at("main_cinematic_language").get<std::string>();
    r.typical = j.at("typical").get<bool>();
    r.interval_start = j.at("interval").at(0).get<int>();
    r.interval_end = j.at("interval").at(1).get<int>();
    if (j.contains("camera_truth"))
      for (const auto& s : j["camera_truth"])
        r.camera_truth.push_back({s.at("dx").get<double>(), s.at("dy").get<double>(),
                                  s.at("dlogz").get<double>(), s.at("droll").get<double>(),
                                  s.at("df").get<double>()});
  } catch (const json::exception& e) {
    throw MetadataError(std::string("malformed metadata: ") + e.what());
  } catch (const LabelError& e) {
    throw MetadataError(std::string("malformed metadata: ") + e.what());
  }
  return r;
}

std::string cinematic_caption(const AnnotationRecord& record) {
  if (record.movements.empty()) throw InvariantError("empty movement list");
  std::ostringstream os;
  os << record.video_caption << " The shot type is: " << angle_name(record.angle) << ", ";
  for (const auto& m : record.movements) os << movement_name(m) << ", ";
  os << framing_name(record.framing) << ".";
  return os.str();
}

json GenConfig::to_json() const {
  return {{"frames", frames},   {"height", height}, {"width", width},
          {"bg_size", bg_size}, {"counts", counts}, {"splits", splits},
          {"pad_interval", pad_interval}};
}

GenConfig GenConfig::from_json(const json& j) {
  GenConfig c;
  c.frames = j.value("frames", 16);
  c.height = j.value("height", 64);
  c.width = j.value("width", 64);
  c.bg_size = j.value("bg_size", 256);
  if (j.contains("counts")) c.counts = j["counts"].get<std::map<std::string, int>>();
  if (j.contains("splits")) c.splits = j["splits"].get<std::map<std::string, double>>();
  c.pad_interval = j.value("pad_interval", false);
  return c;
}

json DatasetManifest::to_json() const {
  return {{"splits", splits}, {"counts", counts}, {"config_hash", config_hash}, {"seed", seed}};
}

DatasetManifest DatasetManifest::from_json(const json& j) {
  DatasetManifest m;
  m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  m.counts = j.at("counts").get<std::map<std::string, int>>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

DatasetManifest DatasetManifest::load(const std::string& root) {
  DatasetManifest m = from_json(load_json(root + "/manifest.json"));
  m.root = root;
  return m;
}

int DatasetManifest::total() const {
  int n = 0;
  for (const auto& [_, v] : counts) n += v;
  return n;
}

std::vector<Movement> parse_category(const std::string& category) {
  std::vector<Movement> out;
  std::size_t pos = 0;
  while (pos <= category.size()) {
    std::size_t plus = category.find('+', pos);
    std::string part = category.substr(pos, plus == std::string::npos ? std::string::npos : plus - pos);
    out.push_back(parse_movement(part));
    if (plus == std::string::npos) break;
    pos = plus + 1;
  }
  return out;
}

std::string category_name(const std::vector<Movement>& movements) {
  std::string s;
  for (const auto& m : movements) {
    if (!s.empty()) s += "+";
    s += movement_name(m);
  }
  return s;
}

namespace {

bool contains(const std::vector<Movement>& set, Movement m) {
  return std::find(set.begin(), set.end(), m) != set.end();
}

// Framing choices compatible with a movement set. Moving cameras pair with
// small subjects so the global-motion fit stays background-dominated; dolly
// needs a center-filling subject for its parallax signature.
std::vector<Framing> allowed_framings(const std::vector<Movement>& set) {
  if (contains(set, Movement::kDollyIn)) return {Framing::kMedium};
  if (contains(set, Movement::kDollyOut)) return {Framing::kMedium, Framing::kCloseUp};
  if (contains(set, Movement::kTracking)) return {Framing::kLong};
  bool translating = contains(set, Movement::kPanLeft) || contains(set, Movement::kPanRight) ||
                     contains(set, Movement::kTiltUp) || contains(set, Movement::kTiltDown);
  if (translating) return {Framing::kLong, Framing::kFull};
  if (contains(set, Movement::kZoomIn) || contains(set, Movement::kZoomOut))
    return {Framing::kLong, Framing::kFull, Framing::kMedium};
  // Rack focus defocuses the object; long-shot objects are too small to key
  // once blurred, so keep them out.
  if (contains(set, Movement::kRackFocus))
    return {Framing::kCloseUp, Framing::kMedium, Framing::kFull};
  return {Framing::kCloseUp, Framing::kMedium, Framing::kFull, Framing::kLong};
}

// Dutch angle only pairs with rotation-insensitive movements; a rolled window
// would bleed pan into tilt and vice versa.
std::vector<Angle> allowed_angles(const std::vector<Movement>& set) {
  bool translating = contains(set, Movement::kPanLeft) || contains(set, Movement::kPanRight) ||
                     contains(set, Movement::kTiltUp) || contains(set, Movement::kTiltDown) ||
                     contains(set, Movement::kTracking);
  if (translating) return {Angle::kLow, Angle::kEye, Angle::kHigh, Angle::kBird};
  return {Angle::kLow, Angle::kEye, Angle::kHigh, Angle::kBird, Angle::kDutch};
}

double draw_horizon(Angle a, Rng& rng) {
  switch (a) {
    case Angle::kLow:
      return rng.uniform(0.68, 0.88);
    case Angle::kEye:
    case Angle::kDutch:
      return rng.uniform(0.38, 0.62);
    case Angle::kHigh:
      return rng.uniform(0.18, 0.32);
    default:
      return 0.5;  // unused for bird
  }
}

CameraTrajectory freeze_outside_interval(const CameraTrajectory& traj, int a, int b) {
  CameraTrajectory out = traj;
  int T = traj.frames();
  for (int t = 0; t < T; ++t) {
    int s = std::clamp(t, a, b);
    // keep motion only inside [a,b]; hold endpoint states elsewhere
    out.cx[t] = traj.cx[s];
    out.cy[t] = traj.cy[s];
    out.z[t] = traj.z[s];
    out.roll_deg[t] = traj.roll_deg[s];
    out.focus[t] = traj.focus[s];
  }
  return out;
}

std::vector<CameraTruthStep> truth_from_trajectory(const CameraTrajectory& traj) {
  std::vector<CameraTruthStep> out;
  const double deg = 3.14159265358979323846 / 180.0;
  for (int t = 0; t + 1 < traj.frames(); ++t) {
    CameraTruthStep s;
    double dcx = traj.cx[t + 1] - traj.cx[t];
    double dcy = traj.cy[t + 1] - traj.cy[t];
    double th = traj.roll_deg[t] * deg;
    // content displacement on screen is the negated, rotated, zoomed camera step
    s.dx = -traj.z[t] * (std::cos(th) * dcx + std::sin(th) * dcy);
    s.dy = -traj.z[t] * (-std::sin(th) * dcx + std::cos(th) * dcy);
    s.dlogz = std::log(traj.z[t + 1]) - std::log(traj.z[t]);
    s.droll = traj.roll_deg[t + 1] - traj.roll_deg[t];
    s.df = traj.focus[t + 1] - traj.focus[t];
    out.push_back(s);
  }
  return out;
}

}  // namespace

GeneratedClip generate_labeled_clip(const std::vector<Movement>& movements, const GenConfig& cfg,
                                    Rng& rng, bool pad_interval) {
  GeneratedClip g;

  auto framings = allowed_framings(movements);
  auto angles = allowed_angles(movements);
  Framing framing = framings[rng.uniform_int(0, static_cast<std::int64_t>(framings.size()) - 1)];
  Angle angle = angles[rng.uniform_int(0, static_cast<std::int64_t>(angles.size()) - 1)];
  // A rolled close-up subject occludes the horizon, so dutch steps down to the
  // next framing the movement set allows.
  if (angle == Angle::kDutch && framing == Framing::kCloseUp)
    for (Framing f : framings)
      if (f != Framing::kCloseUp) {
        framing = f;
        break;
      }

  g.scene.seed = rng.next_u64();
  g.scene.bg_size = cfg.bg_size;
  g.scene.object_shape = static_cast<Shape>(rng.uniform_int(0, 2));
  g.scene.object_color = static_cast<int>(rng.uniform_int(0, 7));
  g.scene.scene_word = static_cast<int>(rng.uniform_int(0, 7));
  const auto& band = framing_band(framing);
  g.scene.object_size_frac = rng.uniform(band.gen_lo, band.gen_hi);
  if (angle == Angle::kBird)
    g.scene.horizon_frac.reset();
  else
    g.scene.horizon_frac = draw_horizon(angle, rng);
  g.scene.roll_deg = 0.0;
  if (angle == Angle::kDutch)
    g.scene.roll_deg = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(16.0, 29.0);
  bool dolly = contains(movements, Movement::kDollyIn) || contains(movements, Movement::kDollyOut);
  double jitter = dolly ? 1.0 : 3.0;
  g.scene.obj_start_u = rng.uniform(-jitter, jitter);
  g.scene.obj_start_v = rng.uniform(-jitter, jitter);

  double c0 = cfg.bg_size / 2.0;
  g.traj = make_trajectory(movements, cfg.frames, rng.next_u64(), c0, c0);
  for (auto& r : g.traj.roll_deg) r = g.scene.roll_deg;

  int a = 0, b = cfg.frames - 1;
  if (pad_interval && cfg.frames >= 8 && !contains(movements, Movement::kStill)) {
    a = static_cast<int>(rng.uniform_int(0, cfg.frames / 4));
    b = cfg.frames - 1 - static_cast<int>(rng.uniform_int(0, cfg.frames / 4));
    g.traj = freeze_outside_interval(g.traj, a, b);
  }

  g.clip = render_clip(g.scene, g.traj, cfg.height, cfg.width);

  g.record.video_caption = scene_caption(g.scene);
  g.record.framing = framing;
  g.record.angle = angle;
  g.record.movements = movements;
  g.record.main_cinematic_language = movement_name(movements.front());
  g.record.typical = true;
  g.record.interval_start = a;
  g.record.interval_end = b;
  g.record.camera_truth = truth_from_trajectory(g.traj);
  g.record.validate(cfg.frames);
  return g;
}

DatasetManifest generate_dataset(const GenConfig& cfg, const std::string& out_root,
                                 std::uint64_t seed) {
  if (cfg.counts.empty()) throw InvariantError("generator config has no category counts");
  for (const auto& [cat, n] : cfg.counts)
    if (n <= 0) throw InvariantError("zero or negative count for category: " + cat);

  std::error_code ec;
  fs::create_directories(out_root, ec);
  if (!fs::is_directory(out_root)) throw std::runtime_error("unwritable output root: " + out_root);

  Rng root(seed);
  Rng scene_rng = root.child("scenes");

  // Flat clip plan: category per clip, in manifest key order.
  std::vector<std::string> plan;
  for (const auto& [cat, n] : cfg.counts)
    for (int i = 0; i < n; ++i) plan.push_back(cat);

  // Split assignment: deterministic shuffle, contiguous ratio slices.
  std::vector<int> order(plan.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = root.child("split");
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

  std::vector<std::string> split_of(plan.size());
  {
    std::size_t pos = 0;
    double acc = 0.0;
    std::size_t last_end = 0;
    std::size_t k = 0;
    for (const auto& [name, ratio] : cfg.splits) {
      acc += ratio;
      std::size_t end = (++k == cfg.splits.size())
                            ? order.size()
                            : static_cast<std::size_t>(std::llround(acc * order.size()));
      for (; pos < end; ++pos) split_of[order[pos]] = name;
      last_end = end;
    }
    (void)last_end;
  }

  DatasetManifest manifest;
  manifest.root = out_root;
  manifest.counts = cfg.counts;
  manifest.config_hash = config_hash_hex(cfg.to_json());
  manifest.seed = seed;
  for (const auto& [name, _] : cfg.splits) manifest.splits[name] = {};

  std::set<std::string> used_captions;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    auto movements = parse_category(plan[i]);
    Rng clip_rng = scene_rng.child(static_cast<std::uint64_t>(i));
    GeneratedClip g;
    for (int attempt = 0;; ++attempt) {
      Rng attempt_rng = clip_rng.child(static_cast<std::uint64_t>(attempt));
      g = generate_labeled_clip(movements, cfg, attempt_rng, cfg.pad_interval);
      if (used_captions.insert(cinematic_caption(g.record)).second) break;
      if (attempt > 200) throw std::runtime_error("cannot draw a unique caption for " + plan[i]);
    }

    char id[32];
    std::snprintf(id, sizeof(id), "clip_%05zu", i);
    const std::string& split = split_of[i];
    fs::path dir = fs::path(out_root) / split / id;
    fs::create_directories(dir);
    for (int t = 0; t < g.clip.t; ++t) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%02d.png", t);
      write_png((dir / name).string(), g.clip.frame(t));
    }
    save_json((dir / "meta.json").string(), g.record.to_json());
    manifest.splits[split].push_back(id);
  }

  save_json(out_root + "/manifest.json", manifest.to_json());
  return manifest;
}

std::pair<VideoClip, AnnotationRecord> load_clip(const std::string& clip_dir) {
  // Discover contiguous frame files.
  std::vector<int> present;
  int max_idx = -1;
  for (int t = 0; t < 100; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02d.png", t);
    if (fs::exists(fs::path(clip_dir) / name)) {
      present.push_back(t);
      max_idx = t;
    }
  }
  if (max_idx < 0) throw MissingFrameError("no frames in " + clip_dir);
  if (static_cast<int>(present.size()) != max_idx + 1) {
    for (int t = 0; t <= max_idx; ++t)
      if (std::find(present.begin(), present.end(), t) == present.end())
        throw MissingFrameError("missing frame file index " + std::to_string(t) + " in " + clip_dir);
  }
  int T = max_idx + 1;

  fs::path meta_path = fs::path(clip_dir) / "meta.json";
  if (!fs::exists(meta_path)) throw MetadataError("missing meta.json in " + clip_dir);
  AnnotationRecord record = AnnotationRecord::from_json(load_json(meta_path.string()));

  VideoClip clip;
  for (int t = 0; t < T; ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%02d.png", t);
    Image8 img = read_png((fs::path(clip_dir) / name).string());
    if (t == 0) clip = VideoClip(T, img.h, img.w);
    clip.set_frame(t, img);
  }
  record.validate(T);
  return {std::move(clip), std::move(record)};
}

}  // namespace cinelab
