// cinelab: command-line surface binding data generation, contrastive training,
// diffusion, adapter composition search, generation, and evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "clip/train.hpp"
#include "compose/compose.hpp"
#include "data/dataset.hpp"
#include "diffusion/ddim.hpp"
#include "metrics/metrics.hpp"

namespace fs = std::filesystem;
using namespace cinelab;

namespace {

constexpr const char* kVersion = "0.1.0";

void log_line(const json& j) { std::cerr << j.dump() << "\n"; }

std::uint64_t file_fnv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return fnv1a(bytes.data(), bytes.size());
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%02d.png", i);
  return buf;
}

VideoClip read_clip_dir(const std::string& dir) {
  std::vector<Image8> frames;
  for (int i = 0;; ++i) {
    const std::string path = dir + "/" + frame_name(i);
    if (!fs::exists(path)) break;
    frames.push_back(read_png(path));
  }
  if (frames.empty()) throw std::runtime_error("no frames in: " + dir);
  VideoClip clip(static_cast<int>(frames.size()), frames[0].h, frames[0].w);
  for (size_t i = 0; i < frames.size(); ++i) clip.set_frame(static_cast<int>(i), frames[i]);
  return clip;
}

void write_clip_dir(const std::string& dir, const VideoClip& clip, const json& meta) {
  fs::create_directories(dir);
  for (int i = 0; i < clip.t; ++i) write_png(dir + "/" + frame_name(i), clip.frame(i));
  save_json(dir + "/gen_meta.json", meta);
}

// Subdirectories of `root` that contain a frame_00.png, sorted by name.
std::vector<std::string> clip_dirs_in(const std::string& root) {
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && fs::exists(e.path() / "frame_00.png"))
      dirs.push_back(e.path().string());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no clip directories under: " + root);
  return dirs;
}

struct PromptEntry {
  std::string text;
  std::vector<std::string> movements;
};

std::vector<PromptEntry> load_prompts(const std::string& path) {
  json j = load_json(path);
  std::vector<PromptEntry> out;
  for (const auto& p : j.at("prompts")) {
    PromptEntry e;
    if (p.is_string()) {
      e.text = p.get<std::string>();
    } else {
      e.text = p.at("text").get<std::string>();
      if (p.contains("movements"))
        e.movements = p.at("movements").get<std::vector<std::string>>();
    }
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error("no prompts in: " + path);
  return out;
}

json maybe_load(const std::string& path) { return path.empty() ? json::object() : load_json(path); }

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& config_path, const std::string& out, std::uint64_t seed) {
  GenConfig cfg = GenConfig::from_json(load_json(config_path));
  log_line({{"event", "gen-data:start"}, {"out", out}, {"seed", seed}});
  DatasetManifest manifest = generate_dataset(cfg, out, seed);
  log_line({{"event", "gen-data:done"}, {"total", manifest.total()}});
  std::cout << json({{"root", out},
                     {"total", manifest.total()},
                     {"config_hash", manifest.config_hash}})
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_train_clip(const std::string& data, const std::string& config_path,
                   const std::string& out, std::uint64_t seed, const std::string& split) {
  json cj = maybe_load(config_path);
  ClipConfig cfg = cj.empty() ? ClipConfig{} : ClipConfig::from_json(cj);
  ClipDatasetView view = ClipDatasetView::load(data, split, cfg.n_frames);
  log_line({{"event", "train-clip:start"}, {"clips", view.clips.size()}, {"seed", seed}});
  ClipModel model(cfg, Rng(seed).child("init").next_u64());
  auto history = train_clip(model, view, cfg, seed, &std::cerr);
  json meta = {{"config", cfg.to_json()},
               {"config_hash", config_hash_hex(cfg.to_json())},
               {"seed", seed}};
  fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path().string());
  model.save(out, meta);
  std::cout << json({{"checkpoint", out},
                     {"epochs", history.size()},
                     {"final_loss", history.empty() ? json() : history.back().at("mean_loss")}})
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_eval_retrieval(const std::string& data, const std::string& split,
                       const std::string& model_path) {
  ClipModel model = load_clip_checkpoint(model_path);
  ClipDatasetView view = ClipDatasetView::load(data, split, model.config().n_frames);
  double r1 = eval_recall_at_1(model, view);
  std::cout << json({{"metric", "recall_at_1"},
                     {"value", r1},
                     {"count", view.clips.size()},
                     {"split", split}})
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_train_diffusion(const std::string& data, const std::string& config_path,
                        const std::string& out, std::uint64_t seed) {
  json cj = maybe_load(config_path);
  UNetConfig ucfg = UNetConfig::from_json(cj.value("unet", json::object()));
  DiffTrainConfig tcfg = DiffTrainConfig::from_json(cj.value("train", json::object()));
  const int stride = cj.value("stride", 2);
  const std::string split = cj.value("split", std::string("train"));

  DiffDatasetView view = DiffDatasetView::load(data, split, ucfg, stride);
  log_line({{"event", "train-diffusion:start"}, {"clips", view.volumes.size()}, {"seed", seed}});
  UNet model(ucfg, Rng(seed).child("init").next_u64());
  NoiseSchedule ns(ucfg.t_train);
  auto losses = train_diffusion(model, view, ns, tcfg, seed, log_line);
  model.save(out, {{"config", ucfg.to_json()},
                   {"config_hash", config_hash_hex(ucfg.to_json())},
                   {"seed", seed}});
  std::cout << json({{"checkpoint", out},
                     {"epochs", losses.size()},
                     {"final_loss", losses.empty() ? 0.f : losses.back()}})
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_train_lora(const std::string& data, const std::string& base_path,
                   const std::string& category, const std::string& config_path,
                   const std::string& out, std::uint64_t seed) {
  json cj = maybe_load(config_path);
  DiffTrainConfig tcfg;
  tcfg.epochs = 10;
  tcfg.batch = 4;
  tcfg.lr = 1e-5f;
  tcfg.weight_decay = 0.f;
  if (cj.contains("train")) tcfg = DiffTrainConfig::from_json(cj.at("train"));
  const int stride = cj.value("stride", 2);
  const int rank = cj.value("rank", 4);
  const int alpha = cj.value("alpha", 4);
  const std::string split = cj.value("split", std::string("train"));

  UNet base = load_unet_checkpoint(base_path);
  base.freeze_all();
  DiffDatasetView view = DiffDatasetView::load(data, split, base.config(), stride, category);
  log_line({{"event", "train-lora:start"},
            {"category", category},
            {"clips", view.volumes.size()},
            {"seed", seed}});
  LoraAdapter adapter(base, category, rank, alpha, Rng(seed).child("lora-init").next_u64());
  NoiseSchedule ns(base.config().t_train);
  auto losses = train_lora(base, adapter, view, ns, tcfg, seed, log_line);
  adapter.save(out);
  std::cout << json({{"checkpoint", out},
                     {"category", category},
                     {"epochs", losses.size()},
                     {"final_loss", losses.empty() ? 0.f : losses.back()}})
                   .dump(2)
            << "\n";
  return 0;
}

int cmd_compose_search(const std::string& base_path, const std::string& clip_path,
                       const std::vector<std::string>& adapter_paths,
                       const std::string& prompts_path, const std::string& config_path,
                       const std::string& out_dir, std::uint64_t seed, int workers) {
  json cj = maybe_load(config_path);
  GAConfig ga = GAConfig::from_json(cj);
  ga.seed = seed;
  const int steps = cj.value("steps", 50);
  const double guidance = cj.value("guidance", 5.0);

  UNet base = load_unet_checkpoint(base_path);
  base.freeze_all();
  ClipModel camclip = load_clip_checkpoint(clip_path);
  std::vector<LoraAdapter> adapters;
  std::vector<std::string> adapter_names;
  adapters.reserve(adapter_paths.size());
  for (const auto& p : adapter_paths) {
    adapters.push_back(load_lora_checkpoint(base, p));
    adapter_names.push_back(adapters.back().category());
  }
  if (adapters.size() < 2) throw std::runtime_error("compose-search needs >= 2 adapters");

  auto prompt_entries = load_prompts(prompts_path);
  FitnessContext ctx;
  ctx.base = &base;
  ctx.camclip = &camclip;
  for (auto& a : adapters) ctx.adapters.push_back(&a);
  Rng prompt_rng = Rng(seed).child("prompt-seeds");
  for (size_t i = 0; i < prompt_entries.size(); ++i) {
    ctx.prompts.push_back(prompt_entries[i].text);
    ctx.prompt_seeds.push_back(prompt_rng.child(i).next_u64());
  }
  ctx.steps = steps;
  ctx.guidance = guidance;

  json hash_src = {{"base", hex64(file_fnv(base_path))},
                   {"clip", hex64(file_fnv(clip_path))},
                   {"adapters", json::array()},
                   {"prompts", ctx.prompts},
                   {"seeds", ctx.prompt_seeds},
                   {"steps", steps},
                   {"guidance", guidance}};
  for (const auto& p : adapter_paths) hash_src["adapters"].push_back(hex64(file_fnv(p)));
  ctx.ctx_hash = config_hash_hex(hash_src);
  if (const char* cache = std::getenv("CINELAB_CACHE")) ctx.cache_dir = cache;

  const int k = static_cast<int>(adapters.size());
  log_line({{"event", "compose-search:start"},
            {"adapters", adapter_names},
            {"prompts", ctx.prompts.size()},
            {"steps", steps},
            {"workers", workers},
            {"ctx_hash", ctx.ctx_hash}});

  // Generation members are independent; shard them across workers. Results
  // are identical to a sequential run because fitness is deterministic.
  BatchFitnessFn batch = [&](const std::vector<Schedule>& pop) {
    std::vector<double> f(pop.size());
    const int nw = std::max(1, workers);
    if (nw == 1) {
      for (size_t i = 0; i < pop.size(); ++i) f[i] = evaluate_fitness(pop[i], ctx).f;
    } else {
      std::vector<std::thread> pool;
      std::atomic<size_t> next{0};
      for (int w = 0; w < nw; ++w)
        pool.emplace_back([&]() {
          for (size_t i = next.fetch_add(1); i < pop.size(); i = next.fetch_add(1))
            f[i] = evaluate_fitness(pop[i], ctx).f;
        });
      for (auto& t : pool) t.join();
    }
    return f;
  };

  json history = json::array();
  GaResult result = ga_search(ga, steps, k, batch, [&](const GaGeneration& g) {
    json rec = {{"generation", g.generation},
                {"best_f", g.best_f},
                {"mean_f", g.mean_f},
                {"best_ever_f", g.best_ever_f}};
    history.push_back(rec);
    log_line(rec);
    // Persist partial history so an aborted search leaves a record.
    fs::create_directories(out_dir);
    save_json(out_dir + "/history.json", history);
  });

  json schedule_json = {{"genes", result.best.genes},
                        {"H", result.best.genes.size()},
                        {"adapter_names", adapter_names},
                        {"best_F", result.best_f},
                        {"config_hash", ctx.ctx_hash}};
  fs::create_directories(out_dir);
  save_json(out_dir + "/schedule.json", schedule_json);
  save_json(out_dir + "/history.json", history);
  std::cout << schedule_json.dump(2) << "\n";
  return 0;
}

int cmd_generate(const std::string& base_path, const std::vector<std::string>& adapter_paths,
                 const std::string& schedule_path, std::string mode_name,
                 std::vector<double> merge_weights, const std::string& prompt,
                 std::uint64_t seed, int steps, double guidance, const std::string& out_dir) {
  UNet base = load_unet_checkpoint(base_path);
  base.freeze_all();
  std::vector<LoraAdapter> adapters;
  for (const auto& p : adapter_paths) adapters.push_back(load_lora_checkpoint(base, p));

  GenerationRequest req;
  req.prompt = prompt;
  req.seed = seed;
  req.steps = steps;
  req.guidance = guidance;

  if (!schedule_path.empty()) {
    json sj = load_json(schedule_path);
    req.genes = Schedule::from_json(sj).genes;
    req.steps = static_cast<int>(req.genes.size());
    mode_name = "schedule";
  }
  if (mode_name.empty()) mode_name = adapters.empty() ? "none" : "single";
  req.mode = adapter_mode_from_name(mode_name);
  if (req.mode == AdapterMode::kMerge && merge_weights.empty())
    merge_weights.assign(adapters.size(), 1.0 / static_cast<double>(adapters.size()));
  req.merge_weights = merge_weights;

  std::vector<const LoraAdapter*> ptrs;
  for (auto& a : adapters) ptrs.push_back(&a);
  log_line({{"event", "generate:start"},
            {"prompt", prompt},
            {"mode", adapter_mode_name(req.mode)},
            {"steps", req.steps},
            {"seed", seed}});
  Mat volume = ddim_generate(base, NoiseSchedule(base.config().t_train), req, ptrs);
  VideoClip clip = volume_to_clip(volume, base.config().frames, base.config().size);

  json meta = {{"prompt", prompt},
               {"seed", seed},
               {"steps", req.steps},
               {"guidance", guidance},
               {"mode", adapter_mode_name(req.mode)},
               {"adapters", json::array()}};
  for (const auto& a : adapters) meta["adapters"].push_back(a.category());
  // Requested movements = the categories of every adapter in play; lets
  // `evaluate --mode motion` score this output without extra bookkeeping.
  json movements = json::array();
  for (const auto& a : adapters)
    for (const auto& m : parse_category(a.category())) movements.push_back(movement_name(m));
  meta["movements"] = movements;
  if (req.mode == AdapterMode::kSchedule) meta["genes"] = req.genes;
  if (req.mode == AdapterMode::kMerge) meta["merge_weights"] = req.merge_weights;
  write_clip_dir(out_dir, clip, meta);
  std::cout << json({{"out", out_dir}, {"frames", clip.t}}).dump(2) << "\n";
  return 0;
}

int cmd_evaluate(const std::string& mode, const std::string& model_path,
                 const std::string& inputs, const std::string& dir_a, const std::string& dir_b,
                 const std::string& out_path) {
  json report;
  if (mode == "clipsim") {
    ClipModel model = load_clip_checkpoint(model_path);
    std::vector<VideoClip> clips;
    std::vector<std::string> prompts;
    for (const auto& d : clip_dirs_in(inputs)) {
      clips.push_back(read_clip_dir(d));
      prompts.push_back(load_json(d + "/gen_meta.json").at("prompt").get<std::string>());
    }
    report = clipsim(clips, prompts, model).to_json();
  } else if (mode == "ffd") {
    ClipModel model = load_clip_checkpoint(model_path);
    auto embed_dir = [&](const std::string& root) {
      auto dirs = clip_dirs_in(root);
      Eigen::MatrixXd e(dirs.size(), model.config().d_model);
      for (size_t i = 0; i < dirs.size(); ++i)
        e.row(i) = model.embed_video(read_clip_dir(dirs[i])).row(0).cast<double>();
      return e;
    };
    Eigen::MatrixXd ea = embed_dir(dir_a), eb = embed_dir(dir_b);
    report = {{"metric", "ffd"},
              {"value", ffd(ea, eb)},
              {"count_a", ea.rows()},
              {"count_b", eb.rows()}};
  } else if (mode == "motion") {
    double sum = 0;
    int n = 0;
    json per_item = json::array();
    for (const auto& d : clip_dirs_in(inputs)) {
      json meta = load_json(d + "/gen_meta.json");
      std::vector<Movement> requested;
      for (const auto& m : meta.value("movements", json::array()))
        requested.push_back(parse_movement(m.get<std::string>()));
      if (requested.empty()) continue;  // nothing requested for this clip
      const double frac = motion_adherence(read_clip_dir(d), requested);
      per_item.push_back({{"clip", d}, {"adherence", frac}});
      sum += frac;
      ++n;
    }
    report = {{"metric", "motion_adherence"},
              {"value", n ? sum / n : 0.0},
              {"count", n},
              {"per_item", per_item}};
  } else {
    std::cerr << "evaluate: unknown --mode '" << mode << "' (clipsim|ffd|motion)\n";
    return 1;
  }
  if (!out_path.empty()) save_json(out_path, report);
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cinelab: desk-scale cinematic-control laboratory"};
  app.require_subcommand(1);
  int workers = 1;
  app.add_option("--workers", workers, "parallel workers (default 1, sequential)");

  std::string config, out, data, split = "val", model_path, base_path, clip_path;
  std::string category, prompts_path, schedule_path, mode, prompt, inputs, dir_a, dir_b;
  std::vector<std::string> adapter_paths;
  std::vector<double> merge_weights;
  std::uint64_t seed = 0;
  int steps = 50;
  double guidance = 5.0;

  auto* gen = app.add_subcommand("gen-data", "render a labeled synthetic dataset");
  gen->add_option("--config", config)->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out)->required();
  gen->add_option("--seed", seed)->required();

  auto* tc = app.add_subcommand("train-clip", "train the contrastive video-text encoder");
  tc->add_option("--data", data)->required();
  tc->add_option("--config", config)->check(CLI::ExistingFile);
  tc->add_option("--out", out)->required();
  tc->add_option("--seed", seed)->required();
  std::string train_split = "train";
  tc->add_option("--split", train_split);

  auto* er = app.add_subcommand("eval-retrieval", "recall@1 retrieval evaluation");
  er->add_option("--data", data)->required();
  er->add_option("--split", split);
  er->add_option("--model", model_path)->required()->check(CLI::ExistingFile);

  auto* td = app.add_subcommand("train-diffusion", "train the base video diffusion model");
  td->add_option("--data", data)->required();
  td->add_option("--config", config)->check(CLI::ExistingFile);
  td->add_option("--out", out)->required();
  td->add_option("--seed", seed)->required();

  auto* tl = app.add_subcommand("train-lora", "train one movement adapter on a frozen base");
  tl->add_option("--data", data)->required();
  tl->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  tl->add_option("--category", category)->required();
  tl->add_option("--config", config)->check(CLI::ExistingFile);
  tl->add_option("--out", out)->required();
  tl->add_option("--seed", seed)->required();

  auto* cs = app.add_subcommand("compose-search", "genetic search over adapter schedules");
  cs->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  cs->add_option("--clip", clip_path)->required()->check(CLI::ExistingFile);
  cs->add_option("--adapters", adapter_paths)->required()->check(CLI::ExistingFile);
  cs->add_option("--prompts", prompts_path)->required()->check(CLI::ExistingFile);
  cs->add_option("--config", config)->check(CLI::ExistingFile);
  cs->add_option("--out", out)->required();
  cs->add_option("--seed", seed)->required();

  auto* gn = app.add_subcommand("generate", "sample a video with optional adapters");
  gn->add_option("--base", base_path)->required()->check(CLI::ExistingFile);
  gn->add_option("--adapter", adapter_paths)->check(CLI::ExistingFile);
  gn->add_option("--schedule", schedule_path)->check(CLI::ExistingFile);
  gn->add_option("--mode", mode, "none|single|schedule|merge|composite");
  gn->add_option("--merge-weights", merge_weights);
  gn->add_option("--prompt", prompt)->required();
  gn->add_option("--seed", seed)->required();
  gn->add_option("--steps", steps);
  gn->add_option("--guidance", guidance);
  gn->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("evaluate", "clipsim | ffd | motion metrics");
  ev->add_option("--mode", mode)->required();
  ev->add_option("--model", model_path)->check(CLI::ExistingFile);
  ev->add_option("--inputs", inputs);
  ev->add_option("--a", dir_a);
  ev->add_option("--b", dir_b);
  ev->add_option("--out", out);

  auto* ver = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (ver->parsed()) {
      std::cout << "cinelab " << kVersion << "\n";
      return 0;
    }
    if (gen->parsed()) return cmd_gen_data(config, out, seed);
    if (tc->parsed()) return cmd_train_clip(data, config, out, seed, train_split);
    if (er->parsed()) return cmd_eval_retrieval(data, split, model_path);
    if (td->parsed()) return cmd_train_diffusion(data, config, out, seed);
    if (tl->parsed()) return cmd_train_lora(data, base_path, category, config, out, seed);
    if (cs->parsed())
      return cmd_compose_search(base_path, clip_path, adapter_paths, prompts_path, config, out,
                                seed, workers);
    if (gn->parsed())
      return cmd_generate(base_path, adapter_paths, schedule_path, mode, merge_weights, prompt,
                          seed, steps, guidance, out);
    if (ev->parsed()) return cmd_evaluate(mode, model_path, inputs, dir_a, dir_b, out);
    return 1;
  } catch (const std::exception& e) {
    log_line({{"event", "error"}, {"message", e.what()}});
    return 2;
  }
}
