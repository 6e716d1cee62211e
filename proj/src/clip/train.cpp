#include "clip/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "data/dataset.hpp"

namespace cinelab {

ClipDatasetView ClipDatasetView::load(const std::string& root, const std::string& split,
                                      int n_frames) {
  DatasetManifest manifest = DatasetManifest::load(root);
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw NnError("unknown split: " + split);
  ClipDatasetView view;
  for (const std::string& id : it->second) {
    auto [clip, record] = load_clip((std::filesystem::path(root) / split / id).string());
    std::vector<int> idx = sample_frame_indices(clip.t, n_frames);
    VideoClip sub(static_cast<int>(idx.size()), clip.h, clip.w);
    for (size_t i = 0; i < idx.size(); ++i) sub.set_frame(static_cast<int>(i), clip.frame(idx[i]));
    view.clips.push_back(std::move(sub));
    view.captions.push_back(cinematic_caption(record));
  }
  return view;
}

std::vector<json> train_clip(ClipModel& model, const ClipDatasetView& data,
                             const ClipConfig& cfg, std::uint64_t seed, std::ostream* log) {
  const int m = static_cast<int>(data.clips.size());
  if (m == 0) throw NnError("train_clip: empty split");
  const int steps_per_epoch = m / cfg.batch;
  if (steps_per_epoch == 0) throw NnError("train_clip: split smaller than one batch");
  const long total_steps = static_cast<long>(steps_per_epoch) * cfg.epochs;

  AdamW opt(model.params().list(), static_cast<float>(cfg.weight_decay));
  Rng rng(seed);
  std::vector<json> epochs;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = rng.child("epoch" + std::to_string(epoch));
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    for (int i = m - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    double loss_sum = 0.0;
    float lr = 0.f;
    for (int b = 0; b < steps_per_epoch; ++b) {
      Tensor v_batch, t_batch;
      for (int k = 0; k < cfg.batch; ++k) {
        int i = order[b * cfg.batch + k];
        Tensor v = model.encode_video(data.clips[i]);
        Tensor t = model.encode_text(data.captions[i]);
        v_batch = v_batch ? concat_rows(v_batch, v) : v;
        t_batch = t_batch ? concat_rows(t_batch, t) : t;
      }
      Tensor loss = infonce_loss(v_batch, t_batch, static_cast<float>(cfg.tau));
      double loss_val = loss->val(0, 0);
      if (!std::isfinite(loss_val))
        throw NnError("train_clip: non-finite loss at epoch " + std::to_string(epoch) +
                      " step " + std::to_string(b));
      zero_grad(model.params().list());
      backward(loss);
      lr = warmup_cosine_lr(step, total_steps, static_cast<float>(cfg.lr),
                            static_cast<float>(cfg.warmup_frac),
                            static_cast<float>(cfg.final_lr));
      opt.step(lr);
      loss_sum += loss_val;
      ++step;
    }
    json rec = {{"epoch", epoch}, {"mean_loss", loss_sum / steps_per_epoch}, {"lr", lr}};
    if (log) *log << rec.dump() << "\n" << std::flush;
    epochs.push_back(std::move(rec));
  }
  return epochs;
}

double eval_recall_at_1(ClipModel& model, const ClipDatasetView& data) {
  const int m = static_cast<int>(data.clips.size());
  if (m == 0) throw NnError("eval_recall_at_1: empty split");
  Mat v(m, model.config().d_model), t(m, model.config().d_model);
  for (int i = 0; i < m; ++i) {
    v.row(i) = model.embed_video(data.clips[i]).row(0);
    t.row(i) = model.embed_text(data.captions[i]).row(0);
  }
  return recall_at_1(v * t.transpose());
}

json aggregator_ablation(const ClipDatasetView& train_data, const ClipDatasetView& eval_data,
                         ClipConfig base_cfg, std::uint64_t seed,
                         const std::vector<std::string>& kinds, std::ostream* log) {
  json table = json::array();
  for (const std::string& kind : kinds) {
    ClipConfig cfg = base_cfg;
    cfg.aggregator = kind;
    ClipModel model(cfg, seed);
    train_clip(model, train_data, cfg, seed, log);
    double r1 = eval_recall_at_1(model, eval_data);
    table.push_back({{"aggregator", kind}, {"R1", r1}});
    if (log) *log << json{{"ablation", kind}, {"R1", r1}}.dump() << "\n" << std::flush;
  }
  std::sort(table.begin(), table.end(),
            [](const json& a, const json& b) { return a["R1"].get<double>() > b["R1"].get<double>(); });
  return table;
}

}  // namespace cinelab
