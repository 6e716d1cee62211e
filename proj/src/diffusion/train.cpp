#include "diffusion/train.hpp"

#include <algorithm>
#include <cmath>

#include "data/dataset.hpp"

namespace cinelab {

Mat clip_to_volume(const VideoClip& clip, int frames, int size, int stride) {
  if (stride < 1) throw NnError("clip_to_volume: stride must be positive");
  if ((frames - 1) * stride >= clip.t)
    throw NnError("clip_to_volume: not enough frames in clip");
  Mat v(static_cast<long>(frames) * size * size, 3);
  for (int f = 0; f < frames; ++f) {
    Image8 img = resize(clip.frame(f * stride), size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const long row = (static_cast<long>(f) * size + y) * size + x;
        for (int c = 0; c < 3; ++c) v(row, c) = img.at(y, x, c) / 127.5f - 1.f;
      }
  }
  return v;
}

VideoClip volume_to_clip(const Mat& volume, int frames, int size) {
  if (volume.rows() != static_cast<long>(frames) * size * size || volume.cols() != 3)
    throw NnError("volume_to_clip: shape mismatch");
  VideoClip clip(frames, size, size);
  for (int f = 0; f < frames; ++f) {
    Image8 img(size, size);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const long row = (static_cast<long>(f) * size + y) * size + x;
        for (int c = 0; c < 3; ++c) {
          float u = (volume(row, c) + 1.f) * 127.5f;
          img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(u), 0l, 255l));
        }
      }
    clip.set_frame(f, img);
  }
  return clip;
}

DiffDatasetView DiffDatasetView::load(const std::string& root, const std::string& split,
                                      const UNetConfig& cfg, int stride,
                                      const std::optional<std::string>& category) {
  DatasetManifest manifest = DatasetManifest::load(root);
  auto it = manifest.splits.find(split);
  if (it == manifest.splits.end()) throw MetadataError("DiffDatasetView: no split " + split);
  Vocab vocab;
  DiffDatasetView view;
  for (const auto& id : it->second) {
    auto [clip, record] = load_clip(root + "/" + split + "/" + id);
    if (category && record.main_cinematic_language != *category) continue;
    view.volumes.push_back(clip_to_volume(clip, cfg.frames, cfg.size, stride));
    view.tokens.push_back(vocab.encode(cinematic_caption(record)));
    view.categories.push_back(record.main_cinematic_language);
  }
  if (view.volumes.empty()) throw MetadataError("DiffDatasetView: empty after filtering");
  return view;
}

json DiffTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch", batch},       {"lr", lr},
          {"weight_decay", weight_decay}, {"text_dropout", text_dropout}};
}

DiffTrainConfig DiffTrainConfig::from_json(const json& j) {
  DiffTrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.text_dropout = j.value("text_dropout", c.text_dropout);
  return c;
}

namespace {

const std::vector<int> kUncondTokens = {Vocab::kBos, Vocab::kEos};

// Shared epsilon-MSE loop. `resolver` and `opt_params` distinguish base
// training (null resolver, all model params) from adapter training.
std::vector<float> run_training(UNet& model, const DiffDatasetView& data,
                                const NoiseSchedule& ns, const DiffTrainConfig& cfg,
                                std::uint64_t seed, const WeightResolver* resolver,
                                const std::vector<Tensor>& opt_params, float text_dropout,
                                const TrainLogFn& log) {
  if (cfg.batch < 1 || cfg.epochs < 1) throw NnError("train: bad config");
  AdamW opt(opt_params, cfg.weight_decay);
  Rng rng(seed);
  const size_t m = data.volumes.size();
  std::vector<size_t> order(m);
  std::vector<float> epoch_losses;
  const long rows = model.config().frames * model.config().size * model.config().size;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng erng = rng.child("epoch" + std::to_string(epoch));
    for (size_t i = 0; i < m; ++i) order[i] = i;
    for (size_t i = m; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<size_t>(erng.uniform_int(0, i - 1))]);

    double sum_loss = 0;
    long n_steps = std::max<long>(1, static_cast<long>(m) / cfg.batch);
    for (long s = 0; s < n_steps; ++s) {
      zero_grad(opt_params);
      float step_loss = 0;
      const int bs = static_cast<int>(std::min<size_t>(cfg.batch, m - s * cfg.batch));
      for (int b = 0; b < bs; ++b) {
        const size_t idx = order[s * cfg.batch + b];
        const int t = static_cast<int>(erng.uniform_int(1, ns.t_train));
        Mat eps(rows, 3);
        for (long r = 0; r < rows; ++r)
          for (int c = 0; c < 3; ++c) eps(r, c) = static_cast<float>(erng.normal());
        Mat xt = q_sample(ns, data.volumes[idx], t, eps);
        std::vector<int> toks = data.tokens[idx];
        if (text_dropout > 0 && erng.bernoulli(text_dropout)) toks = kUncondTokens;

        Tensor pred = model.forward(constant(xt), t, toks, resolver);
        Tensor diff = add(pred, constant(Mat(-eps)));
        Tensor loss = scale(mean_all(mul(diff, diff)), 1.f / bs);
        if (!std::isfinite(loss->val(0, 0))) throw NnError("train: non-finite loss");
        backward(loss);
        step_loss += loss->val(0, 0);
      }
      opt.step(cfg.lr);
      sum_loss += step_loss;
    }
    const float mean_loss = static_cast<float>(sum_loss / n_steps);
    epoch_losses.push_back(mean_loss);
    if (log) log({{"epoch", epoch}, {"mean_loss", mean_loss}, {"lr", cfg.lr}});
  }
  return epoch_losses;
}

}  // namespace

std::vector<float> train_diffusion(UNet& model, const DiffDatasetView& data,
                                   const NoiseSchedule& ns, const DiffTrainConfig& cfg,
                                   std::uint64_t seed, const TrainLogFn& log) {
  return run_training(model, data, ns, cfg, seed, nullptr, model.params().list(),
                      cfg.text_dropout, log);
}

std::vector<float> train_lora(UNet& base, LoraAdapter& adapter, const DiffDatasetView& data,
                              const NoiseSchedule& ns, const DiffTrainConfig& cfg,
                              std::uint64_t seed, const TrainLogFn& log) {
  for (const auto& p : base.params().list())
    if (!p->frozen) throw NnError("train_lora: base model must be frozen");
  WeightResolver res = adapter.resolver();
  return run_training(base, data, ns, cfg, seed, &res, adapter.trainables(),
                      /*text_dropout=*/0.f, log);
}

}  // namespace cinelab
