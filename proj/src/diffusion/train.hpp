#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clip/vocab.hpp"
#include "core/image.hpp"
#include "diffusion/lora.hpp"
#include "diffusion/schedule.hpp"
#include "diffusion/unet.hpp"

namespace cinelab {

// Flattens a clip into the U-Net volume layout: frames subsampled with
// `stride` (first `frames` of them), resized to size x size, scaled to [-1,1].
// Rows are (frame, y, x)-major; columns are RGB.
Mat clip_to_volume(const VideoClip& clip, int frames, int size, int stride);

VideoClip volume_to_clip(const Mat& volume, int frames, int size);

// In-memory diffusion training set: one volume + token sequence per clip.
struct DiffDatasetView {
  std::vector<Mat> volumes;
  std::vector<std::vector<int>> tokens;
  std::vector<std::string> categories;  // main cinematic language per clip

  // category filter: keep only clips whose main cinematic language matches.
  static DiffDatasetView load(const std::string& root, const std::string& split,
                              const UNetConfig& cfg, int stride,
                              const std::optional<std::string>& category = std::nullopt);
};

struct DiffTrainConfig {
  int epochs = 30;
  int batch = 4;
  float lr = 1e-4f;
  float weight_decay = 0.01f;
  float text_dropout = 0.1f;

  json to_json() const;
  static DiffTrainConfig from_json(const json& j);
};

using TrainLogFn = std::function<void(const json&)>;

// Epsilon-MSE training of the base model. Deterministic in (model init, data
// order, seed). Returns the per-epoch mean losses.
std::vector<float> train_diffusion(UNet& model, const DiffDatasetView& data,
                                   const NoiseSchedule& ns, const DiffTrainConfig& cfg,
                                   std::uint64_t seed, const TrainLogFn& log = nullptr);

// Same objective, but only the adapter parameters receive gradients; the base
// model must be frozen by the caller. No text dropout (adapters are sampled
// with guidance against the base unconditional branch).
std::vector<float> train_lora(UNet& base, LoraAdapter& adapter, const DiffDatasetView& data,
                              const NoiseSchedule& ns, const DiffTrainConfig& cfg,
                              std::uint64_t seed, const TrainLogFn& log = nullptr);

}  // namespace cinelab
