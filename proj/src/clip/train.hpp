#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "clip/model.hpp"
#include "core/jsonio.hpp"

namespace cinelab {

// A split loaded into memory with frames already subsampled to N per clip.
struct ClipDatasetView {
  std::vector<VideoClip> clips;      // each N frames
  std::vector<std::string> captions;  // cinematic captions, unique per clip

  static ClipDatasetView load(const std::string& root, const std::string& split, int n_frames);
};

// Runs shuffled-batch InfoNCE epochs; returns the per-epoch log
// [{epoch, mean_loss, lr}]. Writes each record as a JSON line to `log` when
// given. Deterministic given (model init, cfg, seed).
std::vector<json> train_clip(ClipModel& model, const ClipDatasetView& data,
                             const ClipConfig& cfg, std::uint64_t seed,
                             std::ostream* log = nullptr);

// Full-split retrieval: rank all captions per video under cosine similarity.
double eval_recall_at_1(ClipModel& model, const ClipDatasetView& data);

// Table 5 analog: trains one model per aggregator kind on identical data and
// seed, and reports R@1 per kind, sorted descending.
json aggregator_ablation(const ClipDatasetView& train_data, const ClipDatasetView& eval_data,
                         ClipConfig base_cfg, std::uint64_t seed,
                         const std::vector<std::string>& kinds, std::ostream* log = nullptr);

}  // namespace cinelab
