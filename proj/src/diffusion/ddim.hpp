#pragma once

#include <string>
#include <vector>

#include "diffusion/lora.hpp"
#include "diffusion/schedule.hpp"
#include "diffusion/train.hpp"

namespace cinelab {

enum class AdapterMode { kNone, kSingle, kSchedule, kMerge, kComposite };

std::string adapter_mode_name(AdapterMode m);
AdapterMode adapter_mode_from_name(const std::string& s);

struct GenerationRequest {
  std::string prompt;
  std::uint64_t seed = 0;
  int steps = 50;         // denoising steps H
  double guidance = 5.0;  // CFG weight w
  AdapterMode mode = AdapterMode::kNone;
  // kSchedule: genes[h] indexes the adapter used at denoising step h, where
  // h = 0 is the first (highest-noise) step; genes.size() == steps.
  std::vector<int> genes;
  // kMerge: one weight per adapter, summing to 1.
  std::vector<double> merge_weights;
};

// Sampling timesteps ts[i] = round((i+1) * T / H), ascending; the sampler
// visits them in descending order down to t = 0.
std::vector<int> ddim_timesteps(int t_train, int steps);

// Deterministic DDIM (eta = 0) with classifier-free guidance and x0 clipping
// to [-1, 1]. The only randomness is the seed-derived initial noise. Returns
// the generated volume in [-1, 1] (convert with volume_to_clip).
Mat ddim_generate(UNet& model, const NoiseSchedule& ns, const GenerationRequest& req,
                  const std::vector<const LoraAdapter*>& adapters = {});

}  // namespace cinelab
