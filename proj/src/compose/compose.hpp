#pragma once

#include <functional>
#include <string>
#include <vector>

#include "clip/model.hpp"
#include "diffusion/ddim.hpp"

namespace cinelab {

// Step-indexed adapter schedule: genes[h] picks the adapter for denoising
// step h (h = 0 is the highest-noise step).
struct Schedule {
  std::vector<int> genes;

  void validate(int k) const;
  json to_json() const;
  static Schedule from_json(const json& j);
};

std::uint64_t schedule_hash(const Schedule& s);

// Round-robin: genes[h] = (h / interval) % k.
Schedule switch_schedule(int k, int steps, int interval);

// Element-wise arithmetic mean of guided epsilon volumes.
Mat composite_epsilon(const std::vector<Mat>& eps_list);

struct GAConfig {
  int population = 16;
  int generations = 6;
  double elite_frac = 0.10;
  double p_m = 0.2;  // per-offspring single-gene mutation
  double p_c = 0.5;  // two-point crossover
  int tournament = 3;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static GAConfig from_json(const json& j);
};

struct FitnessReport {
  std::uint64_t schedule_hash = 0;
  double f = 0;
  std::vector<double> per_prompt;
  bool cache_hit = false;
};

// Everything a schedule evaluation needs. `ctx_hash` must identify the model
// checkpoints, adapters, prompts, and sampler settings; it keys the on-disk
// cache together with the schedule hash. `cache_dir` empty disables caching
// (callers typically pass the CINELAB_CACHE environment variable).
struct FitnessContext {
  UNet* base = nullptr;
  std::vector<const LoraAdapter*> adapters;
  ClipModel* camclip = nullptr;
  std::vector<std::string> prompts;
  std::vector<std::uint64_t> prompt_seeds;  // fixed for the whole search
  int steps = 50;
  double guidance = 5.0;
  std::string ctx_hash;
  std::string cache_dir;
};

// F = mean over prompts of cosine(camclip video embedding, text embedding),
// generating with the schedule under each prompt's fixed seed. Deterministic.
FitnessReport evaluate_fitness(const Schedule& s, const FitnessContext& ctx);

// Fitness seam for the GA (the real search wraps evaluate_fitness).
using FitnessFn = std::function<double(const Schedule&)>;
// Whole-generation variant; lets callers evaluate members concurrently.
using BatchFitnessFn = std::function<std::vector<double>(const std::vector<Schedule>&)>;

struct GaGeneration {
  int generation = 0;
  double best_f = 0;       // best within this generation
  double mean_f = 0;
  double best_ever_f = 0;  // running maximum (non-decreasing)
};

struct GaResult {
  Schedule best;
  double best_f = 0;
  std::vector<GaGeneration> history;
};

// Genetic search over length-`steps` schedules across k adapters. Initial
// population: k constant schedules, one round-robin (interval 1), and random
// fills. Elitism + tournament selection + two-point crossover + single-gene
// mutation; stops early after 3 generations without best-F improvement.
GaResult ga_search(const GAConfig& cfg, int steps, int k, const FitnessFn& fitness,
                   const std::function<void(const GaGeneration&)>& on_generation = nullptr);
GaResult ga_search(const GAConfig& cfg, int steps, int k, const BatchFitnessFn& fitness,
                   const std::function<void(const GaGeneration&)>& on_generation = nullptr);

}  // namespace cinelab
