#include "compose/compose.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

namespace cinelab {

void Schedule::validate(int k) const {
  if (genes.empty()) throw NnError("Schedule: empty gene array");
  for (int g : genes)
    if (g < 0 || g >= k) throw NnError("Schedule: gene out of range");
}

json Schedule::to_json() const { return {{"genes", genes}, {"H", genes.size()}}; }

Schedule Schedule::from_json(const json& j) {
  Schedule s;
  s.genes = j.at("genes").get<std::vector<int>>();
  if (j.contains("H") && j.at("H").get<size_t>() != s.genes.size())
    throw NnError("Schedule: H does not match genes length");
  return s;
}

std::uint64_t schedule_hash(const Schedule& s) {
  return fnv1a(s.genes.data(), s.genes.size() * sizeof(int));
}

Schedule switch_schedule(int k, int steps, int interval) {
  if (k < 1 || steps < 1 || interval < 1) throw NnError("switch_schedule: bad arguments");
  Schedule s;
  s.genes.resize(steps);
  for (int h = 0; h < steps; ++h) s.genes[h] = (h / interval) % k;
  return s;
}

Mat composite_epsilon(const std::vector<Mat>& eps_list) {
  if (eps_list.empty()) throw NnError("composite_epsilon: empty list");
  Mat out = eps_list[0];
  for (size_t i = 1; i < eps_list.size(); ++i) {
    if (eps_list[i].rows() != out.rows() || eps_list[i].cols() != out.cols())
      throw NnError("composite_epsilon: shape mismatch");
    out += eps_list[i];
  }
  return out / static_cast<float>(eps_list.size());
}

void GAConfig::validate() const {
  if (population < 2) throw NnError("GAConfig: population must be >= 2");
  if (generations < 1) throw NnError("GAConfig: generations must be >= 1");
  if (elite_frac <= 0 || elite_frac >= 1) throw NnError("GAConfig: elite_frac in (0,1)");
  if (p_m < 0 || p_m > 1 || p_c < 0 || p_c > 1) throw NnError("GAConfig: p_m/p_c in [0,1]");
  if (tournament < 1) throw NnError("GAConfig: tournament must be >= 1");
}

json GAConfig::to_json() const {
  return {{"population", population}, {"generations", generations},
          {"elite_frac", elite_frac}, {"p_m", p_m},
          {"p_c", p_c},               {"tournament", tournament},
          {"seed", seed}};
}

GAConfig GAConfig::from_json(const json& j) {
  GAConfig c;
  c.population = j.value("population", c.population);
  c.generations = j.value("generations", c.generations);
  c.elite_frac = j.value("elite_frac", c.elite_frac);
  c.p_m = j.value("p_m", c.p_m);
  c.p_c = j.value("p_c", c.p_c);
  c.tournament = j.value("tournament", c.tournament);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

std::string cache_path(const FitnessContext& ctx, std::uint64_t shash) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(shash));
  return ctx.cache_dir + "/fit-" + ctx.ctx_hash + "-" + buf + ".json";
}

}  // namespace

FitnessReport evaluate_fitness(const Schedule& s, const FitnessContext& ctx) {
  if (!ctx.base || !ctx.camclip) throw NnError("evaluate_fitness: missing models");
  if (ctx.prompts.empty() || ctx.prompts.size() != ctx.prompt_seeds.size())
    throw NnError("evaluate_fitness: prompts/seeds mismatch");
  s.validate(static_cast<int>(ctx.adapters.size()));
  if (static_cast<int>(s.genes.size()) != ctx.steps)
    throw NnError("evaluate_fitness: schedule length must equal step count");

  FitnessReport report;
  report.schedule_hash = schedule_hash(s);

  if (!ctx.cache_dir.empty()) {
    const std::string path = cache_path(ctx, report.schedule_hash);
    if (std::filesystem::exists(path)) {
      json j = load_json(path);
      report.f = j.at("f").get<double>();
      report.per_prompt = j.at("per_prompt").get<std::vector<double>>();
      report.cache_hit = true;
      return report;
    }
  }

  for (size_t i = 0; i < ctx.prompts.size(); ++i) {
    GenerationRequest req;
    req.prompt = ctx.prompts[i];
    req.seed = ctx.prompt_seeds[i];
    req.steps = ctx.steps;
    req.guidance = ctx.guidance;
    req.mode = AdapterMode::kSchedule;
    req.genes = s.genes;
    Mat volume;
    try {
      volume = ddim_generate(*ctx.base, NoiseSchedule(ctx.base->config().t_train), req,
                             ctx.adapters);
    } catch (const std::exception& e) {
      throw NnError("evaluate_fitness: generation failed for prompt \"" + ctx.prompts[i] +
                    "\": " + e.what());
    }
    VideoClip clip = volume_to_clip(volume, ctx.base->config().frames, ctx.base->config().size);
    Mat v = ctx.camclip->embed_video(clip);
    Mat t = ctx.camclip->embed_text(ctx.prompts[i]);
    report.per_prompt.push_back(cosine_sim(v, t));
  }
  double sum = 0;
  for (double v : report.per_prompt) sum += v;
  report.f = sum / static_cast<double>(report.per_prompt.size());

  if (!ctx.cache_dir.empty()) {
    std::filesystem::create_directories(ctx.cache_dir);
    save_json(cache_path(ctx, report.schedule_hash),
              {{"f", report.f}, {"per_prompt", report.per_prompt}});
  }
  return report;
}

GaResult ga_search(const GAConfig& cfg, int steps, int k, const FitnessFn& fitness,
                   const std::function<void(const GaGeneration&)>& on_generation) {
  BatchFitnessFn batch = [&fitness](const std::vector<Schedule>& pop) {
    std::vector<double> f;
    f.reserve(pop.size());
    for (const Schedule& s : pop) f.push_back(fitness(s));
    return f;
  };
  return ga_search(cfg, steps, k, batch, on_generation);
}

GaResult ga_search(const GAConfig& cfg, int steps, int k, const BatchFitnessFn& fitness,
                   const std::function<void(const GaGeneration&)>& on_generation) {
  cfg.validate();
  if (k < 1) throw NnError("ga_search: need at least one adapter");
  if (steps < 1) throw NnError("ga_search: steps must be >= 1");
  const int n = cfg.population;
  if (n < k + 1) throw NnError("ga_search: population smaller than baseline seeds");
  Rng rng(cfg.seed);

  // Initial population: k constants, one round-robin, random fills.
  std::vector<Schedule> pop;
  pop.reserve(n);
  for (int a = 0; a < k; ++a) {
    Schedule s;
    s.genes.assign(steps, a);
    pop.push_back(std::move(s));
  }
  pop.push_back(switch_schedule(k, steps, 1));
  while (static_cast<int>(pop.size()) < n) {
    Schedule s;
    s.genes.resize(steps);
    for (int h = 0; h < steps; ++h)
      s.genes[h] = static_cast<int>(rng.uniform_int(0, k - 1));
    pop.push_back(std::move(s));
  }
  pop.resize(n);

  const int n_elite = static_cast<int>(std::ceil(cfg.elite_frac * n));
  GaResult result;
  double best_ever = -std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int gen = 0; gen < cfg.generations; ++gen) {
    for (const Schedule& s : pop) s.validate(k);
    std::vector<double> f = fitness(pop);
    if (static_cast<int>(f.size()) != n)
      throw NnError("ga_search: fitness returned wrong count");
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] > f[b]; });

    const double gen_best = f[order[0]];
    double mean = 0;
    for (double v : f) mean += v;
    mean /= n;
    if (gen_best > best_ever) {
      best_ever = gen_best;
      result.best = pop[order[0]];
      result.best_f = gen_best;
      stale = 0;
    } else {
      ++stale;
    }
    GaGeneration rec{gen, gen_best, mean, best_ever};
    result.history.push_back(rec);
    if (on_generation) on_generation(rec);
    if (stale >= 3 || gen + 1 == cfg.generations) break;

    // Next generation: elites unchanged, remainder via tournament parents.
    std::vector<Schedule> next;
    next.reserve(n);
    for (int e = 0; e < n_elite; ++e) next.push_back(pop[order[e]]);
    auto tournament_pick = [&]() -> const Schedule& {
      int best = static_cast<int>(rng.uniform_int(0, n - 1));
      for (int t = 1; t < cfg.tournament; ++t) {
        int c = static_cast<int>(rng.uniform_int(0, n - 1));
        if (f[c] > f[best]) best = c;
      }
      return pop[best];
    };
    while (static_cast<int>(next.size()) < n) {
      Schedule o1 = tournament_pick();
      Schedule o2 = tournament_pick();
      if (rng.bernoulli(cfg.p_c)) {
        int i = static_cast<int>(rng.uniform_int(0, steps));
        int j = static_cast<int>(rng.uniform_int(0, steps));
        if (i > j) std::swap(i, j);
        for (int h = i; h < j; ++h) std::swap(o1.genes[h], o2.genes[h]);
      }
      for (Schedule* o : {&o1, &o2})
        if (rng.bernoulli(cfg.p_m)) {
          const int h = static_cast<int>(rng.uniform_int(0, steps - 1));
          o->genes[h] = static_cast<int>(rng.uniform_int(0, k - 1));
        }
      next.push_back(std::move(o1));
      if (static_cast<int>(next.size()) < n) next.push_back(std::move(o2));
    }
    pop = std::move(next);
  }
  return result;
}

}  // namespace cinelab
