#include "diffusion/ddim.hpp"

#include <cmath>

namespace cinelab {

std::string adapter_mode_name(AdapterMode m) {
  switch (m) {
    case AdapterMode::kNone: return "none";
    case AdapterMode::kSingle: return "single";
    case AdapterMode::kSchedule: return "schedule";
    case AdapterMode::kMerge: return "merge";
    case AdapterMode::kComposite: return "composite";
  }
  throw NnError("adapter_mode_name: bad mode");
}

AdapterMode adapter_mode_from_name(const std::string& s) {
  if (s == "none") return AdapterMode::kNone;
  if (s == "single") return AdapterMode::kSingle;
  if (s == "schedule") return AdapterMode::kSchedule;
  if (s == "merge") return AdapterMode::kMerge;
  if (s == "composite") return AdapterMode::kComposite;
  throw NnError("adapter_mode_from_name: unknown mode " + s);
}

std::vector<int> ddim_timesteps(int t_train, int steps) {
  if (steps < 1 || steps > t_train) throw NnError("ddim_timesteps: bad step count");
  std::vector<int> ts(steps);
  for (int i = 0; i < steps; ++i)
    ts[i] = static_cast<int>(std::llround(static_cast<double>(i + 1) * t_train / steps));
  return ts;
}

namespace {

const std::vector<int> kUncondTokens = {Vocab::kBos, Vocab::kEos};

}  // namespace

Mat ddim_generate(UNet& model, const NoiseSchedule& ns, const GenerationRequest& req,
                  const std::vector<const LoraAdapter*>& adapters) {
  NoGradGuard no_grad;
  const UNetConfig& cfg = model.config();
  Vocab vocab;
  const std::vector<int> tokens = vocab.encode(req.prompt);

  // Validate the adapter configuration and materialize dense resolvers once.
  std::vector<WeightResolver> resolvers;
  switch (req.mode) {
    case AdapterMode::kNone:
      if (!adapters.empty()) throw NnError("ddim_generate: mode none takes no adapters");
      break;
    case AdapterMode::kSingle:
      if (adapters.size() != 1) throw NnError("ddim_generate: single needs one adapter");
      break;
    case AdapterMode::kSchedule:
      if (adapters.empty()) throw NnError("ddim_generate: schedule needs adapters");
      if (static_cast<int>(req.genes.size()) != req.steps)
        throw NnError("ddim_generate: genes length must equal steps");
      for (int g : req.genes)
        if (g < 0 || g >= static_cast<int>(adapters.size()))
          throw NnError("ddim_generate: gene out of range");
      break;
    case AdapterMode::kMerge:
      if (adapters.empty() || adapters.size() != req.merge_weights.size())
        throw NnError("ddim_generate: merge needs one weight per adapter");
      break;
    case AdapterMode::kComposite:
      if (adapters.empty()) throw NnError("ddim_generate: composite needs adapters");
      break;
  }

  if (req.mode == AdapterMode::kMerge) {
    LoraAdapter merged = LoraAdapter::merged(model, adapters, req.merge_weights);
    auto deltas = std::make_shared<std::map<std::string, Mat>>(merged.dense_deltas());
    resolvers.push_back(make_dense_resolver(std::move(deltas)));
  } else {
    for (const LoraAdapter* a : adapters) {
      auto deltas = std::make_shared<std::map<std::string, Mat>>(a->dense_deltas());
      resolvers.push_back(make_dense_resolver(std::move(deltas)));
    }
  }

  const long rows = static_cast<long>(cfg.frames) * cfg.size * cfg.size;
  Rng rng(req.seed);
  Mat x(rows, 3);
  for (long r = 0; r < rows; ++r)
    for (int c = 0; c < 3; ++c) x(r, c) = static_cast<float>(rng.normal());

  auto guided_eps = [&](const Mat& xt, int t, const WeightResolver* res) {
    Mat ec = model.forward(constant(xt), t, tokens, res)->val;
    Mat eu = model.forward(constant(xt), t, kUncondTokens, res)->val;
    return cfg_epsilon(ec, eu, req.guidance);
  };

  const std::vector<int> ts = ddim_timesteps(ns.t_train, req.steps);
  for (int i = req.steps - 1; i >= 0; --i) {
    const int t = ts[i];
    const int t_prev = i > 0 ? ts[i - 1] : 0;
    Mat eps;
    switch (req.mode) {
      case AdapterMode::kNone:
        eps = guided_eps(x, t, nullptr);
        break;
      case AdapterMode::kSingle:
      case AdapterMode::kMerge:
        eps = guided_eps(x, t, &resolvers[0]);
        break;
      case AdapterMode::kSchedule:
        eps = guided_eps(x, t, &resolvers[static_cast<size_t>(req.genes[req.steps - 1 - i])]);
        break;
      case AdapterMode::kComposite: {
        eps = Mat::Zero(rows, 3);
        for (auto& res : resolvers) eps += guided_eps(x, t, &res);
        eps /= static_cast<float>(resolvers.size());
        break;
      }
    }
    const double ab_t = ns.alpha_bar_at(t);
    const double ab_p = ns.alpha_bar_at(t_prev);
    Mat x0 = (x - static_cast<float>(std::sqrt(1.0 - ab_t)) * eps) /
             static_cast<float>(std::sqrt(ab_t));
    x0 = x0.cwiseMax(-1.f).cwiseMin(1.f);
    x = static_cast<float>(std::sqrt(ab_p)) * x0 +
        static_cast<float>(std::sqrt(1.0 - ab_p)) * eps;
  }
  return x;
}

}  // namespace cinelab
