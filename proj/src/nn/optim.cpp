#include "nn/optim.hpp"

#include <cmath>

namespace cinelab {

Tensor ParamStore::add(const std::string& name, Mat v) {
  if (by_name_.count(name)) throw NnError("duplicate parameter name: " + name);
  Tensor t = parameter(std::move(v), name);
  list_.push_back(t);
  by_name_[name] = t;
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw NnError("unknown parameter: " + name);
  return it->second;
}

std::vector<CmdfTensor> ParamStore::to_cmdf() const {
  std::vector<CmdfTensor> out;
  out.reserve(list_.size());
  for (const auto& p : list_) {
    CmdfTensor t;
    t.name = p->name;
    t.dims = {static_cast<std::uint32_t>(p->rows()), static_cast<std::uint32_t>(p->cols())};
    t.data.assign(p->val.data(), p->val.data() + p->val.size());
    out.push_back(std::move(t));
  }
  return out;
}

void ParamStore::load_cmdf(const std::vector<CmdfTensor>& tensors) {
  if (tensors.size() != list_.size()) throw NnError("checkpoint tensor count mismatch");
  for (const auto& t : tensors) {
    Tensor p = get(t.name);
    if (t.dims.size() != 2 || static_cast<int>(t.dims[0]) != p->rows() ||
        static_cast<int>(t.dims[1]) != p->cols())
      throw NnError("checkpoint shape mismatch for " + t.name);
    std::copy(t.data.begin(), t.data.end(), p->val.data());
  }
}

AdamW::AdamW(std::vector<Tensor> params, float weight_decay)
    : params_(std::move(params)), weight_decay_(weight_decay) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p->rows(), p->cols()));
    v_.push_back(Mat::Zero(p->rows(), p->cols()));
  }
}

void AdamW::step(float lr) {
  ++t_;
  const float bc1 = 1.f - std::pow(beta1, static_cast<float>(t_));
  const float bc2 = 1.f - std::pow(beta2, static_cast<float>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Node& p = *params_[i];
    if (p.frozen || p.grad.size() == 0) continue;
    m_[i] = beta1 * m_[i] + (1.f - beta1) * p.grad;
    v_[i] = beta2 * v_[i] + (1.f - beta2) * p.grad.cwiseProduct(p.grad);
    auto mhat = m_[i].array() / bc1;
    auto vhat = v_[i].array() / bc2;
    // Decoupled weight decay (AdamW): decay applied directly to weights.
    p.val.array() -= lr * (mhat / (vhat.sqrt() + eps) + weight_decay_ * p.val.array());
  }
}

float warmup_cosine_lr(long step, long total_steps, float base_lr, float warmup_frac,
                       float final_lr) {
  if (total_steps <= 0) return base_lr;
  const long warmup = std::max<long>(1, static_cast<long>(warmup_frac * total_steps));
  if (step < warmup) return base_lr * static_cast<float>(step + 1) / warmup;
  const float t = static_cast<float>(step - warmup) /
                  std::max<long>(1, total_steps - warmup);
  const float cosine = 0.5f * (1.f + std::cos(3.14159265358979323846f * t));
  return final_lr + (base_lr - final_lr) * cosine;
}

}  // namespace cinelab
