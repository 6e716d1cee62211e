#include "diffusion/lora.hpp"

#include <cmath>

namespace cinelab {

LoraAdapter::LoraAdapter(const UNet& unet, std::string category, int rank, int alpha,
                         std::uint64_t init_seed)
    : category_(std::move(category)), rank_(rank), alpha_(alpha) {
  if (rank < 1 || alpha < 1) throw NnError("LoraAdapter: rank and alpha must be positive");
  Rng rng(init_seed);
  const float a_std = 1.f / std::sqrt(static_cast<float>(rank));
  targets_ = unet.attention_targets();
  for (const auto& name : targets_) {
    Tensor base = unet.params().get(name);
    const int d_in = static_cast<int>(base->rows());
    const int d_out = static_cast<int>(base->cols());
    params_.add(name + ".A", randn_mat(rng, rank, d_in, a_std));
    params_.add(name + ".B", Mat::Zero(d_out, rank));
  }
}

LoraAdapter LoraAdapter::merged(const UNet& unet, const std::vector<const LoraAdapter*>& parts,
                                const std::vector<double>& weights) {
  if (parts.empty() || parts.size() != weights.size())
    throw NnError("LoraAdapter::merged: parts/weights mismatch");
  double sum = 0;
  for (double w : weights) sum += w;
  if (std::abs(sum - 1.0) > 1e-6) throw NnError("LoraAdapter::merged: weights must sum to 1");

  LoraAdapter out;
  out.merged_ = true;
  out.targets_ = unet.attention_targets();
  std::string name = "merge(";
  for (size_t i = 0; i < parts.size(); ++i)
    name += (i ? "," : "") + parts[i]->category();
  out.category_ = name + ")";
  std::vector<std::map<std::string, Mat>> part_deltas;
  part_deltas.reserve(parts.size());
  for (const LoraAdapter* p : parts) part_deltas.push_back(p->dense_deltas());
  for (const auto& t : out.targets_) {
    Tensor base = unet.params().get(t);
    Mat delta = Mat::Zero(base->rows(), base->cols());
    for (size_t i = 0; i < parts.size(); ++i) {
      auto it = part_deltas[i].find(t);
      if (it == part_deltas[i].end()) throw NnError("LoraAdapter::merged: missing target " + t);
      if (it->second.rows() != delta.rows() || it->second.cols() != delta.cols())
        throw NnError("LoraAdapter::merged: shape mismatch for " + t);
      delta += static_cast<float>(weights[i]) * it->second;
    }
    out.dense_[t] = std::move(delta);
  }
  return out;
}

std::map<std::string, Mat> LoraAdapter::dense_deltas() const {
  if (merged_) return dense_;
  std::map<std::string, Mat> out;
  const float s = static_cast<float>(alpha_) / static_cast<float>(rank_);
  for (const auto& t : targets_) {
    const Mat& a = params_.get(t + ".A")->val;  // r x d_in
    const Mat& b = params_.get(t + ".B")->val;  // d_out x r
    out[t] = s * (a.transpose() * b.transpose());
  }
  return out;
}

WeightResolver LoraAdapter::resolver() const {
  if (merged_) {
    auto deltas = std::make_shared<std::map<std::string, Mat>>(dense_);
    return [deltas](const std::string& name, const Tensor& base) -> Tensor {
      auto it = deltas->find(name);
      if (it == deltas->end()) return base;
      return add(base, constant(it->second));
    };
  }
  const float s = static_cast<float>(alpha_) / static_cast<float>(rank_);
  return [this, s](const std::string& name, const Tensor& base) -> Tensor {
    if (!params_.has(name + ".A")) return base;
    Tensor a = params_.get(name + ".A");
    Tensor b = params_.get(name + ".B");
    return add(base, scale(matmul(transpose(a), transpose(b)), s));
  };
}

void LoraAdapter::save(const std::string& path) const {
  if (merged_) throw NnError("LoraAdapter::save: merged adapters are not persisted");
  json meta = {{"kind", "lora"}, {"category", category_}, {"rank", rank_}, {"alpha", alpha_}};
  cmdf_write(path, params_.to_cmdf(), meta.dump(2));
}

void LoraAdapter::load(const std::string& path) {
  if (merged_) throw NnError("LoraAdapter::load: merged adapters are not persisted");
  params_.load_cmdf(cmdf_read(path));
}

LoraAdapter load_lora_checkpoint(const UNet& unet, const std::string& path) {
  json meta = load_json(path + ".meta.json");
  LoraAdapter adapter(unet, meta.value("category", std::string("unknown")),
                      meta.value("rank", 4), meta.value("alpha", 4), 0);
  adapter.load(path);
  return adapter;
}

WeightResolver make_dense_resolver(std::shared_ptr<std::map<std::string, Mat>> deltas) {
  return [deltas = std::move(deltas)](const std::string& name, const Tensor& base) -> Tensor {
    auto it = deltas->find(name);
    if (it == deltas->end()) return base;
    return add(base, constant(it->second));
  };
}

}  // namespace cinelab
