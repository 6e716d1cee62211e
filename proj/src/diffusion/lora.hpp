#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "diffusion/unet.hpp"

namespace cinelab {

// Low-rank adapter over the U-Net attention projections. Weights follow the
// conventional orientation (A: r x d_in, B: d_out x r); in our x*W layout the
// effective weight is W + (alpha/r) * A^T B^T. B starts at zero, so a fresh
// adapter is an exact identity.
class LoraAdapter {
 public:
  // Fresh trainable adapter covering every attention projection of `unet`.
  LoraAdapter(const UNet& unet, std::string category, int rank, int alpha,
              std::uint64_t init_seed);

  // Dense adapter from a weighted combination of low-rank adapters. Weights
  // must sum to 1 within 1e-6.
  static LoraAdapter merged(const UNet& unet, const std::vector<const LoraAdapter*>& parts,
                            const std::vector<double>& weights);

  const std::string& category() const { return category_; }
  int rank() const { return rank_; }
  int alpha() const { return alpha_; }
  bool is_merged() const { return merged_; }

  // Dense delta per target in the x*W layout (d_in x d_out).
  std::map<std::string, Mat> dense_deltas() const;

  // Graph-building resolver (differentiable through A and B); use while
  // training the adapter.
  WeightResolver resolver() const;

  std::vector<Tensor> trainables() const { return params_.list(); }

  void save(const std::string& path) const;
  // Counterpart of save; the adapter must have been constructed against the
  // same U-Net (shapes and target names are checked).
  void load(const std::string& path);

 private:
  LoraAdapter() = default;

  std::string category_;
  int rank_ = 4, alpha_ = 4;
  bool merged_ = false;
  std::vector<std::string> targets_;
  ParamStore params_;                 // "<target>.A" / "<target>.B" (low-rank)
  std::map<std::string, Mat> dense_;  // merged form
};

// Constant-weight resolver for sampling: effective weights are materialized
// once so repeated denoising steps reuse them.
WeightResolver make_dense_resolver(std::shared_ptr<std::map<std::string, Mat>> deltas);

// Reconstructs an adapter from a checkpoint whose sidecar records category,
// rank, and alpha; the base U-Net supplies target names and shapes.
LoraAdapter load_lora_checkpoint(const UNet& unet, const std::string& path);

}  // namespace cinelab
