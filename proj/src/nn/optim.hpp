#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/cmdf.hpp"
#include "nn/tensor.hpp"

namespace cinelab {

// Named parameter registry; insertion order fixes the checkpoint layout.
class ParamStore {
 public:
  Tensor add(const std::string& name, Mat v);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }
  const std::vector<Tensor>& list() const { return list_; }

  std::vector<CmdfTensor> to_cmdf() const;
  // Shapes and names must match exactly; values are overwritten bitwise.
  void load_cmdf(const std::vector<CmdfTensor>& tensors);

 private:
  std::vector<Tensor> list_;
  std::map<std::string, Tensor> by_name_;
};

// AdamW with decoupled weight decay. Parameters with frozen == true are
// skipped entirely (bit-identical across any number of steps). Parameters
// whose name ends in ".b" / ".beta" / ".gamma" or that are 1 x C vectors are
// still decayed unless wd-exempt names are supplied.
class AdamW {
 public:
  AdamW(std::vector<Tensor> params, float weight_decay);
  void step(float lr);

  float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;

 private:
  std::vector<Tensor> params_;
  std::vector<Mat> m_, v_;
  float weight_decay_;
  long t_ = 0;
};

// Linear warmup over the first `warmup_frac` of steps, then cosine decay from
// base_lr to final_lr.
float warmup_cosine_lr(long step, long total_steps, float base_lr, float warmup_frac,
                       float final_lr);

}  // namespace cinelab
