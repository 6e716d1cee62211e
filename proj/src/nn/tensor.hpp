#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/rng.hpp"

namespace cinelab {

struct NnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major float matrices everywhere: rows = items (tokens, pixels, batch
// entries), cols = feature channels.
using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Node;
using Tensor = std::shared_ptr<Node>;

// One vertex of the autodiff tape. `backprop` reads this node's grad and
// accumulates into the parents' grads.
class Node {
 public:
  Mat val;
  Mat grad;  // allocated on demand, same shape as val
  bool requires_grad = false;
  bool trainable = false;  // optimizer updates this tensor (unless frozen)
  bool frozen = false;     // freeze mask: optimizer must leave it bit-identical
  std::string name;
  std::vector<Tensor> parents;
  std::function<void(Node&)> backprop;

  Mat& g() {
    if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    return grad;
  }
  int rows() const { return static_cast<int>(val.rows()); }
  int cols() const { return static_cast<int>(val.cols()); }
};

/// Per-thread switch: with grads disabled, ops do not record the tape
// (inference); concurrent inference threads do not interfere.
bool& grad_enabled();
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
  ~NoGradGuard() { grad_enabled() = prev; }
};

Tensor constant(Mat v);
Tensor parameter(Mat v, std::string name);

// Deterministic initializers.
Mat randn_mat(Rng& rng, int r, int c, float stddev);

// Reverse-mode sweep from `root` (grad seeded with ones). Parameter grads
// accumulate; call zero_grad between optimizer steps.
void backward(const Tensor& root);
void zero_grad(const std::vector<Tensor>& params);

// ---- ops ----------------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);           // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& row);  // row: 1 x C, broadcast
Tensor add_colvec(const Tensor& a, const Tensor& col);  // col: N x 1, broadcast
Tensor mul(const Tensor& a, const Tensor& b);           // hadamard
Tensor scale(const Tensor& a, float s);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);  // tanh approximation
Tensor silu(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a);  // N x C -> N x 1, max-subtracted
Tensor layernorm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta,
                      float eps = 1e-5f);
Tensor l2_normalize_rows(const Tensor& a, float eps = 1e-12f);
Tensor mean_rows(const Tensor& a);  // N x C -> 1 x C
Tensor mean_all(const Tensor& a);  // -> 1 x 1
Tensor sum_all(const Tensor& a);   // -> 1 x 1
Tensor take_diag(const Tensor& a);  // N x N -> N x 1
Tensor gather_rows(const Tensor& a, std::vector<int> idx);  // also permutations
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor row_block(const Tensor& a, int r0, int nr);
Tensor col_block(const Tensor& a, int c0, int nc);

// Unfold n_img stacked images (rows = n_img*H*W, cols = C) into 3x3 (or kxk)
// patches: output rows = n_img*H_out*W_out, cols = C*k*k, zero padding `pad`,
// stride `stride`. Convolution is then a matmul with a (C*k*k) x C_out weight.
Tensor im2col(const Tensor& a, int n_img, int H, int W, int k, int stride, int pad);

}  // namespace cinelab
