#include "nn/tensor.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace cinelab {

bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

Tensor constant(Mat v) {
  auto t = std::make_shared<Node>();
  t->val = std::move(v);
  return t;
}

Tensor parameter(Mat v, std::string name) {
  auto t = std::make_shared<Node>();
  t->val = std::move(v);
  t->requires_grad = true;
  t->trainable = true;
  t->name = std::move(name);
  return t;
}

Mat randn_mat(Rng& rng, int r, int c, float stddev) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = stddev * static_cast<float>(rng.normal());
  return m;
}

namespace {

Tensor make_op(Mat val, std::vector<Tensor> parents, std::function<void(Node&)> backprop) {
  auto t = std::make_shared<Node>();
  t->val = std::move(val);
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p->requires_grad) {
        t->requires_grad = true;
        break;
      }
    if (t->requires_grad) {
      t->parents = std::move(parents);
      t->backprop = std::move(backprop);
    }
  }
  return t;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a->rows() != b->rows() || a->cols() != b->cols())
    throw NnError(std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const Tensor& root) {
  // Iterative post-order DFS for a topological ordering.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->g().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop(**it);
}

void zero_grad(const std::vector<Tensor>& params) {
  for (const auto& p : params)
    if (p->grad.size() != 0) p->grad.setZero();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a->cols() != b->rows()) throw NnError("matmul: inner dimension mismatch");
  return make_op(a->val * b->val, {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->g().noalias() += n.grad * b->val.transpose();
    if (b->requires_grad) b->g().noalias() += a->val.transpose() * n.grad;
  });
}

Tensor transpose(const Tensor& a) {
  return make_op(a->val.transpose(), {a}, [a](Node& n) { a->g() += n.grad.transpose(); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  return make_op(a->val + b->val, {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->g() += n.grad;
    if (b->requires_grad) b->g() += n.grad;
  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  if (row->rows() != 1 || row->cols() != a->cols()) throw NnError("add_rowvec: bad row shape");
  Mat v = a->val;
  v.rowwise() += Eigen::RowVectorXf(row->val.row(0));
  return make_op(std::move(v), {a, row}, [a, row](Node& n) {
    if (a->requires_grad) a->g() += n.grad;
    if (row->requires_grad) row->g() += n.grad.colwise().sum();
  });
}

Tensor add_colvec(const Tensor& a, const Tensor& col) {
  if (col->cols() != 1 || col->rows() != a->rows()) throw NnError("add_colvec: bad col shape");
  Mat v = a->val;
  v.colwise() += Eigen::VectorXf(col->val.col(0));
  return make_op(std::move(v), {a, col}, [a, col](Node& n) {
    if (a->requires_grad) a->g() += n.grad;
    if (col->requires_grad) col->g() += n.grad.rowwise().sum();
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  return make_op(a->val.cwiseProduct(b->val), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->g() += n.grad.cwiseProduct(b->val);
    if (b->requires_grad) b->g() += n.grad.cwiseProduct(a->val);
  });
}

Tensor scale(const Tensor& a, float s) {
  return make_op(a->val * s, {a}, [a, s](Node& n) { a->g() += n.grad * s; });
}

Tensor relu(const Tensor& a) {
  return make_op(a->val.cwiseMax(0.f), {a}, [a](Node& n) {
    a->g() += n.grad.cwiseProduct((a->val.array() > 0.f).cast<float>().matrix());
  });
}

namespace {
constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)
using RowArr = Eigen::Array<float, 1, Eigen::Dynamic>;
}

Tensor gelu(const Tensor& a) {
  const float kC = kGeluC;
  Mat u = (kC * (a->val.array() + 0.044715f * a->val.array().cube())).matrix();
  Mat t = u.array().tanh().matrix();
  Mat y = (0.5f * a->val.array() * (1.f + t.array())).matrix();
  return make_op(std::move(y), {a}, [a, t = std::move(t)](Node& n) {
    auto x = a->val.array();
    auto dt = (1.f - t.array().square()) * kGeluC * (1.f + 3.f * 0.044715f * x.square());
    a->g() += n.grad.cwiseProduct((0.5f * (1.f + t.array()) + 0.5f * x * dt).matrix());
  });
}

Tensor silu(const Tensor& a) {
  Mat s = (1.f / (1.f + (-a->val.array()).exp())).matrix();
  Mat y = a->val.cwiseProduct(s);  // computed before the lambda moves `s`
  return make_op(std::move(y), {a}, [a, s = std::move(s)](Node& n) {
    auto d = s.array() * (1.f + a->val.array() * (1.f - s.array()));
    a->g() += n.grad.cwiseProduct(d.matrix());
  });
}

Tensor tanh_t(const Tensor& a) {
  Mat t = a->val.array().tanh().matrix();
  return make_op(t, {a}, [a](Node& n) {
    a->g() += n.grad.cwiseProduct((1.f - n.val.array().square()).matrix());
  });
}

Tensor sigmoid(const Tensor& a) {
  Mat s = (1.f / (1.f + (-a->val.array()).exp())).matrix();
  return make_op(s, {a}, [a](Node& n) {
    a->g() += n.grad.cwiseProduct((n.val.array() * (1.f - n.val.array())).matrix());
  });
}

Tensor softmax_rows(const Tensor& a) {
  Mat y(a->rows(), a->cols());
  for (int i = 0; i < a->rows(); ++i) {
    auto row = a->val.row(i).array();
    RowArr e = (row - row.maxCoeff()).exp();
    y.row(i) = (e / e.sum()).matrix();
  }
  return make_op(std::move(y), {a}, [a](Node& n) {
    for (int i = 0; i < n.val.rows(); ++i) {
      auto s = n.val.row(i).array();
      auto g = n.grad.row(i).array();
      float dot = (g * s).sum();
      a->g().row(i) += (s * (g - dot)).matrix();
    }
  });
}

Tensor logsumexp_rows(const Tensor& a) {
  Mat y(a->rows(), 1);
  for (int i = 0; i < a->rows(); ++i) {
    auto row = a->val.row(i).array();
    float m = row.maxCoeff();
    y(i, 0) = m + std::log((row - m).exp().sum());
  }
  return make_op(std::move(y), {a}, [a](Node& n) {
    for (int i = 0; i < a->rows(); ++i) {
      auto row = a->val.row(i).array();
      float m = row.maxCoeff();
      RowArr e = (row - m).exp();
      a->g().row(i) += (n.grad(i, 0) * e / e.sum()).matrix();
    }
  });
}

Tensor layernorm_rows(const Tensor& a, const Tensor& gamma, const Tensor& beta, float eps) {
  const int C = a->cols();
  if (gamma->rows() != 1 || gamma->cols() != C || beta->rows() != 1 || beta->cols() != C)
    throw NnError("layernorm_rows: gamma/beta must be 1 x C");
  Mat xhat(a->rows(), C);
  Eigen::ArrayXf inv_std(a->rows());
  for (int i = 0; i < a->rows(); ++i) {
    auto row = a->val.row(i).array();
    float mu = row.mean();
    float var = (row - mu).square().mean();
    inv_std(i) = 1.f / std::sqrt(var + eps);
    xhat.row(i) = ((row - mu) * inv_std(i)).matrix();
  }
  Mat y = xhat;
  y.array().rowwise() *= gamma->val.row(0).array();
  y.array().rowwise() += beta->val.row(0).array();
  return make_op(std::move(y), {a, gamma, beta},
                 [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                   if (gamma->requires_grad)
                     gamma->g() += n.grad.cwiseProduct(xhat).colwise().sum();
                   if (beta->requires_grad) beta->g() += n.grad.colwise().sum();
                   if (!a->requires_grad) return;
                   for (int i = 0; i < a->rows(); ++i) {
                     RowArr gy = n.grad.row(i).array() * gamma->val.row(0).array();
                     auto xh = xhat.row(i).array();
                     float m1 = gy.mean(), m2 = (gy * xh).mean();
                     a->g().row(i) += (inv_std(i) * (gy - m1 - xh * m2)).matrix();
                   }
                 });
}

Tensor l2_normalize_rows(const Tensor& a, float eps) {
  Mat y(a->rows(), a->cols());
  Eigen::ArrayXf inv_norm(a->rows());
  for (int i = 0; i < a->rows(); ++i) {
    float norm = std::sqrt(a->val.row(i).squaredNorm() + eps);
    inv_norm(i) = 1.f / norm;
    y.row(i) = a->val.row(i) * inv_norm(i);
  }
  return make_op(std::move(y), {a}, [a, inv_norm = std::move(inv_norm)](Node& n) {
    for (int i = 0; i < a->rows(); ++i) {
      auto yi = n.val.row(i);
      float dot = n.grad.row(i).dot(yi);
      a->g().row(i) += (n.grad.row(i) - dot * yi) * inv_norm(i);
    }
  });
}

Tensor mean_rows(const Tensor& a) {
  Mat y = a->val.colwise().mean();
  const float inv = 1.f / static_cast<float>(a->rows());
  return make_op(std::move(y), {a}, [a, inv](Node& n) {
    a->g() += (inv * Eigen::VectorXf::Ones(a->rows())) * n.grad.row(0);
  });
}

Tensor mean_all(const Tensor& a) {
  Mat y(1, 1);
  y(0, 0) = a->val.mean();
  const float inv = 1.f / static_cast<float>(a->val.size());
  return make_op(std::move(y), {a},
                 [a, inv](Node& n) { a->g().array() += inv * n.grad(0, 0); });
}

Tensor sum_all(const Tensor& a) {
  Mat y(1, 1);
  y(0, 0) = a->val.sum();
  return make_op(std::move(y), {a}, [a](Node& n) { a->g().array() += n.grad(0, 0); });
}

Tensor take_diag(const Tensor& a) {
  if (a->rows() != a->cols()) throw NnError("take_diag: square matrix required");
  Mat y(a->rows(), 1);
  for (int i = 0; i < a->rows(); ++i) y(i, 0) = a->val(i, i);
  return make_op(std::move(y), {a}, [a](Node& n) {
    for (int i = 0; i < a->rows(); ++i) a->g()(i, i) += n.grad(i, 0);
  });
}

Tensor gather_rows(const Tensor& a, std::vector<int> idx) {
  Mat y(static_cast<int>(idx.size()), a->cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= a->rows()) throw NnError("gather_rows: index out of range");
    y.row(static_cast<int>(i)) = a->val.row(idx[i]);
  }
  return make_op(std::move(y), {a}, [a, idx = std::move(idx)](Node& n) {
    for (size_t i = 0; i < idx.size(); ++i)
      a->g().row(idx[i]) += n.grad.row(static_cast<int>(i));
  });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
  if (a->cols() != b->cols()) throw NnError("concat_rows: column mismatch");
  Mat y(a->rows() + b->rows(), a->cols());
  y.topRows(a->rows()) = a->val;
  y.bottomRows(b->rows()) = b->val;
  return make_op(std::move(y), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->g() += n.grad.topRows(a->rows());
    if (b->requires_grad) b->g() += n.grad.bottomRows(b->rows());
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a->rows() != b->rows()) throw NnError("concat_cols: row mismatch");
  Mat y(a->rows(), a->cols() + b->cols());
  y.leftCols(a->cols()) = a->val;
  y.rightCols(b->cols()) = b->val;
  return make_op(std::move(y), {a, b}, [a, b](Node& n) {
    if (a->requires_grad) a->g() += n.grad.leftCols(a->cols());
    if (b->requires_grad) b->g() += n.grad.rightCols(b->cols());
  });
}

Tensor row_block(const Tensor& a, int r0, int nr) {
  if (r0 < 0 || r0 + nr > a->rows()) throw NnError("row_block: out of range");
  return make_op(a->val.middleRows(r0, nr), {a}, [a, r0, nr](Node& n) {
    a->g().middleRows(r0, nr) += n.grad;
  });
}

Tensor col_block(const Tensor& a, int c0, int nc) {
  if (c0 < 0 || c0 + nc > a->cols()) throw NnError("col_block: out of range");
  return make_op(a->val.middleCols(c0, nc), {a}, [a, c0, nc](Node& n) {
    a->g().middleCols(c0, nc) += n.grad;
  });
}

Tensor im2col(const Tensor& a, int n_img, int H, int W, int k, int stride, int pad) {
  const int C = a->cols();
  if (a->rows() != n_img * H * W) throw NnError("im2col: row count != n_img*H*W");
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Mat y = Mat::Zero(static_cast<long>(n_img) * Ho * Wo, C * k * k);
  for (int n = 0; n < n_img; ++n)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        long orow = (static_cast<long>(n) * Ho + oy) * Wo + ox;
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            long irow = (static_cast<long>(n) * H + iy) * W + ix;
            y.block(orow, (ky * k + kx) * C, 1, C) = a->val.row(irow);
          }
        }
      }
  return make_op(std::move(y), {a}, [a, n_img, H, W, k, stride, pad, C](Node& n2) {
    const int Ho = (H + 2 * pad - k) / stride + 1;
    const int Wo = (W + 2 * pad - k) / stride + 1;
    for (int n = 0; n < n_img; ++n)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          long orow = (static_cast<long>(n) * Ho + oy) * Wo + ox;
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k; ++kx) {
              int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= W) continue;
              long irow = (static_cast<long>(n) * H + iy) * W + ix;
              a->g().row(irow) += n2.grad.block(orow, (ky * k + kx) * C, 1, C);
            }
          }
        }
  });
}

}  // namespace cinelab
