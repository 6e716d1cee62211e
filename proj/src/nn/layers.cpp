#include "nn/layers.hpp"

#include <cmath>

namespace cinelab {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  return b ? add_rowvec(y, b) : y;
}

Tensor mha(const Tensor& q_in, const Tensor& kv_in, const AttnWeights& w, int heads) {
  const int d = w.wq->cols();
  if (d % heads != 0) throw NnError("mha: heads must divide model dimension");
  const int dh = d / heads;
  const float inv_sqrt_dh = 1.f / std::sqrt(static_cast<float>(dh));
  Tensor q = linear(q_in, w.wq, w.bq);
  Tensor k = linear(kv_in, w.wk, w.bk);
  Tensor v = linear(kv_in, w.wv, w.bv);
  Tensor out;
  for (int h = 0; h < heads; ++h) {
    Tensor qh = col_block(q, h * dh, dh);
    Tensor kh = col_block(k, h * dh, dh);
    Tensor vh = col_block(v, h * dh, dh);
    Tensor att = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dh));
    Tensor oh = matmul(att, vh);
    out = h == 0 ? oh : concat_cols(out, oh);
  }
  return linear(out, w.wo, w.bo);
}

Tensor encoder_block(const Tensor& x, const BlockWeights& w, int heads) {
  Tensor h = layernorm_rows(x, w.ln1_g, w.ln1_b);
  Tensor y = add(x, mha(h, h, w.attn, heads));
  Tensor f = layernorm_rows(y, w.ln2_g, w.ln2_b);
  f = linear(gelu(linear(f, w.w1, w.b1)), w.w2, w.b2);
  return add(y, f);
}

namespace {

Mat xavier(Rng& rng, int rows, int cols, float gain = 1.f) {
  return randn_mat(rng, rows, cols, gain / std::sqrt(static_cast<float>(rows)));
}

}  // namespace

AttnWeights make_attn(ParamStore& store, const std::string& prefix, int d, Rng& rng,
                      float out_scale) {
  AttnWeights w;
  w.wq = store.add(prefix + ".q.w", xavier(rng, d, d));
  w.bq = store.add(prefix + ".q.b", Mat::Zero(1, d));
  w.wk = store.add(prefix + ".k.w", xavier(rng, d, d));
  w.bk = store.add(prefix + ".k.b", Mat::Zero(1, d));
  w.wv = store.add(prefix + ".v.w", xavier(rng, d, d));
  w.bv = store.add(prefix + ".v.b", Mat::Zero(1, d));
  w.wo = store.add(prefix + ".out.w", xavier(rng, d, d, out_scale));
  w.bo = store.add(prefix + ".out.b", Mat::Zero(1, d));
  return w;
}

BlockWeights make_block(ParamStore& store, const std::string& prefix, int d, int ffn_mult,
                        Rng& rng, float out_scale) {
  BlockWeights w;
  w.ln1_g = store.add(prefix + ".ln1.g", Mat::Ones(1, d));
  w.ln1_b = store.add(prefix + ".ln1.b", Mat::Zero(1, d));
  w.attn = make_attn(store, prefix + ".attn", d, rng, out_scale);
  w.ln2_g = store.add(prefix + ".ln2.g", Mat::Ones(1, d));
  w.ln2_b = store.add(prefix + ".ln2.b", Mat::Zero(1, d));
  w.w1 = store.add(prefix + ".ffn.w1", xavier(rng, d, d * ffn_mult));
  w.b1 = store.add(prefix + ".ffn.b1", Mat::Zero(1, d * ffn_mult));
  w.w2 = store.add(prefix + ".ffn.w2", xavier(rng, d * ffn_mult, d, out_scale));
  w.b2 = store.add(prefix + ".ffn.b2", Mat::Zero(1, d));
  return w;
}

}  // namespace cinelab
