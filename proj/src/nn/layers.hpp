#pragma once

#include "nn/optim.hpp"
#include "nn/tensor.hpp"

namespace cinelab {

// y = x * w + b (b broadcast over rows; pass nullptr to skip).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Multi-head attention: queries from q_in (Nq x D), keys/values from kv_in
// (Nk x D). All projection weights are D x D (per-head slices are column
// blocks). Heads must divide D.
struct AttnWeights {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};
Tensor mha(const Tensor& q_in, const Tensor& kv_in, const AttnWeights& w, int heads);

// Pre-LN transformer encoder block: x + MHA(LN(x)); x + FFN(LN(x)).
struct BlockWeights {
  Tensor ln1_g, ln1_b;
  AttnWeights attn;
  Tensor ln2_g, ln2_b;
  Tensor w1, b1, w2, b2;  // FFN with gelu
};
Tensor encoder_block(const Tensor& x, const BlockWeights& w, int heads);

// Parameter construction helpers (deterministic given rng state).
AttnWeights make_attn(ParamStore& store, const std::string& prefix, int d, Rng& rng,
                      float out_scale = 1.f);
BlockWeights make_block(ParamStore& store, const std::string& prefix, int d, int ffn_mult,
                        Rng& rng, float out_scale = 1.f);

}  // namespace cinelab
