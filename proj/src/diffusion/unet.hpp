#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/jsonio.hpp"
#include "nn/layers.hpp"
#include "nn/optim.hpp"

namespace cinelab {

struct UNetConfig {
  int frames = 8;          // T_d
  int size = 32;           // H = W
  int ch1 = 32, ch2 = 64, ch3 = 128;
  int ctx_dim = 64;        // text token embedding width
  int temb_dim = 128;
  int t_train = 200;

  json to_json() const;
  static UNetConfig from_json(const json& j);
};

// Maps an attention-projection name and its base weight to the effective
// weight (identity by default; LoRA adapters substitute W + scale * delta).
using WeightResolver = std::function<Tensor(const std::string&, const Tensor&)>;

// Toy spatio-temporal U-Net over a video volume laid out as a
// (frames * size * size) x channels matrix. Three resolution levels; spatial
// and temporal self-attention at the lowest level; text cross-attention at
// every level. All attention projections have stable names for adapter
// targeting.
class UNet {
 public:
  UNet(const UNetConfig& cfg, std::uint64_t init_seed);

  const UNetConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // x: (frames*size*size) x 3 in [-1, 1]; t in [1, t_train]; ctx_tokens are
  // vocabulary ids (uncond = {bos, eos}). Returns the epsilon prediction.
  Tensor forward(const Tensor& x, int t, const std::vector<int>& ctx_tokens,
                 const WeightResolver* resolver = nullptr);

  // Names of every attention projection weight (LoRA target set) with their
  // (d_in, d_out) shapes.
  std::vector<std::string> attention_targets() const;

  void save(const std::string& path, const json& meta) const;
  void load(const std::string& path);
  void freeze_all();

 private:
  struct Res {
    Tensor ln1_g, ln1_b, conv1_w, conv1_b, temb_w, temb_b;
    Tensor ln2_g, ln2_b, conv2_w, conv2_b;
    Tensor skip_w, skip_b;  // present when cin != cout
  };
  struct Attn {
    std::string prefix;
    Tensor ln_g, ln_b, q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  };

  Res make_res(const std::string& prefix, int cin, int cout, Rng& rng);
  Attn make_attn_block(const std::string& prefix, int c, int kv_dim, Rng& rng);

  Tensor res_forward(const Res& r, const Tensor& x, const Tensor& temb, int n_img, int hw);
  // groups = number of independent attention groups over consecutive row
  // blocks of q (kv = q for self/temporal, kv = ctx for cross with groups=1).
  Tensor attn_forward(const Attn& a, const Tensor& x, const Tensor& kv, int groups,
                      const WeightResolver* resolver);

  Tensor w_eff(const std::string& name, const Tensor& base, const WeightResolver* r) {
    return r ? (*r)(name, base) : base;
  }

  UNetConfig cfg_;
  ParamStore params_;
  Tensor ctx_emb_;
  Tensor temb_w1_, temb_b1_, temb_w2_, temb_b2_;
  Tensor stem_w_, stem_b_;
  Res d1_res_[2], d2_res_[2], mid_res_[2], u2_res_[2], u1_res_[2];
  Attn d1_cross_, d2_cross_, mid_self_, mid_temp_, mid_cross_, u2_cross_, u1_cross_;
  Tensor down1_w_, down1_b_, down2_w_, down2_b_;
  Tensor up2_w_, up2_b_, up1_w_, up1_b_;
  Tensor out_ln_g_, out_ln_b_, out_w_, out_b_;
};

// Reconstructs a model from a checkpoint whose sidecar records the config
// (written by UNet::save with meta["config"] = cfg.to_json()).
UNet load_unet_checkpoint(const std::string& path);

}  // namespace cinelab
