#pragma once

#include <string>
#include <vector>

#include "clip/vocab.hpp"
#include "core/image.hpp"
#include "core/jsonio.hpp"
#include "nn/layers.hpp"
#include "nn/optim.hpp"

namespace cinelab {

struct ClipConfig {
  // architecture
  int d_model = 128;  // joint dimension equals d_model
  int l_t = 4, l_v = 6, heads = 4, patch = 8, image = 64;
  int n_frames = 8, ffn_mult = 2;
  std::string aggregator = "mean";  // mean | transformer | lstm | mlp |
                                    // multihead-attention | transformer+lstm
  // training (conservative defaults; from-scratch runs typically override lr)
  int batch = 16, epochs = 30;
  double lr = 2e-5, final_lr = 1e-6, warmup_frac = 0.1, weight_decay = 0.2;
  double tau = 0.01;
  bool freeze = false;  // layer-freezing policy for warm starts

  json to_json() const;
  static ClipConfig from_json(const json& j);
};

// indices = round(linspace(0, T-1, N)); duplicates allowed when T < N.
std::vector<int> sample_frame_indices(int t_frames, int n);

// Symmetric InfoNCE over already-computed (unnormalized) embedding batches.
// Normalizes internally, max-subtracted softmax, 0.5 * (video2text + text2video).
Tensor infonce_loss(const Tensor& v_batch, const Tensor& t_batch, float tau);

double cosine_sim(const Mat& v, const Mat& t);  // 1 x D each

// R@1 over a (videos x captions) similarity matrix; row i's correct caption is
// column i; ties broken toward the lower caption index.
double recall_at_1(const Mat& sim);

class ClipModel {
 public:
  ClipModel(const ClipConfig& cfg, std::uint64_t init_seed);

  const ClipConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }

  Tensor encode_text(const std::string& text);          // 1 x D, unnormalized
  Tensor encode_frames(const std::vector<Image8>& fr);  // N x D per-frame features
  Tensor aggregate(const Tensor& features);             // N x D -> 1 x D
  Tensor encode_video(const VideoClip& clip);           // sample+encode+aggregate

  Mat embed_text(const std::string& text);   // inference, normalized
  Mat embed_video(const VideoClip& clip);    // inference, normalized

  void save(const std::string& path, const json& meta) const;
  void load(const std::string& path);

 private:
  Tensor encode_tokens(const std::vector<int>& ids);
  Tensor encode_frame(const Image8& frame);

  ClipConfig cfg_;
  Vocab vocab_;
  ParamStore params_;
  // text side
  Tensor tok_emb_, text_pos_;
  std::vector<BlockWeights> text_blocks_;
  Tensor text_lnf_g_, text_lnf_b_, text_proj_;
  // vision side
  Tensor patch_w_, patch_b_, cls_, vis_pos_;
  std::vector<BlockWeights> vis_blocks_;
  Tensor vis_lnf_g_, vis_lnf_b_, vis_proj_;
  // aggregator
  Tensor agg_pos_;
  std::vector<BlockWeights> agg_block_;
  Tensor lstm_wx_, lstm_wh_, lstm_b_;
  Tensor mlp_w1_, mlp_b1_, mlp_w2_, mlp_b2_;
  Tensor agg_query_;
  AttnWeights agg_attn_;
  bool has_agg_attn_ = false;
};

// Reconstructs a model from a checkpoint whose sidecar records the config
// (written by ClipModel::save with meta["config"] = cfg.to_json()).
ClipModel load_clip_checkpoint(const std::string& path);

}  // namespace cinelab
