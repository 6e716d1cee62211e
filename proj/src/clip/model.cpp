#include "clip/model.hpp"

#include <cmath>

namespace cinelab {

json ClipConfig::to_json() const {
  return {{"d_model", d_model},   {"l_t", l_t},
          {"l_v", l_v},           {"heads", heads},
          {"patch", patch},       {"image", image},
          {"n_frames", n_frames}, {"ffn_mult", ffn_mult},
          {"aggregator", aggregator},
          {"batch", batch},       {"epochs", epochs},
          {"lr", lr},             {"final_lr", final_lr},
          {"warmup_frac", warmup_frac},
          {"weight_decay", weight_decay},
          {"tau", tau},           {"freeze", freeze}};
}

ClipConfig ClipConfig::from_json(const json& j) {
  ClipConfig c;
  c.d_model = j.value("d_model", c.d_model);
  c.l_t = j.value("l_t", c.l_t);
  c.l_v = j.value("l_v", c.l_v);
  c.heads = j.value("heads", c.heads);
  c.patch = j.value("patch", c.patch);
  c.image = j.value("image", c.image);
  c.n_frames = j.value("n_frames", c.n_frames);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  c.aggregator = j.value("aggregator", c.aggregator);
  c.batch = j.value("batch", c.batch);
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.final_lr = j.value("final_lr", c.final_lr);
  c.warmup_frac = j.value("warmup_frac", c.warmup_frac);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.tau = j.value("tau", c.tau);
  c.freeze = j.value("freeze", c.freeze);
  return c;
}

std::vector<int> sample_frame_indices(int t_frames, int n) {
  if (n <= 0) throw NnError("sample_frame_indices: N must be positive");
  if (t_frames < 1) throw NnError("sample_frame_indices: empty clip");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) {
    double pos = n == 1 ? 0.0 : static_cast<double>(i) * (t_frames - 1) / (n - 1);
    idx[i] = static_cast<int>(std::llround(pos));
  }
  return idx;
}

Tensor infonce_loss(const Tensor& v_batch, const Tensor& t_batch, float tau) {
  if (tau <= 0.f) throw NnError("infonce_loss: temperature must be positive");
  if (v_batch->rows() != t_batch->rows() || v_batch->cols() != t_batch->cols())
    throw NnError("infonce_loss: batch shape mismatch");
  if (!v_batch->val.allFinite() || !t_batch->val.allFinite())
    throw NnError("infonce_loss: non-finite input");
  Tensor vn = l2_normalize_rows(v_batch);
  Tensor tn = l2_normalize_rows(t_batch);
  Tensor logits = scale(matmul(vn, transpose(tn)), 1.f / tau);
  // -log softmax(diagonal) per row = logsumexp(row - diagonal): subtracting
  // inside the exponent avoids the float cancellation of lse(x) - x_ii.
  Tensor neg_diag = scale(take_diag(logits), -1.f);
  Tensor lv = mean_all(logsumexp_rows(add_colvec(logits, neg_diag)));
  Tensor logits_t = transpose(logits);
  Tensor lt = mean_all(logsumexp_rows(add_colvec(logits_t, scale(take_diag(logits_t), -1.f))));
  return scale(add(lv, lt), 0.5f);
}

double cosine_sim(const Mat& v, const Mat& t) {
  double nv = v.row(0).norm(), nt = t.row(0).norm();
  if (nv == 0.0 || nt == 0.0) throw NnError("cosine_sim: zero-norm input");
  return v.row(0).dot(t.row(0)) / (nv * nt);
}

double recall_at_1(const Mat& sim) {
  if (sim.rows() == 0 || sim.cols() == 0) throw NnError("recall_at_1: empty matrix");
  int hits = 0;
  for (int i = 0; i < sim.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < sim.cols(); ++j)
      if (sim(i, j) > sim(i, best)) best = j;  // ties keep the lower index
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / sim.rows();
}

ClipModel::ClipModel(const ClipConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  Rng rng(init_seed);
  Rng rt = rng.child("text"), rv = rng.child("vision"), ra = rng.child("agg");
  const int d = cfg_.d_model;
  const float res_scale = 1.f / std::sqrt(2.f * (cfg_.l_t + cfg_.l_v));

  tok_emb_ = params_.add("text.tok_emb", randn_mat(rt, vocab_.size(), d, 0.02f));
  text_pos_ = params_.add("text.pos_emb", randn_mat(rt, Vocab::kMaxLen, d, 0.02f));
  for (int i = 0; i < cfg_.l_t; ++i)
    text_blocks_.push_back(
        make_block(params_, "text.block" + std::to_string(i), d, cfg_.ffn_mult, rt, res_scale));
  text_lnf_g_ = params_.add("text.ln_f.g", Mat::Ones(1, d));
  text_lnf_b_ = params_.add("text.ln_f.b", Mat::Zero(1, d));
  text_proj_ = params_.add("text.proj.w", randn_mat(rt, d, d, 1.f / std::sqrt((float)d)));

  const int patch_dim = cfg_.patch * cfg_.patch * 3;
  patch_w_ = params_.add("vision.patch.w",
                         randn_mat(rv, patch_dim, d, 1.f / std::sqrt((float)patch_dim)));
  patch_b_ = params_.add("vision.patch.b", Mat::Zero(1, d));
  cls_ = params_.add("vision.cls", randn_mat(rv, 1, d, 0.02f));
  const int n_patches = (cfg_.image / cfg_.patch) * (cfg_.image / cfg_.patch);
  vis_pos_ = params_.add("vision.pos_emb", randn_mat(rv, n_patches + 1, d, 0.02f));
  for (int i = 0; i < cfg_.l_v; ++i)
    vis_blocks_.push_back(
        make_block(params_, "vision.block" + std::to_string(i), d, cfg_.ffn_mult, rv, res_scale));
  vis_lnf_g_ = params_.add("vision.ln_f.g", Mat::Ones(1, d));
  vis_lnf_b_ = params_.add("vision.ln_f.b", Mat::Zero(1, d));
  vis_proj_ = params_.add("vision.proj.w", randn_mat(rv, d, d, 1.f / std::sqrt((float)d)));

  const std::string& agg = cfg_.aggregator;
  if (agg == "transformer" || agg == "transformer+lstm") {
    agg_pos_ = params_.add("agg.pos_emb", randn_mat(ra, cfg_.n_frames, d, 0.02f));
    agg_block_.push_back(make_block(params_, "agg.block0", d, cfg_.ffn_mult, ra));
  }
  if (agg == "lstm" || agg == "transformer+lstm") {
    lstm_wx_ = params_.add("agg.lstm.wx", randn_mat(ra, d, 4 * d, 1.f / std::sqrt((float)d)));
    lstm_wh_ = params_.add("agg.lstm.wh", randn_mat(ra, d, 4 * d, 1.f / std::sqrt((float)d)));
    lstm_b_ = params_.add("agg.lstm.b", Mat::Zero(1, 4 * d));
  }
  if (agg == "mlp") {
    mlp_w1_ = params_.add("agg.mlp.w1", randn_mat(ra, d, 2 * d, 1.f / std::sqrt((float)d)));
    mlp_b1_ = params_.add("agg.mlp.b1", Mat::Zero(1, 2 * d));
    mlp_w2_ = params_.add("agg.mlp.w2", randn_mat(ra, 2 * d, d, 1.f / std::sqrt(2.f * d)));
    mlp_b2_ = params_.add("agg.mlp.b2", Mat::Zero(1, d));
  }
  if (agg == "multihead-attention") {
    agg_query_ = params_.add("agg.query", randn_mat(ra, 1, d, 0.02f));
    agg_attn_ = make_attn(params_, "agg.attn", d, ra);
    has_agg_attn_ = true;
  }
  if (agg != "mean" && agg != "transformer" && agg != "lstm" && agg != "mlp" &&
      agg != "multihead-attention" && agg != "transformer+lstm")
    throw NnError("unknown aggregator kind: " + agg);

  if (cfg_.freeze) {
    // Toy analog of partial fine-tuning: only the top two text blocks, the top
    // ceil(l_v/3) vision blocks, final norms and projections stay trainable.
    const int vis_trainable = (cfg_.l_v + 2) / 3;
    auto freeze_prefix = [this](const std::string& p) {
      for (const auto& t : params_.list())
        if (t->name.rfind(p, 0) == 0) t->frozen = true;
    };
    freeze_prefix("text.tok_emb");
    freeze_prefix("text.pos_emb");
    for (int i = 0; i < cfg_.l_t - 2; ++i) freeze_prefix("text.block" + std::to_string(i));
    freeze_prefix("vision.patch");
    freeze_prefix("vision.cls");
    freeze_prefix("vision.pos_emb");
    for (int i = 0; i < cfg_.l_v - vis_trainable; ++i)
      freeze_prefix("vision.block" + std::to_string(i));
  }
}

Tensor ClipModel::encode_tokens(const std::vector<int>& ids) {
  const int len = static_cast<int>(ids.size());
  Tensor x = gather_rows(tok_emb_, ids);
  std::vector<int> pos(len);
  for (int i = 0; i < len; ++i) pos[i] = i;
  x = add(x, gather_rows(text_pos_, pos));
  for (auto& b : text_blocks_) x = encoder_block(x, b, cfg_.heads);
  x = layernorm_rows(x, text_lnf_g_, text_lnf_b_);
  Tensor eos = row_block(x, len - 1, 1);  // eos is always the last token
  return matmul(eos, text_proj_);
}

Tensor ClipModel::encode_text(const std::string& text) {
  return encode_tokens(vocab_.encode(text));
}

Tensor ClipModel::encode_frame(const Image8& frame) {
  const Image8* img = &frame;
  Image8 resized;
  if (frame.h != cfg_.image || frame.w != cfg_.image) {
    resized = resize(frame, cfg_.image, cfg_.image);
    img = &resized;
  }
  const int p = cfg_.patch, grid = cfg_.image / p;
  Mat patches(grid * grid, p * p * 3);
  for (int gy = 0; gy < grid; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      int row = gy * grid + gx;
      int col = 0;
      for (int y = 0; y < p; ++y)
        for (int x = 0; x < p; ++x)
          for (int c = 0; c < 3; ++c)
            patches(row, col++) = img->at(gy * p + y, gx * p + x, c) / 127.5f - 1.f;
    }
  Tensor x = linear(constant(std::move(patches)), patch_w_, patch_b_);
  x = concat_rows(cls_, x);
  std::vector<int> pos(x->rows());
  for (int i = 0; i < x->rows(); ++i) pos[i] = i;
  x = add(x, gather_rows(vis_pos_, pos));
  for (auto& b : vis_blocks_) x = encoder_block(x, b, cfg_.heads);
  x = layernorm_rows(x, vis_lnf_g_, vis_lnf_b_);
  return matmul(row_block(x, 0, 1), vis_proj_);  // cls token
}

Tensor ClipModel::encode_frames(const std::vector<Image8>& frames) {
  if (frames.empty()) throw NnError("encode_frames: no frames");
  Tensor out;
  for (const auto& f : frames) {
    Tensor fi = encode_frame(f);
    out = out ? concat_rows(out, fi) : fi;
  }
  return out;
}

Tensor ClipModel::aggregate(const Tensor& features) {
  if (features->rows() < 1) throw NnError("aggregate: need at least one feature");
  const std::string& kind = cfg_.aggregator;
  auto lstm_last = [this](Tensor x) {
    const int d = cfg_.d_model;
    Tensor h = constant(Mat::Zero(1, d)), c = constant(Mat::Zero(1, d));
    for (int t = 0; t < x->rows(); ++t) {
      Tensor xt = row_block(x, t, 1);
      Tensor gates = add_rowvec(add(matmul(xt, lstm_wx_), matmul(h, lstm_wh_)), lstm_b_);
      Tensor i = sigmoid(col_block(gates, 0, d));
      Tensor f = sigmoid(col_block(gates, d, d));
      Tensor g = tanh_t(col_block(gates, 2 * d, d));
      Tensor o = sigmoid(col_block(gates, 3 * d, d));
      c = add(mul(f, c), mul(i, g));
      h = mul(o, tanh_t(c));
    }
    return h;
  };
  if (kind == "mean") return mean_rows(features);
  if (kind == "transformer") {
    std::vector<int> pos(features->rows());
    for (int i = 0; i < features->rows(); ++i) pos[i] = i;
    Tensor x = add(features, gather_rows(agg_pos_, pos));
    return mean_rows(encoder_block(x, agg_block_[0], cfg_.heads));
  }
  if (kind == "lstm") return lstm_last(features);
  if (kind == "mlp")
    return mean_rows(linear(gelu(linear(features, mlp_w1_, mlp_b1_)), mlp_w2_, mlp_b2_));
  if (kind == "multihead-attention") return mha(agg_query_, features, agg_attn_, cfg_.heads);
  if (kind == "transformer+lstm") {
    std::vector<int> pos(features->rows());
    for (int i = 0; i < features->rows(); ++i) pos[i] = i;
    Tensor x = add(features, gather_rows(agg_pos_, pos));
    return lstm_last(encoder_block(x, agg_block_[0], cfg_.heads));
  }
  throw NnError("unknown aggregator kind: " + kind);
}

Tensor ClipModel::encode_video(const VideoClip& clip) {
  std::vector<int> idx = sample_frame_indices(clip.t, cfg_.n_frames);
  std::vector<Image8> frames;
  frames.reserve(idx.size());
  for (int i : idx) frames.push_back(clip.frame(i));
  return aggregate(encode_frames(frames));
}

Mat ClipModel::embed_text(const std::string& text) {
  NoGradGuard guard;
  Mat v = encode_text(text)->val;
  return v / std::max(v.norm(), 1e-12f);
}

Mat ClipModel::embed_video(const VideoClip& clip) {
  NoGradGuard guard;
  Mat v = encode_video(clip)->val;
  return v / std::max(v.norm(), 1e-12f);
}

void ClipModel::save(const std::string& path, const json& meta) const {
  cmdf_write(path, params_.to_cmdf(), meta.dump(2));
}

void ClipModel::load(const std::string& path) { params_.load_cmdf(cmdf_read(path)); }

ClipModel load_clip_checkpoint(const std::string& path) {
  json meta = load_json(path + ".meta.json");
  if (!meta.contains("config")) throw NnError("checkpoint sidecar lacks a config: " + path);
  ClipModel model(ClipConfig::from_json(meta.at("config")), 0);
  model.load(path);
  return model;
}

}  // namespace cinelab
