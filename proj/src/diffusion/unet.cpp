#include "diffusion/unet.hpp"

#include <cmath>

#include "clip/vocab.hpp"

namespace cinelab {

json UNetConfig::to_json() const {
  return {{"frames", frames}, {"size", size},       {"ch1", ch1},
          {"ch2", ch2},       {"ch3", ch3},         {"ctx_dim", ctx_dim},
          {"temb_dim", temb_dim}, {"t_train", t_train}};
}

UNetConfig UNetConfig::from_json(const json& j) {
  UNetConfig c;
  c.frames = j.value("frames", c.frames);
  c.size = j.value("size", c.size);
  c.ch1 = j.value("ch1", c.ch1);
  c.ch2 = j.value("ch2", c.ch2);
  c.ch3 = j.value("ch3", c.ch3);
  c.ctx_dim = j.value("ctx_dim", c.ctx_dim);
  c.temb_dim = j.value("temb_dim", c.temb_dim);
  c.t_train = j.value("t_train", c.t_train);
  return c;
}

namespace {

Mat xavier(Rng& rng, int rows, int cols, float gain = 1.f) {
  return randn_mat(rng, rows, cols, gain / std::sqrt(static_cast<float>(rows)));
}

// Sinusoidal timestep embedding (constant w.r.t. the tape).
Mat sinusoidal_temb(int t, int dim) {
  Mat e(1, dim);
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / (half - 1));
    e(0, i) = static_cast<float>(std::sin(t * freq));
    e(0, half + i) = static_cast<float>(std::cos(t * freq));
  }
  for (int i = 2 * half; i < dim; ++i) e(0, i) = 0.f;
  return e;
}

// Row index map sending (t, pos)-major layout to (pos, t)-major and back.
std::vector<int> to_temporal_order(int t_frames, int hw) {
  std::vector<int> idx(static_cast<size_t>(t_frames) * hw);
  for (int p = 0; p < hw; ++p)
    for (int t = 0; t < t_frames; ++t) idx[static_cast<size_t>(p) * t_frames + t] = t * hw + p;
  return idx;
}

std::vector<int> from_temporal_order(int t_frames, int hw) {
  std::vector<int> idx(static_cast<size_t>(t_frames) * hw);
  for (int t = 0; t < t_frames; ++t)
    for (int p = 0; p < hw; ++p) idx[static_cast<size_t>(t) * hw + p] = p * t_frames + t;
  return idx;
}

std::vector<int> upsample2_rows(int n_img, int h, int w) {
  std::vector<int> idx;
  idx.reserve(static_cast<size_t>(n_img) * h * w * 4);
  for (int n = 0; n < n_img; ++n)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) idx.push_back((n * h + y / 2) * w + x / 2);
  return idx;
}

}  // namespace

UNet::Res UNet::make_res(const std::string& prefix, int cin, int cout, Rng& rng) {
  Res r;
  r.ln1_g = params_.add(prefix + ".ln1.g", Mat::Ones(1, cin));
  r.ln1_b = params_.add(prefix + ".ln1.b", Mat::Zero(1, cin));
  r.conv1_w = params_.add(prefix + ".conv1.w", xavier(rng, cin * 9, cout));
  r.conv1_b = params_.add(prefix + ".conv1.b", Mat::Zero(1, cout));
  r.temb_w = params_.add(prefix + ".temb.w", xavier(rng, cfg_.temb_dim, cout));
  r.temb_b = params_.add(prefix + ".temb.b", Mat::Zero(1, cout));
  r.ln2_g = params_.add(prefix + ".ln2.g", Mat::Ones(1, cout));
  r.ln2_b = params_.add(prefix + ".ln2.b", Mat::Zero(1, cout));
  r.conv2_w = params_.add(prefix + ".conv2.w", xavier(rng, cout * 9, cout, 0.2f));
  r.conv2_b = params_.add(prefix + ".conv2.b", Mat::Zero(1, cout));
  if (cin != cout) {
    r.skip_w = params_.add(prefix + ".skip.w", xavier(rng, cin, cout));
    r.skip_b = params_.add(prefix + ".skip.b", Mat::Zero(1, cout));
  }
  return r;
}

UNet::Attn UNet::make_attn_block(const std::string& prefix, int c, int kv_dim, Rng& rng) {
  Attn a;
  a.prefix = prefix;
  a.ln_g = params_.add(prefix + ".ln.g", Mat::Ones(1, c));
  a.ln_b = params_.add(prefix + ".ln.b", Mat::Zero(1, c));
  a.q_w = params_.add(prefix + ".q.w", xavier(rng, c, c));
  a.q_b = params_.add(prefix + ".q.b", Mat::Zero(1, c));
  a.k_w = params_.add(prefix + ".k.w", xavier(rng, kv_dim, c));
  a.k_b = params_.add(prefix + ".k.b", Mat::Zero(1, c));
  a.v_w = params_.add(prefix + ".v.w", xavier(rng, kv_dim, c));
  a.v_b = params_.add(prefix + ".v.b", Mat::Zero(1, c));
  a.o_w = params_.add(prefix + ".out.w", xavier(rng, c, c, 0.2f));
  a.o_b = params_.add(prefix + ".out.b", Mat::Zero(1, c));
  return a;
}

UNet::UNet(const UNetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  Rng rng(init_seed);
  Vocab vocab;
  ctx_emb_ = params_.add("unet.ctx_emb", randn_mat(rng, vocab.size(), cfg_.ctx_dim, 0.02f));
  temb_w1_ = params_.add("unet.temb.w1", xavier(rng, cfg_.temb_dim, cfg_.temb_dim));
  temb_b1_ = params_.add("unet.temb.b1", Mat::Zero(1, cfg_.temb_dim));
  temb_w2_ = params_.add("unet.temb.w2", xavier(rng, cfg_.temb_dim, cfg_.temb_dim));
  temb_b2_ = params_.add("unet.temb.b2", Mat::Zero(1, cfg_.temb_dim));
  stem_w_ = params_.add("unet.stem.w", xavier(rng, 3 * 9, cfg_.ch1));
  stem_b_ = params_.add("unet.stem.b", Mat::Zero(1, cfg_.ch1));

  for (int i = 0; i < 2; ++i)
    d1_res_[i] = make_res("unet.d1.res" + std::to_string(i), cfg_.ch1, cfg_.ch1, rng);
  d1_cross_ = make_attn_block("unet.d1.cross", cfg_.ch1, cfg_.ctx_dim, rng);
  down1_w_ = params_.add("unet.down1.w", xavier(rng, cfg_.ch1 * 9, cfg_.ch2));
  down1_b_ = params_.add("unet.down1.b", Mat::Zero(1, cfg_.ch2));

  for (int i = 0; i < 2; ++i)
    d2_res_[i] = make_res("unet.d2.res" + std::to_string(i), cfg_.ch2, cfg_.ch2, rng);
  d2_cross_ = make_attn_block("unet.d2.cross", cfg_.ch2, cfg_.ctx_dim, rng);
  down2_w_ = params_.add("unet.down2.w", xavier(rng, cfg_.ch2 * 9, cfg_.ch3));
  down2_b_ = params_.add("unet.down2.b", Mat::Zero(1, cfg_.ch3));

  mid_res_[0] = make_res("unet.mid.res0", cfg_.ch3, cfg_.ch3, rng);
  mid_self_ = make_attn_block("unet.mid.self", cfg_.ch3, cfg_.ch3, rng);
  mid_temp_ = make_attn_block("unet.mid.temporal", cfg_.ch3, cfg_.ch3, rng);
  mid_cross_ = make_attn_block("unet.mid.cross", cfg_.ch3, cfg_.ctx_dim, rng);
  mid_res_[1] = make_res("unet.mid.res1", cfg_.ch3, cfg_.ch3, rng);

  up2_w_ = params_.add("unet.up2.w", xavier(rng, cfg_.ch3 * 9, cfg_.ch2));
  up2_b_ = params_.add("unet.up2.b", Mat::Zero(1, cfg_.ch2));
  u2_res_[0] = make_res("unet.u2.res0", cfg_.ch2 * 2, cfg_.ch2, rng);
  u2_res_[1] = make_res("unet.u2.res1", cfg_.ch2, cfg_.ch2, rng);
  u2_cross_ = make_attn_block("unet.u2.cross", cfg_.ch2, cfg_.ctx_dim, rng);

  up1_w_ = params_.add("unet.up1.w", xavier(rng, cfg_.ch2 * 9, cfg_.ch1));
  up1_b_ = params_.add("unet.up1.b", Mat::Zero(1, cfg_.ch1));
  u1_res_[0] = make_res("unet.u1.res0", cfg_.ch1 * 2, cfg_.ch1, rng);
  u1_res_[1] = make_res("unet.u1.res1", cfg_.ch1, cfg_.ch1, rng);
  u1_cross_ = make_attn_block("unet.u1.cross", cfg_.ch1, cfg_.ctx_dim, rng);

  out_ln_g_ = params_.add("unet.out.ln.g", Mat::Ones(1, cfg_.ch1));
  out_ln_b_ = params_.add("unet.out.ln.b", Mat::Zero(1, cfg_.ch1));
  out_w_ = params_.add("unet.out.w", xavier(rng, cfg_.ch1 * 9, 3, 0.2f));
  out_b_ = params_.add("unet.out.b", Mat::Zero(1, 3));
}

Tensor UNet::res_forward(const Res& r, const Tensor& x, const Tensor& temb, int n_img, int hw) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(hw))));
  Tensor h = silu(layernorm_rows(x, r.ln1_g, r.ln1_b));
  h = linear(im2col(h, n_img, side, side, 3, 1, 1), r.conv1_w, r.conv1_b);
  h = add_rowvec(h, linear(temb, r.temb_w, r.temb_b));
  h = silu(layernorm_rows(h, r.ln2_g, r.ln2_b));
  h = linear(im2col(h, n_img, side, side, 3, 1, 1), r.conv2_w, r.conv2_b);
  Tensor skip = r.skip_w ? linear(x, r.skip_w, r.skip_b) : x;
  return add(skip, h);
}

Tensor UNet::attn_forward(const Attn& a, const Tensor& x, const Tensor& kv, int groups,
                          const WeightResolver* resolver) {
  Tensor h = layernorm_rows(x, a.ln_g, a.ln_b);
  Tensor q = linear(h, w_eff(a.prefix + ".q.w", a.q_w, resolver), a.q_b);
  Tensor k = linear(kv, w_eff(a.prefix + ".k.w", a.k_w, resolver), a.k_b);
  Tensor v = linear(kv, w_eff(a.prefix + ".v.w", a.v_w, resolver), a.v_b);
  const float s = 1.f / std::sqrt(static_cast<float>(q->cols()));
  Tensor att_out;
  if (groups <= 1) {
    att_out = matmul(softmax_rows(scale(matmul(q, transpose(k)), s)), v);
  } else {
    const int nq = q->rows() / groups, nk = k->rows() / groups;
    for (int g = 0; g < groups; ++g) {
      Tensor qg = row_block(q, g * nq, nq);
      Tensor kg = row_block(k, g * nk, nk);
      Tensor vg = row_block(v, g * nk, nk);
      Tensor og = matmul(softmax_rows(scale(matmul(qg, transpose(kg)), s)), vg);
      att_out = att_out ? concat_rows(att_out, og) : og;
    }
  }
  return add(x, linear(att_out, w_eff(a.prefix + ".out.w", a.o_w, resolver), a.o_b));
}

Tensor UNet::forward(const Tensor& x, int t, const std::vector<int>& ctx_tokens,
                     const WeightResolver* resolver) {
  if (t < 1 || t > cfg_.t_train) throw NnError("UNet::forward: timestep out of range");
  const int T = cfg_.frames, S = cfg_.size;
  if (x->rows() != T * S * S || x->cols() != 3)
    throw NnError("UNet::forward: bad input volume shape");
  if (ctx_tokens.empty()) throw NnError("UNet::forward: empty context tokens");

  Tensor temb = constant(sinusoidal_temb(t, cfg_.temb_dim));
  temb = linear(silu(linear(temb, temb_w1_, temb_b1_)), temb_w2_, temb_b2_);
  Tensor ctx = gather_rows(ctx_emb_, ctx_tokens);

  // Level 1: S x S, ch1.
  Tensor h = linear(im2col(x, T, S, S, 3, 1, 1), stem_w_, stem_b_);
  h = res_forward(d1_res_[0], h, temb, T, S * S);
  h = res_forward(d1_res_[1], h, temb, T, S * S);
  h = attn_forward(d1_cross_, h, ctx, 1, resolver);
  Tensor skip1 = h;
  h = linear(im2col(h, T, S, S, 3, 2, 1), down1_w_, down1_b_);

  // Level 2: S/2, ch2.
  const int S2 = S / 2;
  h = res_forward(d2_res_[0], h, temb, T, S2 * S2);
  h = res_forward(d2_res_[1], h, temb, T, S2 * S2);
  h = attn_forward(d2_cross_, h, ctx, 1, resolver);
  Tensor skip2 = h;
  h = linear(im2col(h, T, S2, S2, 3, 2, 1), down2_w_, down2_b_);

  // Level 3 (mid): S/4, ch3; spatial + temporal self-attention + cross.
  const int S3 = S / 4;
  h = res_forward(mid_res_[0], h, temb, T, S3 * S3);
  h = attn_forward(mid_self_, h, h, T, resolver);  // per-frame spatial attention
  {
    Tensor ht = gather_rows(h, to_temporal_order(T, S3 * S3));
    ht = attn_forward(mid_temp_, ht, ht, S3 * S3, resolver);  // per-position over frames
    h = gather_rows(ht, from_temporal_order(T, S3 * S3));
  }
  h = attn_forward(mid_cross_, h, ctx, 1, resolver);
  h = res_forward(mid_res_[1], h, temb, T, S3 * S3);

  // Decoder level 2.
  h = gather_rows(h, upsample2_rows(T, S3, S3));
  h = linear(im2col(h, T, S2, S2, 3, 1, 1), up2_w_, up2_b_);
  h = concat_cols(h, skip2);
  h = res_forward(u2_res_[0], h, temb, T, S2 * S2);
  h = res_forward(u2_res_[1], h, temb, T, S2 * S2);
  h = attn_forward(u2_cross_, h, ctx, 1, resolver);

  // Decoder level 1.
  h = gather_rows(h, upsample2_rows(T, S2, S2));
  h = linear(im2col(h, T, S, S, 3, 1, 1), up1_w_, up1_b_);
  h = concat_cols(h, skip1);
  h = res_forward(u1_res_[0], h, temb, T, S * S);
  h = res_forward(u1_res_[1], h, temb, T, S * S);
  h = attn_forward(u1_cross_, h, ctx, 1, resolver);

  h = silu(layernorm_rows(h, out_ln_g_, out_ln_b_));
  return linear(im2col(h, T, S, S, 3, 1, 1), out_w_, out_b_);
}

std::vector<std::string> UNet::attention_targets() const {
  std::vector<std::string> names;
  for (const auto& p : params_.list()) {
    const std::string& n = p->name;
    auto ends_with = [&n](const char* suf) {
      std::string s(suf);
      return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
    };
    bool attn_block = n.find(".cross.") != std::string::npos ||
                      n.find(".self.") != std::string::npos ||
                      n.find(".temporal.") != std::string::npos;
    if (attn_block && (ends_with(".q.w") || ends_with(".k.w") || ends_with(".v.w") ||
                       ends_with(".out.w")))
      names.push_back(n);
  }
  return names;
}

void UNet::save(const std::string& path, const json& meta) const {
  cmdf_write(path, params_.to_cmdf(), meta.dump(2));
}

void UNet::load(const std::string& path) { params_.load_cmdf(cmdf_read(path)); }

void UNet::freeze_all() {
  for (const auto& p : params_.list()) p->frozen = true;
}

UNet load_unet_checkpoint(const std::string& path) {
  json meta = load_json(path + ".meta.json");
  if (!meta.contains("config")) throw NnError("checkpoint sidecar lacks a config: " + path);
  UNet model(UNetConfig::from_json(meta.at("config")), 0);
  model.load(path);
  return model;
}

}  // namespace cinelab
