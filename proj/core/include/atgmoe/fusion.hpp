#pragma once

// Multi-modal feature extraction and two-stage attention fusion.
//
// Vision: rendered virtual views pass through a trainable P x P stride-P
// patch convolution (the CLIP visual encoder is replaced by this trainable
// encoder with the same tensor interface). Language: trainable token
// embeddings projected to the joint width 2C (replacing the CLIP text
// encoder). Proprioception: a small MLP to width C, broadcast across all
// visual positions and channel-concatenated with the patch tokens.
//
// Fusion: the joint sequence [F_lang; F_vp + P_pos] is projected to the
// attention width, the language rows are bypassed while each view runs
// self-attention over its own patch tokens, then the full sequence runs one
// joint self-attention (padded language positions masked as keys). The
// language rows are dropped, the remainder is projected back to 2C and
// reshaped to V x 2C x (H/P) x (W/P).

#include <string>
#include <vector>

#include "atgmoe/config.hpp"
#include "atgmoe/nn.hpp"
#include "atgmoe/observation.hpp"
#include "atgmoe/param_store.hpp"
#include "atgmoe/pointcloud.hpp"
#include "atgmoe/random.hpp"
#include "atgmoe/tensor.hpp"

namespace atgmoe::fusion {

using nc::Tensor;

enum class Provenance { CoarseWorkspace, FineCrop };

// Z_fusion / Z'_fusion: fused scene feature of shape [V, 2C, h, w].
template <class S>
struct FusedScene {
  Tensor<S> feature;
  Provenance provenance = Provenance::CoarseWorkspace;
  int64_t views = 0, channels = 0, h = 0, w = 0;

  // Per-view [2C, h, w] map.
  Tensor<S> view(int64_t v) const {
    return nc::reshape(nc::slice(feature, 0, v, 1), {channels, h, w});
  }

  // Flattened [V * h * w, 2C] token sequence for cross-attention.
  Tensor<S> tokens() const {
    std::vector<Tensor<S>> per_view;
    per_view.reserve(static_cast<size_t>(views));
    for (int64_t v = 0; v < views; ++v)
      per_view.push_back(nc::transpose(nc::reshape(view(v), {channels, h * w})));
    return nc::concat(per_view, 0);
  }

  // Mean feature over views and spatial positions, [1, 2C].
  Tensor<S> pooled() const {
    return nc::reshape(nc::mean(nc::reshape(feature, {views, channels, h * w}), {0, 2}),
                       {1, channels});
  }
};

template <class S>
struct ModalityFeatures {
  std::vector<Tensor<S>> vis;  // per view [N_p, C]
  Tensor<S> lang;              // [L, 2C], padded rows zeroed
  Tensor<S> pro;               // [1, C]
  std::vector<bool> lang_pad;  // true at padded positions
};

template <class S>
class FusionEncoder {
 public:
  FusionEncoder(nc::ParamStore<S>& store, const std::string& prefix, const ModelConfig& cfg,
                Rng& rng)
      : c_(cfg.channels),
        d2_(2 * cfg.channels),
        d_attn_(cfg.d_attn),
        heads_(cfg.heads),
        patch_(cfg.patch),
        views_(cfg.virtual_views),
        h_(cfg.image_h / cfg.patch),
        w_(cfg.image_w / cfg.patch),
        instr_len_(cfg.instr_len) {
    patch_w_ = store.add(prefix + ".patch.w", {c_, 3, patch_, patch_}, rng, 0.02);
    patch_b_ = store.add_constant_init(prefix + ".patch.b", {c_}, S(0));
    lang_table_ = store.add(prefix + ".lang.table", {cfg.vocab_size, c_}, rng, 0.02);
    lang_proj_w_ = store.add(prefix + ".lang.proj.w", {c_, d2_}, rng, 0.02);
    lang_proj_b_ = store.add_constant_init(prefix + ".lang.proj.b", {d2_}, S(0));
    pro_w1_ = store.add(prefix + ".pro.w1", {8, c_}, rng, 0.02);
    pro_b1_ = store.add_constant_init(prefix + ".pro.b1", {c_}, S(0));
    pro_w2_ = store.add(prefix + ".pro.w2", {c_, c_}, rng, 0.02);
    pro_b2_ = store.add_constant_init(prefix + ".pro.b2", {c_}, S(0));
    p_pos_ = store.add(prefix + ".p_pos", {views_ * h_ * w_, d2_}, rng, 0.02);
    in_proj_w_ = store.add(prefix + ".in_proj.w", {d2_, d_attn_}, rng, 0.02);
    in_proj_b_ = store.add_constant_init(prefix + ".in_proj.b", {d_attn_}, S(0));
    local_wq_ = store.add(prefix + ".local.wq", {d_attn_, d_attn_}, rng, 0.02);
    local_wk_ = store.add(prefix + ".local.wk", {d_attn_, d_attn_}, rng, 0.02);
    local_wv_ = store.add(prefix + ".local.wv", {d_attn_, d_attn_}, rng, 0.02);
    global_wq_ = store.add(prefix + ".global.wq", {d_attn_, d_attn_}, rng, 0.02);
    global_wk_ = store.add(prefix + ".global.wk", {d_attn_, d_attn_}, rng, 0.02);
    global_wv_ = store.add(prefix + ".global.wv", {d_attn_, d_attn_}, rng, 0.02);
    out_proj_w_ = store.add(prefix + ".out_proj.w", {d_attn_, d2_}, rng, 0.02);
    out_proj_b_ = store.add_constant_init(prefix + ".out_proj.b", {d2_}, S(0));
  }

  int64_t patch_tokens_per_view() const { return h_ * w_; }

  // Rendered view image -> constant [3, H, W] tensor.
  static Tensor<S> image_tensor(const geom::RgbImage& img) {
    int64_t h = img.height, w = img.width;
    std::vector<S> data(static_cast<size_t>(3 * h * w));
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const auto& px = img.at(static_cast<int>(x), static_cast<int>(y));
        data[static_cast<size_t>(0 * h * w + y * w + x)] = static_cast<S>(px.r);
        data[static_cast<size_t>(1 * h * w + y * w + x)] = static_cast<S>(px.g);
        data[static_cast<size_t>(2 * h * w + y * w + x)] = static_cast<S>(px.b);
      }
    return Tensor<S>::from_data({3, h, w}, std::move(data));
  }

  ModalityFeatures<S> encode_modalities(const std::vector<geom::RenderedView>& rendered,
                                        const std::vector<int64_t>& instruction_ids,
                                        int64_t instruction_len, const Proprio& proprio) const {
    if (static_cast<int64_t>(rendered.size()) != views_)
      throw std::invalid_argument("fusion: rendered view count does not match config");
    ModalityFeatures<S> f;
    for (const auto& rv : rendered) {
      auto img = image_tensor(rv.image);
      if (img.size(1) % patch_ != 0 || img.size(2) % patch_ != 0)
        throw std::invalid_argument("fusion: image size not divisible by patch size");
      auto patches = nc::conv2d(img, patch_w_, patch_b_, patch_, 0);  // [C, h, w]
      f.vis.push_back(nc::transpose(nc::reshape(patches, {c_, h_ * w_})));
    }

    auto lang_emb = nc::embedding(lang_table_, instruction_ids);            // [L, C]
    auto lang = nc::linear(lang_emb, lang_proj_w_, lang_proj_b_);           // [L, 2C]
    // zero padded rows so pad token content cannot leak through
    std::vector<S> mask(static_cast<size_t>(instr_len_), S(0));
    f.lang_pad.assign(static_cast<size_t>(instr_len_), true);
    for (int64_t i = 0; i < std::min(instruction_len, instr_len_); ++i) {
      mask[static_cast<size_t>(i)] = S(1);
      f.lang_pad[static_cast<size_t>(i)] = false;
    }
    f.lang = nc::mul(lang, Tensor<S>::from_data({instr_len_, 1}, std::move(mask)));

    geom::Quaternion q = proprio.rotation.canonical();
    auto pvec = Tensor<S>::from_data(
        {1, 8},
        {static_cast<S>(proprio.position.x), static_cast<S>(proprio.position.y),
         static_cast<S>(proprio.position.z), static_cast<S>(q.w), static_cast<S>(q.x),
         static_cast<S>(q.y), static_cast<S>(q.z), static_cast<S>(proprio.gripper)});
    f.pro = nn::mlp2(pvec, pro_w1_, pro_b1_, pro_w2_, pro_b2_);  // [1, C]
    return f;
  }

  // Z_seq = [F_lang; (F_vis ++ F_pro) + P_pos], length L + V * N_p.
  Tensor<S> build_joint_sequence(const ModalityFeatures<S>& f) const {
    auto vis_all = nc::concat(f.vis, 0);  // [V*Np, C]
    int64_t n = vis_all.size(0);
    // broadcast the proprio vector to all visual positions
    auto pro_rows = nc::add(Tensor<S>::zeros({n, c_}), f.pro);
    auto f_vp = nc::add(nc::concat({vis_all, pro_rows}, 1), p_pos_);
    return nc::concat({f.lang, f_vp}, 0);
  }

  // Two-stage attention producing Z_fusion.
  FusedScene<S> fuse(const ModalityFeatures<S>& f, Provenance provenance) const {
    auto z_seq = build_joint_sequence(f);
    auto z_proj = nc::linear(z_seq, in_proj_w_, in_proj_b_);  // [L+V*Np, d_attn]

    auto lang_rows = nc::slice(z_proj, 0, 0, instr_len_);
    int64_t np = h_ * w_;
    std::vector<Tensor<S>> enhanced;
    enhanced.reserve(static_cast<size_t>(views_));
    for (int64_t v = 0; v < views_; ++v) {
      auto view_rows = nc::slice(z_proj, 0, instr_len_ + v * np, np);
      enhanced.push_back(nn::mha(view_rows, view_rows, local_wq_, local_wk_, local_wv_, heads_));
    }
    enhanced.insert(enhanced.begin(), lang_rows);
    auto z2 = nc::concat(enhanced, 0);

    std::vector<bool> key_mask(static_cast<size_t>(instr_len_ + views_ * np), false);
    for (int64_t i = 0; i < instr_len_; ++i)
      key_mask[static_cast<size_t>(i)] = f.lang_pad[static_cast<size_t>(i)];
    auto z3 = nn::mha(z2, z2, global_wq_, global_wk_, global_wv_, heads_, key_mask);

    auto vis_out = nc::slice(z3, 0, instr_len_, views_ * np);
    auto out = nc::linear(vis_out, out_proj_w_, out_proj_b_);  // [V*Np, 2C]

    std::vector<Tensor<S>> per_view;
    per_view.reserve(static_cast<size_t>(views_));
    for (int64_t v = 0; v < views_; ++v) {
      auto rows = nc::slice(out, 0, v * np, np);                     // [Np, 2C]
      per_view.push_back(nc::reshape(nc::transpose(rows), {1, d2_, h_, w_}));
    }
    FusedScene<S> scene;
    scene.feature = nc::concat(per_view, 0);
    scene.provenance = provenance;
    scene.views = views_;
    scene.channels = d2_;
    scene.h = h_;
    scene.w = w_;
    return scene;
  }

  FusedScene<S> forward(const std::vector<geom::RenderedView>& rendered,
                        const std::vector<int64_t>& instruction_ids, int64_t instruction_len,
                        const Proprio& proprio, Provenance provenance) const {
    return fuse(encode_modalities(rendered, instruction_ids, instruction_len, proprio), provenance);
  }

 private:
  int64_t c_, d2_, d_attn_, heads_, patch_, views_, h_, w_, instr_len_;
  Tensor<S> patch_w_, patch_b_;
  Tensor<S> lang_table_, lang_proj_w_, lang_proj_b_;
  Tensor<S> pro_w1_, pro_b1_, pro_w2_, pro_b2_;
  Tensor<S> p_pos_;
  Tensor<S> in_proj_w_, in_proj_b_;
  Tensor<S> local_wq_, local_wk_, local_wv_;
  Tensor<S> global_wq_, global_wk_, global_wv_;
  Tensor<S> out_proj_w_, out_proj_b_;
};

}  // namespace atgmoe::fusion
