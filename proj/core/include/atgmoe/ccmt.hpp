#pragma once

// Chunking Causal MoE Transformer: token embedding (type + absolute
// position + value, with zero placeholders for not-yet-known values), a
// stack of pre-norm blocks (causal self-attention with relative-distance
// bias -> cross-attention over scene tokens -> MoE feed-forward, each with
// a residual), the heatmap head (broadcast query correlation + three
// stride-2 transposed convolutions + 1x1 conv + spatial softmax), and the
// per-chunk classification heads.
//
// Instantiated twice by the policy: CCMT-1 consumes a single position-query
// token for coarse localization; CCMT-2 additionally runs the prompt +
// query + action-token sequence for autoregressive decoding.

#include <string>
#include <vector>

#include "atgmoe/action.hpp"
#include "atgmoe/config.hpp"
#include "atgmoe/fusion.hpp"
#include "atgmoe/moe.hpp"
#include "atgmoe/nn.hpp"

namespace atgmoe::ccmt {

using nc::Tensor;

// Decoder input: optional continuous prompt rows followed by action tokens.
template <class S>
struct SequenceInput {
  std::vector<Tensor<S>> prompt;   // each [1, 2C]; receive type/pos embedding too
  std::vector<ActionToken> tokens; // query and discrete action tokens
  size_t length() const { return prompt.size() + tokens.size(); }
};

template <class S>
class CcmtDecoder {
 public:
  CcmtDecoder(nc::ParamStore<S>& store, const std::string& prefix, const ModelConfig& mcfg,
              const MoeConfig& moe_cfg, const std::vector<std::string>& skills, Rng& rng)
      : prefix_(prefix),
        dim_(2 * mcfg.channels),
        heads_(mcfg.heads),
        depth_(mcfg.depth),
        rot_bins_(mcfg.rot_bins),
        max_len_(3 + mcfg.seq_tokens) {
    // E_type is drawn from the standard normal; everything else uses the
    // repo-wide 0.02 scheme.
    e_type_ = store.add(prefix + ".e_type", {kNumTokenTypes, dim_}, rng, 1.0);
    e_pos_ = store.add(prefix + ".e_pos", {max_len_, dim_}, rng, 0.02);
    val_rot_w_ = store.add(prefix + ".val.rot_w", {rot_bins_, dim_}, rng, 0.02);
    val_rot_x_ = store.add(prefix + ".val.rot_x", {rot_bins_, dim_}, rng, 0.02);
    val_rot_y_ = store.add(prefix + ".val.rot_y", {rot_bins_, dim_}, rng, 0.02);
    val_rot_z_ = store.add(prefix + ".val.rot_z", {rot_bins_, dim_}, rng, 0.02);
    val_grip_ = store.add(prefix + ".val.gripper", {2, dim_}, rng, 0.02);
    for (int64_t b = 0; b < depth_; ++b) {
      std::string p = prefix + ".block" + std::to_string(b);
      Block blk{
          store.add_constant_init(p + ".ln1.g", {dim_}, S(1)),
          store.add_constant_init(p + ".ln1.b", {dim_}, S(0)),
          store.add_constant_init(p + ".ln2.g", {dim_}, S(1)),
          store.add_constant_init(p + ".ln2.b", {dim_}, S(0)),
          store.add_constant_init(p + ".ln3.g", {dim_}, S(1)),
          store.add_constant_init(p + ".ln3.b", {dim_}, S(0)),
          store.add(p + ".self.wq", {dim_, dim_}, rng, 0.02),
          store.add(p + ".self.wk", {dim_, dim_}, rng, 0.02),
          store.add(p + ".self.wv", {dim_, dim_}, rng, 0.02),
          store.add_constant_init(p + ".self.brel", {max_len_, 1}, S(0)),
          store.add(p + ".cross.wq", {dim_, dim_}, rng, 0.02),
          store.add(p + ".cross.wk", {dim_, dim_}, rng, 0.02),
          store.add(p + ".cross.wv", {dim_, dim_}, rng, 0.02),
          moe::MoeLayer<S>(store, p + ".moe", dim_, moe_cfg, skills, rng),
      };
      blocks_.push_back(std::move(blk));
    }
    int64_t c = dim_ / 2;
    up1_w_ = store.add(prefix + ".up1.w", {dim_, c, 4, 4}, rng, 0.02);
    up1_b_ = store.add_constant_init(prefix + ".up1.b", {c}, S(0));
    up2_w_ = store.add(prefix + ".up2.w", {c, c / 2, 4, 4}, rng, 0.02);
    up2_b_ = store.add_constant_init(prefix + ".up2.b", {c / 2}, S(0));
    up3_w_ = store.add(prefix + ".up3.w", {c / 2, c / 4, 4, 4}, rng, 0.02);
    up3_b_ = store.add_constant_init(prefix + ".up3.b", {c / 4}, S(0));
    up4_w_ = store.add(prefix + ".up4.w", {1, c / 4, 1, 1}, rng, 0.02);
    up4_b_ = store.add_constant_init(prefix + ".up4.b", {1}, S(0));
    cls_rot_ = store.add(prefix + ".cls.rot", {dim_, 4 * rot_bins_}, rng, 0.02);
    cls_grip_ = store.add(prefix + ".cls.gripper", {dim_, 2}, rng, 0.02);
  }

  int64_t dim() const { return dim_; }
  int64_t max_len() const { return max_len_; }
  int64_t depth() const { return depth_; }
  const std::string& prefix() const { return prefix_; }
  const moe::MoeLayer<S>& moe_layer(int64_t block) const {
    return blocks_[static_cast<size_t>(block)].moe;
  }
  std::string layer_id(int64_t block) const { return prefix_ + ".block" + std::to_string(block); }

  // h_init per Eq.-6 semantics: value embedding (zero placeholder for
  // sentinel values and continuous prompt rows) + type embedding + absolute
  // positional embedding.
  Tensor<S> embed(const SequenceInput<S>& in) const {
    size_t t = in.length();
    if (static_cast<int64_t>(t) > max_len_)
      throw std::invalid_argument("ccmt: sequence length " + std::to_string(t) +
                                  " exceeds max_len " + std::to_string(max_len_));
    std::vector<Tensor<S>> rows;
    rows.reserve(t);
    size_t pos = 0;
    for (const auto& p : in.prompt) {
      auto row = nc::add(p, type_pos_row(TokenType::Prompt, pos));
      rows.push_back(row);
      ++pos;
    }
    for (const auto& tok : in.tokens) {
      Tensor<S> row = type_pos_row(tok.type, pos);
      if (tok.value != kUnknownValue)
        row = nc::add(row, nc::embedding(value_table(tok.type), {tok.value}));
      rows.push_back(row);
      ++pos;
    }
    return nc::concat(rows, 0);
  }

  // The decoder stack. Scene tokens are the flattened fused feature; routing
  // statistics accumulate per block into `records`.
  Tensor<S> forward(const Tensor<S>& h_init, const Tensor<S>& scene_tokens,
                    const std::string& skill, moe::RecordSet<S>& records) const {
    Tensor<S> h = h_init;
    for (size_t bi = 0; bi < blocks_.size(); ++bi) {
      const auto& b = blocks_[bi];
      auto n1 = nc::layer_norm(h, b.ln1_g, b.ln1_b);
      h = nc::add(h, nn::causal_mha_out(n1, b.self_wq, b.self_wk, b.self_wv, b.brel, heads_));
      auto n2 = nc::layer_norm(h, b.ln2_g, b.ln2_b);
      h = nc::add(h, nn::mha_out(n2, scene_tokens, b.cross_wq, b.cross_wk, b.cross_wv, heads_));
      auto n3 = nc::layer_norm(h, b.ln3_g, b.ln3_b);
      h = nc::add(h, b.moe.forward(n3, skill, records.layer(layer_id(static_cast<int64_t>(bi)))));
    }
    return h;
  }

  // Eq.-11 style heatmap prediction: broadcast channel-wise correlation of
  // the query with each view map, ConvUpsample to image resolution, spatial
  // softmax. Returns one flattened [H*W] tensor per view.
  std::vector<Tensor<S>> predict_heatmaps(const Tensor<S>& q_row,
                                          const fusion::FusedScene<S>& scene) const {
    auto q_chan = nc::reshape(q_row, {dim_, 1, 1});
    std::vector<Tensor<S>> maps;
    maps.reserve(static_cast<size_t>(scene.views));
    for (int64_t v = 0; v < scene.views; ++v) {
      auto m = nc::mul(scene.view(v), q_chan);  // [2C, h, w]
      auto t1 = nc::relu(nc::conv_transpose2d(m, up1_w_, up1_b_, 2, 1));
      auto t2 = nc::relu(nc::conv_transpose2d(t1, up2_w_, up2_b_, 2, 1));
      auto t3 = nc::relu(nc::conv_transpose2d(t2, up3_w_, up3_b_, 2, 1));
      auto logits = nc::conv2d(t3, up4_w_, up4_b_, 1, 0);  // [1, H, W]
      auto flat = nc::reshape(logits, {1, logits.size(1) * logits.size(2)});
      maps.push_back(nc::reshape(nc::softmax(flat, 1), {logits.size(1) * logits.size(2)}));
    }
    return maps;
  }

  // Distribution for one action token read from the hidden state at the
  // immediately preceding position (next-token convention). `rot_index` is
  // the token's index within the rotation chunk.
  Tensor<S> classify_token(const Tensor<S>& h_states, int64_t token_pos,
                           const ActionToken& tok) const {
    if (token_pos <= 0) throw std::invalid_argument("ccmt: token at position 0 has no context");
    auto state = nc::slice(h_states, 0, token_pos - 1, 1);  // [1, dim]
    if (tok.chunk == 1) {
      int64_t rot_index = static_cast<int64_t>(tok.type) - static_cast<int64_t>(TokenType::RotW);
      if (rot_index < 0 || rot_index > 3)
        throw std::invalid_argument("ccmt: chunk 1 carries only rotation tokens");
      auto w = nc::slice(cls_rot_, 1, rot_index * rot_bins_, rot_bins_);
      return nc::softmax(nc::matmul(state, w), 1);
    }
    if (tok.chunk == 2) {
      if (tok.type != TokenType::Gripper)
        throw std::invalid_argument("ccmt: chunk 2 carries only the gripper token");
      return nc::softmax(nc::matmul(state, cls_grip_), 1);
    }
    throw std::invalid_argument("ccmt: no classification head registered for chunk " +
                                std::to_string(tok.chunk));
  }

  // Logits variant (pre-softmax) for loss computation.
  Tensor<S> token_logits(const Tensor<S>& h_states, int64_t token_pos,
                         const ActionToken& tok) const {
    auto state = nc::slice(h_states, 0, token_pos - 1, 1);
    if (tok.chunk == 1) {
      int64_t rot_index = static_cast<int64_t>(tok.type) - static_cast<int64_t>(TokenType::RotW);
      auto w = nc::slice(cls_rot_, 1, rot_index * rot_bins_, rot_bins_);
      return nc::matmul(state, w);
    }
    if (tok.chunk == 2) return nc::matmul(state, cls_grip_);
    throw std::invalid_argument("ccmt: no classification head registered for chunk " +
                                std::to_string(tok.chunk));
  }

 private:
  Tensor<S> type_pos_row(TokenType type, size_t pos) const {
    return nc::add(nc::embedding(e_type_, {static_cast<int64_t>(type)}),
                   nc::embedding(e_pos_, {static_cast<int64_t>(pos)}));
  }

  const Tensor<S>& value_table(TokenType type) const {
    switch (type) {
      case TokenType::RotW: return val_rot_w_;
      case TokenType::RotX: return val_rot_x_;
      case TokenType::RotY: return val_rot_y_;
      case TokenType::RotZ: return val_rot_z_;
      case TokenType::Gripper: return val_grip_;
      default:
        throw std::invalid_argument("ccmt: token type carries no value table");
    }
  }

  struct Block {
    Tensor<S> ln1_g, ln1_b, ln2_g, ln2_b, ln3_g, ln3_b;
    Tensor<S> self_wq, self_wk, self_wv;
    Tensor<S> brel;
    Tensor<S> cross_wq, cross_wk, cross_wv;
    moe::MoeLayer<S> moe;
  };

  std::string prefix_;
  int64_t dim_, heads_, depth_, rot_bins_, max_len_;
  Tensor<S> e_type_, e_pos_;
  Tensor<S> val_rot_w_, val_rot_x_, val_rot_y_, val_rot_z_, val_grip_;
  std::vector<Block> blocks_;
  Tensor<S> up1_w_, up1_b_, up2_w_, up2_b_, up3_w_, up3_b_, up4_w_, up4_b_;
  Tensor<S> cls_rot_, cls_grip_;
};

}  // namespace atgmoe::ccmt
