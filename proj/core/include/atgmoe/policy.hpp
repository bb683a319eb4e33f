#pragma once

// The full two-stage policy: geometry pipeline (back-projection, workspace
// crop, virtual-view rendering), per-stage fusion encoders, CCMT-1 for
// global coarse localization, and CCMT-2 for the zoomed fine stage with
// autoregressive action decoding.
//
// Coarse and fine stages use separate fusion encoders (the fine stage
// consumes a different metric scale). During training the fine crop is
// centered on the ground-truth operation point and CCMT-2 is teacher-forced
// in one parallel pass; at inference the crop centers on the triangulated
// coarse point and tokens are decoded stepwise by argmax.

#include <optional>
#include <string>
#include <vector>

#include "atgmoe/action.hpp"
#include "atgmoe/ccmt.hpp"
#include "atgmoe/config.hpp"
#include "atgmoe/demos.hpp"
#include "atgmoe/fusion.hpp"
#include "atgmoe/heatmap.hpp"
#include "atgmoe/moe.hpp"
#include "atgmoe/observation.hpp"
#include "atgmoe/optimizer.hpp"
#include "atgmoe/param_store.hpp"
#include "atgmoe/pointcloud.hpp"

namespace atgmoe::pipeline {

using nc::Tensor;

inline constexpr double kGtHeatmapSigmaPx = 1.5;
inline constexpr double kZoomFactor = 4.0;

// One prepared policy input: a workspace-cropped cloud plus conditioning.
struct PolicyInput {
  geom::PointCloud cloud;
  std::vector<int64_t> instruction_ids;
  int64_t instruction_len = 0;
  Proprio proprio;
  std::string skill;
};

inline PolicyInput make_policy_input(const Observation& obs, const geom::Box3& workspace,
                                     const std::string& skill) {
  PolicyInput in;
  in.cloud = scene_cloud(obs, workspace);
  in.instruction_ids = obs.instruction_ids;
  in.instruction_len = obs.instruction_len;
  in.proprio = obs.proprio;
  in.skill = skill;
  return in;
}

template <class S>
geom::Heatmap to_heatmap(const Tensor<S>& flat, int width, int height, int view) {
  geom::Heatmap hm;
  hm.view = view;
  hm.width = width;
  hm.height = height;
  hm.values.assign(flat.values().begin(), flat.values().end());
  return hm;
}

template <class S>
Tensor<S> heatmap_tensor(const geom::Heatmap& hm) {
  std::vector<S> v(hm.values.begin(), hm.values.end());
  return Tensor<S>::from_data({static_cast<int64_t>(hm.values.size())}, std::move(v));
}

template <class S>
struct StageResult {
  fusion::FusedScene<S> scene;
  std::vector<Tensor<S>> heatmap_tensors;  // per view, [H*W], softmaxed
  std::vector<geom::Heatmap> heatmaps;
  geom::TriangulationResult tri;
};

template <class S>
struct FineResult {
  StageResult<S> stage;
  geom::Box3 crop_box;
  geom::Vec3 operation_point;               // p_t used for the prompt
  std::vector<Tensor<S>> token_logits;      // per discrete token, [1, bins]
  ActionTokenSequence tokens;               // gt tokens (teacher) or decoded (inference)
  Tensor<S> decode_states;                  // hidden states of the final decode pass
};

template <class S>
class PolicyModel {
 public:
  PolicyModel(const ExperimentConfig& cfg, uint64_t init_seed)
      : cfg_(cfg),
        rng_(init_seed),
        fusion_coarse_(params_, "stage1.fusion", cfg.model, rng_),
        fusion_fine_(params_, "stage2.fusion", cfg.model, rng_),
        ccmt1_(params_, "stage1.ccmt", cfg.model, cfg.moe, cfg.env.skills, rng_),
        ccmt2_(params_, "stage2.ccmt", cfg.model, cfg.moe, cfg.env.skills, rng_),
        workspace_views_(geom::VirtualViewSet::axis_aligned(
            cfg.env.workspace, static_cast<int>(cfg.model.image_w),
            static_cast<int>(cfg.model.image_h), static_cast<int>(cfg.model.virtual_views))) {}

  const ExperimentConfig& config() const { return cfg_; }
  nc::ParamStore<S>& params() { return params_; }
  const nc::ParamStore<S>& params() const { return params_; }
  const geom::VirtualViewSet& workspace_views() const { return workspace_views_; }
  ccmt::CcmtDecoder<S>& ccmt1() { return ccmt1_; }
  ccmt::CcmtDecoder<S>& ccmt2() { return ccmt2_; }
  const ccmt::CcmtDecoder<S>& ccmt1() const { return ccmt1_; }
  const ccmt::CcmtDecoder<S>& ccmt2() const { return ccmt2_; }
  fusion::FusionEncoder<S>& fusion_coarse() { return fusion_coarse_; }
  fusion::FusionEncoder<S>& fusion_fine() { return fusion_fine_; }

  // Maps a MoE record-set layer id back to its owning decoder.
  const ccmt::CcmtDecoder<S>* decoder_for_layer(const std::string& layer_id) const {
    if (layer_id.rfind(ccmt1_.prefix(), 0) == 0) return &ccmt1_;
    if (layer_id.rfind(ccmt2_.prefix(), 0) == 0) return &ccmt2_;
    return nullptr;
  }

  geom::VirtualViewSet crop_views(const geom::Box3& crop_box) const {
    return geom::VirtualViewSet::axis_aligned(crop_box, static_cast<int>(cfg_.model.image_w),
                                              static_cast<int>(cfg_.model.image_h),
                                              static_cast<int>(cfg_.model.virtual_views));
  }

  // Global coarse localization over the full workspace. `locate` controls
  // whether triangulation runs (training supervises heatmaps directly and
  // skips it).
  StageResult<S> coarse_stage(const PolicyInput& in, moe::RecordSet<S>& records,
                              bool locate = true) const {
    auto rendered = geom::render_views(in.cloud, workspace_views_);
    auto scene = fusion_coarse_.forward(rendered, in.instruction_ids, in.instruction_len,
                                        in.proprio, fusion::Provenance::CoarseWorkspace);
    return run_heatmap_pass(ccmt1_, scene, in.skill, cfg_.env.workspace, workspace_views_,
                            records, locate);
  }

  // Fine stage. `teacher` carries the ground-truth operation point and token
  // sequence; when absent the stage decodes stepwise from its own p_t.
  struct Teacher {
    geom::Vec3 operation_point;
    ActionTokenSequence tokens;
  };

  FineResult<S> fine_stage(const PolicyInput& in, const geom::Vec3& crop_center,
                           moe::RecordSet<S>& records,
                           const std::optional<Teacher>& teacher = std::nullopt) const {
    auto crop = geom::crop_and_zoom(in.cloud, crop_center, kZoomFactor, cfg_.env.workspace);
    auto views = crop_views(crop.box);
    auto rendered = geom::render_views(crop.cloud, views);
    auto scene = fusion_fine_.forward(rendered, in.instruction_ids, in.instruction_len, in.proprio,
                                      fusion::Provenance::FineCrop);

    FineResult<S> out;
    out.crop_box = crop.box;
    // teacher mode centers the crop on the ground truth and never needs the
    // triangulated point
    out.stage = run_heatmap_pass(ccmt2_, scene, in.skill, crop.box, views, records,
                                 /*locate=*/!teacher.has_value());

    out.operation_point = teacher ? teacher->operation_point : out.stage.tri.point;

    // h_prompt: grid-sampled local feature at the projection of p_t (mean
    // over views) and the spatial mean of the crop feature.
    auto scene_tokens = scene.tokens();
    Tensor<S> sampled;
    for (int64_t v = 0; v < scene.views; ++v) {
      auto px = views[static_cast<size_t>(v)].project(out.operation_point);
      double u = 0, vv = 0;
      if (px) {
        // feature-map pixel units (H/P x W/P grid)
        u = px->u * static_cast<double>(scene.w) / views[static_cast<size_t>(v)].width;
        vv = px->v * static_cast<double>(scene.h) / views[static_cast<size_t>(v)].height;
      }
      auto g = nc::reshape(nc::grid_sample(scene.view(v), u, vv), {1, scene.channels});
      sampled = sampled.defined() ? nc::add(sampled, g) : g;
    }
    sampled = nc::scale(sampled, 1.0 / static_cast<double>(scene.views));
    auto pooled = scene.pooled();

    ccmt::SequenceInput<S> seq;
    seq.prompt = {sampled, pooled};
    seq.tokens.push_back({TokenType::PositionQuery, kUnknownValue, 0});

    if (teacher) {
      // one parallel teacher-forced pass over the full ground-truth sequence
      for (const auto& t : teacher->tokens.tokens) seq.tokens.push_back(t);
      auto h = ccmt2_.forward(ccmt2_.embed(seq), scene_tokens, in.skill, records);
      out.decode_states = h;
      out.tokens = teacher->tokens;
      for (size_t k = 0; k < teacher->tokens.tokens.size(); ++k) {
        int64_t pos = 3 + static_cast<int64_t>(k);  // prompt(2) + query(1) + k
        out.token_logits.push_back(
            ccmt2_.token_logits(h, pos, teacher->tokens.tokens[k]));
      }
    } else {
      // stepwise argmax decode; each token's distribution is read from the
      // hidden state at the immediately preceding position
      ActionTokenSequence decoded;
      const std::vector<std::pair<TokenType, int>> layout = {
          {TokenType::RotW, 1}, {TokenType::RotX, 1}, {TokenType::RotY, 1},
          {TokenType::RotZ, 1}, {TokenType::Gripper, 2}};
      for (const auto& [type, chunk] : layout) {
        auto h = ccmt2_.forward(ccmt2_.embed(seq), scene_tokens, in.skill, records);
        out.decode_states = h;
        ActionToken tok{type, kUnknownValue, chunk};
        int64_t pos = static_cast<int64_t>(seq.length());  // the token being predicted
        auto logits = ccmt2_.token_logits(h, pos, tok);
        out.token_logits.push_back(logits);
        const auto& lv = logits.values();
        int64_t best = 0;
        for (size_t i = 1; i < lv.size(); ++i)
          if (lv[i] > lv[static_cast<size_t>(best)]) best = static_cast<int64_t>(i);
        tok.value = best;
        decoded.tokens.push_back(tok);
        seq.tokens.push_back(tok);
      }
      out.tokens = decoded;
    }
    return out;
  }

 private:
  StageResult<S> run_heatmap_pass(const ccmt::CcmtDecoder<S>& decoder,
                                  const fusion::FusedScene<S>& scene, const std::string& skill,
                                  const geom::Box3& box, const geom::VirtualViewSet& views,
                                  moe::RecordSet<S>& records, bool locate) const {
    ccmt::SequenceInput<S> seq;
    seq.tokens.push_back({TokenType::PositionQuery, kUnknownValue, 0});
    auto h = decoder.forward(decoder.embed(seq), scene.tokens(), skill, records);
    auto q = nc::slice(h, 0, 0, 1);  // the query row
    StageResult<S> out;
    out.scene = scene;
    out.heatmap_tensors = decoder.predict_heatmaps(q, scene);
    for (size_t v = 0; v < out.heatmap_tensors.size(); ++v)
      out.heatmaps.push_back(to_heatmap(out.heatmap_tensors[v],
                                        static_cast<int>(cfg_.model.image_w),
                                        static_cast<int>(cfg_.model.image_h),
                                        static_cast<int>(v)));
    if (locate) out.tri = geom::triangulate(out.heatmaps, views, box);
    return out;
  }

  ExperimentConfig cfg_;
  Rng rng_;
  nc::ParamStore<S> params_;
  fusion::FusionEncoder<S> fusion_coarse_, fusion_fine_;
  ccmt::CcmtDecoder<S> ccmt1_, ccmt2_;
  geom::VirtualViewSet workspace_views_;
};

}  // namespace atgmoe::pipeline
