#pragma once

// Teacher-forced training over keyframe transition examples.
//
// Every keyframe of every demo is one example (observation -> next keyframe
// action). Per step, each sample runs the coarse stage against full-
// workspace Gaussian targets and the fine stage against crop targets with
// the crop centered on the ground-truth operation point; the discrete
// sequence is supervised in one parallel teacher-forced pass. Routing
// records merge across the batch and the balance loss is computed on the
// merged statistics, so a single backward pass covers the whole step.

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atgmoe/demos.hpp"
#include "atgmoe/losses.hpp"
#include "atgmoe/policy.hpp"
#include <json.hpp>

namespace atgmoe::pipeline {

struct TrainStepLog {
  int64_t step = 0;
  double l_s1 = 0, l_s2 = 0, l_ar = 0, l_aux = 0, l_total = 0, lr = 0;
};

struct AugmentSample {
  geom::Pose pose;  // rigid scene perturbation (yaw about workspace center + xy shift)
  bool active = false;
};

inline AugmentSample draw_augmentation(Rng& rng, const TrainingConfig& tc,
                                       const geom::Box3& workspace) {
  AugmentSample a;
  double theta = 0, dx = 0, dy = 0;
  if (tc.augment_yaw) theta = rng.uniform(-10.0, 10.0) * 3.14159265358979323846 / 180.0;
  if (tc.augment_translation) {
    dx = rng.uniform(-0.02, 0.02);
    dy = rng.uniform(-0.02, 0.02);
  }
  a.active = tc.augment_yaw || tc.augment_translation;
  geom::Vec3 c = workspace.center();
  c.z = 0;  // yaw about the vertical axis through the workspace center
  geom::Quaternion r = geom::Quaternion::yaw(theta);
  a.pose = {r, c - r.rotate(c) + geom::Vec3{dx, dy, 0}};
  return a;
}

template <class S>
class Trainer {
 public:
  Trainer(PolicyModel<S>& model, std::vector<DemoSample> demos)
      : model_(model), demos_(std::move(demos)) {
    for (size_t d = 0; d < demos_.size(); ++d)
      for (size_t k = 0; k < demos_[d].keyframes.size(); ++k)
        examples_.push_back({d, k});
    if (examples_.empty()) throw std::invalid_argument("trainer: no training examples");
  }

  size_t example_count() const { return examples_.size(); }

  int64_t steps_per_epoch() const {
    auto b = static_cast<int64_t>(model_.config().training.batch);
    return (static_cast<int64_t>(examples_.size()) + b - 1) / b;
  }

  // Full schedule. When out_dir is non-empty, writes metrics.jsonl plus one
  // checkpoint per epoch and a final checkpoint. `resume_from` restores
  // parameters and continues the step counter from the checkpoint's epoch.
  std::vector<TrainStepLog> train(const std::string& out_dir,
                                  const std::string& resume_from = "") {
    const auto& cfg = model_.config();
    const auto& tc = cfg.training;
    int64_t spe = steps_per_epoch();
    int64_t total_steps = tc.epochs * spe;
    nc::OptimizerConfig ocfg;
    ocfg.base_lr = tc.lr;
    // warm-up clamped to 10% of the run at desk scale
    ocfg.warmup_steps = std::min<int64_t>(tc.warmup_steps, std::max<int64_t>(1, total_steps / 10));
    ocfg.trust_ratio = tc.trust_ratio;
    ocfg.weight_decay = tc.weight_decay;
    nc::Optimizer<S> opt(model_.params(), ocfg);

    int64_t start_epoch = 0;
    if (!resume_from.empty()) {
      auto meta = model_.params().load(resume_from);
      start_epoch = meta.value("epoch", 0);
      opt.set_step_count(meta.value("step", start_epoch * spe));
    }

    std::ofstream metrics;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      metrics.open(out_dir + "/metrics.jsonl");
    }

    std::vector<TrainStepLog> curve;
    Rng shuffle_rng(tc.seed ^ 0x5eedU);
    for (int64_t epoch = start_epoch; epoch < tc.epochs; ++epoch) {
      std::vector<size_t> order(examples_.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng erng = shuffle_rng.fork(static_cast<uint64_t>(epoch));
      erng.shuffle(order);
      Rng aug_rng = shuffle_rng.fork(0x9000 + static_cast<uint64_t>(epoch));

      for (size_t off = 0; off < order.size(); off += static_cast<size_t>(tc.batch)) {
        size_t bend = std::min(order.size(), off + static_cast<size_t>(tc.batch));
        moe::RecordSet<S> records;
        Tensor<S> task_sum;
        double s1_sum = 0, s2_sum = 0, ar_sum = 0;
        for (size_t bi = off; bi < bend; ++bi) {
          auto [l1, l2, lar] = sample_forward(order[bi], records, aug_rng);
          s1_sum += static_cast<double>(l1.item());
          s2_sum += static_cast<double>(l2.item());
          ar_sum += static_cast<double>(lar.item());
          auto task = nc::add(nc::add(nc::scale(l1, tc.lambda1), nc::scale(l2, tc.lambda2)),
                              nc::scale(lar, tc.lambda3));
          task_sum = task_sum.defined() ? nc::add(task_sum, task) : task;
        }
        double inv_b = 1.0 / static_cast<double>(bend - off);
        auto aux = moe::aux_loss_mean(records, cfg.moe.experts, cfg.moe.tau);
        auto total =
            nc::add(nc::scale(task_sum, inv_b), nc::scale(aux, cfg.moe.lambda4));

        TrainStepLog log;
        log.step = opt.step_count();
        log.l_s1 = s1_sum * inv_b;
        log.l_s2 = s2_sum * inv_b;
        log.l_ar = ar_sum * inv_b;
        log.l_aux = static_cast<double>(aux.item());
        log.l_total = static_cast<double>(total.item());
        log.lr = opt.current_lr();
        if (!std::isfinite(log.l_total)) {
          std::ostringstream ids;
          for (size_t bi = off; bi < bend; ++bi)
            ids << (bi > off ? "," : "") << order[bi];
          throw std::runtime_error("train: non-finite loss at step " +
                                   std::to_string(log.step) + " (epoch " +
                                   std::to_string(epoch) + ", examples " + ids.str() + ")");
        }

        model_.params().zero_grad();
        nc::backward(total);
        opt.step();

        if (metrics.is_open()) {
          nlohmann::json j = {{"step", log.step},   {"l_s1", log.l_s1},   {"l_s2", log.l_s2},
                              {"l_ar", log.l_ar},   {"l_aux", log.l_aux}, {"l_total", log.l_total},
                              {"lr", log.lr}};
          metrics << j.dump() << "\n";
        }
        curve.push_back(log);
      }
      if (!out_dir.empty())
        save_checkpoint(out_dir + "/checkpoint_epoch_" + std::to_string(epoch + 1) + ".ckpt",
                        epoch + 1, opt.step_count());
    }
    if (!out_dir.empty()) save_checkpoint(out_dir + "/checkpoint_final.ckpt", tc.epochs,
                                          opt.step_count());
    return curve;
  }

  // One sample's loss terms; records merge into the caller's set.
  std::tuple<Tensor<S>, Tensor<S>, Tensor<S>> sample_forward(size_t example_idx,
                                                             moe::RecordSet<S>& records,
                                                             Rng& aug_rng) {
    const auto& cfg = model_.config();
    const auto& [di, ki] = examples_[example_idx];
    const auto& demo = demos_[di];
    const auto& kf = demo.keyframes[ki];

    PolicyInput in = make_policy_input(kf.obs, cfg.env.workspace, demo.skill);
    geom::Vec3 gt_pos = kf.next_action.position;
    geom::Quaternion gt_rot = kf.next_action.rotation;

    AugmentSample aug = draw_augmentation(aug_rng, cfg.training, cfg.env.workspace);
    if (aug.active) {
      in.cloud.transform(aug.pose);
      gt_pos = aug.pose.apply(gt_pos);
      gt_rot = (aug.pose.rotation * gt_rot).canonical();
      in.proprio.position = aug.pose.apply(in.proprio.position);
      in.proprio.rotation = (aug.pose.rotation * in.proprio.rotation).canonical();
    }

    ActionCommand gt_action;
    gt_action.position = gt_pos;
    gt_action.rotation = gt_rot;
    gt_action.gripper = kf.next_action.gripper;
    typename PolicyModel<S>::Teacher teacher{gt_pos,
                                             discretize_action(gt_action, cfg.model.rot_bins)};

    auto coarse = model_.coarse_stage(in, records, /*locate=*/false);
    auto fine = model_.fine_stage(in, gt_pos, records, teacher);

    std::vector<Tensor<S>> coarse_gt, fine_gt;
    for (size_t v = 0; v < model_.workspace_views().size(); ++v)
      coarse_gt.push_back(heatmap_tensor<S>(
          geom::gaussian_heatmap(gt_pos, model_.workspace_views()[v], static_cast<int>(v),
                                 kGtHeatmapSigmaPx)
              .map));
    auto cviews = model_.crop_views(fine.crop_box);
    for (size_t v = 0; v < cviews.size(); ++v)
      fine_gt.push_back(heatmap_tensor<S>(
          geom::gaussian_heatmap(gt_pos, cviews[v], static_cast<int>(v), kGtHeatmapSigmaPx).map));

    auto l1 = heatmap_loss(coarse.heatmap_tensors, coarse_gt);
    auto l2 = heatmap_loss(fine.stage.heatmap_tensors, fine_gt);
    auto lar = sequence_ce(fine.token_logits, teacher.tokens);
    return {l1, l2, lar};
  }

  const DemoSample& demo(size_t i) const { return demos_[i]; }
  const std::vector<std::pair<size_t, size_t>>& examples() const { return examples_; }

 private:
  void save_checkpoint(const std::string& path, int64_t epoch, int64_t step) {
    nlohmann::json meta = {{"epoch", epoch}, {"step", step}};
    model_.params().save(path, meta);
  }

  PolicyModel<S>& model_;
  std::vector<DemoSample> demos_;
  std::vector<std::pair<size_t, size_t>> examples_;  // (demo, keyframe)
};

}  // namespace atgmoe::pipeline
