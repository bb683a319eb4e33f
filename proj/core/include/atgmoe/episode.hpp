#pragma once

// Closed-loop inference: observe -> coarse localization -> fine stage with
// stepwise decoding -> execute, until the environment reports success, an
// action is rejected, or the step budget runs out.

#include <optional>
#include <string>
#include <vector>

#include "atgmoe/policy.hpp"
#include "atgmoe/simenv.hpp"

namespace atgmoe::pipeline {

struct EpisodeOptions {
  int max_steps = 10;
  std::string router_skill;  // empty: route with the episode's own skill
};

struct EpisodeOutcome {
  EpisodeTrace trace;
  EpisodeMetrics metrics;
  SceneState final_scene;
};

template <class S>
EpisodeOutcome run_episode(const PolicyModel<S>& model, SceneState scene,
                           const std::vector<geom::CameraModel>& cameras,
                           const Vocabulary& vocab, const EpisodeOptions& opt = {}) {
  nc::NoGradGuard no_grad;
  const auto& cfg = model.config();
  std::string route_as = opt.router_skill.empty() ? scene.skill : opt.router_skill;

  EpisodeOutcome out;
  for (int s = 0; s < opt.max_steps; ++s) {
    Observation obs = observe(scene, cameras, vocab, cfg.model.instr_len);
    ActionCommand action;
    try {
      PolicyInput in = make_policy_input(obs, cfg.env.workspace, route_as);
      moe::RecordSet<S> records;
      auto coarse = model.coarse_stage(in, records);
      auto fine = model.fine_stage(in, coarse.tri.point, records);
      action = dediscretize_action(fine.tokens, fine.operation_point, cfg.model.rot_bins);
    } catch (const std::exception&) {
      // an unusable prediction (empty crop, degenerate geometry) ends the
      // episode as a failure
      break;
    }
    StepEvents ev = step(scene, action);
    out.trace.actions.push_back(action);
    out.trace.events.push_back(ev);
    if (ev.rejected) {
      out.trace.success_after.push_back(false);
      break;
    }
    if (ev.attached && scene.held_part == scene.target_part) out.trace.grasped_target = true;
    bool ok = goal_satisfied(scene);
    out.trace.success_after.push_back(ok);
    if (ok) break;
  }
  out.metrics = evaluate(out.trace, scene);
  out.final_scene = std::move(scene);
  return out;
}

}  // namespace atgmoe::pipeline
