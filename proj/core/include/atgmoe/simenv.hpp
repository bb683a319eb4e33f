#pragma once

// Kinematic execution and sensing for the toy environment: multi-camera
// RGB-D observation, teleport stepping with swept-segment collision checks,
// per-step success evaluation, and the four episode metrics.

#include <optional>
#include <string>
#include <vector>

#include "atgmoe/action.hpp"
#include "atgmoe/observation.hpp"
#include "atgmoe/scene.hpp"
#include "atgmoe/vocab.hpp"

namespace atgmoe {

struct StepEvents {
  bool rejected = false;   // target outside the workspace; scene unchanged
  bool collision = false;  // swept TCP segment hit an inflated obstacle box
  bool attached = false;
  bool detached = false;
};

struct EpisodeMetrics {
  bool grasp_success = false;
  bool overall_success = false;
  bool collision = false;
  std::optional<int> steps_to_success;  // 1-based index of the succeeding action
};

struct EpisodeTrace {
  std::vector<ActionCommand> actions;
  std::vector<StepEvents> events;
  std::vector<bool> success_after;  // goal satisfied after executing action i
  bool grasped_target = false;
};

// Physical camera ring (3 cameras; the 4-camera variant adds a top-down view).
std::vector<geom::CameraModel> physical_cameras(int count, int width, int height,
                                                const geom::Box3& workspace);

// Renders the scene into every camera (quantized to the on-disk 8-bit /
// 0.1 mm lattice) and attaches instruction tokens and proprioception.
Observation observe(const SceneState& scene, const std::vector<geom::CameraModel>& cameras,
                    const Vocabulary& vocab, int64_t instr_len);

// Teleports the TCP along a straight segment, updating attachment and
// collision state. Gripper closes within 1 cm of a part's grasp point.
StepEvents step(SceneState& scene, const ActionCommand& action);

// Goal predicate for the current scene state (correct part at the goal
// within per-skill tolerances and released).
bool goal_satisfied(const SceneState& scene);

EpisodeMetrics evaluate(const EpisodeTrace& trace, const SceneState& scene);

}  // namespace atgmoe
