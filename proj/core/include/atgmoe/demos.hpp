#pragma once

// Scripted keyframe demonstrations and the on-disk demo dataset.
//
// A demonstration is five keyframes (pre-grasp, grasp, lift, pre-place,
// place/release). Each keyframe stores the Observation at that state and
// the ground-truth ActionCommand for the next keyframe; the final keyframe
// targets a terminal hold of the release pose.
//
// Dataset layout: one directory per skill, one subdirectory per demo with a
// JSON manifest plus raw PPM/PGM image blobs, a top-level manifest.json
// (env hash, seed, counts), and the vocabulary file.

#include <string>
#include <vector>

#include "atgmoe/config.hpp"
#include "atgmoe/observation.hpp"
#include "atgmoe/scene.hpp"
#include "atgmoe/simenv.hpp"
#include "atgmoe/vocab.hpp"

namespace atgmoe {

struct Keyframe {
  Observation obs;
  ActionCommand next_action;
};

struct DemoSample {
  std::string skill;
  uint64_t seed = 0;
  std::string instruction;
  std::vector<int64_t> instruction_ids;
  int64_t instruction_len = 0;
  std::vector<Keyframe> keyframes;  // exactly 5
};

// Executes the analytic plan through env.step and records observations.
// Throws if the goal is unreachable (outside the workspace).
DemoSample script_demonstration(SceneState scene, const std::vector<geom::CameraModel>& cameras,
                                const Vocabulary& vocab, int64_t instr_len);

// The five planned TCP commands for a scene (k1..k5), before execution.
std::vector<ActionCommand> plan_keyframes(const SceneState& scene);

// Default vocabulary for the toy instruction set.
Vocabulary default_vocabulary(int64_t size);

struct DatasetInfo {
  std::string env_hash;
  uint64_t seed = 0;
  int64_t demos_per_skill = 0;
  std::vector<std::string> skills;
};

// Writes `count` demos per skill under `dir` (created if needed) together
// with manifest.json and vocab.txt. Fully deterministic in (config, seed).
DatasetInfo write_demo_dataset(const std::string& dir, const ExperimentConfig& cfg,
                               uint64_t seed);

DatasetInfo read_dataset_manifest(const std::string& dir);

// Loads demos for the given skills (all demos when `skills` is empty).
std::vector<DemoSample> load_demo_dataset(const std::string& dir,
                                          const std::vector<std::string>& skills = {});

}  // namespace atgmoe
