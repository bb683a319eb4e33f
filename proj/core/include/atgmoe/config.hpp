#pragma once

// Experiment configuration: strict-schema JSON with explicit defaults.
// Unknown keys are rejected at every nesting level so typos fail loudly
// instead of silently falling back to defaults.

#include <cstdint>
#include <string>
#include <vector>

#include "atgmoe/geometry.hpp"
#include <json.hpp>

namespace atgmoe {

struct ModelConfig {
  int64_t image_h = 64;       // virtual view / heatmap height H
  int64_t image_w = 64;       // width W
  int64_t patch = 8;          // P (patch embedder kernel and stride)
  int64_t channels = 32;      // C; joint width is 2C
  int64_t d_attn = 64;        // fusion attention width
  int64_t heads = 4;
  int64_t depth = 2;          // decoder blocks per CCMT instance
  int64_t rot_bins = 32;      // B
  int64_t seq_tokens = 5;     // K (4 rotation tokens + gripper)
  int64_t chunks = 2;         // M
  int64_t instr_len = 8;      // L
  int64_t vocab_size = 64;
  int64_t virtual_views = 3;  // V
};

struct MoeConfig {
  int64_t experts = 4;   // E
  int64_t k_top = 1;
  int64_t shared = 1;    // S
  double tau = 0.25;     // balance threshold, 1/E by default
  double lambda4 = 0.01;
  int64_t hidden = 128;  // expert MLP hidden width
};

struct TrainingConfig {
  double lr = 5e-5;
  int64_t warmup_steps = 2000;  // clamped to 10% of total steps at run time
  int64_t epochs = 8;
  int64_t batch = 36;
  uint64_t seed = 1;
  double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0;
  bool augment_translation = true;
  bool augment_yaw = true;
  double weight_decay = 0.0;
  bool trust_ratio = true;  // LAMB; false falls back to Adam
};

struct EnvConfig {
  std::vector<std::string> skills = {"place_cube_pad"};
  int64_t cameras = 3;  // physical RGB-D cameras (3 or 4)
  int64_t camera_w = 96, camera_h = 96;
  geom::Box3 workspace{{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.5}};
  int64_t demo_count = 96;
};

struct PathsConfig {
  std::string dataset_dir;
  std::string out_dir;
};

struct ExperimentConfig {
  ModelConfig model;
  MoeConfig moe;
  TrainingConfig training;
  EnvConfig env;
  PathsConfig paths;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;
  void save(const std::string& path) const;

  // Divisibility, positivity, and registered-skill checks; throws on the
  // first violation.
  void validate() const;

  // Stable FNV-1a hash of the env section; datasets record it and training
  // refuses to run against a dataset generated under a different env.
  std::string env_hash() const;
  // Hash of the entire config, embedded in reports for provenance.
  std::string config_hash() const;
};

}  // namespace atgmoe
