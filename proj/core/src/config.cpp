#include "atgmoe/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "atgmoe/random.hpp"
#include "atgmoe/skills.hpp"

namespace atgmoe {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument(std::string("config: unknown key '") + it.key() + "' in " +
                                  section);
}

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"model", "moe", "training", "env", "paths"}, "top level");
  ExperimentConfig c;
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m,
                   {"image_h", "image_w", "patch", "channels", "d_attn", "heads", "depth",
                    "rot_bins", "seq_tokens", "chunks", "instr_len", "vocab_size", "virtual_views"},
                   "model");
    get_to(m, "image_h", c.model.image_h);
    get_to(m, "image_w", c.model.image_w);
    get_to(m, "patch", c.model.patch);
    get_to(m, "channels", c.model.channels);
    get_to(m, "d_attn", c.model.d_attn);
    get_to(m, "heads", c.model.heads);
    get_to(m, "depth", c.model.depth);
    get_to(m, "rot_bins", c.model.rot_bins);
    get_to(m, "seq_tokens", c.model.seq_tokens);
    get_to(m, "chunks", c.model.chunks);
    get_to(m, "instr_len", c.model.instr_len);
    get_to(m, "vocab_size", c.model.vocab_size);
    get_to(m, "virtual_views", c.model.virtual_views);
  }
  if (j.contains("moe")) {
    const auto& m = j.at("moe");
    reject_unknown(m, {"experts", "k_top", "shared", "tau", "lambda4", "hidden"}, "moe");
    get_to(m, "experts", c.moe.experts);
    get_to(m, "k_top", c.moe.k_top);
    get_to(m, "shared", c.moe.shared);
    get_to(m, "tau", c.moe.tau);
    get_to(m, "lambda4", c.moe.lambda4);
    get_to(m, "hidden", c.moe.hidden);
  }
  if (j.contains("training")) {
    const auto& t = j.at("training");
    reject_unknown(t,
                   {"lr", "warmup_steps", "epochs", "batch", "seed", "lambda1", "lambda2",
                    "lambda3", "augment_translation", "augment_yaw", "weight_decay",
                    "trust_ratio"},
                   "training");
    get_to(t, "lr", c.training.lr);
    get_to(t, "warmup_steps", c.training.warmup_steps);
    get_to(t, "epochs", c.training.epochs);
    get_to(t, "batch", c.training.batch);
    get_to(t, "seed", c.training.seed);
    get_to(t, "lambda1", c.training.lambda1);
    get_to(t, "lambda2", c.training.lambda2);
    get_to(t, "lambda3", c.training.lambda3);
    get_to(t, "augment_translation", c.training.augment_translation);
    get_to(t, "augment_yaw", c.training.augment_yaw);
    get_to(t, "weight_decay", c.training.weight_decay);
    get_to(t, "trust_ratio", c.training.trust_ratio);
  }
  if (j.contains("env")) {
    const auto& e = j.at("env");
    reject_unknown(e, {"skills", "cameras", "camera_w", "camera_h", "workspace", "demo_count"},
                   "env");
    get_to(e, "skills", c.env.skills);
    get_to(e, "cameras", c.env.cameras);
    get_to(e, "camera_w", c.env.camera_w);
    get_to(e, "camera_h", c.env.camera_h);
    if (e.contains("workspace")) {
      const auto& w = e.at("workspace");
      reject_unknown(w, {"lo", "hi"}, "env.workspace");
      auto lo = w.at("lo").get<std::vector<double>>();
      auto hi = w.at("hi").get<std::vector<double>>();
      if (lo.size() != 3 || hi.size() != 3)
        throw std::invalid_argument("config: workspace lo/hi must be 3-vectors");
      c.env.workspace = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
    }
    get_to(e, "demo_count", c.env.demo_count);
  }
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"dataset_dir", "out_dir"}, "paths");
    get_to(p, "dataset_dir", c.paths.dataset_dir);
    get_to(p, "out_dir", c.paths.out_dir);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read config " + path);
  json j;
  f >> j;
  return from_json(j);
}

nlohmann::json ExperimentConfig::to_json() const {
  json j;
  j["model"] = {{"image_h", model.image_h},
                {"image_w", model.image_w},
                {"patch", model.patch},
                {"channels", model.channels},
                {"d_attn", model.d_attn},
                {"heads", model.heads},
                {"depth", model.depth},
                {"rot_bins", model.rot_bins},
                {"seq_tokens", model.seq_tokens},
                {"chunks", model.chunks},
                {"instr_len", model.instr_len},
                {"vocab_size", model.vocab_size},
                {"virtual_views", model.virtual_views}};
  j["moe"] = {{"experts", moe.experts}, {"k_top", moe.k_top},   {"shared", moe.shared},
              {"tau", moe.tau},         {"lambda4", moe.lambda4}, {"hidden", moe.hidden}};
  j["training"] = {{"lr", training.lr},
                   {"warmup_steps", training.warmup_steps},
                   {"epochs", training.epochs},
                   {"batch", training.batch},
                   {"seed", training.seed},
                   {"lambda1", training.lambda1},
                   {"lambda2", training.lambda2},
                   {"lambda3", training.lambda3},
                   {"augment_translation", training.augment_translation},
                   {"augment_yaw", training.augment_yaw},
                   {"weight_decay", training.weight_decay},
                   {"trust_ratio", training.trust_ratio}};
  j["env"] = {{"skills", env.skills},
              {"cameras", env.cameras},
              {"camera_w", env.camera_w},
              {"camera_h", env.camera_h},
              {"workspace",
               {{"lo", {env.workspace.lo.x, env.workspace.lo.y, env.workspace.lo.z}},
                {"hi", {env.workspace.hi.x, env.workspace.hi.y, env.workspace.hi.z}}}},
              {"demo_count", env.demo_count}};
  j["paths"] = {{"dataset_dir", paths.dataset_dir}, {"out_dir", paths.out_dir}};
  return j;
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write config " + path);
  f << to_json().dump(2) << "\n";
}

void ExperimentConfig::validate() const {
  auto req = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(std::string("config: ") + msg);
  };
  req(model.image_h > 0 && model.image_w > 0, "image dims must be positive");
  req(model.patch > 0 && model.image_h % model.patch == 0 && model.image_w % model.patch == 0,
      "image dims must be divisible by patch size");
  // The heatmap head upsamples 8x through three fixed stride-2 stages.
  req((model.image_h / model.patch) * 8 == model.image_h &&
          (model.image_w / model.patch) * 8 == model.image_w,
      "heatmap head upsamples 8x: image dims must equal 8 * (dims / patch), i.e. patch = 8");
  req(model.channels > 0 && model.channels % 4 == 0, "channels must be a positive multiple of 4");
  req(model.d_attn > 0 && model.heads > 0 && model.d_attn % model.heads == 0,
      "d_attn must be divisible by heads");
  req((2 * model.channels) % model.heads == 0, "2*channels must be divisible by heads");
  req(model.depth >= 1, "depth must be >= 1");
  req(model.rot_bins >= 2, "rot_bins must be >= 2");
  req(model.seq_tokens == 5, "seq_tokens is fixed at 5 (4 rotation tokens + gripper)");
  req(model.chunks == 2, "chunks is fixed at 2 (rotation, gripper)");
  req(model.instr_len >= 1, "instr_len must be >= 1");
  req(model.vocab_size >= 2, "vocab_size must cover <pad> and <unk>");
  req(model.virtual_views >= 2 && model.virtual_views <= 3, "virtual_views must be 2 or 3");
  req(moe.experts >= 1, "experts must be >= 1");
  req(moe.k_top >= 1 && moe.k_top <= moe.experts, "k_top must lie in [1, experts]");
  req(moe.shared >= 1, "shared expert count must be >= 1");
  req(moe.tau > 0 && moe.tau < 1, "tau must lie in (0, 1)");
  req(moe.hidden >= 1, "moe hidden width must be >= 1");
  req(training.lr > 0, "lr must be positive");
  req(training.warmup_steps >= 0, "warmup_steps must be >= 0");
  req(training.epochs >= 1 && training.batch >= 1, "epochs and batch must be >= 1");
  req(env.cameras == 3 || env.cameras == 4, "cameras must be 3 or 4");
  req(env.camera_w > 0 && env.camera_h > 0, "camera resolution must be positive");
  req(env.workspace.valid(), "workspace box is degenerate");
  req(env.demo_count >= 1, "demo_count must be >= 1");
  req(!env.skills.empty(), "at least one skill required");
  for (const auto& s : env.skills)
    if (!skill_registry().count(s))
      throw std::invalid_argument("config: unknown skill '" + s + "'");
}

std::string ExperimentConfig::env_hash() const {
  std::ostringstream ss;
  ss << std::hex << fnv1a64(to_json()["env"].dump());
  return ss.str();
}

std::string ExperimentConfig::config_hash() const {
  std::ostringstream ss;
  ss << std::hex << fnv1a64(to_json().dump());
  return ss.str();
}

}  // namespace atgmoe
