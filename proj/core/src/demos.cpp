#include "atgmoe/demos.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "atgmoe/image_io.hpp"
#include "atgmoe/random.hpp"
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace atgmoe {

namespace {

constexpr double kPreGraspLift = 0.08;
constexpr double kTransitLift = 0.12;

json pose_to_json(const geom::Pose& p) {
  return {{"q", {p.rotation.w, p.rotation.x, p.rotation.y, p.rotation.z}},
          {"t", {p.translation.x, p.translation.y, p.translation.z}}};
}

geom::Pose pose_from_json(const json& j) {
  auto q = j.at("q").get<std::vector<double>>();
  auto t = j.at("t").get<std::vector<double>>();
  return {geom::Quaternion{q[0], q[1], q[2], q[3]}.canonical(), {t[0], t[1], t[2]}};
}

json camera_to_json(const geom::CameraModel& c) {
  return {{"kind", c.kind == geom::ProjectionKind::Pinhole ? "pinhole" : "orthographic"},
          {"fx", c.fx},
          {"fy", c.fy},
          {"meters_per_px", c.meters_per_px},
          {"cx", c.cx},
          {"cy", c.cy},
          {"width", c.width},
          {"height", c.height},
          {"pose", pose_to_json(c.pose)}};
}

geom::CameraModel camera_from_json(const json& j) {
  geom::CameraModel c;
  c.kind = j.at("kind").get<std::string>() == "pinhole" ? geom::ProjectionKind::Pinhole
                                                        : geom::ProjectionKind::Orthographic;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.meters_per_px = j.at("meters_per_px").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.pose = pose_from_json(j.at("pose"));
  return c;
}

json action_to_json(const ActionCommand& a) {
  return {{"p", {a.position.x, a.position.y, a.position.z}},
          {"r", {a.rotation.w, a.rotation.x, a.rotation.y, a.rotation.z}},
          {"g", a.gripper}};
}

ActionCommand action_from_json(const json& j) {
  auto p = j.at("p").get<std::vector<double>>();
  auto r = j.at("r").get<std::vector<double>>();
  ActionCommand a;
  a.position = {p[0], p[1], p[2]};
  a.rotation = geom::Quaternion{r[0], r[1], r[2], r[3]}.canonical();
  a.gripper = j.at("g").get<int>();
  return a;
}

}  // namespace

std::vector<ActionCommand> plan_keyframes(const SceneState& scene) {
  const auto& spec = skill_registry().at(scene.skill);
  const auto& part = scene.parts[static_cast<size_t>(scene.target_part)];
  double dz = SceneState::grasp_offset_z(part.spec);

  geom::Quaternion q_grasp =
      spec.align_yaw ? part.pose.rotation.canonical() : geom::Quaternion::identity();
  geom::Quaternion q_goal = scene.goal_rotation;

  geom::Vec3 grasp_pt = scene.grasp_point(scene.target_part);
  geom::Vec3 goal_tcp = scene.goal_position + geom::Vec3{0, 0, dz};

  std::vector<ActionCommand> plan = {
      {grasp_pt + geom::Vec3{0, 0, kPreGraspLift}, q_grasp, 0},
      {grasp_pt, q_grasp, 1},
      {grasp_pt + geom::Vec3{0, 0, kTransitLift}, q_grasp, 1},
      {goal_tcp + geom::Vec3{0, 0, kPreGraspLift}, q_goal, 1},
      {goal_tcp, q_goal, 0},
  };
  for (const auto& a : plan)
    if (!scene.workspace.contains(a.position))
      throw std::runtime_error("script_demonstration: goal unreachable (keyframe outside workspace)");
  return plan;
}

DemoSample script_demonstration(SceneState scene, const std::vector<geom::CameraModel>& cameras,
                                const Vocabulary& vocab, int64_t instr_len) {
  auto plan = plan_keyframes(scene);
  DemoSample demo;
  demo.skill = scene.skill;
  demo.seed = scene.seed;
  demo.instruction = scene.instruction;
  auto [ids, len] = vocab.encode(scene.instruction, instr_len);
  demo.instruction_ids = ids;
  demo.instruction_len = len;

  for (size_t i = 0; i < plan.size(); ++i) {
    StepEvents ev = step(scene, plan[i]);
    if (ev.rejected) throw std::runtime_error("script_demonstration: planned action rejected");
    Keyframe kf;
    kf.obs = observe(scene, cameras, vocab, instr_len);
    if (i + 1 < plan.size()) {
      kf.next_action = plan[i + 1];
    } else {
      kf.next_action = plan.back();  // terminal hold: stay at the release pose
      kf.next_action.gripper = 0;
    }
    demo.keyframes.push_back(std::move(kf));
  }
  return demo;
}

Vocabulary default_vocabulary(int64_t size) {
  return Vocabulary::build(instruction_words(), static_cast<size_t>(size));
}

DatasetInfo write_demo_dataset(const std::string& dir, const ExperimentConfig& cfg,
                               uint64_t seed) {
  fs::create_directories(dir);
  Vocabulary vocab = default_vocabulary(cfg.model.vocab_size);
  vocab.save((fs::path(dir) / "vocab.txt").string());
  auto cameras = physical_cameras(static_cast<int>(cfg.env.cameras),
                                  static_cast<int>(cfg.env.camera_w),
                                  static_cast<int>(cfg.env.camera_h), cfg.env.workspace);

  for (const auto& skill : cfg.env.skills) {
    fs::path skill_dir = fs::path(dir) / skill;
    fs::create_directories(skill_dir);
    for (int64_t d = 0; d < cfg.env.demo_count; ++d) {
      uint64_t demo_seed = seed * 100003ULL + static_cast<uint64_t>(d);
      SceneState scene = generate_scene(skill, Difficulty::Easy, demo_seed);
      DemoSample demo = script_demonstration(scene, cameras, vocab, cfg.model.instr_len);

      std::ostringstream name;
      name << "demo_" << std::setw(4) << std::setfill('0') << d;
      fs::path demo_dir = skill_dir / name.str();
      fs::create_directories(demo_dir);

      json meta;
      meta["skill"] = demo.skill;
      meta["seed"] = demo.seed;
      meta["instruction"] = demo.instruction;
      meta["instruction_ids"] = demo.instruction_ids;
      meta["instruction_len"] = demo.instruction_len;
      json kfs = json::array();
      for (size_t k = 0; k < demo.keyframes.size(); ++k) {
        const auto& kf = demo.keyframes[k];
        json jk;
        jk["action"] = action_to_json(kf.next_action);
        jk["proprio"] = {{"p",
                          {kf.obs.proprio.position.x, kf.obs.proprio.position.y,
                           kf.obs.proprio.position.z}},
                         {"r",
                          {kf.obs.proprio.rotation.w, kf.obs.proprio.rotation.x,
                           kf.obs.proprio.rotation.y, kf.obs.proprio.rotation.z}},
                         {"g", kf.obs.proprio.gripper}};
        json cams = json::array();
        for (size_t c = 0; c < kf.obs.cameras.size(); ++c) {
          std::ostringstream base;
          base << "kf" << k << "_cam" << c;
          std::string rgb_name = base.str() + ".ppm";
          std::string depth_name = base.str() + ".pgm";
          geom::write_ppm((demo_dir / rgb_name).string(), kf.obs.cameras[c].rgb);
          geom::write_depth_pgm((demo_dir / depth_name).string(), kf.obs.cameras[c].depth);
          cams.push_back({{"rgb", rgb_name},
                          {"depth", depth_name},
                          {"model", camera_to_json(kf.obs.cameras[c].model)}});
        }
        jk["cameras"] = cams;
        kfs.push_back(jk);
      }
      meta["keyframes"] = kfs;
      std::ofstream f(demo_dir / "demo.json");
      f << meta.dump(1) << "\n";
    }
  }

  DatasetInfo info;
  info.env_hash = cfg.env_hash();
  info.seed = seed;
  info.demos_per_skill = cfg.env.demo_count;
  info.skills = cfg.env.skills;
  json manifest;
  manifest["env_hash"] = info.env_hash;
  manifest["seed"] = info.seed;
  manifest["demos_per_skill"] = info.demos_per_skill;
  manifest["skills"] = info.skills;
  manifest["vocab"] = "vocab.txt";
  std::ofstream f(fs::path(dir) / "manifest.json");
  f << manifest.dump(2) << "\n";
  return info;
}

DatasetInfo read_dataset_manifest(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json");
  if (!f) throw std::runtime_error("dataset manifest missing in " + dir);
  json manifest;
  f >> manifest;
  DatasetInfo info;
  info.env_hash = manifest.at("env_hash").get<std::string>();
  info.seed = manifest.at("seed").get<uint64_t>();
  info.demos_per_skill = manifest.at("demos_per_skill").get<int64_t>();
  info.skills = manifest.at("skills").get<std::vector<std::string>>();
  return info;
}

std::vector<DemoSample> load_demo_dataset(const std::string& dir,
                                          const std::vector<std::string>& skills) {
  DatasetInfo info = read_dataset_manifest(dir);
  std::vector<std::string> wanted = skills.empty() ? info.skills : skills;
  std::vector<DemoSample> demos;
  for (const auto& skill : wanted) {
    for (int64_t d = 0; d < info.demos_per_skill; ++d) {
      std::ostringstream name;
      name << "demo_" << std::setw(4) << std::setfill('0') << d;
      fs::path demo_dir = fs::path(dir) / skill / name.str();
      std::ifstream f(demo_dir / "demo.json");
      if (!f) throw std::runtime_error("missing demo " + (demo_dir / "demo.json").string());
      json meta;
      f >> meta;
      DemoSample demo;
      demo.skill = meta.at("skill").get<std::string>();
      demo.seed = meta.at("seed").get<uint64_t>();
      demo.instruction = meta.at("instruction").get<std::string>();
      demo.instruction_ids = meta.at("instruction_ids").get<std::vector<int64_t>>();
      demo.instruction_len = meta.at("instruction_len").get<int64_t>();
      for (const auto& jk : meta.at("keyframes")) {
        Keyframe kf;
        kf.next_action = action_from_json(jk.at("action"));
        auto p = jk.at("proprio").at("p").get<std::vector<double>>();
        auto r = jk.at("proprio").at("r").get<std::vector<double>>();
        kf.obs.proprio.position = {p[0], p[1], p[2]};
        kf.obs.proprio.rotation = geom::Quaternion{r[0], r[1], r[2], r[3]}.canonical();
        kf.obs.proprio.gripper = jk.at("proprio").at("g").get<double>();
        kf.obs.instruction_ids = demo.instruction_ids;
        kf.obs.instruction_len = demo.instruction_len;
        for (const auto& jc : jk.at("cameras")) {
          CameraFrame frame;
          frame.model = camera_from_json(jc.at("model"));
          frame.rgb = geom::read_ppm((demo_dir / jc.at("rgb").get<std::string>()).string());
          frame.depth =
              geom::read_depth_pgm((demo_dir / jc.at("depth").get<std::string>()).string());
          kf.obs.cameras.push_back(std::move(frame));
        }
        demo.keyframes.push_back(std::move(kf));
      }
      demos.push_back(std::move(demo));
    }
  }
  return demos;
}

}  // namespace atgmoe
