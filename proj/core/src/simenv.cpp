#include "atgmoe/simenv.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atgmoe/image_io.hpp"

namespace atgmoe {

namespace {

constexpr double kCollisionInflation = 0.005;
constexpr double kGoalExemptionRadius = 0.03;
constexpr double kAttachRadius = 0.01;

// Segment vs axis-aligned box (slab test).
bool segment_hits_box(const geom::Vec3& a, const geom::Vec3& b, const geom::Box3& box) {
  geom::Vec3 d = b - a;
  double tmin = 0.0, tmax = 1.0;
  const double av[3] = {a.x, a.y, a.z};
  const double dv[3] = {d.x, d.y, d.z};
  const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int i = 0; i < 3; ++i) {
    if (std::abs(dv[i]) < 1e-12) {
      if (av[i] < lo[i] || av[i] > hi[i]) return false;
      continue;
    }
    double t1 = (lo[i] - av[i]) / dv[i];
    double t2 = (hi[i] - av[i]) / dv[i];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  return true;
}

}  // namespace

std::vector<geom::CameraModel> physical_cameras(int count, int width, int height,
                                                const geom::Box3& workspace) {
  if (count != 3 && count != 4)
    throw std::invalid_argument("physical_cameras: count must be 3 or 4");
  geom::Vec3 c = workspace.center();
  geom::Vec3 target{c.x, c.y, workspace.lo.z + 0.08};
  double radius = workspace.max_side() * 0.85;
  double zcam = workspace.lo.z + 0.55;
  double f = 0.9 * std::min(width, height);
  std::vector<geom::CameraModel> cams;
  const double az[3] = {90.0, 210.0, 330.0};
  for (int i = 0; i < 3; ++i) {
    double a = az[i] * 3.14159265358979323846 / 180.0;
    geom::Vec3 eye{c.x + radius * std::cos(a), c.y + radius * std::sin(a), zcam};
    cams.push_back(geom::CameraModel::pinhole(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width,
                                              height, geom::CameraModel::look_at(eye, target)));
  }
  if (count == 4) {
    geom::Vec3 eye{c.x, c.y, workspace.hi.z + 0.6};
    cams.push_back(geom::CameraModel::pinhole(f, f, (width - 1) / 2.0, (height - 1) / 2.0, width,
                                              height, geom::CameraModel::look_at(eye, target)));
  }
  return cams;
}

Observation observe(const SceneState& scene, const std::vector<geom::CameraModel>& cameras,
                    const Vocabulary& vocab, int64_t instr_len) {
  geom::PointCloud surfaces = sample_scene_surfaces(scene);
  Observation obs;
  for (const auto& cam : cameras) {
    CameraFrame frame;
    frame.model = cam;
    frame.rgb.width = cam.width;
    frame.rgb.height = cam.height;
    frame.rgb.pixels.assign(static_cast<size_t>(cam.width) * cam.height, geom::Rgb{0, 0, 0});
    frame.depth.width = cam.width;
    frame.depth.height = cam.height;
    frame.depth.depth.assign(static_cast<size_t>(cam.width) * cam.height, 0.0);
    std::vector<double> zbuf(static_cast<size_t>(cam.width) * cam.height,
                             std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < surfaces.size(); ++i) {
      auto px = cam.project(surfaces.positions[i]);
      if (!px) continue;
      int u = static_cast<int>(std::lround(px->u));
      int v = static_cast<int>(std::lround(px->v));
      if (u < 0 || u >= cam.width || v < 0 || v >= cam.height) continue;
      size_t k = static_cast<size_t>(v) * cam.width + u;
      if (px->depth < zbuf[k]) {
        zbuf[k] = px->depth;
        frame.rgb.pixels[k] = surfaces.colors[i];
        frame.depth.depth[k] = px->depth;
      }
    }
    // match the on-disk quantization so live and reloaded observations agree
    geom::quantize_rgb8(frame.rgb);
    geom::quantize_depth(frame.depth);
    obs.cameras.push_back(std::move(frame));
  }
  auto [ids, len] = vocab.encode(scene.instruction, instr_len);
  obs.instruction_ids = std::move(ids);
  obs.instruction_len = len;
  obs.proprio.position = scene.tcp.translation;
  obs.proprio.rotation = scene.tcp.rotation.canonical();
  obs.proprio.gripper = scene.gripper;
  return obs;
}

StepEvents step(SceneState& scene, const ActionCommand& action) {
  StepEvents ev;
  if (!scene.workspace.contains(action.position)) {
    ev.rejected = true;
    return ev;
  }
  geom::Vec3 from = scene.tcp.translation;
  geom::Vec3 to = action.position;

  bool near_goal_approach =
      (to - scene.goal_position).norm() <
      kGoalExemptionRadius + SceneState::grasp_offset_z(scene.parts[0].spec);

  // obstacles: tray, fixture, and all parts except the held one; near-goal
  // approaches exempt the fixture and anything already sitting at the goal
  std::vector<geom::Box3> obstacles;
  {
    geom::Vec3 th = scene.tray_size * 0.5;
    obstacles.push_back(
        geom::Box3{scene.tray.translation - th, scene.tray.translation + th}.inflated(
            kCollisionInflation));
    if (!near_goal_approach) {
      geom::Vec3 fh = scene.fixture_size * 0.5;
      obstacles.push_back(
          geom::Box3{scene.fixture.translation - fh, scene.fixture.translation + fh}.inflated(
              kCollisionInflation));
    }
    for (size_t i = 0; i < scene.parts.size(); ++i) {
      if (static_cast<int>(i) == scene.held_part) continue;
      if (near_goal_approach &&
          (scene.parts[i].pose.translation - scene.goal_position).norm() < kGoalExemptionRadius)
        continue;
      obstacles.push_back(scene.part_aabb(static_cast<int>(i)).inflated(kCollisionInflation));
    }
  }
  for (const auto& box : obstacles)
    if (segment_hits_box(from, to, box)) {
      ev.collision = true;
      break;
    }

  scene.tcp = {action.rotation.canonical(), to};
  if (scene.held_part >= 0) {
    auto& part = scene.parts[static_cast<size_t>(scene.held_part)];
    part.pose = scene.tcp.compose(scene.held_offset);
  }

  bool want_closed = action.gripper == 1;
  bool is_closed = scene.gripper < 0.5;
  if (want_closed && !is_closed) {
    scene.gripper = 0.0;
    // attach the nearest part whose grasp point lies within reach
    int best = -1;
    double best_d = kAttachRadius;
    for (size_t i = 0; i < scene.parts.size(); ++i) {
      double d = (scene.grasp_point(static_cast<int>(i)) - scene.tcp.translation).norm();
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      scene.held_part = best;
      scene.held_offset = scene.tcp.inverse().compose(scene.parts[static_cast<size_t>(best)].pose);
      ev.attached = true;
    }
  } else if (!want_closed && is_closed) {
    scene.gripper = 1.0;
    if (scene.held_part >= 0) {
      scene.held_part = -1;
      ev.detached = true;
    }
    // opening with nothing held is a no-op
  } else {
    scene.gripper = want_closed ? 0.0 : 1.0;
  }
  return ev;
}

bool goal_satisfied(const SceneState& scene) {
  const auto& spec = skill_registry().at(scene.skill);
  const auto& part = scene.parts[static_cast<size_t>(scene.target_part)];
  if (scene.held_part == scene.target_part) return false;  // must be released
  double pos_err = (part.pose.translation - scene.goal_position).norm();
  double rot_err = part.pose.rotation.rotation_angle_to(scene.goal_rotation);
  return pos_err <= spec.pos_tolerance && rot_err <= spec.rot_tolerance;
}

EpisodeMetrics evaluate(const EpisodeTrace& trace, const SceneState& scene) {
  (void)scene;
  EpisodeMetrics m;
  m.grasp_success = trace.grasped_target;
  for (size_t i = 0; i < trace.events.size(); ++i) m.collision |= trace.events[i].collision;
  for (size_t i = 0; i < trace.success_after.size(); ++i)
    if (trace.success_after[i]) {
      m.overall_success = true;
      m.steps_to_success = static_cast<int>(i) + 1;
      break;
    }
  // overall success without a grasp is impossible by construction; keep the
  // invariant explicit anyway
  if (m.overall_success) m.grasp_success = true;
  return m;
}

}  // namespace atgmoe
