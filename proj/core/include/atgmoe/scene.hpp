#pragma once

// Deterministic synthetic tabletop: a tray carrying the target part plus
// distractors, a fixture with per-skill goal sockets, and a teleported TCP.
// Stands in for the Unity rig; execution is kinematic (no dynamics).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atgmoe/geometry.hpp"
#include "atgmoe/pointcloud.hpp"
#include "atgmoe/skills.hpp"

namespace atgmoe {

enum class Difficulty { Easy, Hard };

struct PartInstance {
  PartSpec spec;
  geom::Pose pose;  // part center in base frame
};

struct SceneState {
  std::string skill;
  geom::Box3 workspace;
  uint64_t seed = 0;

  geom::Pose tray;
  geom::Vec3 tray_size;
  geom::Pose fixture;
  geom::Vec3 fixture_size;

  std::vector<PartInstance> parts;  // parts[0] is the target
  int target_part = 0;

  geom::Vec3 goal_position;      // target part center when assembled
  geom::Quaternion goal_rotation;

  geom::Pose tcp;
  double gripper = 1.0;  // 1 open, 0 closed
  int held_part = -1;
  geom::Pose held_offset;  // tcp-local pose of the held part, captured at attach

  std::string instruction;

  double tray_top_z() const { return tray.translation.z + tray_size.z / 2; }
  double fixture_top_z() const { return fixture.translation.z + fixture_size.z / 2; }
  // Vertical offset from part center to the TCP grasp point (1 cm above top).
  static double grasp_offset_z(const PartSpec& part) { return part.height() / 2 + 0.01; }
  geom::Vec3 grasp_point(int part_idx) const {
    const auto& p = parts[static_cast<size_t>(part_idx)];
    return p.pose.translation + geom::Vec3{0, 0, grasp_offset_z(p.spec)};
  }

  // World-space axis-aligned bounds of a part.
  geom::Box3 part_aabb(int idx) const;
};

// Seed-deterministic scene generation. Easy keeps the canonical tray pose
// and randomizes part placement; Hard draws the tray pose from four held-out
// locations first. Rejection sampling keeps parts separated; more than 1000
// tries is an error.
SceneState generate_scene(const std::string& skill, Difficulty difficulty, uint64_t seed);

// Surface point sampling of every solid in the scene (fixed grids, no
// randomness) for camera simulation and virtual-view rendering.
geom::PointCloud sample_scene_surfaces(const SceneState& scene);

// The four held-out tray centers used by the Hard protocol.
const std::vector<geom::Vec3>& hard_tray_positions();
geom::Vec3 canonical_tray_position();

}  // namespace atgmoe
