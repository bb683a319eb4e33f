#pragma once

// The policy's input at one time step: per physical camera an RGB-D frame
// with its camera model, the tokenized instruction, and 8-D proprioception
// (TCP position, canonical orientation quaternion, gripper openness).

#include <cstdint>
#include <vector>

#include "atgmoe/camera.hpp"
#include "atgmoe/pointcloud.hpp"

namespace atgmoe {

struct CameraFrame {
  geom::CameraModel model;
  geom::RgbImage rgb;
  geom::DepthImage depth;
};

struct Proprio {
  geom::Vec3 position;
  geom::Quaternion rotation;  // canonical, w >= 0
  double gripper = 0;         // openness in [0, 1]; 1 = open
};

struct Observation {
  std::vector<CameraFrame> cameras;
  std::vector<int64_t> instruction_ids;  // padded to the configured length
  int64_t instruction_len = 0;           // unpadded token count
  Proprio proprio;
};

// Merged base-frame cloud from all camera frames, cropped to the workspace.
geom::PointCloud scene_cloud(const Observation& obs, const geom::Box3& workspace);

}  // namespace atgmoe
