#include "atgmoe/action.hpp"

#include <algorithm>
#include <cmath>

namespace atgmoe {

namespace {
int64_t bin_component(double c, int64_t bins) {
  auto b = static_cast<int64_t>(std::floor((c + 1.0) / 2.0 * static_cast<double>(bins)));
  return std::clamp<int64_t>(b, 0, bins - 1);
}

double bin_center(int64_t b, int64_t bins) {
  return -1.0 + (static_cast<double>(b) + 0.5) * 2.0 / static_cast<double>(bins);
}
}  // namespace

ActionTokenSequence discretize_action(const ActionCommand& a, int64_t rot_bins) {
  geom::Quaternion q = a.rotation.canonical();
  ActionTokenSequence seq;
  seq.tokens = {
      {TokenType::RotW, bin_component(q.w, rot_bins), 1},
      {TokenType::RotX, bin_component(q.x, rot_bins), 1},
      {TokenType::RotY, bin_component(q.y, rot_bins), 1},
      {TokenType::RotZ, bin_component(q.z, rot_bins), 1},
      {TokenType::Gripper, a.gripper ? 1 : 0, 2},
  };
  return seq;
}

ActionCommand dediscretize_action(const ActionTokenSequence& seq, const geom::Vec3& position,
                                  int64_t rot_bins) {
  seq.validate(rot_bins);
  double comp[4] = {0, 0, 0, 0};
  int gripper = 0;
  for (const auto& t : seq.tokens) {
    switch (t.type) {
      case TokenType::RotW: comp[0] = bin_center(t.value, rot_bins); break;
      case TokenType::RotX: comp[1] = bin_center(t.value, rot_bins); break;
      case TokenType::RotY: comp[2] = bin_center(t.value, rot_bins); break;
      case TokenType::RotZ: comp[3] = bin_center(t.value, rot_bins); break;
      case TokenType::Gripper: gripper = static_cast<int>(t.value); break;
      default: break;
    }
  }
  geom::Quaternion q{comp[0], comp[1], comp[2], comp[3]};
  if (q.norm() < 1e-12)
    throw std::invalid_argument("dediscretize_action: reconstructed quaternion has zero norm");
  ActionCommand a;
  a.position = position;
  a.rotation = q.canonical();
  a.gripper = gripper;
  return a;
}

}  // namespace atgmoe
