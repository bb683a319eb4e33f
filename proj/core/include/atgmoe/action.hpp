#pragma once

// Action representations: the continuous end-effector command (p, r, g) and
// its discretized chunked token form.
//
// Token layout (K = 5): four rotation tokens (quaternion components w, x, y,
// z binned uniformly over [-1, 1]) followed by one binary gripper token.
// Chunk ids are (1, 1, 1, 1, 2): rotation forms chunk 1, the gripper chunk 2.

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "atgmoe/geometry.hpp"

namespace atgmoe {

struct ActionCommand {
  geom::Vec3 position;          // meters, base frame
  geom::Quaternion rotation;    // canonical (w >= 0)
  int gripper = 0;              // 0 = open, 1 = close
};

enum class TokenType : int {
  Prompt = 0,
  PositionQuery = 1,
  RotW = 2,
  RotX = 3,
  RotY = 4,
  RotZ = 5,
  Gripper = 6,
};
inline constexpr int kNumTokenTypes = 7;
inline constexpr int64_t kUnknownValue = -1;  // sentinel: zero value embedding

struct ActionToken {
  TokenType type;
  int64_t value = kUnknownValue;  // bin index, or kUnknownValue
  int chunk = 0;                  // 1-based chunk id; 0 for prompt/query
};

struct ActionTokenSequence {
  std::vector<ActionToken> tokens;

  size_t size() const { return tokens.size(); }
  void validate(int64_t rot_bins) const {
    int prev_chunk = 0;
    for (const auto& t : tokens) {
      if (t.chunk < prev_chunk)
        throw std::invalid_argument("action tokens: chunk ids must be nondecreasing");
      prev_chunk = std::max(prev_chunk, t.chunk);
      if (t.value != kUnknownValue) {
        int64_t bins = (t.type == TokenType::Gripper) ? 2 : rot_bins;
        if (t.value < 0 || t.value >= bins)
          throw std::invalid_argument("action tokens: value index out of range");
      }
    }
  }
};

// Quaternion components binned via floor((c + 1) / 2 * B), clamped to
// [0, B-1]; gripper maps to {0, 1} directly.
ActionTokenSequence discretize_action(const ActionCommand& a, int64_t rot_bins);

// Bin centers, renormalized to a canonical unit quaternion. The position is
// supplied separately (it comes from heatmap triangulation, not tokens).
ActionCommand dediscretize_action(const ActionTokenSequence& seq, const geom::Vec3& position,
                                  int64_t rot_bins);

}  // namespace atgmoe
