#pragma once

// Toy skill registry. Six skills mirror the three difficulty categories
// (placement, seating, insertion) with descending goal tolerance, two skills
// per category. Each skill binds a target part, a goal socket on the
// fixture, tolerances, and a small set of instruction phrasings.

#include <map>
#include <string>
#include <vector>

#include "atgmoe/geometry.hpp"
#include "atgmoe/pointcloud.hpp"

namespace atgmoe {

enum class ShapeKind { Box, Cylinder, Sphere };

struct PartSpec {
  std::string name;
  ShapeKind shape = ShapeKind::Box;
  // Box: full extents. Cylinder: x = radius, z = height. Sphere: x = radius.
  geom::Vec3 size;
  geom::Rgb color;

  double height() const { return shape == ShapeKind::Sphere ? 2 * size.x : size.z; }
  double footprint_radius() const {
    if (shape == ShapeKind::Box) return 0.5 * std::hypot(size.x, size.y);
    return size.x;
  }
};

struct SkillSpec {
  std::string name;
  std::string category;  // placement | seating | insertion
  PartSpec part;
  geom::Vec3 goal_offset;  // socket center on the fixture top, fixture-local
  double pos_tolerance = 0.02;   // meters
  double rot_tolerance = 3.2;    // radians of rotation angle; ~pi = unconstrained
  bool align_yaw = false;        // demos align gripper yaw to part, goal yaw to socket
  std::vector<std::string> instructions;  // canonical template first, then paraphrases
};

const std::map<std::string, SkillSpec>& skill_registry();

// Every word used by any instruction (for vocabulary construction).
std::vector<std::string> instruction_words();

}  // namespace atgmoe
