#include "atgmoe/skills.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace atgmoe {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;

std::map<std::string, SkillSpec> build_registry() {
  std::map<std::string, SkillSpec> r;

  SkillSpec s;

  s = {};
  s.name = "place_cube_pad";
  s.category = "placement";
  s.part = {"red cube", ShapeKind::Box, {0.030, 0.030, 0.030}, {0.85, 0.10, 0.10}};
  s.goal_offset = {-0.040, -0.040, 0};
  s.pos_tolerance = 0.020;
  s.rot_tolerance = 3.2;  // pads do not constrain orientation
  s.align_yaw = false;
  s.instructions = {"place the red cube on the pad", "put the red cube onto the pad"};
  r[s.name] = s;

  s = {};
  s.name = "place_cyl_pad";
  s.category = "placement";
  s.part = {"blue cylinder", ShapeKind::Cylinder, {0.016, 0, 0.040}, {0.15, 0.25, 0.90}};
  s.goal_offset = {0.040, -0.040, 0};
  s.pos_tolerance = 0.020;
  s.rot_tolerance = 3.2;
  s.align_yaw = false;
  s.instructions = {"place the blue cylinder on the pad", "set the blue cylinder onto the pad"};
  r[s.name] = s;

  s = {};
  s.name = "seat_cap_socket";
  s.category = "seating";
  s.part = {"green cap", ShapeKind::Box, {0.028, 0.020, 0.020}, {0.10, 0.75, 0.20}};
  s.goal_offset = {-0.040, 0.040, 0};
  s.pos_tolerance = 0.010;
  s.rot_tolerance = 10.0 * kDeg;
  s.align_yaw = true;
  s.instructions = {"seat the green cap on the socket", "press the green cap onto the socket"};
  r[s.name] = s;

  s = {};
  s.name = "seat_ball_socket";
  s.category = "seating";
  s.part = {"yellow ball", ShapeKind::Sphere, {0.016, 0, 0}, {0.95, 0.85, 0.10}};
  s.goal_offset = {0.040, 0.040, 0};
  s.pos_tolerance = 0.010;
  s.rot_tolerance = 3.2;  // sphere carries no orientation
  s.align_yaw = false;
  s.instructions = {"seat the yellow ball in the socket", "drop the yellow ball into the socket"};
  r[s.name] = s;

  s = {};
  s.name = "insert_peg_hole";
  s.category = "insertion";
  s.part = {"magenta peg", ShapeKind::Box, {0.020, 0.012, 0.050}, {0.85, 0.15, 0.80}};
  s.goal_offset = {0.0, 0.0, 0};
  s.pos_tolerance = 0.005;
  s.rot_tolerance = 10.0 * kDeg;
  s.align_yaw = true;
  s.instructions = {"insert the magenta peg into the hole", "fit the magenta peg in the hole"};
  r[s.name] = s;

  s = {};
  s.name = "insert_pin_hole";
  s.category = "insertion";
  s.part = {"cyan pin", ShapeKind::Box, {0.015, 0.010, 0.040}, {0.10, 0.80, 0.85}};
  s.goal_offset = {0.0, -0.055, 0};
  s.pos_tolerance = 0.005;
  s.rot_tolerance = 10.0 * kDeg;
  s.align_yaw = true;
  s.instructions = {"insert the cyan pin into the hole", "push the cyan pin into the hole"};
  r[s.name] = s;

  return r;
}

}  // namespace

const std::map<std::string, SkillSpec>& skill_registry() {
  static const std::map<std::string, SkillSpec> registry = build_registry();
  return registry;
}

std::vector<std::string> instruction_words() {
  std::set<std::string> words;
  for (const auto& [name, spec] : skill_registry())
    for (const auto& instr : spec.instructions) {
      std::istringstream ss(instr);
      std::string w;
      while (ss >> w) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        words.insert(w);
      }
    }
  return {words.begin(), words.end()};
}

}  // namespace atgmoe
