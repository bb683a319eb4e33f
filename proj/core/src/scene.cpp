#include "atgmoe/scene.hpp"

#include <cmath>
#include <stdexcept>

#include "atgmoe/random.hpp"

namespace atgmoe {

namespace {

constexpr double kPi = 3.14159265358979323846;

const geom::Vec3 kTraySize{0.34, 0.26, 0.02};
const geom::Vec3 kFixtureSize{0.16, 0.16, 0.04};
const geom::Vec3 kFixtureCenter{0.32, 0.30, 0.02};
const geom::Rgb kTrayColor{0.55, 0.55, 0.58};
const geom::Rgb kFixtureColor{0.35, 0.35, 0.38};
const geom::Rgb kTableColor{0.72, 0.66, 0.55};
const geom::Rgb kTcpColor{0.08, 0.08, 0.08};
const geom::Vec3 kTcpHome{0.0, 0.0, 0.35};
constexpr double kMinPartSeparation = 0.075;

// Spawn yaw ranges: asymmetric parts stay within +/-30 degrees so the
// rotation-token range is well covered by the demo distribution.
constexpr double kSpawnYawRange = kPi / 6;

geom::Box3 aabb_of_box(const geom::Pose& pose, const geom::Vec3& size) {
  // yaw-only rotations in this environment; extents under rotation
  double yaw = 2 * std::atan2(pose.rotation.z, pose.rotation.w);
  double c = std::abs(std::cos(yaw));
  double s = std::abs(std::sin(yaw));
  double ex = (c * size.x + s * size.y) / 2;
  double ey = (s * size.x + c * size.y) / 2;
  double ez = size.z / 2;
  return {pose.translation - geom::Vec3{ex, ey, ez}, pose.translation + geom::Vec3{ex, ey, ez}};
}

void sample_box_surface(geom::PointCloud& pc, const geom::Pose& pose, const geom::Vec3& size,
                        const geom::Rgb& color, double spacing, bool top_only = false) {
  geom::Vec3 h = size * 0.5;
  auto emit = [&](double x, double y, double z) {
    pc.push(pose.apply({x, y, z}), color);
  };
  auto grid = [&](double a0, double a1, double b0, double b1, auto&& fn) {
    int na = std::max(2, static_cast<int>(std::ceil((a1 - a0) / spacing)) + 1);
    int nb = std::max(2, static_cast<int>(std::ceil((b1 - b0) / spacing)) + 1);
    for (int i = 0; i < na; ++i)
      for (int j = 0; j < nb; ++j)
        fn(a0 + (a1 - a0) * i / (na - 1), b0 + (b1 - b0) * j / (nb - 1));
  };
  // top
  grid(-h.x, h.x, -h.y, h.y, [&](double x, double y) { emit(x, y, h.z); });
  if (top_only) return;
  // sides
  grid(-h.x, h.x, -h.z, h.z, [&](double x, double z) { emit(x, -h.y, z); });
  grid(-h.x, h.x, -h.z, h.z, [&](double x, double z) { emit(x, h.y, z); });
  grid(-h.y, h.y, -h.z, h.z, [&](double y, double z) { emit(-h.x, y, z); });
  grid(-h.y, h.y, -h.z, h.z, [&](double y, double z) { emit(h.x, y, z); });
}

void sample_cylinder_surface(geom::PointCloud& pc, const geom::Pose& pose, double radius,
                             double height, const geom::Rgb& color, double spacing) {
  int nring = std::max(8, static_cast<int>(std::ceil(2 * kPi * radius / spacing)));
  int nz = std::max(2, static_cast<int>(std::ceil(height / spacing)) + 1);
  for (int iz = 0; iz < nz; ++iz) {
    double z = -height / 2 + height * iz / (nz - 1);
    for (int ia = 0; ia < nring; ++ia) {
      double a = 2 * kPi * ia / nring;
      pc.push(pose.apply({radius * std::cos(a), radius * std::sin(a), z}), color);
    }
  }
  // caps as concentric rings
  int nr = std::max(1, static_cast<int>(std::ceil(radius / spacing)));
  for (int ir = 0; ir <= nr; ++ir) {
    double r = radius * ir / nr;
    int n = std::max(1, static_cast<int>(std::ceil(2 * kPi * r / spacing)));
    for (int ia = 0; ia < n; ++ia) {
      double a = 2 * kPi * ia / n;
      pc.push(pose.apply({r * std::cos(a), r * std::sin(a), height / 2}), color);
      pc.push(pose.apply({r * std::cos(a), r * std::sin(a), -height / 2}), color);
    }
  }
}

void sample_sphere_surface(geom::PointCloud& pc, const geom::Pose& pose, double radius,
                           const geom::Rgb& color, double spacing) {
  int n = std::max(16, static_cast<int>(std::ceil(4 * kPi * radius * radius / (spacing * spacing))));
  // Fibonacci sphere
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - 2.0 * (i + 0.5) / n;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    double a = golden * i;
    pc.push(pose.apply({radius * r * std::cos(a), radius * r * std::sin(a), radius * z}), color);
  }
}

void sample_part(geom::PointCloud& pc, const PartInstance& part, double spacing) {
  switch (part.spec.shape) {
    case ShapeKind::Box:
      sample_box_surface(pc, part.pose, part.spec.size, part.spec.color, spacing);
      break;
    case ShapeKind::Cylinder:
      sample_cylinder_surface(pc, part.pose, part.spec.size.x, part.spec.size.z, part.spec.color,
                              spacing);
      break;
    case ShapeKind::Sphere:
      sample_sphere_surface(pc, part.pose, part.spec.size.x, part.spec.color, spacing);
      break;
  }
}

}  // namespace

geom::Box3 SceneState::part_aabb(int idx) const {
  const auto& p = parts[static_cast<size_t>(idx)];
  switch (p.spec.shape) {
    case ShapeKind::Box:
      return aabb_of_box(p.pose, p.spec.size);
    case ShapeKind::Cylinder: {
      geom::Vec3 e{p.spec.size.x, p.spec.size.x, p.spec.size.z / 2};
      return {p.pose.translation - e, p.pose.translation + e};
    }
    case ShapeKind::Sphere: {
      geom::Vec3 e{p.spec.size.x, p.spec.size.x, p.spec.size.x};
      return {p.pose.translation - e, p.pose.translation + e};
    }
  }
  throw std::logic_error("unreachable");
}

geom::Vec3 canonical_tray_position() { return {-0.16, -0.10, 0.01}; }

const std::vector<geom::Vec3>& hard_tray_positions() {
  static const std::vector<geom::Vec3> positions = {
      {-0.16, 0.18, 0.01}, {0.10, -0.24, 0.01}, {-0.30, 0.04, 0.01}, {0.02, -0.02, 0.01}};
  return positions;
}

SceneState generate_scene(const std::string& skill, Difficulty difficulty, uint64_t seed) {
  auto it = skill_registry().find(skill);
  if (it == skill_registry().end())
    throw std::invalid_argument("generate_scene: unknown skill '" + skill + "'");
  const SkillSpec& spec = it->second;

  Rng rng(seed ^ fnv1a64(skill));
  SceneState s;
  s.skill = skill;
  s.seed = seed;
  s.workspace = {{-0.5, -0.5, 0.0}, {0.5, 0.5, 0.5}};

  geom::Vec3 tray_pos = canonical_tray_position();
  if (difficulty == Difficulty::Hard) {
    const auto& hp = hard_tray_positions();
    tray_pos = hp[static_cast<size_t>(rng.uniform_int(hp.size()))];
  }
  s.tray = {geom::Quaternion::identity(), tray_pos};
  s.tray_size = kTraySize;
  s.fixture = {geom::Quaternion::identity(), kFixtureCenter};
  s.fixture_size = kFixtureSize;

  // Target part plus two distractors drawn from the other skills.
  std::vector<PartSpec> specs = {spec.part};
  {
    std::vector<PartSpec> others;
    for (const auto& [name, sk] : skill_registry())
      if (name != skill) others.push_back(sk.part);
    size_t first = static_cast<size_t>(rng.uniform_int(others.size()));
    size_t second = static_cast<size_t>(rng.uniform_int(others.size() - 1));
    if (second >= first) ++second;
    specs.push_back(others[first]);
    specs.push_back(others[second]);
  }

  double top = s.tray_top_z();
  std::vector<geom::Vec3> placed;
  for (const auto& ps : specs) {
    double margin = ps.footprint_radius() + 0.02;
    bool ok = false;
    for (int tries = 0; tries < 1000 && !ok; ++tries) {
      geom::Vec3 c{
          rng.uniform(tray_pos.x - kTraySize.x / 2 + margin, tray_pos.x + kTraySize.x / 2 - margin),
          rng.uniform(tray_pos.y - kTraySize.y / 2 + margin, tray_pos.y + kTraySize.y / 2 - margin),
          top + ps.height() / 2};
      ok = true;
      for (const auto& q : placed)
        if (std::hypot(c.x - q.x, c.y - q.y) < kMinPartSeparation) {
          ok = false;
          break;
        }
      if (ok) placed.push_back(c);
    }
    if (!ok) throw std::runtime_error("generate_scene: part placement rejection sampling failed");
    double yaw = rng.uniform(-kSpawnYawRange, kSpawnYawRange);
    s.parts.push_back({ps, {geom::Quaternion::yaw(yaw), placed.back()}});
  }
  s.target_part = 0;

  s.goal_position = s.fixture.apply(spec.goal_offset) +
                    geom::Vec3{0, 0, kFixtureSize.z / 2 + spec.part.height() / 2};
  s.goal_rotation = geom::Quaternion::identity();

  s.tcp = {geom::Quaternion::identity(), kTcpHome};
  s.gripper = 1.0;
  s.held_part = -1;

  size_t variant = static_cast<size_t>(rng.uniform_int(spec.instructions.size()));
  s.instruction = spec.instructions[variant];
  return s;
}

geom::PointCloud sample_scene_surfaces(const SceneState& s) {
  geom::PointCloud pc;
  // table top within the workspace footprint
  sample_box_surface(pc, {geom::Quaternion::identity(), {0, 0, -0.005}},
                     {s.workspace.extent().x, s.workspace.extent().y, 0.01}, kTableColor, 0.009,
                     /*top_only=*/true);
  sample_box_surface(pc, s.tray, s.tray_size, kTrayColor, 0.006);
  sample_box_surface(pc, s.fixture, s.fixture_size, kFixtureColor, 0.006);
  for (const auto& part : s.parts) sample_part(pc, part, 0.003);
  // TCP marker block
  sample_box_surface(pc, s.tcp, {0.016, 0.016, 0.024}, kTcpColor, 0.004);
  return pc;
}

}  // namespace atgmoe
