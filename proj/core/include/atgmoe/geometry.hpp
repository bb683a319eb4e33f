#pragma once

// Basic geometric value types shared across the repo: 3-vectors, axis-aligned
// boxes, unit quaternions (canonical representative w >= 0), and rigid poses
// mapping a local frame into the robot base frame.

#include <array>
#include <cmath>
#include <stdexcept>

namespace atgmoe::geom {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    if (n == 0) throw std::invalid_argument("normalize of zero vector");
    return {x / n, y / n, z / n};
  }
};

struct Box3 {
  Vec3 lo, hi;

  bool valid() const { return lo.x < hi.x && lo.y < hi.y && lo.z < hi.z; }
  // Closed bounds: faces belong to the box.
  bool contains(const Vec3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
  Vec3 extent() const { return hi - lo; }
  double max_side() const {
    Vec3 e = extent();
    return std::max(e.x, std::max(e.y, e.z));
  }
  Box3 inflated(double m) const { return {lo - Vec3{m, m, m}, hi + Vec3{m, m, m}}; }
};

// Unit quaternion, kept canonical (w >= 0, unit norm).
struct Quaternion {
  double w = 1, x = 0, y = 0, z = 0;

  static Quaternion identity() { return {}; }

  static Quaternion from_axis_angle(const Vec3& axis, double angle) {
    Vec3 a = axis.normalized();
    double h = angle / 2;
    double s = std::sin(h);
    return Quaternion{std::cos(h), a.x * s, a.y * s, a.z * s}.canonical();
  }

  static Quaternion yaw(double angle) { return from_axis_angle({0, 0, 1}, angle); }

  // Column-major rotation matrix (columns = rotated basis vectors).
  static Quaternion from_columns(const Vec3& cx, const Vec3& cy, const Vec3& cz);

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quaternion normalized() const {
    double n = norm();
    if (n == 0) throw std::invalid_argument("normalize of zero quaternion");
    return Quaternion{w / n, x / n, y / n, z / n};
  }

  Quaternion canonical() const {
    Quaternion q = normalized();
    if (q.w < 0) return {-q.w, -q.x, -q.y, -q.z};
    return q;
  }

  Quaternion conjugate() const { return {w, -x, -y, -z}; }

  Quaternion operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }

  Vec3 rotate(const Vec3& v) const {
    // q * (0, v) * q^-1 expanded
    Vec3 u{x, y, z};
    Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
  }

  // Arc angle on the unit 3-sphere between the two double-cover classes.
  double geodesic(const Quaternion& o) const {
    double d = std::abs(w * o.w + x * o.x + y * o.y + z * o.z);
    return std::acos(std::min(1.0, d));
  }

  // Physical rotation angle needed to align the two orientations.
  double rotation_angle_to(const Quaternion& o) const { return 2.0 * geodesic(o); }
};

inline Quaternion Quaternion::from_columns(const Vec3& cx, const Vec3& cy, const Vec3& cz) {
  // Shepperd's method over the trace candidates.
  double m[3][3] = {{cx.x, cy.x, cz.x}, {cx.y, cy.y, cz.y}, {cx.z, cy.z, cz.z}};
  double tr = m[0][0] + m[1][1] + m[2][2];
  Quaternion q;
  if (tr > 0) {
    double s = std::sqrt(tr + 1.0) * 2;
    q.w = 0.25 * s;
    q.x = (m[2][1] - m[1][2]) / s;
    q.y = (m[0][2] - m[2][0]) / s;
    q.z = (m[1][0] - m[0][1]) / s;
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    double s = std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2;
    q.w = (m[2][1] - m[1][2]) / s;
    q.x = 0.25 * s;
    q.y = (m[0][1] + m[1][0]) / s;
    q.z = (m[0][2] + m[2][0]) / s;
  } else if (m[1][1] > m[2][2]) {
    double s = std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2;
    q.w = (m[0][2] - m[2][0]) / s;
    q.x = (m[0][1] + m[1][0]) / s;
    q.y = 0.25 * s;
    q.z = (m[1][2] + m[2][1]) / s;
  } else {
    double s = std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2;
    q.w = (m[1][0] - m[0][1]) / s;
    q.x = (m[0][2] + m[2][0]) / s;
    q.y = (m[1][2] + m[2][1]) / s;
    q.z = 0.25 * s;
  }
  return q.canonical();
}

// Rigid transform local -> base.
struct Pose {
  Quaternion rotation;
  Vec3 translation;

  static Pose identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }

  Vec3 apply_inverse(const Vec3& p) const {
    return rotation.conjugate().rotate(p - translation);
  }

  Pose compose(const Pose& inner) const {
    return {(rotation * inner.rotation).canonical(), apply(inner.translation)};
  }

  Pose inverse() const {
    Quaternion rc = rotation.conjugate().canonical();
    return {rc, rotation.conjugate().rotate(-translation)};
  }
};

}  // namespace atgmoe::geom
