#pragma once

// Camera models (pinhole and orthographic) with poses in the robot base
// frame, plus the fixed virtual view sets used for point-cloud re-rendering.
//
// Pixel convention: (u, v) are continuous pixel coordinates, pixel (i, j)
// is centered at u = i, v = j, u grows along image columns and v along rows.

#include <optional>
#include <vector>

#include "atgmoe/geometry.hpp"

namespace atgmoe::geom {

enum class ProjectionKind { Pinhole, Orthographic };

struct PixelPoint {
  double u = 0, v = 0;
  double depth = 0;  // distance along the camera forward axis, meters
};

struct CameraModel {
  ProjectionKind kind = ProjectionKind::Pinhole;
  double fx = 0, fy = 0;       // pinhole focal lengths, pixels
  double meters_per_px = 0;    // orthographic scale
  double cx = 0, cy = 0;       // principal point, pixels
  int width = 0, height = 0;
  Pose pose;  // camera frame -> base frame; camera looks along +z, y down

  static CameraModel pinhole(double fx, double fy, double cx, double cy, int w, int h, Pose pose);
  static CameraModel orthographic(double meters_per_px, double cx, double cy, int w, int h,
                                  Pose pose);

  // Camera placed at `eye` looking at `target`. `up` resolves the roll.
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = {0, 0, 1});

  // Base-frame point -> pixel coordinates. Returns nothing for points behind
  // a pinhole camera (depth <= 0).
  std::optional<PixelPoint> project(const Vec3& p) const;

  // Pixel + depth -> base-frame point.
  Vec3 backproject_px(double u, double v, double depth) const;

  bool in_bounds(const PixelPoint& px) const {
    return px.u >= 0 && px.u <= width - 1 && px.v >= 0 && px.v <= height - 1;
  }
};

// Fixed orthographic views a cropped cloud is re-rendered into. Default
// layout is three axis-aligned views (top-down, front, side) centered on the
// box and scaled so every box corner projects in-bounds with margin.
struct VirtualViewSet {
  std::vector<CameraModel> views;

  static VirtualViewSet axis_aligned(const Box3& box, int width, int height, int count = 3);

  size_t size() const { return views.size(); }
  const CameraModel& operator[](size_t i) const { return views[i]; }
};

}  // namespace atgmoe::geom
