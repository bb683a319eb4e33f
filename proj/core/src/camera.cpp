#include "atgmoe/camera.hpp"

#include <cmath>
#include <stdexcept>

namespace atgmoe::geom {

CameraModel CameraModel::pinhole(double fx, double fy, double cx, double cy, int w, int h,
                                 Pose pose) {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal length must be positive");
  CameraModel c;
  c.kind = ProjectionKind::Pinhole;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.width = w;
  c.height = h;
  c.pose = pose;
  return c;
}

CameraModel CameraModel::orthographic(double meters_per_px, double cx, double cy, int w, int h,
                                      Pose pose) {
  if (meters_per_px <= 0) throw std::invalid_argument("camera: orthographic scale must be positive");
  CameraModel c;
  c.kind = ProjectionKind::Orthographic;
  c.meters_per_px = meters_per_px;
  c.cx = cx;
  c.cy = cy;
  c.width = w;
  c.height = h;
  c.pose = pose;
  return c;
}

Pose CameraModel::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 up_use = up;
  if (std::abs(fwd.dot(up.normalized())) > 0.999) up_use = {0, 1, 0};
  Vec3 xc = fwd.cross(up_use).normalized();
  Vec3 yc = fwd.cross(xc);  // = z x x, image v axis points "down" in world
  return Pose{Quaternion::from_columns(xc, yc, fwd), eye};
}

std::optional<PixelPoint> CameraModel::project(const Vec3& p) const {
  Vec3 c = pose.apply_inverse(p);
  PixelPoint px;
  if (kind == ProjectionKind::Pinhole) {
    if (c.z <= 0) return std::nullopt;
    px.u = fx * c.x / c.z + cx;
    px.v = fy * c.y / c.z + cy;
    px.depth = c.z;
  } else {
    px.u = c.x / meters_per_px + cx;
    px.v = c.y / meters_per_px + cy;
    px.depth = c.z;
  }
  return px;
}

Vec3 CameraModel::backproject_px(double u, double v, double depth) const {
  Vec3 c;
  if (kind == ProjectionKind::Pinhole) {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: zero focal length");
    c = {(u - cx) * depth / fx, (v - cy) * depth / fy, depth};
  } else {
    c = {(u - cx) * meters_per_px, (v - cy) * meters_per_px, depth};
  }
  return pose.apply(c);
}

VirtualViewSet VirtualViewSet::axis_aligned(const Box3& box, int width, int height, int count) {
  if (!box.valid()) throw std::invalid_argument("virtual views: degenerate box");
  if (count < 2 || count > 3) throw std::invalid_argument("virtual views: count must be 2 or 3");
  Vec3 c = box.center();
  Vec3 e = box.extent();
  double standoff = box.max_side() * 2.0;
  // Proportional 10% margin: box corners project strictly in-bounds, and the
  // fine-stage crop views keep exactly the zoom-factor resolution ratio
  // against the workspace views.
  auto scale_for = [&](double span_u, double span_v) {
    double su = span_u * 1.10 / static_cast<double>(width - 1);
    double sv = span_v * 1.10 / static_cast<double>(height - 1);
    return std::max(su, sv);
  };
  VirtualViewSet vs;
  double cxp = (width - 1) / 2.0, cyp = (height - 1) / 2.0;

  // Top-down: looking along -z; image u = +x, v = -y.
  {
    Pose pose{Quaternion::from_columns({1, 0, 0}, {0, -1, 0}, {0, 0, -1}),
              {c.x, c.y, box.hi.z + standoff}};
    vs.views.push_back(
        CameraModel::orthographic(scale_for(e.x, e.y), cxp, cyp, width, height, pose));
  }
  // Front: looking along +y; image u = +x, v = -z.
  {
    Pose pose{Quaternion::from_columns({1, 0, 0}, {0, 0, -1}, {0, 1, 0}),
              {c.x, box.lo.y - standoff, c.z}};
    vs.views.push_back(
        CameraModel::orthographic(scale_for(e.x, e.z), cxp, cyp, width, height, pose));
  }
  if (count == 3) {
    // Side: looking along +x; image u = -y, v = -z.
    Pose pose{Quaternion::from_columns({0, -1, 0}, {0, 0, -1}, {1, 0, 0}),
              {box.lo.x - standoff, c.y, c.z}};
    vs.views.push_back(
        CameraModel::orthographic(scale_for(e.y, e.z), cxp, cyp, width, height, pose));
  }
  return vs;
}

}  // namespace atgmoe::geom
