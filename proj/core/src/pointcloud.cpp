#include "atgmoe/pointcloud.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace atgmoe::geom {

PointCloud backproject(const DepthImage& depth, const RgbImage& rgb, const CameraModel& cam) {
  if (depth.width != cam.width || depth.height != cam.height)
    throw std::invalid_argument("backproject: depth image does not match camera size");
  if (rgb.width != depth.width || rgb.height != depth.height)
    throw std::invalid_argument("backproject: rgb/depth size mismatch");
  if (cam.kind == ProjectionKind::Pinhole && (cam.fx <= 0 || cam.fy <= 0))
    throw std::invalid_argument("backproject: camera has zero focal length");
  PointCloud pc;
  pc.positions.reserve(static_cast<size_t>(depth.width) * depth.height);
  for (int y = 0; y < depth.height; ++y)
    for (int x = 0; x < depth.width; ++x) {
      double d = depth.at(x, y);
      if (d <= 0) continue;  // zero depth marks an invalid pixel
      pc.push(cam.backproject_px(x, y, d), rgb.at(x, y));
    }
  return pc;
}

PointCloud crop_workspace(const PointCloud& pc, const Box3& box) {
  if (!box.valid()) throw std::invalid_argument("crop_workspace: degenerate box");
  PointCloud out;
  for (size_t i = 0; i < pc.size(); ++i)
    if (box.contains(pc.positions[i])) out.push(pc.positions[i], pc.colors[i]);
  return out;
}

ZoomCrop crop_and_zoom(const PointCloud& pc, const Vec3& center, double zoom,
                       const Box3& workspace) {
  if (zoom <= 1.0) throw std::invalid_argument("crop_and_zoom: zoom factor must exceed 1");
  double side = workspace.max_side() / zoom;
  for (int attempt = 0; attempt < 2; ++attempt) {
    double h = side / 2;
    Box3 cube{center - Vec3{h, h, h}, center + Vec3{h, h, h}};
    PointCloud cropped = crop_workspace(pc, cube);
    if (!cropped.empty()) return {std::move(cropped), cube, attempt > 0};
    side *= 2;  // widen once
  }
  throw std::runtime_error("crop_and_zoom: crop empty even after widening");
}

std::vector<RenderedView> render_views(const PointCloud& pc, const VirtualViewSet& views) {
  std::vector<RenderedView> out;
  out.reserve(views.size());
  for (const auto& cam : views.views) {
    RenderedView rv;
    rv.image.width = cam.width;
    rv.image.height = cam.height;
    rv.image.pixels.assign(static_cast<size_t>(cam.width) * cam.height, kRenderBackground);
    rv.valid.assign(static_cast<size_t>(cam.width) * cam.height, 0);
    rv.zbuffer.assign(static_cast<size_t>(cam.width) * cam.height,
                      std::numeric_limits<double>::infinity());
    for (size_t i = 0; i < pc.size(); ++i) {
      auto px = cam.project(pc.positions[i]);
      if (!px) continue;
      int u = static_cast<int>(std::lround(px->u));
      int v = static_cast<int>(std::lround(px->v));
      if (u < 0 || u >= cam.width || v < 0 || v >= cam.height) continue;
      size_t k = static_cast<size_t>(v) * cam.width + u;
      // strict < keeps the lowest index on depth ties
      if (px->depth < rv.zbuffer[k]) {
        rv.zbuffer[k] = px->depth;
        rv.image.pixels[k] = pc.colors[i];
        rv.valid[k] = 1;
      }
    }
    out.push_back(std::move(rv));
  }
  return out;
}

}  // namespace atgmoe::geom
