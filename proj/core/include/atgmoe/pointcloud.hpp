#pragma once

// Colored point clouds in the robot base frame: depth back-projection,
// workspace cropping, zoom crops for the fine stage, and z-buffered
// re-rendering into virtual views.

#include <array>
#include <cstdint>
#include <vector>

#include "atgmoe/camera.hpp"
#include "atgmoe/geometry.hpp"

namespace atgmoe::geom {

struct Rgb {
  double r = 0, g = 0, b = 0;  // [0, 1]
};

struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Rgb> colors;

  size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  void push(const Vec3& p, const Rgb& c) {
    positions.push_back(p);
    colors.push_back(c);
  }
  void append(const PointCloud& o) {
    positions.insert(positions.end(), o.positions.begin(), o.positions.end());
    colors.insert(colors.end(), o.colors.begin(), o.colors.end());
  }
  // Rigid transform of all points (used by training-time augmentation).
  void transform(const Pose& pose) {
    for (auto& p : positions) p = pose.apply(p);
  }
};

// Depth in meters, row-major [height x width]; zero marks an invalid pixel.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<double> depth;
  double at(int x, int y) const { return depth[static_cast<size_t>(y * width + x)]; }
};

struct RgbImage {
  int width = 0, height = 0;
  std::vector<Rgb> pixels;
  const Rgb& at(int x, int y) const { return pixels[static_cast<size_t>(y * width + x)]; }
  Rgb& at(int x, int y) { return pixels[static_cast<size_t>(y * width + x)]; }
};

struct RenderedView {
  RgbImage image;
  std::vector<uint8_t> valid;  // 1 where a point was splatted
  std::vector<double> zbuffer;
};

inline constexpr Rgb kRenderBackground{0.12, 0.12, 0.14};

// One base-frame colored point per valid (nonzero-depth) pixel.
PointCloud backproject(const DepthImage& depth, const RgbImage& rgb, const CameraModel& cam);

// Exactly the points inside the closed box, colors kept aligned.
PointCloud crop_workspace(const PointCloud& pc, const Box3& box);

// Cube of side box.max_side()/zoom centered on `center`; if the crop is
// empty the cube is widened once by 2x, and an empty result after that is an
// error. Returns the cropped cloud and the crop cube (the fine-stage render
// and triangulation box).
struct ZoomCrop {
  PointCloud cloud;
  Box3 box;
  bool widened = false;
};
ZoomCrop crop_and_zoom(const PointCloud& pc, const Vec3& center, double zoom, const Box3& workspace);

// Z-buffered single-pixel splatting. Points are projected, rounded to the
// nearest pixel, and the nearest depth wins; on exactly equal depth the
// lowest point index wins. Background pixels take kRenderBackground.
std::vector<RenderedView> render_views(const PointCloud& pc, const VirtualViewSet& views);

}  // namespace atgmoe::geom
