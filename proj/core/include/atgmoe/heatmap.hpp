#pragma once

// Per-view spatial probability maps and multi-view joint-likelihood
// triangulation.

#include <vector>

#include "atgmoe/camera.hpp"
#include "atgmoe/geometry.hpp"

namespace atgmoe::geom {

// Normalized nonnegative H x W map (sums to 1), row-major, tied to a view.
struct Heatmap {
  int view = 0;
  int width = 0, height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<size_t>(y * width + x)]; }
  double sum() const;
  // Clamped bilinear read at continuous pixel coordinates.
  double sample(double u, double v) const;
  // Row-major index of the first maximal pixel.
  std::pair<int, int> argmax_px() const;
};

// Normalized 2-D Gaussian around the projection of `p`. If `p` projects
// off-screen the map degenerates to uniform and `offscreen` is set, which
// keeps training targets well-defined for every sample.
struct GaussianTarget {
  Heatmap map;
  bool offscreen = false;
};
GaussianTarget gaussian_heatmap(const Vec3& p, const CameraModel& view, int view_index,
                                double sigma_px);

struct TriangulationResult {
  Vec3 point;
  bool degenerate = false;  // every candidate sat at the log floor
  double score = 0;
};

// argmax_p sum_v log H_v(Pi_v(p)) by grid search: a 32^3 lattice over the
// box followed by shrinking 9^3 sweeps around the running winner down to
// 1/16th of the coarse pitch. Heatmap reads are bilinear, log-floored at
// log(1e-12); off-screen projections score the floor.
TriangulationResult triangulate(const std::vector<Heatmap>& heatmaps, const VirtualViewSet& views,
                                const Box3& box);

// Dense brute-force argmax over an n^3 lattice; the test oracle for the
// two-level search (kept in the library so tools can cross-check too).
TriangulationResult triangulate_dense(const std::vector<Heatmap>& heatmaps,
                                      const VirtualViewSet& views, const Box3& box, int n);

}  // namespace atgmoe::geom
