#include "atgmoe/heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace atgmoe::geom {

namespace {
constexpr double kLogFloorArg = 1e-12;
}

double Heatmap::sum() const {
  double s = 0;
  for (double v : values) s += v;
  return s;
}

double Heatmap::sample(double u, double v) const {
  u = std::clamp(u, 0.0, static_cast<double>(width - 1));
  v = std::clamp(v, 0.0, static_cast<double>(height - 1));
  int x0 = static_cast<int>(std::floor(u));
  int y0 = static_cast<int>(std::floor(v));
  int x1 = std::min(x0 + 1, width - 1);
  int y1 = std::min(y0 + 1, height - 1);
  double fu = u - x0, fv = v - y0;
  return (1 - fu) * (1 - fv) * at(x0, y0) + fu * (1 - fv) * at(x1, y0) +
         (1 - fu) * fv * at(x0, y1) + fu * fv * at(x1, y1);
}

std::pair<int, int> Heatmap::argmax_px() const {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return {static_cast<int>(best % width), static_cast<int>(best / width)};
}

GaussianTarget gaussian_heatmap(const Vec3& p, const CameraModel& view, int view_index,
                                double sigma_px) {
  GaussianTarget out;
  out.map.view = view_index;
  out.map.width = view.width;
  out.map.height = view.height;
  size_t n = static_cast<size_t>(view.width) * view.height;
  auto px = view.project(p);
  if (!px || !view.in_bounds(*px)) {
    out.offscreen = true;
    out.map.values.assign(n, 1.0 / static_cast<double>(n));
    return out;
  }
  out.map.values.resize(n);
  double inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
  double total = 0;
  for (int y = 0; y < view.height; ++y)
    for (int x = 0; x < view.width; ++x) {
      double du = x - px->u, dv = y - px->v;
      double val = std::exp(-(du * du + dv * dv) * inv2s2);
      out.map.values[static_cast<size_t>(y * view.width + x)] = val;
      total += val;
    }
  for (auto& v : out.map.values) v /= total;
  return out;
}

namespace {

double joint_log_likelihood(const Vec3& p, const std::vector<Heatmap>& heatmaps,
                            const VirtualViewSet& views) {
  double s = 0;
  for (size_t v = 0; v < views.size(); ++v) {
    auto px = views[v].project(p);
    double val = kLogFloorArg;
    if (px && views[v].in_bounds(*px)) val = std::max(heatmaps[v].sample(px->u, px->v), kLogFloorArg);
    s += std::log(val);
  }
  return s;
}

}  // namespace

TriangulationResult triangulate(const std::vector<Heatmap>& heatmaps, const VirtualViewSet& views,
                                const Box3& box) {
  if (views.size() < 2) throw std::invalid_argument("triangulate: needs at least 2 views");
  if (heatmaps.size() != views.size())
    throw std::invalid_argument("triangulate: heatmap count does not match view count");
  constexpr int kCoarse = 32;
  Vec3 ext = box.extent();
  Vec3 pitch{ext.x / kCoarse, ext.y / kCoarse, ext.z / kCoarse};
  double floor_score = static_cast<double>(views.size()) * std::log(kLogFloorArg);

  Vec3 best = box.center();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCoarse; ++i)
    for (int j = 0; j < kCoarse; ++j)
      for (int k = 0; k < kCoarse; ++k) {
        Vec3 p{box.lo.x + (i + 0.5) * pitch.x, box.lo.y + (j + 0.5) * pitch.y,
               box.lo.z + (k + 0.5) * pitch.z};
        double s = joint_log_likelihood(p, heatmaps, views);
        if (s > best_score) {
          best_score = s;
          best = p;
        }
      }
  if (best_score <= floor_score + 1e-12) {
    // no view carries signal anywhere on the lattice
    return {box.center(), true, best_score};
  }

  // Shrinking 9^3 sweeps: spacing 1/2, 1/4, 1/8, then 1/16 of the coarse
  // pitch. The first sweep spans a full coarse cell in every direction, so
  // the refinement can cross into neighboring cells when the true optimum
  // straddles a cell border.
  for (double frac : {0.5, 0.25, 0.125, 0.0625}) {
    Vec3 step{pitch.x * frac, pitch.y * frac, pitch.z * frac};
    Vec3 center = best;
    for (int i = -4; i <= 4; ++i)
      for (int j = -4; j <= 4; ++j)
        for (int k = -4; k <= 4; ++k) {
          Vec3 p{center.x + i * step.x, center.y + j * step.y, center.z + k * step.z};
          if (!box.contains(p)) continue;
          double s = joint_log_likelihood(p, heatmaps, views);
          if (s > best_score) {
            best_score = s;
            best = p;
          }
        }
  }
  return {best, false, best_score};
}

TriangulationResult triangulate_dense(const std::vector<Heatmap>& heatmaps,
                                      const VirtualViewSet& views, const Box3& box, int n) {
  Vec3 ext = box.extent();
  Vec3 pitch{ext.x / n, ext.y / n, ext.z / n};
  Vec3 best = box.center();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        Vec3 p{box.lo.x + (i + 0.5) * pitch.x, box.lo.y + (j + 0.5) * pitch.y,
               box.lo.z + (k + 0.5) * pitch.z};
        double s = joint_log_likelihood(p, heatmaps, views);
        if (s > best_score) {
          best_score = s;
          best = p;
        }
      }
  return {best, false, best_score};
}

}  // namespace atgmoe::geom
