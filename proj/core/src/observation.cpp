#include "atgmoe/observation.hpp"

namespace atgmoe {

geom::PointCloud scene_cloud(const Observation& obs, const geom::Box3& workspace) {
  geom::PointCloud merged;
  for (const auto& frame : obs.cameras)
    merged.append(geom::backproject(frame.depth, frame.rgb, frame.model));
  return geom::crop_workspace(merged, workspace);
}

}  // namespace atgmoe
