#pragma once

// Netpbm import/export. RGB observations travel as binary 8-bit PPM (P6),
// depth as 16-bit PGM (P5, big-endian per the netpbm spec) in 0.1 mm units.
// Heatmaps and rendered views are dumped max-normalized to 8-bit for
// inspection. Point clouds export as ASCII "x y z r g b" lines.

#include <string>
#include <vector>

#include "atgmoe/heatmap.hpp"
#include "atgmoe/pointcloud.hpp"

namespace atgmoe::geom {

void write_ppm(const std::string& path, const RgbImage& img);
RgbImage read_ppm(const std::string& path);

// 0.1 mm quantization; depth <= 0 stores as 0 (invalid).
void write_depth_pgm(const std::string& path, const DepthImage& img);
DepthImage read_depth_pgm(const std::string& path);

// Max-normalized 8-bit PGM of any nonnegative map.
void write_heatmap_pgm(const std::string& path, const Heatmap& hm);

void write_xyzrgb(const std::string& path, const PointCloud& pc);

// Quantize a float image to the 8-bit lattice in place, so in-memory
// observations match what a PPM round trip would produce.
void quantize_rgb8(RgbImage& img);
void quantize_depth(DepthImage& img);

}  // namespace atgmoe::geom
