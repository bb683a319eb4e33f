#include "atgmoe/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace atgmoe::geom {

namespace {

uint8_t to_u8(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v * 255.0), 0l, 255l));
}

void read_pnm_header(std::istream& f, const std::string& magic, int& w, int& h, int& maxval,
                     const std::string& path) {
  std::string m;
  f >> m;
  if (m != magic) throw std::runtime_error(path + ": expected " + magic + " header, got " + m);
  f >> w >> h >> maxval;
  if (!f || w <= 0 || h <= 0) throw std::runtime_error(path + ": malformed pnm header");
  f.get();  // single whitespace before raster
}

}  // namespace

void write_ppm(const std::string& path, const RgbImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Rgb& c = img.at(x, y);
      row[static_cast<size_t>(x) * 3 + 0] = to_u8(c.r);
      row[static_cast<size_t>(x) * 3 + 1] = to_u8(c.g);
      row[static_cast<size_t>(x) * 3 + 2] = to_u8(c.b);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  int w, h, maxval;
  read_pnm_header(f, "P6", w, h, maxval, path);
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<size_t>(w) * h);
  std::vector<uint8_t> raster(static_cast<size_t>(w) * h * 3);
  f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!f) throw std::runtime_error(path + ": truncated ppm raster");
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = {raster[i * 3] / 255.0, raster[i * 3 + 1] / 255.0, raster[i * 3 + 2] / 255.0};
  return img;
}

void write_depth_pgm(const std::string& path, const DepthImage& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << img.width << " " << img.height << "\n65535\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * 2);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double d = img.at(x, y);
      uint16_t q = 0;
      if (d > 0) q = static_cast<uint16_t>(std::clamp(std::lround(d * 10000.0), 0l, 65535l));
      row[static_cast<size_t>(x) * 2 + 0] = static_cast<uint8_t>(q >> 8);  // big-endian
      row[static_cast<size_t>(x) * 2 + 1] = static_cast<uint8_t>(q & 0xff);
    }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

DepthImage read_depth_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  int w, h, maxval;
  read_pnm_header(f, "P5", w, h, maxval, path);
  if (maxval != 65535) throw std::runtime_error(path + ": expected 16-bit pgm");
  DepthImage img;
  img.width = w;
  img.height = h;
  img.depth.resize(static_cast<size_t>(w) * h);
  std::vector<uint8_t> raster(static_cast<size_t>(w) * h * 2);
  f.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!f) throw std::runtime_error(path + ": truncated pgm raster");
  for (size_t i = 0; i < img.depth.size(); ++i) {
    uint16_t q = static_cast<uint16_t>((raster[i * 2] << 8) | raster[i * 2 + 1]);
    img.depth[i] = q / 10000.0;
  }
  return img;
}

void write_heatmap_pgm(const std::string& path, const Heatmap& hm) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << hm.width << " " << hm.height << "\n255\n";
  double mx = 0;
  for (double v : hm.values) mx = std::max(mx, v);
  if (mx <= 0) mx = 1;
  std::vector<uint8_t> raster(hm.values.size());
  for (size_t i = 0; i < hm.values.size(); ++i) raster[i] = to_u8(hm.values[i] / mx);
  f.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
}

void write_xyzrgb(const std::string& path, const PointCloud& pc) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  std::ostringstream ss;
  ss.precision(6);
  ss << std::fixed;
  for (size_t i = 0; i < pc.size(); ++i) {
    const auto& p = pc.positions[i];
    const auto& c = pc.colors[i];
    ss << p.x << " " << p.y << " " << p.z << " " << c.r << " " << c.g << " " << c.b << "\n";
  }
  f << ss.str();
}

void quantize_rgb8(RgbImage& img) {
  for (auto& p : img.pixels) p = {to_u8(p.r) / 255.0, to_u8(p.g) / 255.0, to_u8(p.b) / 255.0};
}

void quantize_depth(DepthImage& img) {
  for (auto& d : img.depth) {
    if (d <= 0) {
      d = 0;
      continue;
    }
    d = std::clamp(std::lround(d * 10000.0), 0l, 65535l) / 10000.0;
  }
}

}  // namespace atgmoe::geom
