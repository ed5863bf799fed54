#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiver {

struct ImageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major

  Image() = default;
  Image(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), pixels(size_t(w) * h, fill) {}
  Rgb& at(int x, int y) { return pixels[size_t(y) * width + x]; }
  const Rgb& at(int x, int y) const { return pixels[size_t(y) * width + x]; }
};

/// 16-bit single-channel depth, millimeters, 0 = invalid.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> depth_mm;  // row-major

  DepthImage() = default;
  DepthImage(int w, int h) : width(w), height(h), depth_mm(size_t(w) * h, 0) {}
  std::uint16_t& at(int x, int y) { return depth_mm[size_t(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return depth_mm[size_t(y) * width + x]; }
  double meters(int x, int y) const { return at(x, y) / 1000.0; }
};

// Lossless binary PPM (P6) for color, PGM (P5, maxval 65535) for depth.
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);
void write_pgm16(const std::string& path, const DepthImage& img);
DepthImage read_pgm16(const std::string& path);

}  // namespace ambiver
