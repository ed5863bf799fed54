#pragma once

#include "ambiver/geometry.hpp"
#include "ambiver/image.hpp"

#include <limits>
#include <optional>
#include <vector>

namespace ambiver {

struct ShapeMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyCloud : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;  // world frame, meters
  std::vector<Rgb> colors;
  size_t size() const { return points.size(); }
};

/// Background pixels carry this sentinel and a -inf height entry.
inline constexpr Rgb kBevBackground = {16, 16, 16};

struct BEVImage {
  Image raster;
  double meters_per_pixel = 0.0;
  double world_origin_x = 0.0;  // world xy of pixel (0, 0), in the top frame
  double world_origin_y = 0.0;
  std::vector<double> height_buffer;  // max-z per pixel, -inf where empty
};

struct PosedFrame {
  Image color;
  DepthImage depth;
  CameraPose pose;
};

/// Depth back-projection of every stride-th valid pixel into a world-frame
/// colored point cloud. OpenMP-parallel over frames with a deterministic
/// concatenation order.
PointCloud aggregate_point_cloud(const std::vector<PosedFrame>& frames, const Intrinsics& k,
                                 int stride);

/// Single-threaded reference for aggregate_point_cloud; must agree exactly.
PointCloud aggregate_point_cloud_serial(const std::vector<PosedFrame>& frames,
                                        const Intrinsics& k, int stride);

/// Top-down z-buffered rasterization. Points are expressed in the e_top
/// frame; per pixel the highest point wins (equal heights: later point
/// wins). z_clip, when set, discards points above it before rasterizing.
BEVImage project_bev(const PointCloud& cloud, const CameraPose& e_top, double meters_per_pixel,
                     int out_width, int out_height,
                     std::optional<double> z_clip = std::nullopt);

/// Framing used by the pipeline when no extrinsic is configured: view
/// centered on the cloud's xy centroid, scaled so the xy bounding box fills
/// 90% of the raster, ceiling clipped at the 98th z-percentile.
BEVImage project_bev_auto(const PointCloud& cloud, int out_width, int out_height);

/// q in [0,1]; nearest-rank percentile of point heights.
double z_percentile(const PointCloud& cloud, double q);

}  // namespace ambiver
