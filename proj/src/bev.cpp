#include "ambiver/bev.hpp"

#include <algorithm>
#include <cmath>

namespace ambiver {

namespace {

void back_project_frame(const PosedFrame& f, const Intrinsics& k, int stride, PointCloud* out) {
  if (f.depth.width != k.width || f.depth.height != k.height || f.color.width != k.width ||
      f.color.height != k.height) {
    throw ShapeMismatch("frame dimensions disagree with intrinsics");
  }
  for (int v = 0; v < k.height; v += stride) {
    for (int u = 0; u < k.width; u += stride) {
      const double d = f.depth.meters(u, v);
      if (d <= 0.0) continue;
      Eigen::Vector3d p_cam(d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d);
      out->points.push_back(f.pose.rotation * p_cam + f.pose.translation);
      out->colors.push_back(f.color.at(u, v));
    }
  }
}

}  // namespace

PointCloud aggregate_point_cloud_serial(const std::vector<PosedFrame>& frames,
                                        const Intrinsics& k, int stride) {
  PointCloud cloud;
  for (const auto& f : frames) back_project_frame(f, k, stride, &cloud);
  return cloud;
}

PointCloud aggregate_point_cloud(const std::vector<PosedFrame>& frames, const Intrinsics& k,
                                 int stride) {
  const int n = static_cast<int>(frames.size());
  std::vector<PointCloud> partial(n);
  bool failed = false;
  std::string error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    try {
      back_project_frame(frames[i], k, stride, &partial[i]);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        error = e.what();
      }
    }
  }
  if (failed) throw ShapeMismatch(error);
  PointCloud cloud;
  for (auto& p : partial) {
    cloud.points.insert(cloud.points.end(), p.points.begin(), p.points.end());
    cloud.colors.insert(cloud.colors.end(), p.colors.begin(), p.colors.end());
  }
  return cloud;
}

BEVImage project_bev(const PointCloud& cloud, const CameraPose& e_top, double meters_per_pixel,
                     int out_width, int out_height, std::optional<double> z_clip) {
  if (cloud.points.empty()) throw EmptyCloud("project_bev: empty point cloud");

  BEVImage bev;
  bev.raster = Image(out_width, out_height, kBevBackground);
  bev.meters_per_pixel = meters_per_pixel;
  bev.world_origin_x = -0.5 * out_width * meters_per_pixel;
  bev.world_origin_y = -0.5 * out_height * meters_per_pixel;
  bev.height_buffer.assign(size_t(out_width) * out_height,
                           -std::numeric_limits<double>::infinity());

  const Eigen::Matrix3d r_inv = e_top.rotation.transpose();
  for (size_t i = 0; i < cloud.points.size(); ++i) {
    const Eigen::Vector3d p = r_inv * (cloud.points[i] - e_top.translation);
    if (z_clip && p.z() > *z_clip) continue;
    const int px = static_cast<int>(std::floor((p.x() - bev.world_origin_x) / meters_per_pixel));
    const int py = static_cast<int>(std::floor((p.y() - bev.world_origin_y) / meters_per_pixel));
    if (px < 0 || px >= out_width || py < 0 || py >= out_height) continue;
    double& best = bev.height_buffer[size_t(py) * out_width + px];
    if (p.z() >= best) {  // ties: later point wins
      best = p.z();
      bev.raster.at(px, py) = cloud.colors[i];
    }
  }
  return bev;
}

double z_percentile(const PointCloud& cloud, double q) {
  if (cloud.points.empty()) throw EmptyCloud("z_percentile: empty point cloud");
  std::vector<double> zs;
  zs.reserve(cloud.points.size());
  for (const auto& p : cloud.points) zs.push_back(p.z());
  const size_t rank = std::min(zs.size() - 1, static_cast<size_t>(std::ceil(q * zs.size())));
  std::nth_element(zs.begin(), zs.begin() + static_cast<long>(rank), zs.end());
  return zs[rank];
}

BEVImage project_bev_auto(const PointCloud& cloud, int out_width, int out_height) {
  if (cloud.points.empty()) throw EmptyCloud("project_bev_auto: empty point cloud");

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const auto& p : cloud.points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  const double span_x = std::max(max_x - min_x, 1e-6);
  const double span_y = std::max(max_y - min_y, 1e-6);
  // xy bounding box fills 90% of the raster.
  const double mpp =
      std::max(span_x / (0.9 * out_width), span_y / (0.9 * out_height));

  CameraPose e_top;  // identity orientation: world z is height
  e_top.translation = Eigen::Vector3d(0.5 * (min_x + max_x), 0.5 * (min_y + max_y), 0.0);
  const double clip = z_percentile(cloud, 0.98);
  return project_bev(cloud, e_top, mpp, out_width, out_height, clip);
}

}  // namespace ambiver
