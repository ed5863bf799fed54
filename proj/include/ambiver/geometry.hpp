#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambiver {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BBoxOutOfBounds : GeometryError {
  using GeometryError::GeometryError;
};

/// Camera-to-world rigid transform. `rotation * p_cam + translation` maps a
/// point from the camera frame (+z forward, +x right, +y down) into world.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  int frame_index = 0;

  // orthonormality / proper-rotation check, 1e-6 tolerance
  bool valid() const;
};

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  bool valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
  }
};

struct Ray3 {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();  // unit norm
};

struct BBox2D {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

/// One open-vocabulary detection in one keyframe.
struct Detection2D {
  int view_index = 0;
  BBox2D bbox;
  double score = 0.0;  // in [0,1]
  int image_width = 0;
  int image_height = 0;
};

struct PoseDeviation {
  double translation_m = 0.0;
  double rotation_deg = 0.0;
};

/// Euclidean translation gap and geodesic SO(3) angle between two poses.
PoseDeviation pose_deviation(const CameraPose& a, const CameraPose& b);

/// Ray through the bbox center of a detection, expressed in world frame.
/// Throws BBoxOutOfBounds when the center falls outside the image.
Ray3 back_project(const Detection2D& det, const CameraPose& pose, const Intrinsics& k);

/// Minimum distance between two rays treated as half-lines (t >= 0).
/// Exactly symmetric in its arguments.
double ray_min_distance(const Ray3& a, const Ray3& b);

/// Angle between ray directions, degrees in [0, 180].
double ray_angle(const Ray3& a, const Ray3& b);

/// min(area_a, area_b) / max(area_a, area_b), in (0, 1].
double area_ratio(const BBox2D& a, const BBox2D& b);

// --- pose / intrinsics file I/O ---

/// Reads camera-to-world poses: each pose is a row-major 4x4 matrix given as
/// 16 whitespace-separated decimals; one pose per line or one per file.
std::vector<CameraPose> load_pose_file(const std::string& path);
std::vector<CameraPose> parse_poses(const std::string& text);

/// {fx, fy, cx, cy, width, height} JSON object.
Intrinsics load_intrinsics(const std::string& path);

}  // namespace ambiver
