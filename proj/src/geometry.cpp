#include "ambiver/geometry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ambiver {

namespace {
constexpr double kRadToDeg = 180.0 / M_PI;
constexpr double kParallelEps = 1e-12;

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

// Distance from a point to a half-line.
double point_to_ray(const Eigen::Vector3d& p, const Ray3& r) {
  double t = std::max(0.0, r.direction.dot(p - r.origin));
  return (p - (r.origin + t * r.direction)).norm();
}

// One-sided half-line distance; symmetrized by the caller.
double half_line_distance(const Ray3& a, const Ray3& b) {
  const Eigen::Vector3d r = a.origin - b.origin;
  const double cosab = a.direction.dot(b.direction);
  const double denom = 1.0 - cosab * cosab;
  if (a.direction.cross(b.direction).norm() < kParallelEps) {
    return std::min(point_to_ray(a.origin, b), point_to_ray(b.origin, a));
  }
  const double d = a.direction.dot(r);
  const double e = b.direction.dot(r);
  // Unconstrained closest parameters of the two infinite lines.
  double ta = (cosab * e - d) / denom;
  double tb = (e - cosab * d) / denom;
  auto eval = [&](double s, double t) {
    return ((a.origin + s * a.direction) - (b.origin + t * b.direction)).norm();
  };
  if (ta >= 0.0 && tb >= 0.0) return eval(ta, tb);
  // Clamp each parameter to zero in turn and re-solve the other.
  double best = std::numeric_limits<double>::infinity();
  if (ta < 0.0) best = std::min(best, point_to_ray(a.origin, b));
  if (tb < 0.0) best = std::min(best, point_to_ray(b.origin, a));
  return best;
}
}  // namespace

bool CameraPose::valid() const {
  const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() >= 1e-6) return false;
  return std::abs(rotation.determinant() - 1.0) < 1e-6;
}

PoseDeviation pose_deviation(const CameraPose& a, const CameraPose& b) {
  PoseDeviation d;
  d.translation_m = (a.translation - b.translation).norm();
  const double tr = (a.rotation.transpose() * b.rotation).trace();
  d.rotation_deg = std::acos(clamp_unit((tr - 1.0) / 2.0)) * kRadToDeg;
  return d;
}

Ray3 back_project(const Detection2D& det, const CameraPose& pose, const Intrinsics& k) {
  const double u = det.bbox.center_x();
  const double v = det.bbox.center_y();
  if (u < 0 || u >= k.width || v < 0 || v >= k.height) {
    throw BBoxOutOfBounds("bbox center (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") outside image " + std::to_string(k.width) + "x" +
                          std::to_string(k.height));
  }
  Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  Ray3 ray;
  ray.origin = pose.translation;
  ray.direction = (pose.rotation * dir_cam).normalized();
  return ray;
}

double ray_min_distance(const Ray3& a, const Ray3& b) {
  return std::min(half_line_distance(a, b), half_line_distance(b, a));
}

double ray_angle(const Ray3& a, const Ray3& b) {
  return std::acos(clamp_unit(a.direction.dot(b.direction))) * kRadToDeg;
}

double area_ratio(const BBox2D& a, const BBox2D& b) {
  const double aa = a.area(), ab = b.area();
  return std::min(aa, ab) / std::max(aa, ab);
}

std::vector<CameraPose> parse_poses(const std::string& text) {
  std::vector<double> values;
  std::istringstream in(text);
  double x;
  while (in >> x) values.push_back(x);
  if (values.empty() || values.size() % 16 != 0) {
    throw GeometryError("pose data must hold a multiple of 16 values, got " +
                        std::to_string(values.size()));
  }
  std::vector<CameraPose> poses;
  for (size_t p = 0; p * 16 < values.size(); ++p) {
    CameraPose pose;
    pose.frame_index = static_cast<int>(p);
    const double* m = values.data() + p * 16;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) pose.rotation(r, c) = m[r * 4 + c];
      pose.translation(r) = m[r * 4 + 3];
    }
    if (!pose.valid()) {
      throw GeometryError("pose " + std::to_string(p) + " is not a proper rotation");
    }
    poses.push_back(pose);
  }
  return poses;
}

std::vector<CameraPose> load_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open pose file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_poses(buf.str());
}

Intrinsics load_intrinsics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw GeometryError("cannot open intrinsics file: " + path);
  nlohmann::json j;
  in >> j;
  Intrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  if (!k.valid()) throw GeometryError("invalid intrinsics in " + path);
  return k;
}

}  // namespace ambiver
