#pragma once

#include "ambiver/bev.hpp"
#include "ambiver/eval.hpp"
#include "ambiver/fusion.hpp"
#include "ambiver/geometry.hpp"

#include <map>
#include <random>
#include <string>
#include <vector>

namespace ambiver {

struct PlacementFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientScene : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SceneObject {
  int id = 0;
  std::string object_class;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Zero();
  std::vector<std::string> attributes;
  Rgb color = {200, 200, 200};
};

struct SyntheticScene {
  std::string scene_id;
  std::vector<SceneObject> objects;
  Eigen::Vector3d room_extent = Eigen::Vector3d(6, 6, 3);  // meters
  std::uint64_t seed = 0;

  int count_class(const std::string& cls) const;
  std::vector<const SceneObject*> of_class(const std::string& cls) const;
};

struct SceneSpec {
  int n_objects = 8;
  std::vector<std::string> class_pool = {"chair", "table", "cup",  "lamp",
                                         "plant", "sofa",  "shelf", "bottle"};
  std::vector<std::string> attribute_pool = {"red", "blue", "green", "wooden"};
  Eigen::Vector3d room_extent = Eigen::Vector3d(6, 6, 3);
  double min_separation = 1.2;  // center-to-center, meters
};

struct DetectionNoise {
  double bbox_sigma_px = 0.0;
  double score_min = 0.6;
  double score_max = 0.95;
  double dropout_prob = 0.0;
};

struct SyntheticObservation {
  std::vector<Detection2D> detections;
  std::map<int, int> true_group;  // detection index -> object id
  std::vector<CameraPose> poses;
};

/// Camera model shared by every synthetic render (pipeline, CLI, bench).
inline constexpr Intrinsics kSyntheticIntrinsics = {600.0, 600.0, 320.0, 240.0, 640, 480};

/// Deterministic rejection sampling of pairwise non-overlapping boxes.
SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// Circular orbit around `center`, all cameras looking at it. Default radius
/// (when <= 0): 1.5x the room half-diagonal.
std::vector<CameraPose> orbit_trajectory(int n_poses, const Eigen::Vector3d& center,
                                         double radius, double height);
std::vector<CameraPose> default_orbit(const SyntheticScene& scene, int n_poses = 24);

/// Projects every query-class object into every pose: a detection is emitted
/// when the object center is in front of the camera and in-bounds. The bbox
/// is the projected corner hull re-centered on the projected center, then
/// perturbed per `noise`.
SyntheticObservation render_detections(const SyntheticScene& scene,
                                       const std::vector<CameraPose>& trajectory,
                                       const Intrinsics& k, const DetectionNoise& noise,
                                       const std::string& query_class, std::uint64_t seed);

/// Raycast render (boxes + floor plane) for BEV tests.
PosedFrame render_frame(const SyntheticScene& scene, const CameraPose& pose,
                        const Intrinsics& k);

/// Template instructions whose labels are decidable from scene geometry.
std::vector<LabeledInstruction> generate_instruction_suite(const SyntheticScene& scene, int n,
                                                           std::uint64_t seed);

// Scene fixture serialization.
std::string scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(const std::string& text);
void save_scene(const std::string& path, const SyntheticScene& scene);
SyntheticScene load_scene(const std::string& path);

/// Stable sub-seed derivation (seed, tag) for parallel generation.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag);

}  // namespace ambiver
