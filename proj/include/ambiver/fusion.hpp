#pragma once

#include "ambiver/geometry.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace ambiver {

struct LengthMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IndexOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyGroup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FusionConfig {
  double eps_d = 0.3;       // max ray distance, meters
  double theta_min = 0.0;   // degrees, inclusive
  double theta_max = 60.0;  // degrees, inclusive
  double sigma_s = 0.2;     // min bbox area ratio, strict
  int top_k = 6;
  double gamma = 0.5;  // boundary penalty factor
  double delta = 4.0;  // border proximity, pixels

  // Ablation switches.
  bool no_fusion = false;         // top-K raw detections, no graph
  bool confidence_only = false;   // representative = argmax s_i

  bool valid() const {
    return eps_d > 0 && theta_min <= theta_max && sigma_s > 0 && sigma_s <= 1 && top_k > 0 &&
           gamma > 0 && gamma <= 1 && delta >= 0;
  }
};

struct InstanceGroup {
  std::vector<int> member_indices;  // sorted ascending
  double group_score = 0.0;
  int cardinality() const { return static_cast<int>(member_indices.size()); }
};

struct Candidate {
  int representative_view = 0;
  BBox2D representative_bbox;
  double group_score = 0.0;
  int cardinality = 1;
};

using Edge = std::pair<int, int>;

/// All detection pairs (i < j) from distinct views passing the three
/// geometric gates: ray distance < eps_d, angle in [theta_min, theta_max],
/// area ratio > sigma_s. OpenMP-parallel over the pair grid; output order is
/// deterministic (lexicographic).
std::vector<Edge> build_edges(const std::vector<Detection2D>& detections,
                              const std::vector<Ray3>& rays, const FusionConfig& cfg);

/// Single-threaded reference for build_edges; must agree exactly.
std::vector<Edge> build_edges_serial(const std::vector<Detection2D>& detections,
                                     const std::vector<Ray3>& rays, const FusionConfig& cfg);

/// Connected components of the edge graph over {0..n-1}, singletons
/// included, sorted by smallest member.
std::vector<std::vector<int>> union_find_components(int n, const std::vector<Edge>& edges);

/// Area-weighted average confidence (group reliability score).
double group_score(const std::vector<int>& group, const std::vector<Detection2D>& detections);

/// Composite representative score: confidence x visibility x boundary penalty.
double representative_score(const Detection2D& det, const FusionConfig& cfg);

/// Full fusion: edges -> components -> group scores -> top-K ranking ->
/// representative selection.
std::vector<Candidate> fuse(const std::vector<Detection2D>& detections,
                            const std::vector<Ray3>& rays, const FusionConfig& cfg);

/// As fuse() but also exposes the groups backing each candidate (same order).
std::vector<Candidate> fuse_with_groups(const std::vector<Detection2D>& detections,
                                        const std::vector<Ray3>& rays, const FusionConfig& cfg,
                                        std::vector<InstanceGroup>* groups_out);

// --- detection cache (replay without a live detector) ---

std::string detections_to_json(const std::vector<Detection2D>& detections);
std::vector<Detection2D> detections_from_json(const std::string& json_text);
void save_detection_cache(const std::string& path, const std::vector<Detection2D>& detections);
std::vector<Detection2D> load_detection_cache(const std::string& path);

}  // namespace ambiver
