// Compares the OpenMP kernels against their serial references: edge
// construction over the detection pair grid and multi-frame point-cloud
// aggregation. Verifies that both variants produce identical output before
// timing them.

#include "ambiver/bev.hpp"
#include "ambiver/fusion.hpp"
#include "ambiver/synthetic.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

using namespace ambiver;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  // Warm-up run, then best-of-reps.
  fn();
  double best = 1e30;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

int main() {
  const Intrinsics k = kSyntheticIntrinsics;
  SceneSpec spec;
  const SyntheticScene scene = generate_scene(spec, 7);

  // --- build_edges on a large detection set ---
  std::vector<Detection2D> detections;
  std::vector<Ray3> rays;
  const auto poses = default_orbit(scene, 96);
  for (const auto& cls : spec.class_pool) {
    const auto obs = render_detections(scene, poses, k, DetectionNoise{}, cls, 11);
    for (const auto& d : obs.detections) {
      Detection2D copy = d;
      copy.view_index = d.view_index;
      detections.push_back(copy);
      rays.push_back(back_project(copy, poses[copy.view_index], k));
    }
  }
  FusionConfig fcfg;
  const auto edges_par = build_edges(detections, rays, fcfg);
  const auto edges_ser = build_edges_serial(detections, rays, fcfg);
  if (edges_par != edges_ser) {
    std::fprintf(stderr, "FAIL: build_edges parallel/serial mismatch\n");
    return 1;
  }
  const double t_edges_par = time_ms([&] { build_edges(detections, rays, fcfg); }, 5);
  const double t_edges_ser = time_ms([&] { build_edges_serial(detections, rays, fcfg); }, 5);

  // --- point-cloud aggregation over rendered frames ---
  std::vector<PosedFrame> frames;
  for (const CameraPose& pose : default_orbit(scene, 16)) {
    frames.push_back(render_frame(scene, pose, k));
  }
  const PointCloud cloud_par = aggregate_point_cloud(frames, k, 2);
  const PointCloud cloud_ser = aggregate_point_cloud_serial(frames, k, 2);
  if (cloud_par.points != cloud_ser.points || cloud_par.colors != cloud_ser.colors) {
    std::fprintf(stderr, "FAIL: aggregate_point_cloud parallel/serial mismatch\n");
    return 1;
  }
  const double t_agg_par = time_ms([&] { aggregate_point_cloud(frames, k, 2); }, 5);
  const double t_agg_ser = time_ms([&] { aggregate_point_cloud_serial(frames, k, 2); }, 5);

  std::printf("%-28s %10s %10s %8s\n", "kernel", "serial ms", "openmp ms", "speedup");
  std::printf("%-28s %10.2f %10.2f %7.2fx   (%zu detections, %zu edges)\n", "build_edges",
              t_edges_ser, t_edges_par, t_edges_ser / t_edges_par, detections.size(),
              edges_par.size());
  std::printf("%-28s %10.2f %10.2f %7.2fx   (%zu frames, %zu points)\n",
              "aggregate_point_cloud", t_agg_ser, t_agg_par, t_agg_ser / t_agg_par,
              frames.size(), cloud_par.size());
  return 0;
}
