#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ambiver/keyframe.hpp"

#include <cmath>
#include <random>

using namespace ambiver;

namespace {

std::vector<CameraPose> line_poses(int n, double step) {
  std::vector<CameraPose> poses(n);
  for (int i = 0; i < n; ++i) {
    poses[i].frame_index = i;
    poses[i].translation = {step * i, 0, 0};
  }
  return poses;
}

std::vector<CameraPose> circle_poses(int n, double radius) {
  std::vector<CameraPose> poses(n);
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * M_PI * i / n;
    poses[i].frame_index = i;
    poses[i].translation = {radius * std::cos(a), radius * std::sin(a), 0};
    poses[i].rotation = Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).matrix();
  }
  return poses;
}

}  // namespace

TEST_CASE("scan keeps only frame 0 for identical poses") {
  const std::vector<CameraPose> poses(10);
  CHECK(scan_keyframes(poses, 0.5, 10.0) == std::vector<int>{0});
}

TEST_CASE("scan on a 1 m-step line") {
  const auto poses = line_poses(10, 1.0);
  CHECK(scan_keyframes(poses, 1.5, 10.0) == std::vector<int>{0, 2, 4, 6, 8});
  CHECK(scan_keyframes(poses, 0.5, 10.0) ==
        std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
}

TEST_CASE("scan triggers on rotation alone") {
  std::vector<CameraPose> poses(5);
  for (int i = 0; i < 5; ++i) {
    poses[i].frame_index = i;
    poses[i].rotation =
        Eigen::AngleAxisd(i * 20.0 * M_PI / 180.0, Eigen::Vector3d::UnitZ()).matrix();
  }
  // 20 degree steps exceed tau_r = 15: every frame kept.
  CHECK(scan_keyframes(poses, 100.0, 15.0) == std::vector<int>{0, 1, 2, 3, 4});
  // tau_r = 25: every other frame.
  CHECK(scan_keyframes(poses, 100.0, 25.0) == std::vector<int>{0, 2, 4});
}

TEST_CASE("scan rejects the empty stream") {
  CHECK_THROWS_AS(scan_keyframes({}, 1.0, 1.0), EmptyStream);
}

TEST_CASE("short streams are returned whole in one iteration") {
  const auto poses = line_poses(50, 1.0);
  KeyframeConfig cfg;  // n_target = 100
  const auto set = select_keyframes(poses, cfg);
  CHECK(set.indices.size() == 50);
  CHECK(set.iterations_used == 1);
}

TEST_CASE("degenerate identical-pose stream terminates at max_iterations") {
  const std::vector<CameraPose> poses(100);
  KeyframeConfig cfg;
  cfg.n_target = 50;  // unreachable: identical poses always scan to one frame
  const auto set = select_keyframes(poses, cfg);
  CHECK(set.indices == std::vector<int>{0});
  CHECK(set.iterations_used == cfg.max_iterations);
}

TEST_CASE("2000-pose orbit converges inside the tolerance window") {
  const auto poses = circle_poses(2000, 2.0);
  KeyframeConfig cfg;  // n_target = 100, tolerance = 5
  const auto set = select_keyframes(poses, cfg);
  CHECK(set.iterations_used <= cfg.max_iterations);
  CHECK(std::abs(static_cast<int>(set.indices.size()) - cfg.n_target) <= cfg.tolerance);
  // Indices strictly increasing, starting at 0.
  REQUIRE(!set.indices.empty());
  CHECK(set.indices.front() == 0);
  for (size_t i = 1; i < set.indices.size(); ++i) CHECK(set.indices[i] > set.indices[i - 1]);
}

TEST_CASE("raising both thresholds never increases the count (property)") {
  const auto poses = circle_poses(500, 2.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ut(0.001, 1.0), ur(0.5, 90.0), scale(1.0, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const double tt = ut(rng), tr = ur(rng), s = scale(rng);
    const auto lo = scan_keyframes(poses, tt, tr);
    const auto hi = scan_keyframes(poses, tt * s, tr * s);
    CHECK(hi.size() <= lo.size());
  }
}

TEST_CASE("selection is deterministic") {
  const auto poses = circle_poses(777, 1.5);
  KeyframeConfig cfg;
  const auto a = select_keyframes(poses, cfg);
  const auto b = select_keyframes(poses, cfg);
  CHECK(a.indices == b.indices);
  CHECK(a.final_tau_t == b.final_tau_t);
  CHECK(a.final_tau_r == b.final_tau_r);
  CHECK(a.iterations_used == b.iterations_used);
}

TEST_CASE("uniform sampling mode takes every floor(N/n_target)-th frame") {
  const auto poses = line_poses(40, 1.0);
  KeyframeConfig cfg;
  cfg.n_target = 10;
  cfg.uniform_sampling = true;
  const auto set = select_keyframes(poses, cfg);
  std::vector<int> expect;
  for (int i = 0; i < 40; i += 4) expect.push_back(i);
  CHECK(set.indices == expect);
}

TEST_CASE("kept keyframes exceed the final thresholds on convergent streams") {
  const auto poses = circle_poses(2000, 2.0);
  KeyframeConfig cfg;
  const auto set = select_keyframes(poses, cfg);
  for (size_t i = 1; i < set.indices.size(); ++i) {
    const auto d = pose_deviation(poses[set.indices[i - 1]], poses[set.indices[i]]);
    CHECK((d.translation_m > set.final_tau_t || d.rotation_deg > set.final_tau_r));
  }
}
