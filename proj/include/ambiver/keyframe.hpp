#pragma once

#include "ambiver/geometry.hpp"

#include <vector>

namespace ambiver {

struct EmptyStream : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct KeyframeConfig {
  int n_target = 100;
  double tau_t_init = 0.1;   // meters
  double tau_r_init = 15.0;  // degrees
  double alpha_inc = 1.2;
  double alpha_dec = 0.85;
  int tolerance = 5;
  int max_iterations = 50;
  bool uniform_sampling = false;  // ablation: every floor(N/n_target)-th frame

  bool valid() const {
    return n_target > 0 && tau_t_init > 0 && tau_r_init > 0 && alpha_inc > 1.0 &&
           alpha_dec > 0.0 && alpha_dec < 1.0 && tolerance >= 0 && max_iterations > 0;
  }
};

struct KeyframeSet {
  std::vector<int> indices;  // strictly increasing, starts at 0
  double final_tau_t = 0.0;
  double final_tau_r = 0.0;
  int iterations_used = 0;
};

/// Single greedy pass: frame 0 is always kept; a later frame is kept iff its
/// deviation from the last kept frame exceeds tau_t (translation) or tau_r
/// (rotation).
std::vector<int> scan_keyframes(const std::vector<CameraPose>& poses, double tau_t,
                                double tau_r);

/// Iterates scan_keyframes, scaling both thresholds up (alpha_inc) when the
/// count overshoots n_target and down (alpha_dec) when it undershoots, until
/// the count lands within the tolerance window or max_iterations is hit.
/// On non-convergence the iteration with count closest to n_target wins
/// (ties favor fewer keyframes).
KeyframeSet select_keyframes(const std::vector<CameraPose>& poses, const KeyframeConfig& cfg);

}  // namespace ambiver
