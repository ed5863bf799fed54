#include "ambiver/keyframe.hpp"

#include <cmath>
#include <cstdlib>

namespace ambiver {

std::vector<int> scan_keyframes(const std::vector<CameraPose>& poses, double tau_t,
                                double tau_r) {
  if (poses.empty()) throw EmptyStream("scan_keyframes: empty pose stream");
  std::vector<int> kept{0};
  int last = 0;
  for (int i = 1; i < static_cast<int>(poses.size()); ++i) {
    const PoseDeviation d = pose_deviation(poses[i], poses[last]);
    if (d.translation_m > tau_t || d.rotation_deg > tau_r) {
      kept.push_back(i);
      last = i;
    }
  }
  return kept;
}

KeyframeSet select_keyframes(const std::vector<CameraPose>& poses, const KeyframeConfig& cfg) {
  if (poses.empty()) throw EmptyStream("select_keyframes: empty pose stream");

  KeyframeSet out;
  const int n = static_cast<int>(poses.size());

  if (cfg.uniform_sampling) {
    const int step = std::max(1, n / cfg.n_target);
    for (int i = 0; i < n; i += step) out.indices.push_back(i);
    out.final_tau_t = cfg.tau_t_init;
    out.final_tau_r = cfg.tau_r_init;
    out.iterations_used = 1;
    return out;
  }

  if (n <= cfg.n_target) {
    out.indices.resize(n);
    for (int i = 0; i < n; ++i) out.indices[i] = i;
    out.final_tau_t = cfg.tau_t_init;
    out.final_tau_r = cfg.tau_r_init;
    out.iterations_used = 1;
    return out;
  }

  double tau_t = cfg.tau_t_init;
  double tau_r = cfg.tau_r_init;
  std::vector<int> best;
  double best_tau_t = tau_t, best_tau_r = tau_r;
  int best_gap = -1;
  int iter = 0;
  while (iter < cfg.max_iterations) {
    ++iter;
    std::vector<int> kept = scan_keyframes(poses, tau_t, tau_r);
    const int count = static_cast<int>(kept.size());
    const int gap = std::abs(count - cfg.n_target);
    if (best_gap < 0 || gap < best_gap ||
        (gap == best_gap && count < static_cast<int>(best.size()))) {
      best = std::move(kept);
      best_tau_t = tau_t;
      best_tau_r = tau_r;
      best_gap = gap;
    }
    if (gap <= cfg.tolerance) break;
    const double scale = (count > cfg.n_target) ? cfg.alpha_inc : cfg.alpha_dec;
    tau_t *= scale;
    tau_r *= scale;
  }

  out.indices = std::move(best);
  out.final_tau_t = best_tau_t;
  out.final_tau_r = best_tau_r;
  out.iterations_used = iter;
  return out;
}

}  // namespace ambiver
