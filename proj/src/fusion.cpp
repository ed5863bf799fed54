#include "ambiver/fusion.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>

namespace ambiver {

namespace {

bool edge_passes(const Detection2D& di, const Detection2D& dj, const Ray3& ri, const Ray3& rj,
                 const FusionConfig& cfg) {
  if (di.view_index == dj.view_index) return false;
  if (area_ratio(di.bbox, dj.bbox) <= cfg.sigma_s) return false;
  const double ang = ray_angle(ri, rj);
  if (ang < cfg.theta_min || ang > cfg.theta_max) return false;
  return ray_min_distance(ri, rj) < cfg.eps_d;
}

// Path-compressed weighted union-find.
class DisjointSet {
 public:
  explicit DisjointSet(int n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
};

void check_lengths(const std::vector<Detection2D>& detections, const std::vector<Ray3>& rays) {
  if (detections.size() != rays.size()) {
    throw LengthMismatch("detections (" + std::to_string(detections.size()) + ") vs rays (" +
                         std::to_string(rays.size()) + ")");
  }
}

}  // namespace

std::vector<Edge> build_edges_serial(const std::vector<Detection2D>& detections,
                                     const std::vector<Ray3>& rays, const FusionConfig& cfg) {
  check_lengths(detections, rays);
  const int n = static_cast<int>(detections.size());
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge_passes(detections[i], detections[j], rays[i], rays[j], cfg)) {
        edges.emplace_back(i, j);
      }
    }
  }
  return edges;
}

std::vector<Edge> build_edges(const std::vector<Detection2D>& detections,
                              const std::vector<Ray3>& rays, const FusionConfig& cfg) {
  check_lengths(detections, rays);
  const int n = static_cast<int>(detections.size());
  // Per-row buckets keep the output order independent of thread scheduling.
  std::vector<std::vector<int>> row_hits(n);
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (edge_passes(detections[i], detections[j], rays[i], rays[j], cfg)) {
        row_hits[i].push_back(j);
      }
    }
  }
  std::vector<Edge> edges;
  for (int i = 0; i < n; ++i) {
    for (int j : row_hits[i]) edges.emplace_back(i, j);
  }
  return edges;
}

std::vector<std::vector<int>> union_find_components(int n, const std::vector<Edge>& edges) {
  DisjointSet ds(n);
  for (const auto& [i, j] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n) {
      throw IndexOutOfRange("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                            ") outside [0, " + std::to_string(n) + ")");
    }
    ds.unite(i, j);
  }
  std::vector<std::vector<int>> by_root(n);
  for (int i = 0; i < n; ++i) by_root[ds.find(i)].push_back(i);
  std::vector<std::vector<int>> components;
  for (int r = 0; r < n; ++r) {
    if (!by_root[r].empty()) components.push_back(std::move(by_root[r]));
  }
  // Members are ascending (the i loop above); roots are not ordered by their
  // smallest member, so sort components explicitly.
  std::sort(components.begin(), components.end(),
            [](const std::vector<int>& a, const std::vector<int>& b) {
              return a.front() < b.front();
            });
  return components;
}

double group_score(const std::vector<int>& group, const std::vector<Detection2D>& detections) {
  if (group.empty()) throw EmptyGroup("group_score: empty group");
  double num = 0.0, den = 0.0;
  for (int idx : group) {
    const double a = detections.at(idx).bbox.area();
    num += detections[idx].score * a;
    den += a;
  }
  return num / den;
}

double representative_score(const Detection2D& det, const FusionConfig& cfg) {
  const double image_area = static_cast<double>(det.image_width) * det.image_height;
  const double w_vis = det.bbox.area() / image_area;
  const bool near_border = det.bbox.x_min <= cfg.delta || det.bbox.y_min <= cfg.delta ||
                           det.bbox.x_max >= det.image_width - cfg.delta ||
                           det.bbox.y_max >= det.image_height - cfg.delta;
  const double w_bnd = near_border ? cfg.gamma : 1.0;
  return det.score * w_vis * w_bnd;
}

std::vector<Candidate> fuse_with_groups(const std::vector<Detection2D>& detections,
                                        const std::vector<Ray3>& rays, const FusionConfig& cfg,
                                        std::vector<InstanceGroup>* groups_out) {
  check_lengths(detections, rays);
  if (groups_out) groups_out->clear();
  if (detections.empty()) return {};

  const int n = static_cast<int>(detections.size());
  std::vector<std::vector<int>> components;
  if (cfg.no_fusion) {
    components.reserve(n);
    for (int i = 0; i < n; ++i) components.push_back({i});
  } else {
    components = union_find_components(n, build_edges(detections, rays, cfg));
  }

  std::vector<InstanceGroup> groups;
  groups.reserve(components.size());
  for (auto& members : components) {
    InstanceGroup g;
    g.group_score = group_score(members, detections);
    g.member_indices = std::move(members);
    groups.push_back(std::move(g));
  }

  // Rank: score desc, then larger cardinality, then smaller representative
  // (smallest-member) view index.
  std::vector<int> order(groups.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ga = groups[a];
    const auto& gb = groups[b];
    if (ga.group_score != gb.group_score) return ga.group_score > gb.group_score;
    if (ga.cardinality() != gb.cardinality()) return ga.cardinality() > gb.cardinality();
    return detections[ga.member_indices.front()].view_index <
           detections[gb.member_indices.front()].view_index;
  });
  if (static_cast<int>(order.size()) > cfg.top_k) order.resize(cfg.top_k);

  std::vector<Candidate> candidates;
  candidates.reserve(order.size());
  for (int gi : order) {
    const InstanceGroup& g = groups[gi];
    int best_idx = g.member_indices.front();
    double best_score = -1.0;
    for (int idx : g.member_indices) {
      const double f = cfg.confidence_only ? detections[idx].score
                                           : representative_score(detections[idx], cfg);
      if (f > best_score) {  // ties keep the smaller detection index
        best_score = f;
        best_idx = idx;
      }
    }
    Candidate c;
    c.representative_view = detections[best_idx].view_index;
    c.representative_bbox = detections[best_idx].bbox;
    c.group_score = g.group_score;
    c.cardinality = g.cardinality();
    candidates.push_back(c);
    if (groups_out) groups_out->push_back(g);
  }
  return candidates;
}

std::vector<Candidate> fuse(const std::vector<Detection2D>& detections,
                            const std::vector<Ray3>& rays, const FusionConfig& cfg) {
  return fuse_with_groups(detections, rays, cfg, nullptr);
}

std::string detections_to_json(const std::vector<Detection2D>& detections) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : detections) {
    arr.push_back({{"view_index", d.view_index},
                   {"bbox", {d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max}},
                   {"score", d.score},
                   {"image_width", d.image_width},
                   {"image_height", d.image_height}});
  }
  return arr.dump(2);
}

std::vector<Detection2D> detections_from_json(const std::string& json_text) {
  const nlohmann::json arr = nlohmann::json::parse(json_text);
  std::vector<Detection2D> out;
  for (const auto& j : arr) {
    Detection2D d;
    d.view_index = j.at("view_index").get<int>();
    const auto& b = j.at("bbox");
    d.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
              b.at(3).get<double>()};
    d.score = j.at("score").get<double>();
    d.image_width = j.at("image_width").get<int>();
    d.image_height = j.at("image_height").get<int>();
    out.push_back(d);
  }
  return out;
}

void save_detection_cache(const std::string& path, const std::vector<Detection2D>& detections) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write detection cache: " + path);
  out << detections_to_json(detections) << "\n";
}

std::vector<Detection2D> load_detection_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read detection cache: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return detections_from_json(text);
}

}  // namespace ambiver
