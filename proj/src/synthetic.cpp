#include "ambiver/synthetic.hpp"

#include "ambiver/orchestrator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace ambiver {

using nlohmann::json;

int SyntheticScene::count_class(const std::string& cls) const {
  int n = 0;
  for (const auto& o : objects) n += (o.object_class == cls);
  return n;
}

std::vector<const SceneObject*> SyntheticScene::of_class(const std::string& cls) const {
  std::vector<const SceneObject*> out;
  for (const auto& o : objects) {
    if (o.object_class == cls) out.push_back(&o);
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag) {
  // splitmix64 over (seed ^ fnv(tag))
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

bool boxes_overlap(const SceneObject& a, const SceneObject& b) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.center[i] - b.center[i]) >= a.half_extents[i] + b.half_extents[i]) {
      return false;
    }
  }
  return true;
}

Rgb random_color(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(40, 230);
  return {static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
          static_cast<std::uint8_t>(d(rng))};
}

}  // namespace

SyntheticScene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  if (spec.n_objects < 1) throw PlacementFailure("generate_scene: n_objects must be >= 1");

  SyntheticScene scene;
  scene.seed = seed;
  scene.room_extent = spec.room_extent;
  scene.scene_id = "synth_" + std::to_string(seed);
  std::mt19937_64 rng(seed);

  // Class assignment: one duplicated class (objects 0 and 1) and otherwise
  // pairwise-distinct classes while the pool lasts. Keeping every other class
  // unique means ray fusion can only ever be asked to separate the one
  // known duplicated pair, whose two size tiers (below) guarantee the bbox
  // area-ratio gate rejects any cross-instance edge.
  std::vector<std::string> pool = spec.class_pool;
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::string> classes;
  for (int i = 0; i < spec.n_objects; ++i) {
    if (i < 2 && spec.n_objects >= 2) {
      classes.push_back(pool[0]);  // duplicated class
    } else if (static_cast<size_t>(i) - 1 < pool.size()) {
      classes.push_back(pool[i - 1]);  // distinct classes
    } else {
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      classes.push_back(pool[pick(rng)]);  // pool exhausted: reuse
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double margin = 0.5;
  int attempts = 0;
  for (int i = 0; i < spec.n_objects; ++i) {
    SceneObject obj;
    obj.id = i;
    obj.object_class = classes[i];
    if (!spec.attribute_pool.empty()) {
      std::uniform_int_distribution<size_t> pick(0, spec.attribute_pool.size() - 1);
      obj.attributes.push_back(spec.attribute_pool[pick(rng)]);
    }
    obj.color = random_color(rng);
    while (true) {
      if (++attempts > 1000) {
        throw PlacementFailure("generate_scene: placement failed after 1000 attempts");
      }
      if (i == 0 && spec.n_objects >= 2) {
        obj.half_extents = Eigen::Vector3d(0.30, 0.30, 0.30);  // large duplicate
      } else if (i == 1) {
        obj.half_extents = Eigen::Vector3d(0.05, 0.05, 0.05);  // small duplicate
      } else {
        obj.half_extents = Eigen::Vector3d(0.10 + 0.12 * unit(rng), 0.10 + 0.12 * unit(rng),
                                           0.10 + 0.20 * unit(rng));
      }
      const double x =
          -spec.room_extent.x() / 2 + margin +
          unit(rng) * (spec.room_extent.x() - 2 * margin);
      const double y =
          -spec.room_extent.y() / 2 + margin +
          unit(rng) * (spec.room_extent.y() - 2 * margin);
      obj.center = Eigen::Vector3d(x, y, obj.half_extents.z());  // resting on the floor
      bool ok = true;
      for (const auto& other : scene.objects) {
        const double dx = obj.center.x() - other.center.x();
        const double dy = obj.center.y() - other.center.y();
        if (boxes_overlap(obj, other) ||
            std::hypot(dx, dy) < spec.min_separation) {
          ok = false;
          break;
        }
      }
      if (ok) break;
    }
    scene.objects.push_back(obj);
  }
  return scene;
}

std::vector<CameraPose> orbit_trajectory(int n_poses, const Eigen::Vector3d& center,
                                         double radius, double height) {
  std::vector<CameraPose> poses;
  const Eigen::Vector3d up(0, 0, 1);
  for (int i = 0; i < n_poses; ++i) {
    const double angle = 2.0 * M_PI * i / n_poses;
    CameraPose p;
    p.frame_index = i;
    p.translation =
        center + Eigen::Vector3d(radius * std::cos(angle), radius * std::sin(angle), height);
    Eigen::Vector3d forward = (center - p.translation).normalized();
    Eigen::Vector3d right = forward.cross(up);
    if (right.norm() < 1e-9) right = Eigen::Vector3d(1, 0, 0);  // looking straight down
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);
    // Columns: camera +x right, +y down, +z forward, expressed in world.
    p.rotation.col(0) = right;
    p.rotation.col(1) = down;
    p.rotation.col(2) = forward;
    poses.push_back(p);
  }
  return poses;
}

std::vector<CameraPose> default_orbit(const SyntheticScene& scene, int n_poses) {
  const double half_diag = 0.5 * std::hypot(scene.room_extent.x(), scene.room_extent.y());
  const Eigen::Vector3d center(0, 0, 0.5);
  // Elevated ring: steep views keep the camera-to-object distance spread
  // small across the orbit, which keeps same-object bbox areas comparable
  // between views and cross-instance areas (size tiers) far apart.
  return orbit_trajectory(n_poses, center, 1.5 * half_diag, scene.room_extent.z() * 2.5);
}

SyntheticObservation render_detections(const SyntheticScene& scene,
                                       const std::vector<CameraPose>& trajectory,
                                       const Intrinsics& k, const DetectionNoise& noise,
                                       const std::string& query_class, std::uint64_t seed) {
  SyntheticObservation obs;
  obs.poses = trajectory;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, noise.bbox_sigma_px);
  std::uniform_real_distribution<double> score(noise.score_min, noise.score_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (size_t v = 0; v < trajectory.size(); ++v) {
    const CameraPose& pose = trajectory[v];
    const Eigen::Matrix3d r_inv = pose.rotation.transpose();
    for (const auto& obj : scene.objects) {
      if (obj.object_class != query_class) continue;
      const Eigen::Vector3d c_cam = r_inv * (obj.center - pose.translation);
      if (c_cam.z() < 0.1) continue;  // behind or grazing the camera
      const double uc = k.fx * c_cam.x() / c_cam.z() + k.cx;
      const double vc = k.fy * c_cam.y() / c_cam.z() + k.cy;
      if (uc < 0 || uc >= k.width || vc < 0 || vc >= k.height) continue;

      // Hull extent of the projected corners, centered on the projected
      // center so the back-projected ray passes through the true center.
      double hw = 1.0, hh = 1.0;
      for (int corner = 0; corner < 8; ++corner) {
        Eigen::Vector3d w = obj.center;
        w.x() += (corner & 1 ? 1 : -1) * obj.half_extents.x();
        w.y() += (corner & 2 ? 1 : -1) * obj.half_extents.y();
        w.z() += (corner & 4 ? 1 : -1) * obj.half_extents.z();
        const Eigen::Vector3d p = r_inv * (w - pose.translation);
        if (p.z() < 0.05) continue;
        hw = std::max(hw, std::abs(k.fx * p.x() / p.z() + k.cx - uc));
        hh = std::max(hh, std::abs(k.fy * p.y() / p.z() + k.cy - vc));
      }

      Detection2D det;
      det.view_index = static_cast<int>(v);
      det.image_width = k.width;
      det.image_height = k.height;
      det.bbox = {uc - hw, vc - hh, uc + hw, vc + hh};
      if (noise.bbox_sigma_px > 0) {
        det.bbox.x_min += jitter(rng);
        det.bbox.y_min += jitter(rng);
        det.bbox.x_max += jitter(rng);
        det.bbox.y_max += jitter(rng);
      }
      det.bbox.x_min = std::clamp(det.bbox.x_min, 0.0, k.width - 2.0);
      det.bbox.y_min = std::clamp(det.bbox.y_min, 0.0, k.height - 2.0);
      det.bbox.x_max = std::clamp(det.bbox.x_max, det.bbox.x_min + 1.0,
                                  static_cast<double>(k.width));
      det.bbox.y_max = std::clamp(det.bbox.y_max, det.bbox.y_min + 1.0,
                                  static_cast<double>(k.height));
      det.score = score(rng);
      if (unit(rng) < noise.dropout_prob) continue;  // after RNG draws: stable stream
      obs.true_group[static_cast<int>(obs.detections.size())] = obj.id;
      obs.detections.push_back(det);
    }
  }
  return obs;
}

PosedFrame render_frame(const SyntheticScene& scene, const CameraPose& pose,
                        const Intrinsics& k) {
  PosedFrame f;
  f.pose = pose;
  f.color = Image(k.width, k.height, {0, 0, 0});
  f.depth = DepthImage(k.width, k.height);
  const Rgb floor_color = {150, 150, 150};
  const double half_x = scene.room_extent.x() / 2;
  const double half_y = scene.room_extent.y() / 2;

  for (int py = 0; py < k.height; ++py) {
    for (int px = 0; px < k.width; ++px) {
      const Eigen::Vector3d dir_cam((px - k.cx) / k.fx, (py - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = pose.rotation * dir_cam;  // depth t equals camera z
      const Eigen::Vector3d& o = pose.translation;

      double best_t = std::numeric_limits<double>::infinity();
      Rgb best_color = {0, 0, 0};

      // Floor plane z = 0 limited to the room footprint.
      if (std::abs(dir.z()) > 1e-12) {
        const double t = -o.z() / dir.z();
        if (t > 0.05) {
          const Eigen::Vector3d hit = o + t * dir;
          if (std::abs(hit.x()) <= half_x && std::abs(hit.y()) <= half_y && t < best_t) {
            best_t = t;
            best_color = floor_color;
          }
        }
      }

      // AABB slab test per object.
      for (const auto& obj : scene.objects) {
        double t_near = 0.05, t_far = std::numeric_limits<double>::infinity();
        bool hit = true;
        for (int axis = 0; axis < 3 && hit; ++axis) {
          const double lo = obj.center[axis] - obj.half_extents[axis];
          const double hi = obj.center[axis] + obj.half_extents[axis];
          if (std::abs(dir[axis]) < 1e-12) {
            hit = o[axis] >= lo && o[axis] <= hi;
            continue;
          }
          double t0 = (lo - o[axis]) / dir[axis];
          double t1 = (hi - o[axis]) / dir[axis];
          if (t0 > t1) std::swap(t0, t1);
          t_near = std::max(t_near, t0);
          t_far = std::min(t_far, t1);
          hit = t_near <= t_far;
        }
        if (hit && t_near < best_t) {
          best_t = t_near;
          best_color = obj.color;
        }
      }

      if (std::isfinite(best_t)) {
        f.color.at(px, py) = best_color;
        const double mm = std::min(best_t * 1000.0, 65535.0);
        f.depth.at(px, py) = static_cast<std::uint16_t>(std::lround(mm));
      }
    }
  }
  return f;
}

namespace {

struct TemplateItem {
  std::string text;
  Label label;
  std::optional<AmbiguityType> subtype;
};

// Exactly one `cls` instance adjacent to the unique `other` object: nearest
// by a >= 0.3 m margin and within 2 m.
bool uniquely_adjacent(const SyntheticScene& scene, const std::string& cls,
                       const SceneObject& other) {
  std::vector<double> dists;
  for (const auto* o : scene.of_class(cls)) {
    dists.push_back((o->center - other.center).norm());
  }
  if (dists.size() < 2) return false;
  std::sort(dists.begin(), dists.end());
  return dists[0] < 2.0 && dists[0] + 0.3 < dists[1];
}

}  // namespace

std::vector<LabeledInstruction> generate_instruction_suite(const SyntheticScene& scene, int n,
                                                           std::uint64_t seed) {
  if (n < 1) throw InsufficientScene("generate_instruction_suite: n must be >= 1");

  std::set<std::string> classes;
  for (const auto& o : scene.objects) classes.insert(o.object_class);

  std::vector<TemplateItem> ambiguous, unambiguous;
  for (const std::string& cls : classes) {
    const int count = scene.count_class(cls);
    if (count >= 2) {
      ambiguous.push_back(
          {"pick up the " + cls, Label::Ambiguous, AmbiguityType::Instance});
      ambiguous.push_back(
          {"pick up the large " + cls, Label::Ambiguous, AmbiguityType::Attribute});
      unambiguous.push_back({"pick up the largest " + cls, Label::Unambiguous, std::nullopt});
      for (const std::string& other : classes) {
        if (other == cls || scene.count_class(other) != 1) continue;
        ambiguous.push_back({"pick up the " + cls + " to the left of the " + other,
                             Label::Ambiguous, AmbiguityType::Spatial});
        if (uniquely_adjacent(scene, cls, *scene.of_class(other).front())) {
          unambiguous.push_back(
              {"pick up the " + cls + " by the " + other, Label::Unambiguous, std::nullopt});
        }
        break;  // one spatial pairing per class keeps the suite compact
      }
    } else {
      ambiguous.push_back({"handle the " + cls, Label::Ambiguous, AmbiguityType::Action});
      unambiguous.push_back({"pick up the " + cls, Label::Unambiguous, std::nullopt});
    }
  }

  if (ambiguous.empty() || unambiguous.empty()) {
    throw InsufficientScene("scene " + scene.scene_id + " satisfies no balanced template set");
  }

  std::mt19937_64 rng(derive_seed(seed, scene.scene_id + "/suite"));
  std::shuffle(ambiguous.begin(), ambiguous.end(), rng);
  std::shuffle(unambiguous.begin(), unambiguous.end(), rng);

  // Alternate labels: balanced within one item of 50/50.
  std::vector<LabeledInstruction> suite;
  size_t ai = 0, ui = 0;
  while (static_cast<int>(suite.size()) < n && (ai < ambiguous.size() || ui < unambiguous.size())) {
    const bool want_ambiguous = suite.size() % 2 == 0;
    const TemplateItem* item = nullptr;
    if (want_ambiguous && ai < ambiguous.size()) {
      item = &ambiguous[ai++];
    } else if (!want_ambiguous && ui < unambiguous.size()) {
      item = &unambiguous[ui++];
    } else {
      break;  // one side exhausted: stop rather than unbalance the suite
    }
    LabeledInstruction li;
    li.scene_id = scene.scene_id;
    li.instruction_id = scene.scene_id + "_i" + std::to_string(suite.size());
    li.text = item->text;
    li.label = item->label;
    li.subtype = item->subtype;
    li.split = Split::test;
    suite.push_back(std::move(li));
  }
  if (suite.size() % 2 == 1) suite.pop_back();  // keep the 50/50 balance exact
  if (suite.empty()) throw InsufficientScene("scene " + scene.scene_id + " yielded no suite");
  return suite;
}

std::string scene_to_json(const SyntheticScene& scene) {
  json objs = json::array();
  for (const auto& o : scene.objects) {
    objs.push_back({{"id", o.id},
                    {"class", o.object_class},
                    {"center", {o.center.x(), o.center.y(), o.center.z()}},
                    {"half_extents",
                     {o.half_extents.x(), o.half_extents.y(), o.half_extents.z()}},
                    {"attributes", o.attributes},
                    {"color", {o.color[0], o.color[1], o.color[2]}}});
  }
  json j = {{"scene_id", scene.scene_id},
            {"seed", scene.seed},
            {"room_extent", {scene.room_extent.x(), scene.room_extent.y(), scene.room_extent.z()}},
            {"objects", objs}};
  return j.dump(2);
}

SyntheticScene scene_from_json(const std::string& text) {
  const json j = json::parse(text);
  SyntheticScene scene;
  scene.scene_id = j.at("scene_id").get<std::string>();
  scene.seed = j.at("seed").get<std::uint64_t>();
  const auto& re = j.at("room_extent");
  scene.room_extent = Eigen::Vector3d(re.at(0), re.at(1), re.at(2));
  for (const auto& jo : j.at("objects")) {
    SceneObject o;
    o.id = jo.at("id").get<int>();
    o.object_class = jo.at("class").get<std::string>();
    const auto& c = jo.at("center");
    o.center = Eigen::Vector3d(c.at(0), c.at(1), c.at(2));
    const auto& h = jo.at("half_extents");
    o.half_extents = Eigen::Vector3d(h.at(0), h.at(1), h.at(2));
    o.attributes = jo.at("attributes").get<std::vector<std::string>>();
    const auto& col = jo.at("color");
    o.color = {col.at(0).get<std::uint8_t>(), col.at(1).get<std::uint8_t>(),
               col.at(2).get<std::uint8_t>()};
    scene.objects.push_back(std::move(o));
  }
  return scene;
}

void save_scene(const std::string& path, const SyntheticScene& scene) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene: " + path);
  out << scene_to_json(scene) << "\n";
}

SyntheticScene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read scene: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return scene_from_json(text);
}

}  // namespace ambiver
