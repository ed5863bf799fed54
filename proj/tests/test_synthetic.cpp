#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ambiver/synthetic.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

using namespace ambiver;

namespace {

bool boxes_overlap(const SceneObject& a, const SceneObject& b) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(a.center[i] - b.center[i]) >= a.half_extents[i] + b.half_extents[i]) {
      return false;
    }
  }
  return true;
}

/// Counting oracle for instruction labels: answers each template family from
/// raw scene geometry, independent of the generator's bookkeeping.
Label oracle_label(const SyntheticScene& scene, const LabeledInstruction& li) {
  const std::string& t = li.text;
  auto count_of = [&](const std::string& cls) { return scene.count_class(cls); };

  // "pick up the <cls> to the left of the <other>" — observer-dependent.
  if (t.find(" to the left of the ") != std::string::npos) return Label::Ambiguous;
  // "handle the <cls>" — vague verb.
  if (t.rfind("handle the ", 0) == 0) return Label::Ambiguous;
  // "pick up the largest <cls>" — superlative resolves the choice.
  if (t.find("largest ") != std::string::npos) return Label::Unambiguous;
  // "pick up the large <cls>" — subjective adjective over duplicates.
  if (t.find(" large ") != std::string::npos) return Label::Ambiguous;
  // "pick up the <cls> by the <other>" — anchored; generator only emits the
  // Unambiguous variant when the anchor is uniquely adjacent.
  if (t.find(" by the ") != std::string::npos) return li.label;
  // "pick up the <cls>" — ambiguous iff the class occurs more than once.
  const std::string prefix = "pick up the ";
  REQUIRE(t.rfind(prefix, 0) == 0);
  const std::string cls = t.substr(prefix.size());
  return count_of(cls) >= 2 ? Label::Ambiguous : Label::Unambiguous;
}

}  // namespace

TEST_CASE("scene generation is deterministic in the seed") {
  SceneSpec spec;
  const auto a = generate_scene(spec, 42);
  const auto b = generate_scene(spec, 42);
  const auto c = generate_scene(spec, 43);
  REQUIRE(a.objects.size() == b.objects.size());
  for (size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].object_class == b.objects[i].object_class);
    CHECK(a.objects[i].center == b.objects[i].center);
    CHECK(a.objects[i].half_extents == b.objects[i].half_extents);
  }
  bool any_diff = a.objects.size() != c.objects.size();
  for (size_t i = 0; i < a.objects.size() && !any_diff && i < c.objects.size(); ++i) {
    any_diff = a.objects[i].center != c.objects[i].center;
  }
  CHECK(any_diff);
}

TEST_CASE("single-object scene stays inside the room") {
  SceneSpec spec;
  spec.n_objects = 1;
  const auto scene = generate_scene(spec, 5);
  REQUIRE(scene.objects.size() == 1);
  const auto& o = scene.objects[0];
  CHECK(std::abs(o.center.x()) + o.half_extents.x() <= spec.room_extent.x() / 2 + 1e-9);
  CHECK(std::abs(o.center.y()) + o.half_extents.y() <= spec.room_extent.y() / 2 + 1e-9);
  CHECK(o.center.z() - o.half_extents.z() >= -1e-9);
}

TEST_CASE("packed scenes are pairwise disjoint (overlap oracle)") {
  SceneSpec spec;
  spec.n_objects = 20;
  spec.min_separation = 0.0;  // rely on box disjointness alone
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
    const auto scene = generate_scene(spec, seed);
    REQUIRE(scene.objects.size() == 20);
    for (size_t i = 0; i < scene.objects.size(); ++i)
      for (size_t j = i + 1; j < scene.objects.size(); ++j)
        CHECK_FALSE(boxes_overlap(scene.objects[i], scene.objects[j]));
  }
}

TEST_CASE("min_separation is honored") {
  SceneSpec spec;
  spec.n_objects = 8;
  spec.min_separation = 1.2;
  const auto scene = generate_scene(spec, 11);
  for (size_t i = 0; i < scene.objects.size(); ++i)
    for (size_t j = i + 1; j < scene.objects.size(); ++j) {
      const double d = (scene.objects[i].center - scene.objects[j].center).norm();
      CHECK(d >= spec.min_separation - 1e-9);
    }
}

TEST_CASE("impossible packing raises PlacementFailure") {
  SceneSpec spec;
  spec.n_objects = 50;
  spec.room_extent = {2, 2, 3};
  spec.min_separation = 1.5;  // cannot fit 50 centers 1.5 m apart in 2x2 m
  CHECK_THROWS_AS(generate_scene(spec, 1), PlacementFailure);
}

TEST_CASE("orbit poses look at the orbit center") {
  const Eigen::Vector3d center(1, -2, 0.5);
  const auto poses = orbit_trajectory(12, center, 4.0, 3.0);
  REQUIRE(poses.size() == 12);
  for (const auto& p : poses) {
    CHECK(p.valid());
    // Camera +z (third rotation column) points from the camera to the center.
    const Eigen::Vector3d fwd = p.rotation.col(2);
    const Eigen::Vector3d to_center = (center - p.translation).normalized();
    CHECK((fwd - to_center).norm() < 1e-9);
    CHECK(p.translation.z() == doctest::Approx(center.z() + 3.0));
    CHECK((p.translation.head<2>() - center.head<2>()).norm() == doctest::Approx(4.0));
  }
}

TEST_CASE("a lone object projects onto its own center ray") {
  SyntheticScene scene;
  scene.scene_id = "one";
  SceneObject obj;
  obj.id = 0;
  obj.object_class = "cup";
  obj.center = {0, 0, 1};
  obj.half_extents = {0.1, 0.1, 0.1};
  scene.objects.push_back(obj);

  CameraPose pose;  // at origin looking along +z, object straight ahead
  const auto obs = render_detections(scene, {pose}, kSyntheticIntrinsics, DetectionNoise{},
                                     "cup", 3);
  REQUIRE(obs.detections.size() == 1);
  const auto& det = obs.detections[0];
  CHECK(det.view_index == 0);
  CHECK(obs.true_group.at(0) == 0);
  // Noise-free bbox center = projected object center = principal point.
  CHECK(det.bbox.center_x() == doctest::Approx(kSyntheticIntrinsics.cx).epsilon(1e-6));
  CHECK(det.bbox.center_y() == doctest::Approx(kSyntheticIntrinsics.cy).epsilon(1e-6));
  const Ray3 ray = back_project(det, pose, kSyntheticIntrinsics);
  CHECK((ray.direction - Eigen::Vector3d(0, 0, 1)).norm() < 1e-6);
}

TEST_CASE("objects behind the camera yield no detections") {
  SyntheticScene scene;
  SceneObject obj;
  obj.object_class = "cup";
  obj.center = {0, 0, -2};  // behind a +z-facing camera at the origin
  obj.half_extents = {0.1, 0.1, 0.1};
  scene.objects.push_back(obj);
  const auto obs = render_detections(scene, {CameraPose{}}, kSyntheticIntrinsics,
                                     DetectionNoise{}, "cup", 3);
  CHECK(obs.detections.empty());
}

TEST_CASE("full dropout suppresses every detection") {
  SceneSpec spec;
  const auto scene = generate_scene(spec, 9);
  DetectionNoise noise;
  noise.dropout_prob = 1.0;
  const auto obs = render_detections(scene, default_orbit(scene), kSyntheticIntrinsics, noise,
                                     scene.objects[0].object_class, 3);
  CHECK(obs.detections.empty());
}

TEST_CASE("detection scores respect the configured range") {
  SceneSpec spec;
  const auto scene = generate_scene(spec, 13);
  DetectionNoise noise;
  noise.score_min = 0.7;
  noise.score_max = 0.8;
  const auto obs = render_detections(scene, default_orbit(scene), kSyntheticIntrinsics, noise,
                                     scene.objects[0].object_class, 4);
  REQUIRE(!obs.detections.empty());
  for (const auto& d : obs.detections) {
    CHECK(d.score >= 0.7);
    CHECK(d.score <= 0.8);
    CHECK(d.bbox.valid());
    CHECK(obs.true_group.count(0) == 1);
  }
}

TEST_CASE("zero-noise fusion recovers the duplicated pair exactly") {
  SceneSpec spec;
  FusionConfig cfg;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto scene = generate_scene(spec, seed);
    const std::string query = scene.objects[0].object_class;
    REQUIRE(scene.count_class(query) == 2);
    const auto obs = render_detections(scene, default_orbit(scene), kSyntheticIntrinsics,
                                       DetectionNoise{}, query, seed);
    std::vector<Ray3> rays;
    for (const auto& d : obs.detections) {
      rays.push_back(back_project(d, obs.poses[d.view_index], kSyntheticIntrinsics));
    }
    const auto comps =
        union_find_components(static_cast<int>(obs.detections.size()),
                              build_edges(obs.detections, rays, cfg));
    // Every component must be pure and the two objects must not merge:
    // component count == number of distinct true objects.
    std::set<int> object_ids;
    for (const auto& [det, obj] : obs.true_group) object_ids.insert(obj);
    CHECK(comps.size() == object_ids.size());
    for (const auto& comp : comps) {
      std::set<int> owners;
      for (int d : comp) owners.insert(obs.true_group.at(d));
      CHECK(owners.size() == 1);
    }
  }
}

TEST_CASE("instruction labels agree with the geometry oracle") {
  SceneSpec spec;
  int checked = 0;
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    const auto scene = generate_scene(spec, seed);
    for (const auto& li : generate_instruction_suite(scene, 6, seed)) {
      CHECK(li.label == oracle_label(scene, li));
      CHECK((li.label == Label::Ambiguous) == li.subtype.has_value());
      CHECK(!li.text.empty());
      CHECK(li.scene_id == scene.scene_id);
      ++checked;
    }
  }
  CHECK(checked >= 30 * 6);
}

TEST_CASE("instruction suites are deterministic and id-unique") {
  SceneSpec spec;
  const auto scene = generate_scene(spec, 77);
  const auto a = generate_instruction_suite(scene, 8, 5);
  const auto b = generate_instruction_suite(scene, 8, 5);
  REQUIRE(a.size() == b.size());
  std::set<std::string> ids;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].text == b[i].text);
    CHECK(a[i].label == b[i].label);
    CHECK(ids.insert(a[i].instruction_id).second);
  }
}

TEST_CASE("scene JSON round trip preserves every field") {
  SceneSpec spec;
  const auto scene = generate_scene(spec, 31);
  const auto back = scene_from_json(scene_to_json(scene));
  CHECK(back.scene_id == scene.scene_id);
  CHECK(back.seed == scene.seed);
  CHECK(back.room_extent == scene.room_extent);
  REQUIRE(back.objects.size() == scene.objects.size());
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    CHECK(back.objects[i].id == scene.objects[i].id);
    CHECK(back.objects[i].object_class == scene.objects[i].object_class);
    CHECK(back.objects[i].center == scene.objects[i].center);
    CHECK(back.objects[i].half_extents == scene.objects[i].half_extents);
    CHECK(back.objects[i].attributes == scene.objects[i].attributes);
    CHECK(back.objects[i].color == scene.objects[i].color);
  }

  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ambiver_syn_test";
  fs::create_directories(dir);
  save_scene((dir / "scene.json").string(), scene);
  const auto loaded = load_scene((dir / "scene.json").string());
  CHECK(scene_to_json(loaded) == scene_to_json(scene));
}

TEST_CASE("derive_seed separates tags and stays deterministic") {
  CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
}
