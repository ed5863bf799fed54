// Command-line front end: dataset synthesis, pipeline runs, evaluation, and
// the standalone fuse/bev utilities.

#include "ambiver/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ambiver;

namespace {

void write_instructions_jsonl(const std::string& path,
                              const std::vector<LabeledInstruction>& items) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& li : items) {
    json j = {{"scene_id", li.scene_id},
              {"instruction_id", li.instruction_id},
              {"text", li.text},
              {"label", to_string(li.label)},
              {"split", to_string(li.split)}};
    if (li.subtype) j["subtype"] = to_string(*li.subtype);
    out << j.dump() << "\n";
  }
}

int cmd_synth(const std::string& out_dir, int n_scenes, int per_scene, std::uint64_t seed,
              int n_objects) {
  fs::create_directories(fs::path(out_dir) / "scenes");
  SceneSpec spec;
  spec.n_objects = n_objects;
  std::vector<LabeledInstruction> all;
  for (int i = 0; i < n_scenes; ++i) {
    const std::uint64_t scene_seed = derive_seed(seed, "scene/" + std::to_string(i));
    const SyntheticScene scene = generate_scene(spec, scene_seed);
    save_scene((fs::path(out_dir) / "scenes" / (scene.scene_id + ".json")).string(), scene);
    const auto suite = generate_instruction_suite(scene, per_scene, seed);
    all.insert(all.end(), suite.begin(), suite.end());
  }
  write_instructions_jsonl((fs::path(out_dir) / "instructions.jsonl").string(), all);
  std::cout << "wrote " << n_scenes << " scenes, " << all.size() << " instructions to "
            << out_dir << "\n";
  return 0;
}

int cmd_fuse(const std::string& detections_path, const std::string& poses_path,
             const std::string& intrinsics_path, const FusionConfig& cfg,
             const std::string& out_path) {
  const auto detections = load_detection_cache(detections_path);
  const auto poses = load_pose_file(poses_path);
  const Intrinsics k = load_intrinsics(intrinsics_path);
  std::vector<Ray3> rays;
  for (const auto& d : detections) {
    rays.push_back(back_project(d, poses.at(d.view_index), k));
  }
  const auto candidates = fuse(detections, rays, cfg);
  json out = json::array();
  for (const auto& c : candidates) {
    out.push_back({{"representative_view", c.representative_view},
                   {"bbox",
                    {c.representative_bbox.x_min, c.representative_bbox.y_min,
                     c.representative_bbox.x_max, c.representative_bbox.y_max}},
                   {"group_score", c.group_score},
                   {"cardinality", c.cardinality}});
  }
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    f << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_bev(const std::string& scene_path, const std::string& out_path, int size, int stride,
            int n_views) {
  const SyntheticScene scene = load_scene(scene_path);
  const Intrinsics k = kSyntheticIntrinsics;
  std::vector<PosedFrame> frames;
  for (const CameraPose& pose : default_orbit(scene, n_views)) {
    frames.push_back(render_frame(scene, pose, k));
  }
  const PointCloud cloud = aggregate_point_cloud(frames, k, stride);
  const BEVImage bev = project_bev_auto(cloud, size, size);
  write_ppm(out_path, bev.raster);
  std::cout << "wrote " << out_path << " (" << cloud.size() << " points)\n";
  return 0;
}

int cmd_report(const std::string& report_path, const std::string& format) {
  std::ifstream in(report_path);
  if (!in) throw std::runtime_error("cannot open " + report_path);
  const json j = json::parse(in);
  if (format == "json") {
    std::cout << j.dump(2) << "\n";
    return 0;
  }
  MetricsReport r;
  r.tp = j.at("tp");
  r.fp = j.at("fp");
  r.tn = j.at("tn");
  r.fn = j.at("fn");
  r.accuracy = j.at("accuracy");
  r.precision = j.at("precision");
  r.recall = j.at("recall");
  r.f1_positive = j.at("f1_positive");
  r.f1_macro = j.at("f1_macro");
  r.precision_defined = j.value("precision_defined", true);
  r.recall_defined = j.value("recall_defined", true);
  r.f1_defined = j.value("f1_defined", true);
  r.per_type_accuracy = j.at("per_type_accuracy").get<std::map<std::string, double>>();
  std::cout << report_to_table(r);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AmbiVer: multi-view instruction ambiguity detection pipeline"};
  app.require_subcommand(1);

  // --- synth ---
  auto* synth = app.add_subcommand("synth", "generate synthetic scene and instruction fixtures");
  std::string synth_out = "dataset";
  int n_scenes = 10, per_scene = 6, n_objects = 8;
  std::uint64_t seed = 42;
  synth->add_option("--out", synth_out, "output dataset directory");
  synth->add_option("--scenes", n_scenes, "number of scenes");
  synth->add_option("--instructions-per-scene", per_scene, "suite size per scene");
  synth->add_option("--objects", n_objects, "objects per scene");
  synth->add_option("--seed", seed, "master seed");

  // --- run ---
  auto* run = app.add_subcommand("run", "run the full pipeline over a dataset");
  std::string run_dataset, config_path, backend_name, lexicon_dir, replay_dir, output_dir;
  bool force = false, kf_uniform = false, no_parse = false, no_fusion = false;
  bool confidence_only = false, no_bev = false, no_local = false, no_visual = false;
  int n_target = -1, kf_tolerance = -1, bev_size = -1, bev_stride = -1, in_flight = -1;
  run->add_option("--dataset", run_dataset, "dataset directory")->required();
  run->add_option("--config", config_path, "pipeline config JSON");
  run->add_option("--backend", backend_name, "mock | replay | remote");
  run->add_option("--replay-dir", replay_dir, "recorded responses for the replay backend");
  run->add_option("--lexicon-dir", lexicon_dir, "parser lexicon directory");
  run->add_option("--output", output_dir, "output directory");
  run->add_option("--n-target", n_target, "keyframe target count");
  run->add_option("--kf-tolerance", kf_tolerance, "keyframe tolerance window");
  run->add_option("--bev-size", bev_size, "BEV raster size");
  run->add_option("--bev-stride", bev_stride, "point sampling stride");
  run->add_option("--in-flight", in_flight, "worker / backend concurrency limit");
  run->add_flag("--force", force, "recompute completed records");
  run->add_flag("--kf-uniform", kf_uniform, "uniform keyframe sampling (ablation)");
  run->add_flag("--no-parse", no_parse, "raw instruction as grounding query (ablation)");
  run->add_flag("--no-fusion", no_fusion, "skip ray-based fusion (ablation)");
  run->add_flag("--confidence-only-rep", confidence_only,
                "representative by confidence only (ablation)");
  run->add_flag("--no-bev", no_bev, "drop the BEV map from the dossier (ablation)");
  run->add_flag("--no-local", no_local, "drop candidate crops from the dossier (ablation)");
  run->add_flag("--no-visual", no_visual, "drop all visual evidence (ablation)");

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "score recorded results against ground truth");
  std::string eval_dataset, results_path, eval_format = "table";
  eval->add_option("--dataset", eval_dataset, "dataset directory")->required();
  eval->add_option("--results", results_path, "results.jsonl from a run")->required();
  eval->add_option("--format", eval_format, "table | json");

  // --- fuse ---
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse a cached detection set into candidates");
  std::string det_path, poses_path, intr_path, fuse_out;
  FusionConfig fusion_cfg;
  fuse_cmd->add_option("--detections", det_path, "detection cache JSON")->required();
  fuse_cmd->add_option("--poses", poses_path, "camera pose file")->required();
  fuse_cmd->add_option("--intrinsics", intr_path, "intrinsics JSON")->required();
  fuse_cmd->add_option("--out", fuse_out, "output path (default stdout)");
  fuse_cmd->add_option("--eps-d", fusion_cfg.eps_d, "ray distance threshold, m");
  fuse_cmd->add_option("--theta-max", fusion_cfg.theta_max, "max ray angle, deg");
  fuse_cmd->add_option("--sigma-s", fusion_cfg.sigma_s, "min bbox area ratio");
  fuse_cmd->add_option("--top-k", fusion_cfg.top_k, "candidates retained");

  // --- bev ---
  auto* bev_cmd = app.add_subcommand("bev", "render a BEV map from a scene fixture");
  std::string bev_scene, bev_out = "bev.ppm";
  int bev_size2 = 640, bev_stride2 = 8, bev_views = 8;
  bev_cmd->add_option("--scene", bev_scene, "scene fixture JSON")->required();
  bev_cmd->add_option("--out", bev_out, "output PPM path");
  bev_cmd->add_option("--bev-size", bev_size2, "raster size");
  bev_cmd->add_option("--bev-stride", bev_stride2, "point sampling stride");
  bev_cmd->add_option("--views", bev_views, "rendered orbit views");

  // --- report ---
  auto* report = app.add_subcommand("report", "format a report.json");
  std::string report_path, report_format = "table";
  report->add_option("--report", report_path, "report.json path")->required();
  report->add_option("--format", report_format, "table | json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(synth_out, n_scenes, per_scene, seed, n_objects);

    if (*run) {
      PipelineConfig cfg =
          config_path.empty() ? PipelineConfig::defaults() : load_config(config_path);
      if (!backend_name.empty()) cfg.backend = backend_kind_from_string(backend_name);
      if (!replay_dir.empty()) cfg.replay_dir = replay_dir;
      if (!lexicon_dir.empty()) cfg.lexicon_dir = lexicon_dir;
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (n_target > 0) cfg.keyframe.n_target = n_target;
      if (kf_tolerance >= 0) cfg.keyframe.tolerance = kf_tolerance;
      if (bev_size > 0) cfg.bev_width = cfg.bev_height = bev_size;
      if (bev_stride > 0) cfg.bev_stride = bev_stride;
      if (in_flight > 0) cfg.in_flight_limit = in_flight;
      cfg.ablation.uniform_keyframes |= kf_uniform;
      cfg.ablation.no_parse |= no_parse;
      cfg.ablation.no_fusion |= no_fusion;
      cfg.ablation.confidence_only_rep |= confidence_only;
      cfg.ablation.no_bev |= no_bev;
      cfg.ablation.no_local |= no_local;
      cfg.ablation.no_visual |= no_visual;
      const PipelineOutput out = run_pipeline(cfg, run_dataset, force);
      std::cout << report_to_table(out.metrics);
      return 0;
    }

    if (*eval) {
      const auto truth = load_benchmark(eval_dataset);
      std::ifstream in(results_path);
      if (!in) throw std::runtime_error("cannot open " + results_path);
      std::vector<std::pair<std::string, Verdict>> predictions;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Verdict v;
        const auto& vj = j.at("verdict");
        v.label = vj.at("label").get<std::string>() == "Ambiguous" ? Label::Ambiguous
                                                                   : Label::Unambiguous;
        for (const auto& t : vj.at("types")) {
          if (auto parsed = ambiguity_type_from_string(t.get<std::string>())) {
            v.types.insert(*parsed);
          }
        }
        predictions.emplace_back(j.at("instruction_id").get<std::string>(), std::move(v));
      }
      const MetricsReport r = compute_metrics(predictions, truth);
      std::cout << (eval_format == "json" ? report_to_json(r) + "\n" : report_to_table(r));
      return 0;
    }

    if (*fuse_cmd) return cmd_fuse(det_path, poses_path, intr_path, fusion_cfg, fuse_out);
    if (*bev_cmd) return cmd_bev(bev_scene, bev_out, bev_size2, bev_stride2, bev_views);
    if (*report) return cmd_report(report_path, report_format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
