#include "ambiver/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace ambiver {

namespace fs = std::filesystem;
using nlohmann::json;

// Fixed camera model for synthetic scenes.

std::string to_string(BackendKind k) {
  switch (k) {
    case BackendKind::mock: return "mock";
    case BackendKind::replay: return "replay";
    case BackendKind::remote: return "remote";
  }
  return "mock";
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "mock") return BackendKind::mock;
  if (s == "replay") return BackendKind::replay;
  if (s == "remote") return BackendKind::remote;
  throw std::runtime_error("unknown backend kind: " + s);
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["keyframe"] = {{"n_target", c.keyframe.n_target},
                   {"tau_t_init", c.keyframe.tau_t_init},
                   {"tau_r_init", c.keyframe.tau_r_init},
                   {"alpha_inc", c.keyframe.alpha_inc},
                   {"alpha_dec", c.keyframe.alpha_dec},
                   {"tolerance", c.keyframe.tolerance},
                   {"max_iterations", c.keyframe.max_iterations}};
  j["fusion"] = {{"eps_d", c.fusion.eps_d},       {"theta_min", c.fusion.theta_min},
                 {"theta_max", c.fusion.theta_max}, {"sigma_s", c.fusion.sigma_s},
                 {"top_k", c.fusion.top_k},        {"gamma", c.fusion.gamma},
                 {"delta", c.fusion.delta}};
  j["detector_noise"] = {{"bbox_sigma_px", c.detector_noise.bbox_sigma_px},
                         {"score_min", c.detector_noise.score_min},
                         {"score_max", c.detector_noise.score_max},
                         {"dropout_prob", c.detector_noise.dropout_prob}};
  j["lexicon_dir"] = c.lexicon_dir;
  j["prompt_template_path"] = c.prompt_template_path;
  j["bev"] = {{"width", c.bev_width}, {"height", c.bev_height}, {"stride", c.bev_stride}};
  j["backend"] = to_string(c.backend);
  j["remote"] = {{"host", c.remote.host}, {"port", c.remote.port}, {"path", c.remote.path}};
  j["replay_dir"] = c.replay_dir;
  j["ablation"] = {{"no_parse", c.ablation.no_parse},
                   {"uniform_keyframes", c.ablation.uniform_keyframes},
                   {"no_fusion", c.ablation.no_fusion},
                   {"confidence_only_rep", c.ablation.confidence_only_rep},
                   {"no_bev", c.ablation.no_bev},
                   {"no_local", c.ablation.no_local},
                   {"no_visual", c.ablation.no_visual}};
  j["in_flight_limit"] = c.in_flight_limit;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j.dump(2);
}

PipelineConfig config_from_json(const std::string& text) {
  const json j = json::parse(text);
  PipelineConfig c;
  if (j.contains("keyframe")) {
    const auto& k = j["keyframe"];
    c.keyframe.n_target = k.value("n_target", c.keyframe.n_target);
    c.keyframe.tau_t_init = k.value("tau_t_init", c.keyframe.tau_t_init);
    c.keyframe.tau_r_init = k.value("tau_r_init", c.keyframe.tau_r_init);
    c.keyframe.alpha_inc = k.value("alpha_inc", c.keyframe.alpha_inc);
    c.keyframe.alpha_dec = k.value("alpha_dec", c.keyframe.alpha_dec);
    c.keyframe.tolerance = k.value("tolerance", c.keyframe.tolerance);
    c.keyframe.max_iterations = k.value("max_iterations", c.keyframe.max_iterations);
  }
  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    c.fusion.eps_d = f.value("eps_d", c.fusion.eps_d);
    c.fusion.theta_min = f.value("theta_min", c.fusion.theta_min);
    c.fusion.theta_max = f.value("theta_max", c.fusion.theta_max);
    c.fusion.sigma_s = f.value("sigma_s", c.fusion.sigma_s);
    c.fusion.top_k = f.value("top_k", c.fusion.top_k);
    c.fusion.gamma = f.value("gamma", c.fusion.gamma);
    c.fusion.delta = f.value("delta", c.fusion.delta);
  }
  if (j.contains("detector_noise")) {
    const auto& n = j["detector_noise"];
    c.detector_noise.bbox_sigma_px = n.value("bbox_sigma_px", 0.0);
    c.detector_noise.score_min = n.value("score_min", 0.6);
    c.detector_noise.score_max = n.value("score_max", 0.95);
    c.detector_noise.dropout_prob = n.value("dropout_prob", 0.0);
  }
  c.lexicon_dir = j.value("lexicon_dir", "");
  c.prompt_template_path = j.value("prompt_template_path", "");
  if (j.contains("bev")) {
    c.bev_width = j["bev"].value("width", c.bev_width);
    c.bev_height = j["bev"].value("height", c.bev_height);
    c.bev_stride = j["bev"].value("stride", c.bev_stride);
  }
  c.backend = backend_kind_from_string(j.value("backend", "mock"));
  if (j.contains("remote")) {
    c.remote.host = j["remote"].value("host", c.remote.host);
    c.remote.port = j["remote"].value("port", c.remote.port);
    c.remote.path = j["remote"].value("path", c.remote.path);
  }
  c.replay_dir = j.value("replay_dir", "");
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    c.ablation.no_parse = a.value("no_parse", false);
    c.ablation.uniform_keyframes = a.value("uniform_keyframes", false);
    c.ablation.no_fusion = a.value("no_fusion", false);
    c.ablation.confidence_only_rep = a.value("confidence_only_rep", false);
    c.ablation.no_bev = a.value("no_bev", false);
    c.ablation.no_local = a.value("no_local", false);
    c.ablation.no_visual = a.value("no_visual", false);
  }
  c.in_flight_limit = j.value("in_flight_limit", c.in_flight_limit);
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

namespace {

std::unique_ptr<VlmBackend> make_backend(const PipelineConfig& cfg) {
  switch (cfg.backend) {
    case BackendKind::mock:
      return std::make_unique<MockVlmBackend>();
    case BackendKind::replay:
      return std::make_unique<ReplayVlmBackend>(cfg.replay_dir);
    case BackendKind::remote: {
      const char* key = std::getenv("AMBIVER_API_KEY");
      return std::make_unique<RemoteVlmBackend>(cfg.remote.host, cfg.remote.port,
                                                cfg.remote.path, key ? key : "");
    }
  }
  return std::make_unique<MockVlmBackend>();
}

std::unique_ptr<ParserBackend> make_parser(const PipelineConfig& cfg) {
  if (cfg.ablation.no_parse) return std::make_unique<PassthroughParserBackend>();
  ParserLexicon lx =
      cfg.lexicon_dir.empty() ? ParserLexicon::builtin() : ParserLexicon::load(cfg.lexicon_dir);
  return std::make_unique<RuleParserBackend>(std::move(lx));
}

PromptTemplate make_template(const PipelineConfig& cfg) {
  return cfg.prompt_template_path.empty() ? PromptTemplate::builtin()
                                          : PromptTemplate::load(cfg.prompt_template_path);
}

json verdict_to_json(const Verdict& v) {
  json types = json::array();
  for (AmbiguityType t : v.types) types.push_back(to_string(t));
  json j = {{"label", to_string(v.label)},
            {"types", types},
            {"explanation", v.explanation},
            {"degraded", v.degraded}};
  if (v.clarification) j["clarification"] = *v.clarification;
  return j;
}

json record_to_json(const ResultRecord& r) {
  return json{{"scene_id", r.scene_id},
              {"instruction_id", r.instruction_id},
              {"verdict", verdict_to_json(r.verdict)},
              {"raw_response_ref", r.raw_response_ref},
              {"prompt_hash", r.prompt_hash},
              {"degraded", r.degraded},
              {"failed", r.failed}};
}

ResultRecord record_from_json(const json& j) {
  ResultRecord r;
  r.scene_id = j.at("scene_id").get<std::string>();
  r.instruction_id = j.at("instruction_id").get<std::string>();
  const auto& v = j.at("verdict");
  r.verdict.label =
      v.at("label").get<std::string>() == "Ambiguous" ? Label::Ambiguous : Label::Unambiguous;
  for (const auto& t : v.at("types")) {
    if (auto parsed = ambiguity_type_from_string(t.get<std::string>())) {
      r.verdict.types.insert(*parsed);
    }
  }
  r.verdict.explanation = v.value("explanation", "");
  if (v.contains("clarification")) r.verdict.clarification = v["clarification"].get<std::string>();
  r.verdict.degraded = v.value("degraded", false);
  r.raw_response_ref = j.value("raw_response_ref", "");
  r.prompt_hash = j.value("prompt_hash", "");
  r.degraded = j.value("degraded", false);
  r.failed = j.value("failed", false);
  return r;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

ResultRecord failure_record(const LabeledInstruction& inst, const std::string& why) {
  // Fail open: an unprocessable instruction is treated as needing
  // clarification, flagged so metrics can exclude it.
  ResultRecord r;
  r.scene_id = inst.scene_id;
  r.instruction_id = inst.instruction_id;
  r.failed = true;
  r.degraded = true;
  r.verdict.label = Label::Ambiguous;
  r.verdict.types = {AmbiguityType::Instance};
  r.verdict.degraded = true;
  r.verdict.explanation = "pipeline failure: " + why;
  r.verdict.clarification = "Could you restate the instruction?";
  return r;
}

}  // namespace

ResultRecord process_instruction(const PipelineConfig& cfg, const SyntheticScene& scene,
                                 const LabeledInstruction& instruction, VlmBackend& backend,
                                 const ParserBackend& parser, const PromptTemplate& tmpl,
                                 std::string* raw_response_out) {
  const Intrinsics& k = kSyntheticIntrinsics;
  const ParsedInstruction parsed = parser.parse(instruction.text);

  // Keyframe selection over the scene's trajectory.
  KeyframeConfig kf = cfg.keyframe;
  kf.uniform_sampling = cfg.ablation.uniform_keyframes;
  const std::vector<CameraPose> trajectory = default_orbit(scene);
  const KeyframeSet keyframes = select_keyframes(trajectory, kf);
  std::vector<CameraPose> kf_poses;
  for (int idx : keyframes.indices) kf_poses.push_back(trajectory[idx]);

  // Grounding. A degenerate parse must never reach the detector.
  std::vector<Detection2D> detections;
  if (!parsed.degenerate()) {
    const std::uint64_t det_seed =
        derive_seed(cfg.seed, scene.scene_id + "/" + parsed.target);
    detections = render_detections(scene, kf_poses, k, cfg.detector_noise, parsed.target,
                                   det_seed)
                     .detections;
  }

  std::vector<Ray3> rays;
  rays.reserve(detections.size());
  for (const auto& d : detections) rays.push_back(back_project(d, kf_poses[d.view_index], k));

  FusionConfig fusion = cfg.fusion;
  fusion.no_fusion = cfg.ablation.no_fusion;
  fusion.confidence_only = cfg.ablation.confidence_only_rep;
  const std::vector<Candidate> candidates = fuse(detections, rays, fusion);

  MemoryKeyframeStore store;
  for (size_t i = 0; i < kf_poses.size(); ++i) {
    store.add_view(static_cast<int>(i), k.width, k.height);
  }

  Dossier dossier =
      build_dossier(parsed, "bev:" + scene.scene_id, candidates, store);
  if (cfg.ablation.no_bev || cfg.ablation.no_visual) dossier.bev_ref.clear();
  if (cfg.ablation.no_local || cfg.ablation.no_visual) dossier.local_evidence.clear();

  const AdjudicationResult adj = adjudicate(dossier, backend, tmpl);
  if (raw_response_out) *raw_response_out = adj.raw_response;

  ResultRecord r;
  r.scene_id = instruction.scene_id;
  r.instruction_id = instruction.instruction_id;
  r.verdict = adj.verdict;
  r.prompt_hash = adj.prompt_hash;
  r.degraded = adj.verdict.degraded;
  return r;
}

PipelineOutput run_pipeline_in_memory(const PipelineConfig& cfg,
                                      const std::vector<SyntheticScene>& scenes,
                                      const std::vector<LabeledInstruction>& instructions) {
  std::map<std::string, const SyntheticScene*> by_id;
  for (const auto& s : scenes) by_id[s.scene_id] = &s;

  const std::unique_ptr<VlmBackend> backend = make_backend(cfg);
  const std::unique_ptr<ParserBackend> parser = make_parser(cfg);
  const PromptTemplate tmpl = make_template(cfg);

  PipelineOutput out;
  out.records.resize(instructions.size());
  const int n = static_cast<int>(instructions.size());
  const int workers = std::max(1, cfg.in_flight_limit);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const LabeledInstruction& inst = instructions[i];
      try {
        auto it = by_id.find(inst.scene_id);
        if (it == by_id.end()) throw std::runtime_error("unknown scene " + inst.scene_id);
        out.records[i] = process_instruction(cfg, *it->second, inst, *backend, *parser, tmpl);
      } catch (const std::exception& e) {
        out.records[i] = failure_record(inst, e.what());
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<std::pair<std::string, Verdict>> predictions;
  predictions.reserve(out.records.size());
  for (const auto& r : out.records) predictions.emplace_back(r.instruction_id, r.verdict);
  out.metrics = compute_metrics(predictions, instructions);
  return out;
}

PipelineOutput run_pipeline(const PipelineConfig& cfg, const std::string& dataset_dir,
                            bool force) {
  const std::vector<LabeledInstruction> instructions = load_benchmark(dataset_dir);

  std::map<std::string, SyntheticScene> scenes;
  for (const auto& inst : instructions) {
    if (scenes.count(inst.scene_id)) continue;
    const fs::path p = fs::path(dataset_dir) / "scenes" / (inst.scene_id + ".json");
    if (!fs::exists(p)) throw MissingFile("missing scene fixture: " + p.string());
    scenes[inst.scene_id] = load_scene(p.string());
  }

  const fs::path outdir(cfg.output_dir);
  fs::create_directories(outdir / "records");
  fs::create_directories(outdir / "responses");

  const std::unique_ptr<VlmBackend> backend = make_backend(cfg);
  const std::unique_ptr<ParserBackend> parser = make_parser(cfg);
  const PromptTemplate tmpl = make_template(cfg);

  PipelineOutput out;
  out.records.resize(instructions.size());
  const int n = static_cast<int>(instructions.size());
  const int workers = std::max(1, cfg.in_flight_limit);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const LabeledInstruction& inst = instructions[i];
      const fs::path record_path = outdir / "records" / (inst.instruction_id + ".json");
      if (!force && fs::exists(record_path)) {  // idempotent re-run
        std::ifstream in(record_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        out.records[i] = record_from_json(json::parse(text));
        continue;
      }
      ResultRecord rec;
      try {
        std::string raw;
        rec = process_instruction(cfg, scenes.at(inst.scene_id), inst, *backend, *parser, tmpl,
                                  &raw);
        const fs::path resp = outdir / "responses" / (rec.prompt_hash + ".txt");
        atomic_write(resp, raw);
        rec.raw_response_ref = resp.string();
      } catch (const std::exception& e) {
        rec = failure_record(inst, e.what());
      }
      atomic_write(record_path, record_to_json(rec).dump(2));
      out.records[i] = rec;
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  // Assembled JSONL mirror of the per-record files.
  {
    std::ofstream jsonl(outdir / "results.jsonl");
    for (const auto& r : out.records) jsonl << record_to_json(r).dump() << "\n";
  }

  std::vector<std::pair<std::string, Verdict>> predictions;
  for (const auto& r : out.records) predictions.emplace_back(r.instruction_id, r.verdict);
  out.metrics = compute_metrics(predictions, instructions);
  atomic_write(outdir / "report.json", report_to_json(out.metrics));
  atomic_write(outdir / "report.txt", report_to_table(out.metrics));
  return out;
}

}  // namespace ambiver
