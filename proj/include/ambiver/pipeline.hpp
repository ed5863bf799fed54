#pragma once

#include "ambiver/bev.hpp"
#include "ambiver/eval.hpp"
#include "ambiver/fusion.hpp"
#include "ambiver/keyframe.hpp"
#include "ambiver/orchestrator.hpp"
#include "ambiver/synthetic.hpp"

#include <memory>
#include <string>

namespace ambiver {

struct AblationSwitches {
  bool no_parse = false;           // raw instruction as grounding query
  bool uniform_keyframes = false;  // uniform temporal sampling
  bool no_fusion = false;          // top-K raw detections
  bool confidence_only_rep = false;
  bool no_bev = false;    // drop the BEV image from the dossier
  bool no_local = false;  // drop candidate crops from the dossier
  bool no_visual = false; // drop both
};

enum class BackendKind { mock, replay, remote };

struct RemoteConfig {
  std::string host = "localhost";
  int port = 8080;
  std::string path = "/v1/complete";
  // API key comes from the AMBIVER_API_KEY environment variable.
};

struct PipelineConfig {
  KeyframeConfig keyframe;
  FusionConfig fusion;
  DetectionNoise detector_noise;  // synthetic detector only
  std::string lexicon_dir;        // empty: builtin lexicons
  std::string prompt_template_path;  // empty: builtin template
  int bev_width = 640;
  int bev_height = 640;
  int bev_stride = 8;
  BackendKind backend = BackendKind::mock;
  RemoteConfig remote;
  std::string replay_dir;
  AblationSwitches ablation;
  int in_flight_limit = 4;
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  static PipelineConfig defaults() { return {}; }
};

std::string config_to_json(const PipelineConfig& cfg);
PipelineConfig config_from_json(const std::string& text);
PipelineConfig load_config(const std::string& path);

struct ResultRecord {
  std::string scene_id;
  std::string instruction_id;
  Verdict verdict;
  std::string raw_response_ref;
  std::string prompt_hash;
  bool degraded = false;
  bool failed = false;  // record-level failure, scored as Ambiguous/degraded
};

struct PipelineOutput {
  std::vector<ResultRecord> records;
  MetricsReport metrics;
};

/// Runs the full per-instruction pipeline over a dataset directory
/// (instructions.jsonl + scenes/<scene_id>.json fixtures), writes records and
/// the report under cfg.output_dir, and returns both. Completed records are
/// skipped on re-runs unless force is set.
PipelineOutput run_pipeline(const PipelineConfig& cfg, const std::string& dataset_dir,
                            bool force = false);

/// In-memory variant used by tests and the acceptance suite: scenes provided
/// directly, nothing written to disk.
PipelineOutput run_pipeline_in_memory(const PipelineConfig& cfg,
                                      const std::vector<SyntheticScene>& scenes,
                                      const std::vector<LabeledInstruction>& instructions);

/// Per-instruction core shared by both entry points.
ResultRecord process_instruction(const PipelineConfig& cfg, const SyntheticScene& scene,
                                 const LabeledInstruction& instruction, VlmBackend& backend,
                                 const ParserBackend& parser, const PromptTemplate& tmpl,
                                 std::string* raw_response_out = nullptr);

std::string to_string(BackendKind k);
BackendKind backend_kind_from_string(const std::string& s);

}  // namespace ambiver
