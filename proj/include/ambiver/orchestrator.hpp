#pragma once

#include "ambiver/bev.hpp"
#include "ambiver/fusion.hpp"
#include "ambiver/instruction.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ambiver {

struct MissingKeyframe : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnparseableVerdict : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Transient transport failure; adjudicate() retries these.
struct BackendTransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class AmbiguityType { Instance, Attribute, Spatial, Action };
enum class Label { Unambiguous, Ambiguous };

std::string to_string(AmbiguityType t);
std::string to_string(Label l);
std::optional<AmbiguityType> ambiguity_type_from_string(const std::string& s);

struct Verdict {
  Label label = Label::Unambiguous;
  std::set<AmbiguityType> types;  // non-empty iff Ambiguous
  std::string explanation;
  std::optional<std::string> clarification;  // only when Ambiguous
  bool degraded = false;                     // produced via a fallback parse
  std::vector<std::string> warnings;
};

/// Rectangular crop of one keyframe, plus an opaque reference usable by a
/// backend (file path or synthetic id).
struct CropRef {
  int view_index = 0;
  BBox2D region;
  std::string image_ref;
};

struct LocalEvidence {
  Candidate candidate;
  CropRef crop;
};

struct Dossier {
  ParsedInstruction linguistic;
  std::string bev_ref;                       // reference to the BEV raster
  std::vector<LocalEvidence> local_evidence; // ordered by group_score desc
};

/// Access to keyframe images for crop generation. Implementations may back
/// this with files or hold only dimensions (synthetic runs).
class KeyframeStore {
 public:
  virtual ~KeyframeStore() = default;
  virtual bool has_view(int view_index) const = 0;
  virtual int view_width(int view_index) const = 0;
  virtual int view_height(int view_index) const = 0;
  /// Materializes (or names) a crop and returns its reference.
  virtual std::string crop_ref(int view_index, const BBox2D& region) = 0;
};

/// Dimension-only store; crop references are synthetic ids.
class MemoryKeyframeStore final : public KeyframeStore {
 public:
  void add_view(int view_index, int width, int height);
  bool has_view(int view_index) const override;
  int view_width(int view_index) const override;
  int view_height(int view_index) const override;
  std::string crop_ref(int view_index, const BBox2D& region) override;

 private:
  std::map<int, std::pair<int, int>> sizes_;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual std::string complete(const std::string& prompt,
                               const std::vector<std::string>& image_refs,
                               double temperature) = 0;
  virtual std::string name() const = 0;
};

struct PromptTemplate {
  std::string text;     // with {{INSTRUCTION}}, {{PARSE_JSON}}, {{CANDIDATES}} slots
  std::string version;

  static PromptTemplate builtin();
  static PromptTemplate load(const std::string& path);
};

/// FNV-1a 64-bit, hex string. Stamps prompts and keys the replay store.
std::string fnv1a_hex(const std::string& data);

/// Expands the representative bbox by a 10% margin, clipped to the image.
BBox2D expand_crop(const BBox2D& bbox, int image_width, int image_height);

Dossier build_dossier(const ParsedInstruction& parsed, const std::string& bev_ref,
                      const std::vector<Candidate>& candidates, KeyframeStore& keyframes);

/// Emitted in place of the candidate list when local evidence is empty.
inline constexpr const char* kNoCandidatesNotice =
    "No candidate instances were detected for the target.";

struct RenderedPrompt {
  std::string text;
  std::vector<std::string> image_refs;  // [bev, crop_1, ..., crop_n]
  std::string prompt_hash;
};

RenderedPrompt render_prompt(const Dossier& d, const PromptTemplate& tmpl);

Verdict parse_verdict(const std::string& raw);

struct AdjudicationResult {
  Verdict verdict;
  std::string raw_response;
  std::string prompt_hash;
};

/// render -> complete(temperature 0, up to 2 retries on transport failure)
/// -> parse. Throws BackendUnavailable when retries are exhausted.
AdjudicationResult adjudicate(const Dossier& d, VlmBackend& backend,
                              const PromptTemplate& tmpl = PromptTemplate::builtin());

// --- backends ---

/// Deterministic rule-table adjudicator mirroring the ambiguity taxonomy;
/// the test oracle standing in for a real VLM.
class MockVlmBackend final : public VlmBackend {
 public:
  std::string complete(const std::string& prompt, const std::vector<std::string>& image_refs,
                       double temperature) override;
  std::string name() const override { return "mock"; }
};

/// Replays recorded raw responses keyed by prompt hash
/// (<dir>/<hash>.txt files).
class ReplayVlmBackend final : public VlmBackend {
 public:
  explicit ReplayVlmBackend(std::string response_dir);
  std::string complete(const std::string& prompt, const std::vector<std::string>& image_refs,
                       double temperature) override;
  std::string name() const override { return "replay"; }

 private:
  std::string dir_;
};

/// POSTs {prompt, images (base64), temperature} to a remote endpoint and
/// expects {"text": ...} back.
class RemoteVlmBackend final : public VlmBackend {
 public:
  RemoteVlmBackend(std::string host, int port, std::string path, std::string api_key = "",
                   int timeout_sec = 60);
  std::string complete(const std::string& prompt, const std::vector<std::string>& image_refs,
                       double temperature) override;
  std::string name() const override { return "remote"; }

 private:
  std::string host_;
  int port_;
  std::string path_;
  std::string api_key_;
  int timeout_sec_;
};

std::string base64_encode(const std::string& bytes);

}  // namespace ambiver
