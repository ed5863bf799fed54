#pragma once

#include "ambiver/orchestrator.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ambiver {

struct MalformedTriple : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownId : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DuplicatePrediction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingFile : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Split { train, test };

struct LabeledInstruction {
  std::string scene_id;
  std::string instruction_id;
  std::string text;
  Label label = Label::Unambiguous;
  std::optional<AmbiguityType> subtype;  // present iff Ambiguous
  Split split = Split::test;
};

struct AnnotationTriple {
  std::string instruction_id;
  std::string scene_id;
  std::string text;
  std::array<Label, 3> labels;
  std::vector<AmbiguityType> subtypes;  // votes from annotators voting Ambiguous
  Split split = Split::test;
};

struct MetricsReport {
  long long tp = 0, fp = 0, tn = 0, fn = 0;  // positive class = Ambiguous
  double accuracy = 0, precision = 0, recall = 0;
  double f1_positive = 0;  // harmonic mean of P and R on the Ambiguous class
  double f1_macro = 0;     // mean of the two per-class F1 scores
  bool precision_defined = true, recall_defined = true, f1_defined = true;
  // Keys: Instance, Attribute, Spatial, Action, Unambiguous.
  std::map<std::string, double> per_type_accuracy;
  std::map<std::string, long long> per_type_count;
  // Auxiliary: fraction of Ambiguous truth whose predicted type set contains
  // the true subtype.
  std::map<std::string, double> per_type_subtype_match;
  long long total() const { return tp + fp + tn + fn; }
};

struct ConsensusResult {
  std::vector<LabeledInstruction> kept;
  std::vector<std::string> discarded;  // instruction ids
};

/// Unanimous binary agreement keeps an item; Ambiguous items additionally
/// need a >=2-vote subtype majority, otherwise they are discarded.
ConsensusResult consensus_filter(const std::vector<AnnotationTriple>& triples);

MetricsReport compute_metrics(const std::vector<std::pair<std::string, Verdict>>& predictions,
                              const std::vector<LabeledInstruction>& truth);

/// Loads <dir>/instructions.jsonl, validating every record. When split is
/// set, only matching records are returned.
std::vector<LabeledInstruction> load_benchmark(const std::string& dir,
                                               std::optional<Split> split = std::nullopt);

std::string report_to_json(const MetricsReport& r);
/// Plain-text table: Acc. Prec. Rec. F1 plus the five per-type columns,
/// percentages with two decimals.
std::string report_to_table(const MetricsReport& r);

std::string to_string(Split s);
Split split_from_string(const std::string& s);

}  // namespace ambiver
