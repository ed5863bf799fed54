#include "ambiver/eval.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ambiver {

using nlohmann::json;

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw SchemaViolation("unknown split: " + s);
}

ConsensusResult consensus_filter(const std::vector<AnnotationTriple>& triples) {
  ConsensusResult out;
  for (const auto& t : triples) {
    const bool all_ambiguous = t.labels[0] == Label::Ambiguous &&
                               t.labels[1] == Label::Ambiguous &&
                               t.labels[2] == Label::Ambiguous;
    const bool all_unambiguous = t.labels[0] == Label::Unambiguous &&
                                 t.labels[1] == Label::Unambiguous &&
                                 t.labels[2] == Label::Unambiguous;
    if (!all_ambiguous && !all_unambiguous) {
      out.discarded.push_back(t.instruction_id);
      continue;
    }

    LabeledInstruction li;
    li.scene_id = t.scene_id;
    li.instruction_id = t.instruction_id;
    li.text = t.text;
    li.split = t.split;

    if (all_unambiguous) {
      li.label = Label::Unambiguous;
      out.kept.push_back(std::move(li));
      continue;
    }

    if (t.subtypes.size() != 3) {
      throw MalformedTriple("ambiguous triple " + t.instruction_id + " needs 3 subtype votes, got " +
                            std::to_string(t.subtypes.size()));
    }
    // Majority subtype (>= 2 of 3 votes); a three-way split discards the item.
    std::optional<AmbiguityType> majority;
    for (int i = 0; i < 3 && !majority; ++i) {
      int votes = 0;
      for (int j = 0; j < 3; ++j) votes += (t.subtypes[j] == t.subtypes[i]);
      if (votes >= 2) majority = t.subtypes[i];
    }
    if (!majority) {
      out.discarded.push_back(t.instruction_id);
      continue;
    }
    li.label = Label::Ambiguous;
    li.subtype = *majority;
    out.kept.push_back(std::move(li));
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<std::pair<std::string, Verdict>>& predictions,
                              const std::vector<LabeledInstruction>& truth) {
  std::map<std::string, const LabeledInstruction*> by_id;
  for (const auto& t : truth) by_id[t.instruction_id] = &t;

  MetricsReport r;
  const std::array<std::string, 5> buckets = {"Instance", "Attribute", "Spatial", "Action",
                                              "Unambiguous"};
  std::map<std::string, long long> bucket_correct, bucket_total, bucket_subtype_hit;
  for (const auto& b : buckets) {
    bucket_correct[b] = 0;
    bucket_total[b] = 0;
    bucket_subtype_hit[b] = 0;
  }

  std::set<std::string> seen;
  for (const auto& [id, verdict] : predictions) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw UnknownId("prediction for unknown instruction: " + id);
    if (!seen.insert(id).second) throw DuplicatePrediction("duplicate prediction: " + id);

    const LabeledInstruction& gt = *it->second;
    const bool pred_pos = verdict.label == Label::Ambiguous;
    const bool true_pos = gt.label == Label::Ambiguous;
    if (pred_pos && true_pos) ++r.tp;
    if (pred_pos && !true_pos) ++r.fp;
    if (!pred_pos && true_pos) ++r.fn;
    if (!pred_pos && !true_pos) ++r.tn;

    const std::string bucket = true_pos ? to_string(*gt.subtype) : "Unambiguous";
    ++bucket_total[bucket];
    if (pred_pos == true_pos) ++bucket_correct[bucket];
    if (true_pos && verdict.types.count(*gt.subtype)) ++bucket_subtype_hit[bucket];
  }

  const long long n = r.total();
  r.accuracy = n > 0 ? static_cast<double>(r.tp + r.tn) / n : 0.0;

  r.precision_defined = (r.tp + r.fp) > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
  r.recall_defined = (r.tp + r.fn) > 0;
  r.recall = r.recall_defined ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
  r.f1_defined = (r.precision + r.recall) > 0;
  r.f1_positive =
      r.f1_defined ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;

  // Negative-class F1 (Unambiguous as positive) for the macro average.
  const double prec_neg = (r.tn + r.fn) > 0 ? static_cast<double>(r.tn) / (r.tn + r.fn) : 0.0;
  const double rec_neg = (r.tn + r.fp) > 0 ? static_cast<double>(r.tn) / (r.tn + r.fp) : 0.0;
  const double f1_neg =
      (prec_neg + rec_neg) > 0 ? 2.0 * prec_neg * rec_neg / (prec_neg + rec_neg) : 0.0;
  r.f1_macro = 0.5 * (r.f1_positive + f1_neg);

  for (const auto& b : buckets) {
    r.per_type_count[b] = bucket_total[b];
    r.per_type_accuracy[b] =
        bucket_total[b] > 0 ? static_cast<double>(bucket_correct[b]) / bucket_total[b] : 0.0;
    if (b != "Unambiguous") {
      r.per_type_subtype_match[b] =
          bucket_total[b] > 0 ? static_cast<double>(bucket_subtype_hit[b]) / bucket_total[b]
                              : 0.0;
    }
  }
  return r;
}

namespace {

LabeledInstruction record_from_json(const json& j, int line_no) {
  auto fail = [line_no](const std::string& msg) {
    throw SchemaViolation("instructions.jsonl line " + std::to_string(line_no) + ": " + msg);
  };
  LabeledInstruction li;
  try {
    li.scene_id = j.at("scene_id").get<std::string>();
    li.instruction_id = j.at("instruction_id").get<std::string>();
    li.text = j.at("text").get<std::string>();
    const std::string label = j.at("label").get<std::string>();
    if (label == "Ambiguous") {
      li.label = Label::Ambiguous;
    } else if (label == "Unambiguous") {
      li.label = Label::Unambiguous;
    } else {
      fail("unknown label '" + label + "'");
    }
    li.split = split_from_string(j.at("split").get<std::string>());
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (j.contains("subtype") && !j["subtype"].is_null()) {
    if (li.label == Label::Unambiguous) fail("Unambiguous record carries a subtype");
    auto st = ambiguity_type_from_string(j["subtype"].get<std::string>());
    if (!st) fail("unknown subtype '" + j["subtype"].get<std::string>() + "'");
    li.subtype = st;
  } else if (li.label == Label::Ambiguous) {
    fail("Ambiguous record lacks a subtype");
  }
  if (li.text.empty()) fail("empty instruction text");
  return li;
}

}  // namespace

std::vector<LabeledInstruction> load_benchmark(const std::string& dir,
                                               std::optional<Split> split) {
  const std::string path = dir + "/instructions.jsonl";
  std::ifstream in(path);
  if (!in) throw MissingFile("missing benchmark file: " + path);

  std::vector<LabeledInstruction> out;
  std::set<std::pair<std::string, std::string>> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaViolation("instructions.jsonl line " + std::to_string(line_no) + ": " +
                            e.what());
    }
    LabeledInstruction li = record_from_json(j, line_no);
    if (!ids.insert({li.scene_id, li.instruction_id}).second) {
      throw SchemaViolation("instructions.jsonl line " + std::to_string(line_no) +
                            ": duplicate id " + li.instruction_id + " in scene " + li.scene_id);
    }
    if (split && li.split != *split) continue;
    out.push_back(std::move(li));
  }
  return out;
}

std::string report_to_json(const MetricsReport& r) {
  json j = {{"tp", r.tp},
            {"fp", r.fp},
            {"tn", r.tn},
            {"fn", r.fn},
            {"accuracy", r.accuracy},
            {"precision", r.precision},
            {"recall", r.recall},
            {"f1_positive", r.f1_positive},
            {"f1_macro", r.f1_macro},
            {"precision_defined", r.precision_defined},
            {"recall_defined", r.recall_defined},
            {"f1_defined", r.f1_defined},
            {"per_type_accuracy", r.per_type_accuracy},
            {"per_type_count", r.per_type_count},
            {"per_type_subtype_match", r.per_type_subtype_match}};
  return j.dump(2);
}

std::string report_to_table(const MetricsReport& r) {
  std::ostringstream os;
  auto pct = [](double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return std::string(buf);
  };
  if (r.total() == 0) {
    os << "n=0 (empty evaluation set; all metrics undefined)\n";
    return os.str();
  }
  os << "Acc.    Prec.   Rec.    F1      | Instance Attribute Spatial  Action   Unamb.\n";
  auto cell = [&os](const std::string& s, int w) {
    os << s;
    for (int i = static_cast<int>(s.size()); i < w; ++i) os << ' ';
  };
  cell(pct(r.accuracy), 8);
  cell(r.precision_defined ? pct(r.precision) : "n/a", 8);
  cell(r.recall_defined ? pct(r.recall) : "n/a", 8);
  cell(r.f1_defined ? pct(r.f1_positive) : "n/a", 8);
  os << "| ";
  cell(pct(r.per_type_accuracy.at("Instance")), 9);
  cell(pct(r.per_type_accuracy.at("Attribute")), 10);
  cell(pct(r.per_type_accuracy.at("Spatial")), 9);
  cell(pct(r.per_type_accuracy.at("Action")), 9);
  os << pct(r.per_type_accuracy.at("Unambiguous")) << "\n";
  os << "(n=" << r.total() << ", f1_macro=" << pct(r.f1_macro) << ")\n";
  return os.str();
}

}  // namespace ambiver
