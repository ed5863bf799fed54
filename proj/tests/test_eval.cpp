#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ambiver/eval.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ambiver;

namespace {

AnnotationTriple triple(const std::string& id, std::array<Label, 3> labels,
                        std::vector<AmbiguityType> subtypes = {}) {
  AnnotationTriple t;
  t.instruction_id = id;
  t.scene_id = "s0";
  t.text = "pick up the cup";
  t.labels = labels;
  t.subtypes = std::move(subtypes);
  return t;
}

/// Builds a ground-truth list plus a prediction list realizing the given
/// confusion counts (positive class = Ambiguous, subtype Instance).
void make_confusion(long long tp, long long fp, long long tn, long long fn,
                    std::vector<LabeledInstruction>& truth,
                    std::vector<std::pair<std::string, Verdict>>& preds) {
  truth.clear();
  preds.clear();
  long long next = 0;
  auto add = [&](Label gt, Label pred) {
    LabeledInstruction li;
    li.scene_id = "s";
    li.instruction_id = "i" + std::to_string(next++);
    li.text = "t";
    li.label = gt;
    if (gt == Label::Ambiguous) li.subtype = AmbiguityType::Instance;
    truth.push_back(li);
    Verdict v;
    v.label = pred;
    if (pred == Label::Ambiguous) v.types.insert(AmbiguityType::Instance);
    preds.emplace_back(li.instruction_id, v);
  };
  for (long long i = 0; i < tp; ++i) add(Label::Ambiguous, Label::Ambiguous);
  for (long long i = 0; i < fp; ++i) add(Label::Unambiguous, Label::Ambiguous);
  for (long long i = 0; i < tn; ++i) add(Label::Unambiguous, Label::Unambiguous);
  for (long long i = 0; i < fn; ++i) add(Label::Ambiguous, Label::Unambiguous);
}

MetricsReport metrics_for(long long tp, long long fp, long long tn, long long fn) {
  std::vector<LabeledInstruction> truth;
  std::vector<std::pair<std::string, Verdict>> preds;
  make_confusion(tp, fp, tn, fn, truth, preds);
  return compute_metrics(preds, truth);
}

constexpr Label A = Label::Ambiguous;
constexpr Label U = Label::Unambiguous;

}  // namespace

TEST_CASE("consensus keeps unanimous items and drops split votes") {
  // Unanimous Unambiguous: kept, no subtype.
  // Unanimous Ambiguous with a 2-1 subtype majority: kept with that subtype.
  // 2-1 binary disagreement: discarded.
  const std::vector<AnnotationTriple> triples = {
      triple("keep_u", {U, U, U}),
      triple("keep_a", {A, A, A},
             {AmbiguityType::Instance, AmbiguityType::Instance, AmbiguityType::Spatial}),
      triple("drop_split", {A, A, U}),
  };
  const auto res = consensus_filter(triples);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept[0].instruction_id == "keep_u");
  CHECK(res.kept[0].label == Label::Unambiguous);
  CHECK_FALSE(res.kept[0].subtype.has_value());
  CHECK(res.kept[1].instruction_id == "keep_a");
  CHECK(res.kept[1].label == Label::Ambiguous);
  REQUIRE(res.kept[1].subtype.has_value());
  CHECK(*res.kept[1].subtype == AmbiguityType::Instance);
  CHECK(res.discarded == std::vector<std::string>{"drop_split"});
}

TEST_CASE("three-way subtype split is discarded") {
  const auto res = consensus_filter({triple(
      "split3", {A, A, A},
      {AmbiguityType::Instance, AmbiguityType::Spatial, AmbiguityType::Action})});
  CHECK(res.kept.empty());
  CHECK(res.discarded == std::vector<std::string>{"split3"});
}

TEST_CASE("ambiguous triple without three subtype votes is malformed") {
  CHECK_THROWS_AS(
      consensus_filter({triple("bad", {A, A, A}, {AmbiguityType::Instance})}),
      MalformedTriple);
}

TEST_CASE("consensus is invariant to annotator ordering (fuzz)") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> coin(0, 1), sub(0, 3);
  const auto types = std::array<AmbiguityType, 4>{AmbiguityType::Instance,
                                                  AmbiguityType::Attribute,
                                                  AmbiguityType::Spatial, AmbiguityType::Action};
  for (int i = 0; i < 1000; ++i) {
    AnnotationTriple t = triple("x", {U, U, U});
    for (auto& l : t.labels) l = coin(rng) ? A : U;
    const bool all_a = std::all_of(t.labels.begin(), t.labels.end(),
                                   [](Label l) { return l == Label::Ambiguous; });
    if (all_a) {
      t.subtypes = {types[sub(rng)], types[sub(rng)], types[sub(rng)]};
    }
    const auto base = consensus_filter({t});

    // Permute annotators: labels and subtype votes move together.
    AnnotationTriple p = t;
    std::array<int, 3> order = {0, 1, 2};
    std::shuffle(order.begin(), order.end(), rng);
    for (int j = 0; j < 3; ++j) p.labels[j] = t.labels[order[j]];
    if (all_a) {
      for (int j = 0; j < 3; ++j) p.subtypes[j] = t.subtypes[order[j]];
    }
    const auto perm = consensus_filter({p});

    CHECK(base.kept.size() == perm.kept.size());
    CHECK(base.discarded == perm.discarded);
    if (!base.kept.empty()) {
      CHECK(base.kept[0].label == perm.kept[0].label);
      CHECK(base.kept[0].subtype == perm.kept[0].subtype);
    }
  }
}

TEST_CASE("confusion (3,1,4,2) gives the textbook metric values") {
  const auto r = metrics_for(3, 1, 4, 2);
  CHECK(r.tp == 3);
  CHECK(r.fp == 1);
  CHECK(r.tn == 4);
  CHECK(r.fn == 2);
  CHECK(r.accuracy == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.f1_positive == doctest::Approx(2.0 * 0.75 * 0.6 / 1.35).epsilon(1e-12));
}

TEST_CASE("harmonic mean reproduces published-style F1 values") {
  // precision 84.23%, recall ~79.23% -> F1 ~81.65%.
  {
    const auto r = metrics_for(8423, 1577, 0, 2208);
    CHECK(r.precision == doctest::Approx(0.8423).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(0.7923).epsilon(1e-4));
    CHECK(std::abs(100.0 * r.f1_positive - 81.65) < 0.01);
  }
  // precision 56.93%, recall ~13.28% -> F1 ~21.54%.
  {
    const auto r = metrics_for(5693, 4307, 0, 37176);
    CHECK(r.precision == doctest::Approx(0.5693).epsilon(1e-12));
    CHECK(std::abs(100.0 * r.recall - 13.28) < 0.01);
    CHECK(std::abs(100.0 * r.f1_positive - 21.54) < 0.02);
  }
}

TEST_CASE("perfect predictions score 1.0 everywhere") {
  const auto r = metrics_for(5, 0, 5, 0);
  CHECK(r.accuracy == doctest::Approx(1.0));
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1_positive == doctest::Approx(1.0));
  CHECK(r.f1_macro == doctest::Approx(1.0));
  CHECK(r.per_type_accuracy.at("Instance") == doctest::Approx(1.0));
  CHECK(r.per_type_accuracy.at("Unambiguous") == doctest::Approx(1.0));
  CHECK(r.per_type_subtype_match.at("Instance") == doctest::Approx(1.0));
}

TEST_CASE("zero-denominator metrics are flagged undefined") {
  // No positive predictions and no positive truth: precision/recall undefined.
  const auto r = metrics_for(0, 0, 4, 0);
  CHECK_FALSE(r.precision_defined);
  CHECK_FALSE(r.recall_defined);
  CHECK_FALSE(r.f1_defined);
  CHECK(r.accuracy == doctest::Approx(1.0));
}

TEST_CASE("unknown and duplicate prediction ids are rejected") {
  std::vector<LabeledInstruction> truth;
  std::vector<std::pair<std::string, Verdict>> preds;
  make_confusion(1, 0, 1, 0, truth, preds);

  auto bogus = preds;
  bogus[0].first = "nonexistent";
  CHECK_THROWS_AS(compute_metrics(bogus, truth), UnknownId);

  auto dup = preds;
  dup.push_back(dup[0]);
  CHECK_THROWS_AS(compute_metrics(dup, truth), DuplicatePrediction);
}

TEST_CASE("metric identities hold on random confusion tables (fuzz)") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> c(0, 12);
  for (int i = 0; i < 10000; ++i) {
    const long long tp = c(rng), fp = c(rng), tn = c(rng), fn = c(rng);
    if (tp + fp + tn + fn == 0) continue;
    const auto r = metrics_for(tp, fp, tn, fn);
    const long long n = tp + fp + tn + fn;
    CHECK(r.total() == n);
    CHECK(r.accuracy == doctest::Approx(double(tp + tn) / n).epsilon(1e-12));
    if (r.precision_defined) {
      CHECK(r.precision == doctest::Approx(double(tp) / (tp + fp)).epsilon(1e-12));
    }
    if (r.recall_defined) {
      CHECK(r.recall == doctest::Approx(double(tp) / (tp + fn)).epsilon(1e-12));
    }
    if (r.f1_defined) {
      // F1 lies between min and max of precision and recall.
      CHECK(r.f1_positive >= std::min(r.precision, r.recall) - 1e-12);
      CHECK(r.f1_positive <= std::max(r.precision, r.recall) + 1e-12);
    }
    // Macro F1 averages the two per-class F1 scores, so it equals the
    // positive-class F1 whenever the table is symmetric.
    if (tp == tn && fp == fn) {
      CHECK(r.f1_macro == doctest::Approx(r.f1_positive).epsilon(1e-12));
    }
    // Count-weighted mean of per-type accuracies equals overall accuracy.
    double weighted = 0;
    for (const auto& [k, acc] : r.per_type_accuracy) {
      weighted += acc * r.per_type_count.at(k);
    }
    CHECK(weighted / n == doctest::Approx(r.accuracy).epsilon(1e-12));
  }
}

TEST_CASE("benchmark loader validates the record schema") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "ambiver_eval_test";
  fs::create_directories(dir);
  auto write_lines = [&](const std::vector<std::string>& lines) {
    std::ofstream f(dir / "instructions.jsonl", std::ios::trunc);
    for (const auto& l : lines) f << l << "\n";
  };

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_benchmark((dir / "nope").string()), MissingFile);
  }
  SUBCASE("empty file loads zero records") {
    write_lines({});
    CHECK(load_benchmark(dir.string()).empty());
  }
  SUBCASE("valid records, blank lines skipped, split filter applied") {
    write_lines({
        R"({"scene_id":"s0","instruction_id":"i0","text":"pick up the cup","label":"Unambiguous","split":"test"})",
        "",
        R"({"scene_id":"s0","instruction_id":"i1","text":"pick up the cup","label":"Ambiguous","subtype":"Instance","split":"train"})",
    });
    const auto all = load_benchmark(dir.string());
    REQUIRE(all.size() == 2);
    CHECK(all[1].subtype == AmbiguityType::Instance);
    const auto train = load_benchmark(dir.string(), Split::train);
    REQUIRE(train.size() == 1);
    CHECK(train[0].instruction_id == "i1");
  }
  SUBCASE("Unambiguous record with a subtype names the offending line") {
    write_lines({
        R"({"scene_id":"s0","instruction_id":"i0","text":"x","label":"Unambiguous","split":"test"})",
        R"({"scene_id":"s0","instruction_id":"i1","text":"x","label":"Unambiguous","subtype":"Instance","split":"test"})",
    });
    try {
      load_benchmark(dir.string());
      FAIL("expected SchemaViolation");
    } catch (const SchemaViolation& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("Ambiguous record without a subtype is rejected") {
    write_lines({
        R"({"scene_id":"s0","instruction_id":"i0","text":"x","label":"Ambiguous","split":"test"})",
    });
    CHECK_THROWS_AS(load_benchmark(dir.string()), SchemaViolation);
  }
  SUBCASE("duplicate ids within a scene are rejected") {
    write_lines({
        R"({"scene_id":"s0","instruction_id":"i0","text":"x","label":"Unambiguous","split":"test"})",
        R"({"scene_id":"s0","instruction_id":"i0","text":"y","label":"Unambiguous","split":"test"})",
    });
    CHECK_THROWS_AS(load_benchmark(dir.string()), SchemaViolation);
  }
  SUBCASE("malformed JSON is rejected with a line number") {
    write_lines({"{not json"});
    CHECK_THROWS_AS(load_benchmark(dir.string()), SchemaViolation);
  }
}

TEST_CASE("plain-text table formats percentages with two decimals") {
  const auto r = metrics_for(100, 15, 26, 14);  // accuracy 126/155 = 81.29%
  const auto table = report_to_table(r);
  CHECK(table.find("81.29") != std::string::npos);
  CHECK(table.find("n=155") != std::string::npos);
  CHECK(table.find("Instance") != std::string::npos);

  const MetricsReport empty;
  CHECK(report_to_table(empty).find("n=0") != std::string::npos);

  const auto j = report_to_json(r);
  CHECK(j.find("\"accuracy\"") != std::string::npos);
  CHECK(j.find("\"per_type_accuracy\"") != std::string::npos);
}
