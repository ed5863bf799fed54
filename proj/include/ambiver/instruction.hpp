#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ambiver {

struct EmptyInstruction : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LexiconError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Structured decomposition of a free-form instruction.
struct ParsedInstruction {
  std::string raw;
  std::string action;  // lowercase verb lemma, or empty
  std::string target;  // head noun of the first noun phrase, or empty
  std::vector<std::string> attributes;
  std::vector<std::pair<std::string, std::string>> relations;  // (preposition, object)

  bool degenerate() const { return target.empty(); }
};

/// Word lists driving the rule-based parse. Loaded from plain-text files
/// (one entry per line, '#' comments) or from built-in defaults.
class ParserLexicon {
 public:
  static ParserLexicon builtin();
  static ParserLexicon load(const std::string& dir);

  bool is_verb(const std::string& lemma) const { return verbs_.count(lemma) > 0; }
  bool is_adjective(const std::string& lemma) const { return adjectives_.count(lemma) > 0; }
  bool is_stopword(const std::string& word) const { return stopwords_.count(word) > 0; }
  // Prepositions sorted longest-first (token count) for greedy matching.
  const std::vector<std::vector<std::string>>& prepositions() const { return prepositions_; }

  /// Suffix-stripping lemmatizer (-s, -es, -ing, -ed) with an irregular table.
  std::string lemma(const std::string& word) const;

  void add_verb(std::string v) { verbs_.insert(std::move(v)); }
  void add_adjective(std::string a) { adjectives_.insert(std::move(a)); }
  void add_stopword(std::string s) { stopwords_.insert(std::move(s)); }
  void add_preposition(const std::string& phrase);

 private:
  std::unordered_set<std::string> verbs_;
  std::unordered_set<std::string> adjectives_;
  std::unordered_set<std::string> stopwords_;
  std::vector<std::vector<std::string>> prepositions_;
  std::unordered_map<std::string, std::string> irregular_;

  friend ParserLexicon make_builtin_lexicon();
};

/// Deterministic rule-based decoupling of instruction text into
/// {action, target, attributes, relations}.
ParsedInstruction parse_instruction(const std::string& text, const ParserLexicon& lexicon);

/// Ablation path: the whole instruction becomes the grounding query.
ParsedInstruction parser_backend_passthrough(const std::string& text);

/// Swappable parse stage so an external NLP service can replace the
/// rule-based parser without touching callers.
class ParserBackend {
 public:
  virtual ~ParserBackend() = default;
  virtual ParsedInstruction parse(const std::string& text) const = 0;
};

class RuleParserBackend final : public ParserBackend {
 public:
  explicit RuleParserBackend(ParserLexicon lexicon) : lexicon_(std::move(lexicon)) {}
  ParsedInstruction parse(const std::string& text) const override {
    return parse_instruction(text, lexicon_);
  }

 private:
  ParserLexicon lexicon_;
};

class PassthroughParserBackend final : public ParserBackend {
 public:
  ParsedInstruction parse(const std::string& text) const override {
    return parser_backend_passthrough(text);
  }
};

}  // namespace ambiver
