#include "ambiver/instruction.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ambiver {

namespace {

const std::unordered_set<std::string> kPoliteness = {"please", "kindly", "could", "you"};

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '\'') {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::string> read_word_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LexiconError("cannot open lexicon file: " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (!line.empty()) words.push_back(to_lower(line));
  }
  return words;
}

}  // namespace

void ParserLexicon::add_preposition(const std::string& phrase) {
  std::vector<std::string> words = tokenize(phrase);
  if (words.empty()) return;
  prepositions_.push_back(std::move(words));
  std::stable_sort(prepositions_.begin(), prepositions_.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
}

std::string ParserLexicon::lemma(const std::string& word) const {
  const std::string w = to_lower(word);
  if (auto it = irregular_.find(w); it != irregular_.end()) return it->second;
  const size_t n = w.size();
  if (n >= 5 && (ends_with(w, "ches") || ends_with(w, "shes") || ends_with(w, "sses") ||
                 ends_with(w, "xes") || ends_with(w, "zes"))) {
    return w.substr(0, n - 2);
  }
  if (n >= 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us")) {
    return w.substr(0, n - 1);
  }
  if (n >= 6 && ends_with(w, "ing")) return w.substr(0, n - 3);
  if (n >= 5 && ends_with(w, "ed")) return w.substr(0, n - 2);
  return w;
}

ParserLexicon ParserLexicon::builtin() {
  ParserLexicon lx;
  for (const char* v :
       {"pick",  "pass", "bring", "give",  "take",  "grab",  "move",   "put",  "place",
        "fetch", "get",  "hand",  "open",  "close", "turn",  "push",   "pull", "lift",
        "wash",  "throw", "find", "carry", "set",   "handle", "deal",  "adjust",
        "manage", "clean", "hold", "show"}) {
    lx.verbs_.insert(v);
  }
  for (const char* a :
       {"red",   "blue",  "green", "yellow", "black", "white",  "brown", "grey",
        "large", "small", "big",   "little", "tall",  "short",  "nice",  "good",
        "old",   "new",   "round", "square", "wooden", "metal", "plastic",
        "heavy", "empty", "full",  "soft",   "hard",  "dirty",  "long",  "wide"}) {
    lx.adjectives_.insert(a);
  }
  for (const char* s :
       {"the", "a",    "an",   "me",   "my",    "your", "it",   "its",  "this", "that",
        "these", "those", "to", "up",  "down",  "out",  "off",  "of",   "and",  "or",
        "for", "with", "some", "one",  "there", "here", "is",   "are",  "be",   "can",
        "will", "would"}) {
    lx.stopwords_.insert(s);
  }
  for (const char* p : {"in front of", "left of", "right of", "next to", "on", "under",
                        "near", "by", "behind", "from"}) {
    lx.add_preposition(p);
  }
  lx.irregular_ = {{"children", "child"}, {"shelves", "shelf"}, {"knives", "knife"},
                   {"glasses", "glass"},  {"dishes", "dish"}};
  return lx;
}

ParserLexicon ParserLexicon::load(const std::string& dir) {
  namespace fs = std::filesystem;
  ParserLexicon lx = builtin();
  const fs::path base(dir);
  if (!fs::is_directory(base)) throw LexiconError("lexicon directory not found: " + dir);
  if (fs::exists(base / "verbs.txt")) {
    lx.verbs_.clear();
    for (auto& w : read_word_file((base / "verbs.txt").string())) lx.verbs_.insert(w);
  }
  if (fs::exists(base / "adjectives.txt")) {
    lx.adjectives_.clear();
    for (auto& w : read_word_file((base / "adjectives.txt").string())) lx.adjectives_.insert(w);
  }
  if (fs::exists(base / "stopwords.txt")) {
    lx.stopwords_.clear();
    for (auto& w : read_word_file((base / "stopwords.txt").string())) lx.stopwords_.insert(w);
  }
  if (fs::exists(base / "prepositions.txt")) {
    lx.prepositions_.clear();
    for (auto& w : read_word_file((base / "prepositions.txt").string())) lx.add_preposition(w);
  }
  return lx;
}

namespace {

// Comparative / superlative surface forms count as attribute tokens.
bool looks_comparative(const std::string& tok) {
  return (tok.size() >= 5 && ends_with(tok, "est")) || (tok.size() >= 5 && ends_with(tok, "er"));
}

// Greedy longest-first preposition match at position i; returns token length
// of the match or 0.
size_t match_preposition(const std::vector<std::string>& tokens, size_t i,
                         const ParserLexicon& lx, std::string* matched) {
  for (const auto& prep : lx.prepositions()) {
    if (i + prep.size() > tokens.size()) continue;
    bool ok = true;
    for (size_t k = 0; k < prep.size(); ++k) {
      if (tokens[i + k] != prep[k]) {
        ok = false;
        break;
      }
    }
    if (ok) {
      std::ostringstream os;
      for (size_t k = 0; k < prep.size(); ++k) os << (k ? " " : "") << prep[k];
      *matched = os.str();
      return prep.size();
    }
  }
  return 0;
}

}  // namespace

ParsedInstruction parse_instruction(const std::string& text, const ParserLexicon& lx) {
  const std::string raw = trim(text);
  if (raw.empty()) throw EmptyInstruction("parse_instruction: empty instruction");

  ParsedInstruction out;
  out.raw = raw;

  const std::vector<std::string> tokens = tokenize(raw);
  if (tokens.empty()) throw EmptyInstruction("parse_instruction: no tokens");

  // Action: first non-politeness token, if it is an imperative verb.
  size_t scan_start = 0;
  size_t i = 0;
  while (i < tokens.size() && kPoliteness.count(tokens[i])) ++i;
  if (i < tokens.size() && lx.is_verb(lx.lemma(tokens[i]))) {
    out.action = lx.lemma(tokens[i]);
    scan_start = i + 1;
  } else {
    scan_start = i;
  }

  // Preposition spans over the remainder.
  struct PrepHit {
    size_t pos;
    size_t len;
    std::string text;
  };
  std::vector<PrepHit> preps;
  for (size_t p = scan_start; p < tokens.size();) {
    std::string matched;
    const size_t len = match_preposition(tokens, p, lx, &matched);
    if (len > 0) {
      preps.push_back({p, len, matched});
      p += len;
    } else {
      ++p;
    }
  }

  auto is_noun = [&](const std::string& tok) {
    if (lx.is_stopword(tok) || kPoliteness.count(tok)) return false;
    const std::string lem = lx.lemma(tok);
    if (lx.is_adjective(lem) || looks_comparative(tok)) return false;
    return true;
  };

  // Target span: tokens after the action up to the first preposition.
  const size_t target_end = preps.empty() ? tokens.size() : preps.front().pos;
  std::string target;
  for (size_t p = scan_start; p < target_end; ++p) {
    if (is_noun(tokens[p])) target = lx.lemma(tokens[p]);  // last noun = head
    const std::string lem = lx.lemma(tokens[p]);
    if (lx.is_adjective(lem)) {
      out.attributes.push_back(lem);
    } else if (looks_comparative(tokens[p])) {
      out.attributes.push_back(tokens[p]);
    }
  }
  out.target = target;

  // Relations: each preposition pairs with the head noun of the phrase that
  // follows it (last noun before the next preposition or sentence end).
  for (size_t h = 0; h < preps.size(); ++h) {
    const size_t from = preps[h].pos + preps[h].len;
    const size_t to = (h + 1 < preps.size()) ? preps[h + 1].pos : tokens.size();
    std::string obj;
    for (size_t p = from; p < to; ++p) {
      if (is_noun(tokens[p])) obj = lx.lemma(tokens[p]);
    }
    if (!obj.empty()) out.relations.emplace_back(preps[h].text, obj);
  }

  return out;
}

ParsedInstruction parser_backend_passthrough(const std::string& text) {
  const std::string raw = trim(text);
  if (raw.empty()) throw EmptyInstruction("parser_backend_passthrough: empty instruction");
  ParsedInstruction out;
  out.raw = raw;
  out.target = raw;
  return out;
}

}  // namespace ambiver
