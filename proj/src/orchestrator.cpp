#include "ambiver/orchestrator.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ambiver {

using nlohmann::json;

std::string to_string(AmbiguityType t) {
  switch (t) {
    case AmbiguityType::Instance: return "Instance";
    case AmbiguityType::Attribute: return "Attribute";
    case AmbiguityType::Spatial: return "Spatial";
    case AmbiguityType::Action: return "Action";
  }
  return "Instance";
}

std::string to_string(Label l) {
  return l == Label::Ambiguous ? "Ambiguous" : "Unambiguous";
}

std::optional<AmbiguityType> ambiguity_type_from_string(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "instance") return AmbiguityType::Instance;
  if (lower == "attribute") return AmbiguityType::Attribute;
  if (lower == "spatial") return AmbiguityType::Spatial;
  if (lower == "action") return AmbiguityType::Action;
  return std::nullopt;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// --- keyframe stores ---

void MemoryKeyframeStore::add_view(int view_index, int width, int height) {
  sizes_[view_index] = {width, height};
}
bool MemoryKeyframeStore::has_view(int view_index) const {
  return sizes_.count(view_index) > 0;
}
int MemoryKeyframeStore::view_width(int view_index) const { return sizes_.at(view_index).first; }
int MemoryKeyframeStore::view_height(int view_index) const {
  return sizes_.at(view_index).second;
}
std::string MemoryKeyframeStore::crop_ref(int view_index, const BBox2D& region) {
  std::ostringstream os;
  os << "view:" << view_index << "#" << region.x_min << "," << region.y_min << ","
     << region.x_max << "," << region.y_max;
  return os.str();
}

// --- dossier ---

BBox2D expand_crop(const BBox2D& bbox, int image_width, int image_height) {
  const double mx = 0.10 * bbox.width();
  const double my = 0.10 * bbox.height();
  BBox2D c;
  c.x_min = std::max(0.0, bbox.x_min - mx);
  c.y_min = std::max(0.0, bbox.y_min - my);
  c.x_max = std::min(static_cast<double>(image_width), bbox.x_max + mx);
  c.y_max = std::min(static_cast<double>(image_height), bbox.y_max + my);
  return c;
}

Dossier build_dossier(const ParsedInstruction& parsed, const std::string& bev_ref,
                      const std::vector<Candidate>& candidates, KeyframeStore& keyframes) {
  if (parsed.raw.empty()) throw EmptyInstruction("build_dossier: empty instruction");

  Dossier d;
  d.linguistic = parsed;
  d.bev_ref = bev_ref;

  std::vector<Candidate> ordered = candidates;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.group_score > b.group_score;
                   });
  for (const Candidate& c : ordered) {
    if (!keyframes.has_view(c.representative_view)) {
      throw MissingKeyframe("keyframe store has no view " +
                            std::to_string(c.representative_view));
    }
    const int w = keyframes.view_width(c.representative_view);
    const int h = keyframes.view_height(c.representative_view);
    LocalEvidence ev;
    ev.candidate = c;
    ev.crop.view_index = c.representative_view;
    ev.crop.region = expand_crop(c.representative_bbox, w, h);
    ev.crop.image_ref = keyframes.crop_ref(c.representative_view, ev.crop.region);
    d.local_evidence.push_back(std::move(ev));
  }
  return d;
}

// --- prompt ---

PromptTemplate PromptTemplate::builtin() {
  PromptTemplate t;
  t.version = "builtin-v1";
  t.text =
      "You are verifying whether an instruction can be executed without guesswork in the\n"
      "observed 3D scene.\n"
      "\n"
      "Decision rule: report Ambiguous when executing the instruction would force a choice\n"
      "the text does not determine; otherwise report Unambiguous.\n"
      "Ambiguity types:\n"
      "- Instance: the named object class matches more than one scene object and no stated\n"
      "  feature singles one out.\n"
      "- Attribute: a subjective or relative adjective (not an explicit superlative) fits\n"
      "  several objects.\n"
      "- Spatial: a viewpoint-dependent spatial phrase changes referent with the observer's\n"
      "  position.\n"
      "- Action: the verb admits several mutually exclusive executions even though the\n"
      "  target is clear.\n"
      "\n"
      "## Instruction\n"
      "{{INSTRUCTION}}\n"
      "\n"
      "## Parse\n"
      "{{PARSE_JSON}}\n"
      "\n"
      "## Global context\n"
      "The first attached image is a top-down map of the scene.\n"
      "\n"
      "## Candidate instances\n"
      "{{CANDIDATES}}\n"
      "\n"
      "## Output format\n"
      "Reply with exactly one JSON object:\n"
      "{\"label\": \"Ambiguous\" or \"Unambiguous\", \"types\": subset of [\"Instance\",\n"
      "\"Attribute\", \"Spatial\", \"Action\"], \"explanation\": string, \"clarification\":\n"
      "string, present only when ambiguous}.\n";
  return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt template: " + path);
  PromptTemplate t;
  t.text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  t.version = std::filesystem::path(path).filename().string() + "@" + fnv1a_hex(t.text);
  return t;
}

namespace {

std::string replace_all_slots(std::string text, const std::string& slot,
                              const std::string& value) {
  size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

json parse_to_json(const ParsedInstruction& p) {
  json rel = json::array();
  for (const auto& [prep, obj] : p.relations) rel.push_back({prep, obj});
  return json{{"action", p.action},
              {"target", p.target},
              {"attributes", p.attributes},
              {"relations", rel}};
}

}  // namespace

RenderedPrompt render_prompt(const Dossier& d, const PromptTemplate& tmpl) {
  std::string candidates_block;
  if (d.local_evidence.empty()) {
    candidates_block = kNoCandidatesNotice;
  } else {
    std::ostringstream os;
    for (size_t i = 0; i < d.local_evidence.size(); ++i) {
      const auto& ev = d.local_evidence[i];
      char line[128];
      std::snprintf(line, sizeof(line), "(candidate %zu: reliability %.2f, seen in %d views)",
                    i + 1, ev.candidate.group_score, ev.candidate.cardinality);
      os << line << "\n";
    }
    candidates_block = os.str();
    candidates_block.pop_back();  // trailing newline
  }

  std::string text = tmpl.text;
  text = replace_all_slots(text, "{{INSTRUCTION}}", d.linguistic.raw);
  text = replace_all_slots(text, "{{PARSE_JSON}}", parse_to_json(d.linguistic).dump());
  text = replace_all_slots(text, "{{CANDIDATES}}", candidates_block);

  RenderedPrompt out;
  out.text = std::move(text);
  if (!d.bev_ref.empty()) out.image_refs.push_back(d.bev_ref);
  for (const auto& ev : d.local_evidence) out.image_refs.push_back(ev.crop.image_ref);
  out.prompt_hash = fnv1a_hex(out.text);
  return out;
}

// --- verdict parsing ---

namespace {

std::string to_lower_copy(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// First balanced {...} block, or nullopt.
std::optional<std::string> extract_json_object(const std::string& text) {
  const size_t start = text.find('{');
  if (start == std::string::npos) return std::nullopt;
  int depth = 0;
  bool in_string = false;
  for (size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == '{') ++depth;
    if (c == '}') {
      --depth;
      if (depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

}  // namespace

Verdict parse_verdict(const std::string& raw) {
  if (raw.empty()) throw UnparseableVerdict("empty response");

  Verdict v;
  const std::optional<std::string> blob = extract_json_object(raw);
  if (blob) {
    json j;
    bool ok = true;
    try {
      j = json::parse(*blob);
    } catch (const json::parse_error&) {
      ok = false;
    }
    if (ok && j.is_object() && j.contains("label")) {
      const std::string label = to_lower_copy(j.at("label").get<std::string>());
      v.label = (label == "ambiguous") ? Label::Ambiguous : Label::Unambiguous;
      if (j.contains("types") && j["types"].is_array()) {
        for (const auto& t : j["types"]) {
          if (!t.is_string()) continue;
          if (auto parsed = ambiguity_type_from_string(t.get<std::string>())) {
            v.types.insert(*parsed);
          } else {
            v.warnings.push_back("dropped unknown ambiguity type: " + t.dump());
          }
        }
      }
      if (j.contains("explanation") && j["explanation"].is_string()) {
        v.explanation = j["explanation"].get<std::string>();
      }
      if (j.contains("clarification") && j["clarification"].is_string() &&
          !j["clarification"].get<std::string>().empty()) {
        v.clarification = j["clarification"].get<std::string>();
      }
      // Invariant repair.
      if (v.label == Label::Unambiguous && !v.types.empty()) {
        v.types.clear();
        v.warnings.push_back("cleared ambiguity types on an Unambiguous verdict");
      }
      if (v.label == Label::Unambiguous) v.clarification.reset();
      if (v.label == Label::Ambiguous && v.types.empty()) {
        v.types.insert(AmbiguityType::Instance);
        v.degraded = true;
        v.warnings.push_back("Ambiguous verdict carried no type; defaulted to Instance");
      }
      return v;
    }
  }

  // Keyword fallback: earliest of "unambiguous" / standalone "ambiguous" wins.
  const std::string lower = to_lower_copy(raw);
  const size_t un = lower.find("unambiguous");
  size_t am = std::string::npos;
  for (size_t p = lower.find("ambiguous"); p != std::string::npos;
       p = lower.find("ambiguous", p + 1)) {
    if (p >= 2 && lower.compare(p - 2, 2, "un") == 0) continue;
    am = p;
    break;
  }
  if (un == std::string::npos && am == std::string::npos) {
    throw UnparseableVerdict("no JSON object and no label keyword in response");
  }
  v.degraded = true;
  v.warnings.push_back("verdict recovered by keyword fallback");
  if (un != std::string::npos && (am == std::string::npos || un < am)) {
    v.label = Label::Unambiguous;
  } else {
    v.label = Label::Ambiguous;
    v.types.insert(AmbiguityType::Instance);
  }
  v.explanation = "recovered from unstructured response";
  return v;
}

AdjudicationResult adjudicate(const Dossier& d, VlmBackend& backend,
                              const PromptTemplate& tmpl) {
  const RenderedPrompt prompt = render_prompt(d, tmpl);
  std::string raw;
  std::string last_error;
  bool got = false;
  for (int attempt = 0; attempt < 3 && !got; ++attempt) {  // 1 call + 2 retries
    try {
      raw = backend.complete(prompt.text, prompt.image_refs, /*temperature=*/0.0);
      got = true;
    } catch (const BackendTransportError& e) {
      last_error = e.what();
    }
  }
  if (!got) {
    throw BackendUnavailable("backend '" + backend.name() + "' failed after retries: " +
                             last_error);
  }
  AdjudicationResult res;
  res.raw_response = raw;
  res.prompt_hash = prompt.prompt_hash;
  res.verdict = parse_verdict(raw);
  return res;
}

// --- mock backend ---

namespace {

const std::set<std::string> kSubjectiveAdjectives = {"nice", "large", "big", "small"};
const std::set<std::string> kObserverDependentPreps = {"left of", "right of", "behind",
                                                       "in front of"};
const std::set<std::string> kVagueVerbs = {"handle", "deal", "adjust", "manage"};

bool is_superlative(const std::string& w) {
  return w.size() >= 5 && w.compare(w.size() - 3, 3, "est") == 0;
}

}  // namespace

std::string MockVlmBackend::complete(const std::string& prompt,
                                     const std::vector<std::string>& /*image_refs*/,
                                     double /*temperature*/) {
  // Recover the structured parse block the prompt embeds.
  const std::string marker = "## Parse\n";
  const size_t pos = prompt.find(marker);
  if (pos == std::string::npos) {
    throw BackendTransportError("mock backend: prompt lacks a parse block");
  }
  const size_t end = prompt.find('\n', pos + marker.size());
  const json parse = json::parse(prompt.substr(pos + marker.size(), end - pos - marker.size()));

  int n_candidates = 0;
  for (size_t p = prompt.find("(candidate "); p != std::string::npos;
       p = prompt.find("(candidate ", p + 1)) {
    ++n_candidates;
  }

  const std::string action = parse.at("action").get<std::string>();
  const auto attributes = parse.at("attributes").get<std::vector<std::string>>();
  std::vector<std::string> preps;
  for (const auto& rel : parse.at("relations")) preps.push_back(rel.at(0).get<std::string>());

  std::set<std::string> types;
  if (n_candidates >= 2 && attributes.empty() && preps.empty()) types.insert("Instance");
  bool has_superlative = false;
  for (const auto& a : attributes) has_superlative |= is_superlative(a);
  for (const auto& a : attributes) {
    if (kSubjectiveAdjectives.count(a) && !has_superlative) types.insert("Attribute");
  }
  for (const auto& p : preps) {
    if (kObserverDependentPreps.count(p)) types.insert("Spatial");
  }
  if (kVagueVerbs.count(action)) types.insert("Action");

  json out;
  if (types.empty()) {
    out = {{"label", "Unambiguous"},
           {"types", json::array()},
           {"explanation", "evidence admits a single execution (" +
                               std::to_string(n_candidates) + " candidate(s))"}};
  } else {
    out = {{"label", "Ambiguous"},
           {"types", types},
           {"explanation", "rule table fired on " + std::to_string(n_candidates) +
                               " candidate(s)"},
           {"clarification", "Which interpretation of '" +
                                 parse.at("target").get<std::string>() + "' is intended?"}};
  }
  return out.dump();
}

// --- replay backend ---

ReplayVlmBackend::ReplayVlmBackend(std::string response_dir) : dir_(std::move(response_dir)) {}

std::string ReplayVlmBackend::complete(const std::string& prompt,
                                       const std::vector<std::string>& /*image_refs*/,
                                       double /*temperature*/) {
  const std::string path = dir_ + "/" + fnv1a_hex(prompt) + ".txt";
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendTransportError("replay backend: no recorded response at " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// --- remote backend ---

std::string base64_encode(const std::string& bytes) {
  static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  size_t i = 0;
  while (i + 2 < bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += tbl[v & 63];
    i += 3;
  }
  if (i + 1 == bytes.size()) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                       (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += tbl[(v >> 18) & 63];
    out += tbl[(v >> 12) & 63];
    out += tbl[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

RemoteVlmBackend::RemoteVlmBackend(std::string host, int port, std::string path,
                                   std::string api_key, int timeout_sec)
    : host_(std::move(host)),
      port_(port),
      path_(std::move(path)),
      api_key_(std::move(api_key)),
      timeout_sec_(timeout_sec) {}

std::string RemoteVlmBackend::complete(const std::string& prompt,
                                       const std::vector<std::string>& image_refs,
                                       double temperature) {
  json images = json::array();
  for (const auto& ref : image_refs) {
    std::ifstream in(ref, std::ios::binary);
    if (in) {
      std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      images.push_back(base64_encode(bytes));
    } else {
      // Non-file references (synthetic ids) go through as-is.
      images.push_back(base64_encode(ref));
    }
  }
  const json body = {{"prompt", prompt}, {"images", images}, {"temperature", temperature}};

  httplib::Client client(host_, port_);
  client.set_read_timeout(timeout_sec_, 0);
  client.set_write_timeout(timeout_sec_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw BackendTransportError("remote backend: transport failure to " + host_ + ":" +
                                std::to_string(port_));
  }
  if (res->status != 200) {
    throw BackendTransportError("remote backend: HTTP " + std::to_string(res->status));
  }
  const json reply = json::parse(res->body);
  return reply.at("text").get<std::string>();
}

}  // namespace ambiver
