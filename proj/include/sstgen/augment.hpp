#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "sstgen/cluster.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/landmark.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/prompts.hpp"

namespace sstgen {

enum class AugmentMethod { wordnet, rewrite, rag };
enum class SampleStatus { ok, regex_fail, label_filtered, gateway_failed };
enum class LabelPolicy { drop_unknown, keep_all };

inline std::string to_string(AugmentMethod m) {
  switch (m) {
    case AugmentMethod::wordnet: return "wordnet";
    case AugmentMethod::rewrite: return "rewrite";
    case AugmentMethod::rag: return "rag";
  }
  return "?";
}

inline AugmentMethod parse_method(const std::string& s) {
  if (s == "wordnet") return AugmentMethod::wordnet;
  if (s == "rewrite") return AugmentMethod::rewrite;
  if (s == "rag") return AugmentMethod::rag;
  fail(ErrorKind::invalid_input, "unknown augmentation method '" + s + "'");
}

inline std::string to_string(SampleStatus s) {
  switch (s) {
    case SampleStatus::ok: return "ok";
    case SampleStatus::regex_fail: return "regex_fail";
    case SampleStatus::label_filtered: return "label_filtered";
    case SampleStatus::gateway_failed: return "gateway_failed";
  }
  return "?";
}

inline SampleStatus parse_status(const std::string& s) {
  if (s == "ok") return SampleStatus::ok;
  if (s == "regex_fail") return SampleStatus::regex_fail;
  if (s == "label_filtered") return SampleStatus::label_filtered;
  if (s == "gateway_failed") return SampleStatus::gateway_failed;
  fail(ErrorKind::parse, "unknown sample status '" + s + "'");
}

inline LabelPolicy parse_label_policy(const std::string& s) {
  if (s == "drop_unknown") return LabelPolicy::drop_unknown;
  if (s == "keep_all") return LabelPolicy::keep_all;
  fail(ErrorKind::invalid_input, "unknown label policy '" + s + "'");
}

inline std::string to_string(LabelPolicy p) { return p == LabelPolicy::drop_unknown ? "drop_unknown" : "keep_all"; }

struct AugmentedSample {
  std::string id;
  AugmentMethod method = AugmentMethod::wordnet;
  std::string source_id;
  int variant = 0;
  std::string text;
  std::vector<std::string> labels;  // normalized
  SampleStatus status = SampleStatus::ok;
  std::string prompt_hash;
  std::string raw;  // unparsed generator output (rag only)
};

inline std::string sample_id(const std::string& source, AugmentMethod m, int variant) {
  return source + "#" + to_string(m) + "-" + std::to_string(variant);
}

inline nlohmann::json to_json(const AugmentedSample& s) {
  nlohmann::json j{{"id", s.id},       {"method", to_string(s.method)}, {"source_id", s.source_id},
                   {"variant", s.variant}, {"text", s.text},           {"labels", s.labels},
                   {"status", to_string(s.status)}};
  if (!s.prompt_hash.empty()) j["prompt_hash"] = s.prompt_hash;
  if (!s.raw.empty()) j["raw"] = s.raw;
  return j;
}

inline AugmentedSample sample_from_json(const nlohmann::json& j) {
  AugmentedSample s;
  s.id = j.at("id");
  s.method = parse_method(j.at("method"));
  s.source_id = j.at("source_id");
  s.variant = j.value("variant", 0);
  s.text = j.at("text");
  s.labels = j.at("labels").get<std::vector<std::string>>();
  s.status = parse_status(j.value("status", "ok"));
  s.prompt_hash = j.value("prompt_hash", "");
  s.raw = j.value("raw", "");
  return s;
}

inline void write_samples(const std::vector<AugmentedSample>& samples, const std::filesystem::path& path) {
  std::string out;
  for (const auto& s : samples) out += to_json(s).dump() + "\n";
  write_file(path, out);
}

inline std::vector<AugmentedSample> read_samples(const std::filesystem::path& path) {
  std::vector<AugmentedSample> out;
  auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    try {
      out.push_back(sample_from_json(nlohmann::json::parse(lines[ln])));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  return out;
}

struct Accounting {
  std::size_t attempted = 0, ok = 0, regex_fail = 0, label_filtered = 0, gateway_failed = 0;

  void add(SampleStatus s) {
    ++attempted;
    switch (s) {
      case SampleStatus::ok: ++ok; break;
      case SampleStatus::regex_fail: ++regex_fail; break;
      case SampleStatus::label_filtered: ++label_filtered; break;
      case SampleStatus::gateway_failed: ++gateway_failed; break;
    }
  }
  bool balanced() const { return attempted == ok + regex_fail + label_filtered + gateway_failed; }
  nlohmann::json to_json() const {
    return {{"attempted", attempted}, {"ok", ok}, {"regex_fail", regex_fail}, {"label_filtered", label_filtered},
            {"gateway_failed", gateway_failed}};
  }
};

inline Accounting tally(const std::vector<AugmentedSample>& samples) {
  Accounting a;
  for (const auto& s : samples) a.add(s.status);
  return a;
}

// ---------------------------------------------------------------------------
// synonym replacement

/// Lemma -> synonyms, closest first. Lookups are case-insensitive and never
/// return the lemma itself.
class SynonymDb {
 public:
  std::filesystem::path source;

  void add(const std::string& lemma, const std::vector<std::string>& synonyms) {
    const auto key = to_lower(trim(lemma));
    if (key.empty()) return;
    auto& list = map_[key];
    for (const auto& raw : synonyms) {
      auto syn = trim(raw);
      std::replace(syn.begin(), syn.end(), '_', ' ');
      if (syn.empty() || to_lower(syn) == key) continue;
      if (std::find(list.begin(), list.end(), syn) == list.end()) list.push_back(syn);
    }
  }

  const std::vector<std::string>* lookup(std::string_view word) const {
    auto it = map_.find(to_lower(word));
    return (it == map_.end() || it->second.empty()) ? nullptr : &it->second;
  }

  std::size_t size() const { return map_.size(); }
  bool empty() const { return map_.empty(); }

  /// TSV lines "lemma<TAB>syn1,syn2,..."; '#' starts a comment line.
  static SynonymDb load(const std::filesystem::path& path) {
    SynonymDb db;
    db.source = path;
    auto lines = read_lines(path);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      const auto& line = lines[ln];
      if (trim(line).empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        fail(ErrorKind::parse, path.string() + ":" + std::to_string(ln + 1) + ": expected lemma<TAB>synonyms");
      }
      db.add(line.substr(0, tab), split(line.substr(tab + 1), ','));
    }
    return db;
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> map_;
};

inline const std::unordered_set<std::string>& function_words() {
  static const std::unordered_set<std::string> words = {
      "the",   "and",  "for",   "are",   "but",   "not",   "you",   "all",   "any",  "can",   "had",   "her",
      "was",   "one",  "our",   "out",   "has",   "him",   "his",   "how",   "its",  "may",   "who",   "did",
      "yet",   "nor",  "off",   "per",   "via",   "she",   "they",  "them",  "their", "there", "then",  "than",
      "that",  "this", "these", "those", "with",  "from",  "into",  "onto",  "upon", "over",  "under", "about",
      "above", "after", "before", "while", "which", "what", "when",  "where", "whom", "whose", "would", "could",
      "should", "will", "shall", "been",  "being", "have",  "does",  "were",  "also", "such",  "only",  "very",
      "more",  "most", "some",  "each",  "both",  "other", "between", "through", "during", "against", "because",
      "since", "until", "within", "without", "said", "says"};
  return words;
}

inline bool is_content_word(std::string_view w) {
  return w.size() >= 3 && !function_words().count(to_lower(w));
}

struct WordnetConfig {
  double replace_prob = 0.15;
  std::size_t top_k = 3;
  int variants = 10;
};

/// Replaces content words in `text`, keeping everything else byte-identical.
inline std::string synonym_replace(const std::string& text, const SynonymDb& db, double replace_prob,
                                   std::size_t top_k, Rng& rng) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    std::string word = text.substr(i, j - i);
    i = j;
    const auto* syns = is_content_word(word) ? db.lookup(word) : nullptr;
    if (!syns || uniform01(rng) >= replace_prob) {
      out += word;
      continue;
    }
    std::string pick = (*syns)[uniform_index(rng, std::min(top_k, syns->size()))];
    if (std::isupper(static_cast<unsigned char>(word[0])) && !pick.empty()) {
      pick[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(pick[0])));
    }
    out += pick;
  }
  return out;
}

inline std::vector<AugmentedSample> wordnet_replace(const std::string& source_id, const std::string& text,
                                                    const std::vector<std::string>& labels, const SynonymDb& db,
                                                    const WordnetConfig& cfg, std::uint64_t seed) {
  if (db.empty()) fail(ErrorKind::invalid_input, "synonym database is empty");
  if (!(cfg.replace_prob >= 0 && cfg.replace_prob <= 1)) {
    fail(ErrorKind::invalid_input, "replace_prob must be in [0, 1]");
  }
  if (cfg.top_k == 0) fail(ErrorKind::invalid_input, "top_k must be positive");
  std::vector<AugmentedSample> out;
  for (int v = 0; v < cfg.variants; ++v) {
    auto rng = make_rng(seed ^ fnv1a64(source_id), static_cast<std::uint64_t>(v));
    AugmentedSample s;
    s.id = sample_id(source_id, AugmentMethod::wordnet, v);
    s.method = AugmentMethod::wordnet;
    s.source_id = source_id;
    s.variant = v;
    s.text = synonym_replace(text, db, cfg.replace_prob, cfg.top_k, rng);
    s.labels = labels;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// LLM rewrite

struct RewriteConfig {
  int variants = 10;
  double temperature = 0.3;
};

inline std::vector<AugmentedSample> llm_rewrite(const std::string& source_id, const std::string& text,
                                                const std::vector<std::string>& labels, Gateway& gateway,
                                                const RewriteConfig& cfg, std::uint64_t seed) {
  std::vector<ChatRequest> reqs;
  for (int v = 0; v < cfg.variants; ++v) {
    reqs.push_back(user_request(gateway.config().chat_model, prompts::rewrite(text), cfg.temperature,
                                seed + static_cast<std::uint64_t>(v)));
  }
  auto results = gateway.chat_many(reqs);
  std::vector<AugmentedSample> out;
  for (int v = 0; v < cfg.variants; ++v) {
    AugmentedSample s;
    s.id = sample_id(source_id, AugmentMethod::rewrite, v);
    s.method = AugmentMethod::rewrite;
    s.source_id = source_id;
    s.variant = v;
    s.labels = labels;
    s.prompt_hash = request_hash(reqs[v]);
    if (!results[v].ok) {
      s.status = SampleStatus::gateway_failed;
      s.raw = results[v].error;
    } else {
      s.text = normalize_text(results[v].text);
      if (s.text.empty()) s.status = SampleStatus::regex_fail;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// extraction

struct Extraction {
  bool ok = false;
  std::string content;
  std::vector<std::string> labels;  // normalized, order preserved
  std::string reason;               // why extraction failed
};

/// Parses "Content: ...\nLabel: [a, b]". Content runs from the first
/// "Content:" to the next "Label:". The label segment is the rest of that
/// line, either bracketed (text after the closing bracket is ignored) or a
/// bare comma list.
inline Extraction extract_content_label(const std::string& generated) {
  Extraction ex;
  const auto c = generated.find("Content:");
  if (c == std::string::npos) {
    ex.reason = "missing Content marker";
    return ex;
  }
  const auto l = generated.find("Label:", c + 8);
  if (l == std::string::npos) {
    ex.reason = "missing Label marker";
    return ex;
  }
  ex.content = trim(generated.substr(c + 8, l - c - 8));
  if (ex.content.empty()) {
    ex.reason = "empty content";
    return ex;
  }
  auto eol = generated.find('\n', l);
  std::string seg = trim(generated.substr(l + 6, eol == std::string::npos ? std::string::npos : eol - l - 6));
  if (!seg.empty() && seg[0] == '[') {
    const auto close = seg.find(']');
    if (close == std::string::npos) {
      ex.reason = "unclosed label bracket";
      return ex;
    }
    seg = seg.substr(1, close - 1);
  }
  if (seg.find_first_of("[]") != std::string::npos) {
    ex.reason = "nested or stray bracket in labels";
    return ex;
  }
  for (const auto& part : split(seg, ',')) {
    auto n = normalize_label(part);
    if (!n.empty() && std::find(ex.labels.begin(), ex.labels.end(), n) == ex.labels.end()) ex.labels.push_back(n);
  }
  if (ex.labels.empty()) {
    ex.reason = "no labels";
    return ex;
  }
  ex.ok = true;
  return ex;
}

/// Inverse of extract_content_label for well-formed pairs.
inline std::string format_content_label(const std::string& content, const std::vector<std::string>& labels) {
  return "Content: " + content + "\nLabel: " + prompts::bracket(labels);
}

inline AugmentedSample filter_labels(AugmentedSample s, const LabelCatalog& catalog, LabelPolicy policy) {
  if (s.status != SampleStatus::ok || policy == LabelPolicy::keep_all) return s;
  std::vector<std::string> kept;
  for (auto& l : s.labels) {
    if (catalog.contains(l)) kept.push_back(std::move(l));
  }
  s.labels = std::move(kept);
  if (s.labels.empty()) s.status = SampleStatus::label_filtered;
  return s;
}

// ---------------------------------------------------------------------------
// RAG generation

struct RagConfig {
  int variants = 3;
  std::size_t labeled_refs = 5;    // most likely clusters consulted
  std::size_t unlabeled_refs = 3;  // drawn from the document's own cluster
  double temperature = 0.7;
  LabelPolicy policy = LabelPolicy::drop_unknown;
};

/// Everything RAG needs to assemble prompts for rows of a cluster model.
class RagContext {
 public:
  RagContext(const ClusterModel& model, const LandmarkSet& landmarks, const Corpus& corpus, const LabelCatalog& catalog)
      : model_(model), landmarks_(landmarks), corpus_(corpus), catalog_(catalog), listing_(catalog.prompt_listing()) {
    members_.resize(model.k);
    for (std::size_t i = 0; i < model.size(); ++i) members_[model.assignments[i]].push_back(i);
  }

  const std::string& text_of_row(std::size_t row) const { return doc(model_.doc_ids.at(row)).text; }

  /// Prompt for one variant plus the number of labeled and unlabeled
  /// references it holds.
  struct Assembled {
    std::string prompt;
    std::size_t labeled = 0, unlabeled = 0;
    std::vector<int> missing_clusters;
  };

  Assembled assemble(std::size_t row, int variant, std::uint64_t seed, const RagConfig& cfg) const {
    Assembled a;
    std::vector<prompts::LabeledReference> refs;
    const std::size_t m = std::min<std::size_t>({cfg.labeled_refs, static_cast<std::size_t>(model_.k),
                                                 model_.affinity.at(row).size()});
    for (int c : top_clusters(model_, row, m)) {
      const auto* lm = landmarks_.for_cluster(c);
      if (!lm || lm->status != LandmarkStatus::labeled) {
        a.missing_clusters.push_back(c);
        continue;
      }
      std::vector<std::string> shown;
      for (const auto& l : lm->labels) shown.push_back(catalog_.contains(l) ? catalog_.display(l) : l);
      refs.push_back({doc(lm->doc_id).text, std::move(shown)});
    }
    const int own = model_.assignments.at(row);
    std::vector<std::size_t> pool;
    for (auto r : members_[own]) {
      if (r != row) pool.push_back(r);
    }
    auto rng = make_rng(seed ^ fnv1a64(model_.doc_ids[row]), 0x4a60 + static_cast<std::uint64_t>(variant));
    std::vector<std::string> unl;
    for (auto p : sample_without_replacement(pool.size(), cfg.unlabeled_refs, rng)) unl.push_back(text_of_row(pool[p]));
    a.labeled = refs.size();
    a.unlabeled = unl.size();
    a.prompt = prompts::rag_augment(listing_, refs, unl, text_of_row(row));
    return a;
  }

  const ClusterModel& model() const { return model_; }

 private:
  const Document& doc(const std::string& id) const {
    const auto* d = corpus_.find(id);
    if (!d) fail(ErrorKind::invalid_input, "document '" + id + "' not in corpus");
    return *d;
  }

  const ClusterModel& model_;
  const LandmarkSet& landmarks_;
  const Corpus& corpus_;
  const LabelCatalog& catalog_;
  std::string listing_;
  std::vector<std::vector<std::size_t>> members_;
};

/// Turns one generator response into a sample.
inline AugmentedSample rag_sample_from_response(const std::string& source_id, int variant, const std::string& response,
                                                const LabelCatalog& catalog, LabelPolicy policy) {
  AugmentedSample s;
  s.id = sample_id(source_id, AugmentMethod::rag, variant);
  s.method = AugmentMethod::rag;
  s.source_id = source_id;
  s.variant = variant;
  s.raw = response;
  auto ex = extract_content_label(response);
  if (!ex.ok) {
    s.status = SampleStatus::regex_fail;
    return s;
  }
  s.text = normalize_text(ex.content);
  s.labels = std::move(ex.labels);
  return filter_labels(std::move(s), catalog, policy);
}

/// RAG variants for every listed model row, in row then variant order.
inline std::vector<AugmentedSample> rag_generate(const RagContext& ctx, const std::vector<std::size_t>& rows,
                                                 Gateway& gateway, const LabelCatalog& catalog, const RagConfig& cfg,
                                                 std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
  std::vector<ChatRequest> reqs;
  std::set<int> missing;
  for (auto row : rows) {
    for (int v = 0; v < cfg.variants; ++v) {
      auto a = ctx.assemble(row, v, seed, cfg);
      missing.insert(a.missing_clusters.begin(), a.missing_clusters.end());
      reqs.push_back(
          user_request(gateway.config().chat_model, std::move(a.prompt), cfg.temperature, seed + static_cast<std::uint64_t>(v)));
    }
  }
  if (warnings && !missing.empty()) {
    warnings->push_back(std::to_string(missing.size()) + " cluster(s) had no labeled landmark and were skipped as references");
  }
  auto results = gateway.chat_many(reqs);
  std::vector<AugmentedSample> out;
  out.reserve(reqs.size());
  std::size_t q = 0;
  for (auto row : rows) {
    const auto& id = ctx.model().doc_ids.at(row);
    for (int v = 0; v < cfg.variants; ++v, ++q) {
      AugmentedSample s;
      if (results[q].ok) {
        s = rag_sample_from_response(id, v, results[q].text, catalog, cfg.policy);
      } else {
        s.id = sample_id(id, AugmentMethod::rag, v);
        s.method = AugmentMethod::rag;
        s.source_id = id;
        s.variant = v;
        s.status = SampleStatus::gateway_failed;
        s.raw = results[q].error;
      }
      s.prompt_hash = request_hash(reqs[q]);
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace sstgen
