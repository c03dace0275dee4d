#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "sstgen/cluster.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/prompts.hpp"
#include "sstgen/vectorize.hpp"

namespace sstgen {

enum class LandmarkStrategy { centroid, llm_choice, random };

inline std::string to_string(LandmarkStrategy s) {
  switch (s) {
    case LandmarkStrategy::centroid: return "centroid";
    case LandmarkStrategy::llm_choice: return "llm_choice";
    case LandmarkStrategy::random: return "random";
  }
  return "?";
}

inline LandmarkStrategy parse_landmark_strategy(const std::string& s) {
  if (s == "centroid") return LandmarkStrategy::centroid;
  if (s == "llm" || s == "llm_choice") return LandmarkStrategy::llm_choice;
  if (s == "random") return LandmarkStrategy::random;
  fail(ErrorKind::invalid_input, "unknown landmark strategy '" + s + "'");
}

enum class LandmarkStatus { pending, labeled };

struct LandmarkEntry {
  int cluster = 0;
  std::string doc_id;
  std::vector<std::string> labels;  // normalized, importance order
  std::string annotator;
  LandmarkStatus status = LandmarkStatus::pending;
};

class LandmarkSet {
 public:
  /// With `unique_clusters` off, several entries may share a cluster (the
  /// random strategy samples documents, not clusters).
  explicit LandmarkSet(bool unique_clusters = true) : unique_(unique_clusters) {}

  void add(LandmarkEntry e) {
    if (unique_ && by_cluster_.count(e.cluster)) {
      fail(ErrorKind::invalid_input, "cluster " + std::to_string(e.cluster) + " already has a landmark");
    }
    by_cluster_.emplace(e.cluster, entries_.size());
    entries_.push_back(std::move(e));
  }

  const std::vector<LandmarkEntry>& entries() const { return entries_; }
  LandmarkEntry& at(std::size_t i) { return entries_.at(i); }
  std::size_t size() const { return entries_.size(); }
  bool unique_clusters() const { return unique_; }

  /// First landmark for the cluster, if any.
  const LandmarkEntry* for_cluster(int cluster) const {
    auto it = by_cluster_.find(cluster);
    return it == by_cluster_.end() ? nullptr : &entries_[it->second];
  }

  std::size_t labeled_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.status == LandmarkStatus::labeled;
    return n;
  }

  static nlohmann::json entry_to_json(const LandmarkEntry& e) {
    return {{"cluster", e.cluster},
            {"doc_id", e.doc_id},
            {"labels", e.labels},
            {"annotator", e.annotator},
            {"status", e.status == LandmarkStatus::labeled ? "labeled" : "pending"}};
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& e : entries_) out += entry_to_json(e).dump() + "\n";
    return out;
  }

  void save(const std::filesystem::path& path) const { write_file(path, to_jsonl()); }

  static LandmarkSet load(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    std::vector<LandmarkEntry> es;
    bool dup = false;
    std::set<int> seen;
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
      if (trim(lines[ln]).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(lines[ln]);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::parse, path.string() + ":" + std::to_string(ln + 1) + ": " + e.what());
      }
      LandmarkEntry e;
      e.cluster = j.at("cluster").get<int>();
      e.doc_id = j.at("doc_id").get<std::string>();
      e.labels = j.value("labels", std::vector<std::string>{});
      e.annotator = j.value("annotator", "");
      const auto status = j.value("status", e.labels.empty() ? "pending" : "labeled");
      e.status = status == "labeled" ? LandmarkStatus::labeled : LandmarkStatus::pending;
      dup = dup || !seen.insert(e.cluster).second;
      es.push_back(std::move(e));
    }
    LandmarkSet s(!dup);
    for (auto& e : es) s.add(std::move(e));
    return s;
  }

 private:
  bool unique_;
  std::vector<LandmarkEntry> entries_;
  std::multimap<int, std::size_t> by_cluster_;
};

// ---------------------------------------------------------------------------
// selection

/// Row index of the member closest to the cluster center; ties go to the
/// lower row.
inline std::size_t centroid_row(const ClusterModel& model, const FeatureMatrix& features, int cluster) {
  if (features.rows() != model.size()) fail(ErrorKind::invalid_input, "features and model disagree on row count");
  std::optional<std::size_t> best;
  double best_d = 0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (model.assignments[i] != cluster) continue;
    const double d = squared_distance(features.row(i), model.centers.at(cluster));
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  if (!best) fail(ErrorKind::invalid_input, "cluster " + std::to_string(cluster) + " is empty");
  return *best;
}

inline std::string select_by_centroid(const ClusterModel& model, const FeatureMatrix& features, int cluster) {
  return features.doc_ids[centroid_row(model, features, cluster)];
}

/// 0-based position from the last "[n]" in a landmark-choice response.
/// Responses count from 1; "[0]" is taken as the first document. Returns
/// nullopt when nothing usable is found.
inline std::optional<std::size_t> parse_choice_index(const std::string& response, std::size_t n_docs) {
  static const std::regex pattern(R"(\[(\d+)\])");
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(response.begin(), response.end(), pattern); it != std::sregex_iterator(); ++it) {
    last = (*it)[1].str();
  }
  if (!last || last->size() > 9) return std::nullopt;
  const auto v = std::stoul(*last);
  if (v == 0) return 0;
  if (v > n_docs) return std::nullopt;
  return v - 1;
}

/// Truncates to the first `cap` words.
inline std::string truncate_words(const std::string& text, std::size_t cap) {
  auto words = split(collapse_whitespace(text), ' ');
  if (words.size() <= cap) return text;
  words.resize(cap);
  return join(words, " ");
}

struct LlmChoiceConfig {
  std::size_t word_cap = 400;          // per document, applied when over budget
  std::size_t prompt_word_budget = 12000;
  double temperature = 0.0;
};

inline std::string landmark_choice_prompt(const std::vector<std::string>& texts, const LlmChoiceConfig& cfg) {
  std::size_t total = 0;
  for (const auto& t : texts) total += word_count(t);
  if (total <= cfg.prompt_word_budget) return prompts::choose_landmark(texts);
  std::vector<std::string> cut;
  cut.reserve(texts.size());
  for (const auto& t : texts) cut.push_back(truncate_words(t, cfg.word_cap));
  return prompts::choose_landmark(cut);
}

struct SelectionOutcome {
  LandmarkSet landmarks;
  std::vector<std::string> warnings;
};

/// One landmark per non-empty cluster (centroid, llm_choice), or k documents
/// drawn uniformly without replacement (random). `texts[i]` is the text of
/// model row i. The gateway is only needed for llm_choice.
inline SelectionOutcome select_landmarks(const ClusterModel& model, const FeatureMatrix& features,
                                         const std::vector<std::string>& texts, LandmarkStrategy strategy,
                                         Gateway* gateway = nullptr, std::uint64_t seed = 0,
                                         const LlmChoiceConfig& cfg = {}) {
  if (texts.size() != model.size()) fail(ErrorKind::invalid_input, "text count differs from model rows");
  SelectionOutcome out{LandmarkSet(strategy != LandmarkStrategy::random), {}};
  if (strategy == LandmarkStrategy::random) {
    auto rng = make_rng(seed, 0x1a4d);
    auto rows = sample_without_replacement(model.size(), static_cast<std::size_t>(model.k), rng);
    for (auto r : rows) out.landmarks.add({model.assignments[r], features.doc_ids[r], {}, {}, LandmarkStatus::pending});
    return out;
  }
  std::vector<std::vector<std::size_t>> members(model.k);
  for (std::size_t i = 0; i < model.size(); ++i) members[model.assignments[i]].push_back(i);
  std::vector<std::size_t> chosen(model.k, 0);
  std::vector<int> ask;  // clusters needing an LLM decision
  for (int c = 0; c < model.k; ++c) {
    if (members[c].empty()) {
      out.warnings.push_back("cluster " + std::to_string(c) + " is empty; no landmark");
      continue;
    }
    if (strategy == LandmarkStrategy::centroid || members[c].size() == 1) {
      chosen[c] = strategy == LandmarkStrategy::centroid ? centroid_row(model, features, c) : members[c][0];
    } else {
      ask.push_back(c);
    }
  }
  if (!ask.empty()) {
    if (!gateway) fail(ErrorKind::config, "llm_choice selection needs a gateway");
    std::vector<ChatRequest> reqs;
    for (int c : ask) {
      std::vector<std::string> docs;
      for (auto i : members[c]) docs.push_back(texts[i]);
      reqs.push_back(user_request(gateway->config().chat_model, landmark_choice_prompt(docs, cfg), cfg.temperature));
    }
    auto results = gateway->chat_many(reqs);
    for (std::size_t q = 0; q < ask.size(); ++q) {
      const int c = ask[q];
      std::optional<std::size_t> pick;
      if (results[q].ok) pick = parse_choice_index(results[q].text, members[c].size());
      if (pick) {
        chosen[c] = members[c][*pick];
      } else {
        out.warnings.push_back("cluster " + std::to_string(c) + ": " +
                               (results[q].ok ? "no usable index in response" : "gateway failure: " + results[q].error) +
                               "; using centroid");
        chosen[c] = centroid_row(model, features, c);
      }
    }
  }
  for (int c = 0; c < model.k; ++c) {
    if (!members[c].empty()) out.landmarks.add({c, features.doc_ids[chosen[c]], {}, {}, LandmarkStatus::pending});
  }
  return out;
}

/// Single-cluster convenience wrapper around the LLM choice.
inline std::string select_by_llm(const std::vector<std::string>& doc_ids, const std::vector<std::string>& texts,
                                 Gateway& gateway, const std::function<std::string()>& fallback,
                                 std::vector<std::string>* warnings = nullptr, const LlmChoiceConfig& cfg = {}) {
  if (doc_ids.empty() || doc_ids.size() != texts.size()) fail(ErrorKind::invalid_input, "select_by_llm: bad input");
  if (doc_ids.size() == 1) return doc_ids[0];
  std::optional<std::size_t> pick;
  std::string why = "no usable index in response";
  try {
    pick = parse_choice_index(gateway.chat(user_request(gateway.config().chat_model, landmark_choice_prompt(texts, cfg),
                                                        cfg.temperature)),
                              texts.size());
  } catch (const Error& e) {
    why = std::string("gateway failure: ") + e.what();
  }
  if (pick) return doc_ids[*pick];
  if (warnings) warnings->push_back(why + "; using centroid");
  return fallback();
}

// ---------------------------------------------------------------------------
// annotation

/// Parses "a, b, c" into normalized labels and checks them against the
/// catalog. Returns the offending labels via `unknown`.
inline std::vector<std::string> parse_label_answer(const std::string& line, const LabelCatalog& catalog,
                                                   std::vector<std::string>& unknown) {
  std::vector<std::string> labels;
  unknown.clear();
  for (const auto& part : split(line, ',')) {
    auto l = normalize_label(part);
    if (l.empty()) continue;
    if (!catalog.contains(l)) {
      unknown.push_back(trim(part));
      continue;
    }
    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
  }
  return labels;
}

struct ImportReport {
  std::size_t applied = 0;
  std::vector<std::string> rejected;  // "line N: reason"
};

/// Applies a labels file (JSONL {"cluster","doc_id"?,"labels"}). Rows with
/// off-catalog labels or unknown clusters are rejected whole.
inline ImportReport import_labels(LandmarkSet& set, const std::filesystem::path& path, const LabelCatalog& catalog,
                                  const std::string& annotator = "import") {
  ImportReport rep;
  auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const std::string where = "line " + std::to_string(ln + 1) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[ln]);
    } catch (const nlohmann::json::exception&) {
      rep.rejected.push_back(where + "malformed JSON");
      continue;
    }
    if (!j.is_object() || !j.contains("cluster") || !j.contains("labels") || !j["labels"].is_array()) {
      rep.rejected.push_back(where + "needs integer 'cluster' and array 'labels'");
      continue;
    }
    const int cluster = j["cluster"].get<int>();
    std::optional<std::size_t> slot;
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& e = set.entries()[i];
      if (e.cluster != cluster) continue;
      if (j.contains("doc_id") && j["doc_id"].get<std::string>() != e.doc_id) continue;
      slot = i;
      break;
    }
    if (!slot) {
      rep.rejected.push_back(where + "no landmark for cluster " + std::to_string(cluster));
      continue;
    }
    std::vector<std::string> labels, bad;
    for (const auto& l : j["labels"]) {
      const auto n = normalize_label(l.get<std::string>());
      if (!catalog.contains(n)) {
        bad.push_back(l.get<std::string>());
      } else if (std::find(labels.begin(), labels.end(), n) == labels.end()) {
        labels.push_back(n);
      }
    }
    if (!bad.empty() || labels.empty()) {
      rep.rejected.push_back(where + (bad.empty() ? "no labels" : "labels not in catalog: " + join(bad, ", ")));
      continue;
    }
    auto& e = set.at(*slot);
    e.labels = std::move(labels);
    e.annotator = annotator;
    e.status = LandmarkStatus::labeled;
    ++rep.applied;
  }
  return rep;
}

/// Simulated annotator: copies the hidden gold labels of each landmark
/// document. Off-catalog gold labels are dropped.
inline std::size_t reveal_gold_labels(LandmarkSet& set, const Corpus& corpus, const LabelCatalog& catalog) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto& e = set.at(i);
    const auto* doc = corpus.find(e.doc_id);
    if (!doc) fail(ErrorKind::invalid_input, "landmark document '" + e.doc_id + "' not in corpus");
    std::vector<std::string> labels;
    for (const auto& l : doc->gold_labels) {
      if (catalog.contains(l)) labels.push_back(l);
    }
    if (labels.empty()) continue;
    e.labels = std::move(labels);
    e.annotator = "gold";
    e.status = LandmarkStatus::labeled;
    ++n;
  }
  return n;
}

struct InteractiveResult {
  std::size_t labeled = 0, skipped = 0;
  bool quit = false;
};

/// Console annotation loop over pending landmarks. Answers: comma-separated
/// labels, "s" to skip, "q" to stop. Unknown labels re-prompt. With a state
/// path, the set is saved after every answer so a later call resumes.
inline InteractiveResult annotate_interactive(LandmarkSet& set, const Corpus& corpus, const LabelCatalog& catalog,
                                              std::istream& in, std::ostream& out, const std::string& annotator,
                                              const std::optional<std::filesystem::path>& state_path = std::nullopt) {
  InteractiveResult res;
  out << "Available labels:\n" << catalog.prompt_listing() << "\n\n";
  const std::size_t total = set.size();
  for (std::size_t i = 0; i < total; ++i) {
    auto& e = set.at(i);
    if (e.status == LandmarkStatus::labeled) continue;
    const auto* doc = corpus.find(e.doc_id);
    if (!doc) fail(ErrorKind::invalid_input, "landmark document '" + e.doc_id + "' not in corpus");
    out << "--- landmark " << (i + 1) << "/" << total << " (cluster " << e.cluster << ", doc " << e.doc_id << ")\n"
        << doc->text << "\n";
    while (true) {
      out << "labels (comma-separated, s=skip, q=quit)> " << std::flush;
      std::string line;
      if (!std::getline(in, line)) {
        res.quit = true;
        return res;
      }
      const auto t = trim(line);
      if (t == "q") {
        res.quit = true;
        return res;
      }
      if (t == "s" || t.empty()) {
        ++res.skipped;
        break;
      }
      std::vector<std::string> unknown;
      auto labels = parse_label_answer(t, catalog, unknown);
      if (!unknown.empty()) {
        out << "not in catalog: " << join(unknown, ", ") << "\n";
        continue;
      }
      e.labels = std::move(labels);
      e.annotator = annotator;
      e.status = LandmarkStatus::labeled;
      ++res.labeled;
      break;
    }
    if (state_path) set.save(*state_path);
  }
  return res;
}

}  // namespace sstgen
