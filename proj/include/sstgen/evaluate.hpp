#pragma once

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sstgen/clustermetrics.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/landmark.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/prompts.hpp"

namespace sstgen {

struct Prediction {
  std::string doc_id;
  std::string raw;
  std::vector<std::string> labels;  // normalized
  bool parse_ok = false;
};

/// Labels between the first "[" and the next "]".
inline Prediction parse_prediction(const std::string& raw, std::string doc_id = {}) {
  Prediction p;
  p.doc_id = std::move(doc_id);
  p.raw = raw;
  const auto open = raw.find('[');
  if (open == std::string::npos) return p;
  const auto close = raw.find(']', open + 1);
  if (close == std::string::npos) return p;
  for (const auto& part : split(std::string_view(raw).substr(open + 1, close - open - 1), ',')) {
    auto l = normalize_label(part);
    if (!l.empty()) p.labels.push_back(std::move(l));
  }
  p.parse_ok = !p.labels.empty();
  return p;
}

namespace detail {
inline std::vector<std::string> normalized(const std::vector<std::string>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(normalize_label(s));
  return out;
}
}  // namespace detail

inline bool part_match(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  const auto p = detail::normalized(pred);
  std::set<std::string> g;
  for (const auto& s : gold) g.insert(normalize_label(s));
  return std::any_of(p.begin(), p.end(), [&](const std::string& l) { return g.count(l) > 0; });
}

inline bool all_match(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty()) return false;
  const auto p = detail::normalized(pred), g = detail::normalized(gold);
  return std::set<std::string>(p.begin(), p.end()) == std::set<std::string>(g.begin(), g.end());
}

inline bool in_right_order(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  if (pred.empty()) return false;
  return detail::normalized(pred) == detail::normalized(gold);
}

struct DomainArea {
  bool domain = false, area = false;
};

inline DomainArea domain_area_match(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
  DomainArea r;
  if (pred.empty() || gold.empty()) return r;
  r.domain = normalize_label(pred[0]) == normalize_label(gold[0]);
  r.area = r.domain && pred.size() >= 2 && gold.size() >= 2 && normalize_label(pred[1]) == normalize_label(gold[1]);
  return r;
}

// ---------------------------------------------------------------------------

struct MetricsReport {
  LabelScheme scheme = LabelScheme::multi_label;
  std::string method;
  std::size_t n = 0;       // gold documents scored
  std::size_t parsed = 0;  // predictions that parsed
  double part_match = 0, all_match = 0, in_right_order = 0;
  double domain_match = 0, area_match = 0;

  nlohmann::json to_json() const {
    nlohmann::json j{{"scheme", to_string(scheme)}, {"method", method}, {"n", n}, {"parsed", parsed}};
    if (scheme == LabelScheme::hierarchical_2) {
      j["domain_match"] = domain_match;
      j["area_match"] = area_match;
    } else {
      j["part_match"] = part_match;
      j["all_match"] = all_match;
      j["in_right_order"] = in_right_order;
    }
    return j;
  }
};

inline std::string metrics_markdown(const std::vector<MetricsReport>& rows) {
  if (rows.empty()) return {};
  auto pct = [](double v) { return fmt_fixed(v * 100, 2) + "%"; };
  std::string out;
  if (rows.front().scheme == LabelScheme::hierarchical_2) {
    out = "| Method | Domain Match | Area Match |\n|---|---|---|\n";
    for (const auto& r : rows) out += "| " + r.method + " | " + pct(r.domain_match) + " | " + pct(r.area_match) + " |\n";
  } else {
    out = "| Method | Part Match | All Match | In Right Order |\n|---|---|---|---|\n";
    for (const auto& r : rows) {
      out += "| " + r.method + " | " + pct(r.part_match) + " | " + pct(r.all_match) + " | " + pct(r.in_right_order) + " |\n";
    }
  }
  return out;
}

struct RawPrediction {
  std::string id;
  std::string output;
};

inline std::vector<RawPrediction> read_predictions(const std::filesystem::path& path) {
  std::vector<RawPrediction> out;
  auto lines = read_lines(path);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    try {
      auto j = nlohmann::json::parse(lines[ln]);
      out.push_back({j.at("id").get<std::string>(), j.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, path.string() + ":" + std::to_string(ln + 1) + ": " + e.what());
    }
  }
  return out;
}

inline void write_predictions(const std::vector<RawPrediction>& preds, const std::filesystem::path& path) {
  std::string out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["output"] = p.output;
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

/// Scores predictions against every gold document. Documents without a
/// prediction, or whose prediction does not parse, count as misses.
inline MetricsReport score_run(const std::vector<RawPrediction>& predictions, const std::vector<const Document*>& gold,
                               LabelScheme scheme, std::string method = {}) {
  std::unordered_map<std::string, const Document*> by_id;
  for (const auto* d : gold) by_id.emplace(d->id, d);
  std::unordered_map<std::string, Prediction> parsed;
  for (const auto& p : predictions) {
    if (!by_id.count(p.id)) fail(ErrorKind::invalid_input, "prediction for unknown document '" + p.id + "'");
    if (!parsed.emplace(p.id, parse_prediction(p.output, p.id)).second) {
      fail(ErrorKind::invalid_input, "duplicate prediction for document '" + p.id + "'");
    }
  }
  MetricsReport r;
  r.scheme = scheme;
  r.method = std::move(method);
  r.n = gold.size();
  std::size_t part = 0, all = 0, order = 0, dom = 0, area = 0;
  for (const auto* d : gold) {
    auto it = parsed.find(d->id);
    if (it == parsed.end() || !it->second.parse_ok) continue;
    ++r.parsed;
    const auto& pred = it->second.labels;
    part += part_match(pred, d->gold_labels);
    all += all_match(pred, d->gold_labels);
    order += in_right_order(pred, d->gold_labels);
    auto da = domain_area_match(pred, d->gold_labels);
    dom += da.domain;
    area += da.area;
  }
  if (r.n) {
    const double n = static_cast<double>(r.n);
    r.part_match = static_cast<double>(part) / n;
    r.all_match = static_cast<double>(all) / n;
    r.in_right_order = static_cast<double>(order) / n;
    r.domain_match = static_cast<double>(dom) / n;
    r.area_match = static_cast<double>(area) / n;
  }
  return r;
}

/// Gold documents for scoring: the test split, or every document when the
/// corpus carries no split assignment.
inline std::vector<const Document*> gold_documents(const Corpus& corpus) {
  std::vector<const Document*> out;
  for (auto i : corpus.indices_in(Split::test)) out.push_back(&corpus[i]);
  if (out.empty()) {
    for (const auto& d : corpus.documents()) {
      if (!d.split) out.push_back(&d);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// chain-of-thought labeling baseline

/// Label list after the last "Label:" marker.
inline Prediction parse_cot_response(const std::string& raw, std::string doc_id = {}) {
  const auto pos = raw.rfind("Label:");
  if (pos == std::string::npos) {
    Prediction p;
    p.doc_id = std::move(doc_id);
    p.raw = raw;
    return p;
  }
  auto p = parse_prediction(raw.substr(pos + 6), std::move(doc_id));
  p.raw = raw;
  return p;
}

/// Cluster ids ranked by distance from `point` to each center, nearest first.
inline std::vector<int> nearest_clusters(const ClusterModel& model, std::span<const double> point, std::size_t m) {
  std::vector<std::pair<double, int>> d;
  for (int c = 0; c < static_cast<int>(model.centers.size()); ++c) d.emplace_back(squared_distance(point, model.centers[c]), c);
  m = std::min(m, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(d[i].second);
  return out;
}

struct CotConfig {
  std::size_t references = 5;
  double temperature = 0.0;
};

inline std::string cot_prompt(const std::string& target, const std::vector<int>& clusters, const LandmarkSet& landmarks,
                              const Corpus& corpus, const LabelCatalog& catalog) {
  std::vector<prompts::LabeledReference> refs;
  for (int c : clusters) {
    const auto* lm = landmarks.for_cluster(c);
    if (!lm || lm->status != LandmarkStatus::labeled) continue;
    const auto* d = corpus.find(lm->doc_id);
    if (!d) fail(ErrorKind::invalid_input, "landmark document '" + lm->doc_id + "' not in corpus");
    std::vector<std::string> shown;
    for (const auto& l : lm->labels) shown.push_back(catalog.contains(l) ? catalog.display(l) : l);
    refs.push_back({d->text, shown});
  }
  return prompts::cot_label(catalog.prompt_listing(), refs, target);
}

/// Labels each target with the reasoning-then-label prompt. `clusters[i]`
/// ranks the clusters nearest target i.
inline std::vector<Prediction> cot_rag_label(const std::vector<const Document*>& targets,
                                             const std::vector<std::vector<int>>& clusters, const LandmarkSet& landmarks,
                                             const Corpus& corpus, const LabelCatalog& catalog, Gateway& gateway,
                                             const CotConfig& cfg = {}) {
  if (targets.size() != clusters.size()) fail(ErrorKind::invalid_input, "cot_rag_label: one cluster list per target");
  std::vector<ChatRequest> reqs;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::vector<int> top(clusters[i].begin(), clusters[i].begin() + static_cast<std::ptrdiff_t>(
                                                                       std::min(cfg.references, clusters[i].size())));
    reqs.push_back(user_request(gateway.config().chat_model,
                                cot_prompt(targets[i]->text, top, landmarks, corpus, catalog), cfg.temperature));
  }
  auto results = gateway.chat_many(reqs);
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (results[i].ok) {
      out.push_back(parse_cot_response(results[i].text, targets[i]->id));
    } else {
      Prediction p;
      p.doc_id = targets[i]->id;
      p.raw = results[i].error;
      out.push_back(std::move(p));
    }
  }
  return out;
}

/// Bracketed output string for a prediction, as stored in predictions
/// files. Failed parses become an empty string so they stay misses.
inline std::string prediction_output(const Prediction& p) { return p.parse_ok ? prompts::bracket(p.labels) : ""; }

}  // namespace sstgen
