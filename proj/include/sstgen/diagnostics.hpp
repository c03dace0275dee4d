#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sstgen/augment.hpp"
#include "sstgen/clustermetrics.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/vectorize.hpp"

namespace sstgen {

using TokenSet = std::set<std::string>;

/// Normalized, lowercased alphanumeric tokens.
inline TokenSet token_set(std::string_view text) {
  auto toks = alnum_tokens(normalize_text(text), 1);
  return {toks.begin(), toks.end()};
}

/// |A ∩ B| / |A ∪ B|; two empty sets count as identical.
inline double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.empty() && b.empty()) return 1.0;
  const TokenSet& small = a.size() <= b.size() ? a : b;
  const TokenSet& large = a.size() <= b.size() ? b : a;
  std::size_t inter = 0;
  for (const auto& t : small) inter += large.count(t);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Mean Jaccard over all unordered pairs.
inline double mean_pairwise_jaccard(const std::vector<TokenSet>& sets) {
  if (sets.size() < 2) fail(ErrorKind::invalid_input, "pairwise Jaccard needs at least two sets");
  double sum = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    for (std::size_t j = i + 1; j < sets.size(); ++j) {
      sum += jaccard(sets[i], sets[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

struct DiversityReport {
  std::string method;
  std::size_t sources = 0;   // variant groups
  std::size_t variants = 0;  // samples across groups
  std::optional<double> jaccard;  // macro average over groups with >= 2 variants
  std::optional<double> cosine;   // original vs variant, macro average
};

inline nlohmann::json to_json(const DiversityReport& r) {
  nlohmann::json j{{"method", r.method}, {"sources", r.sources}, {"variants", r.variants}};
  j["jaccard"] = r.jaccard ? nlohmann::json(*r.jaccard) : nlohmann::json(nullptr);
  j["cosine"] = r.cosine ? nlohmann::json(*r.cosine) : nlohmann::json(nullptr);
  return j;
}

/// Per-method diversity over successful samples grouped by source document.
/// `originals` maps source id to its text; with a gateway, the cosine column
/// compares embeddings of the original and each variant.
inline std::vector<DiversityReport> diversity_report(const std::vector<AugmentedSample>& samples,
                                                     const std::map<std::string, std::string>& originals = {},
                                                     Gateway* gateway = nullptr) {
  std::map<std::string, std::map<std::string, std::vector<const AugmentedSample*>>> groups;  // method -> source -> samples
  for (const auto& s : samples) {
    if (s.status == SampleStatus::ok) groups[to_string(s.method)][s.source_id].push_back(&s);
  }
  std::vector<DiversityReport> out;
  for (const auto& [method, by_source] : groups) {
    DiversityReport r;
    r.method = method;
    r.sources = by_source.size();
    double jac_sum = 0, cos_sum = 0;
    std::size_t jac_groups = 0, cos_groups = 0;
    for (const auto& [source, group] : by_source) {
      r.variants += group.size();
      if (group.size() >= 2) {
        std::vector<TokenSet> sets;
        for (const auto* s : group) sets.push_back(token_set(s->text));
        jac_sum += mean_pairwise_jaccard(sets);
        ++jac_groups;
      }
      auto orig = originals.find(source);
      if (gateway && orig != originals.end()) {
        std::vector<std::string> texts{orig->second};
        for (const auto* s : group) texts.push_back(s->text);
        auto vecs = gateway->embed(texts);
        double c = 0;
        for (std::size_t v = 1; v < vecs.size(); ++v) c += cosine_similarity(vecs[0], vecs[v]);
        cos_sum += c / static_cast<double>(vecs.size() - 1);
        ++cos_groups;
      }
    }
    if (jac_groups) r.jaccard = jac_sum / static_cast<double>(jac_groups);
    if (cos_groups) r.cosine = cos_sum / static_cast<double>(cos_groups);
    out.push_back(r);
  }
  return out;
}

inline std::string diversity_markdown(const std::vector<DiversityReport>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_fixed(*v * 100, 2) + "%" : std::string("n/a"); };
  std::string out = "| Method | Sources | Variants | Jac. Sim Among Gen. | Emb. Sim to Original |\n|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.method + " | " + std::to_string(r.sources) + " | " + std::to_string(r.variants) + " | " +
           opt(r.jaccard) + " | " + opt(r.cosine) + " |\n";
  }
  return out;
}

inline std::string diversity_csv(const std::vector<DiversityReport>& rows) {
  std::string out = "method,sources,variants,jaccard,cosine\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.sources) + "," + std::to_string(r.variants) + "," +
           (r.jaccard ? fmt_fixed(*r.jaccard, 6) : "") + "," + (r.cosine ? fmt_fixed(*r.cosine, 6) : "") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// label distribution

struct LabelDistributionReport {
  std::map<std::string, std::size_t> before, augmented, after;  // after = before + augmented
  std::size_t samples = 0;
  std::size_t samples_with_catalog_label = 0;
  std::size_t off_catalog_occurrences = 0;
  std::vector<std::string> off_catalog_labels;
  std::vector<std::string> under_augmented;  // fewer augmented than original samples

  double catalog_share() const {
    return samples ? static_cast<double>(samples_with_catalog_label) / static_cast<double>(samples) : 0.0;
  }
};

inline LabelDistributionReport label_distribution_report(const Corpus& original,
                                                         const std::vector<AugmentedSample>& samples,
                                                         const LabelCatalog& catalog) {
  LabelDistributionReport r;
  for (const auto& d : original.documents()) {
    for (const auto& l : d.gold_labels) ++r.before[l];
  }
  std::set<std::string> off;
  for (const auto& s : samples) {
    if (s.status != SampleStatus::ok) continue;
    ++r.samples;
    bool any = false;
    for (const auto& l : s.labels) {
      ++r.augmented[l];
      if (catalog.contains(l)) {
        any = true;
      } else {
        ++r.off_catalog_occurrences;
        off.insert(l);
      }
    }
    r.samples_with_catalog_label += any;
  }
  r.after = r.before;
  for (const auto& [l, c] : r.augmented) r.after[l] += c;
  r.off_catalog_labels.assign(off.begin(), off.end());
  for (const auto& [l, c] : r.before) {
    auto it = r.augmented.find(l);
    if ((it == r.augmented.end() ? 0 : it->second) < c) r.under_augmented.push_back(l);
  }
  return r;
}

inline nlohmann::json to_json(const LabelDistributionReport& r) {
  return {{"before", r.before},
          {"augmented", r.augmented},
          {"after", r.after},
          {"samples", r.samples},
          {"samples_with_catalog_label", r.samples_with_catalog_label},
          {"catalog_share", r.catalog_share()},
          {"off_catalog_occurrences", r.off_catalog_occurrences},
          {"off_catalog_labels", r.off_catalog_labels},
          {"under_augmented", r.under_augmented}};
}

inline std::string label_distribution_csv(const LabelDistributionReport& r) {
  std::string out = "label,before,augmented,after\n";
  for (const auto& [l, after] : r.after) {
    auto get = [&](const std::map<std::string, std::size_t>& m) {
      auto it = m.find(l);
      return std::to_string(it == m.end() ? 0 : it->second);
    };
    out += "\"" + l + "\"," + get(r.before) + "," + get(r.augmented) + "," + std::to_string(after) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// lengths

struct LengthStats {
  std::size_t n = 0;
  double mean_words = 0, se_words = 0;
  double mean_chars_per_word = 0, se_chars_per_word = 0;
};

struct LengthReport {
  LengthStats original, augmented;
  double words_delta = 0, words_delta_se = 0;
  double chars_per_word_delta = 0, chars_per_word_delta_se = 0;
};

namespace detail {

inline void mean_se(const std::vector<double>& v, double& mean, double& se) {
  mean = se = 0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline LengthStats length_stats(const std::vector<std::string>& texts) {
  std::vector<double> words, cpw;
  for (const auto& t : texts) {
    auto toks = split(collapse_whitespace(t), ' ');
    std::size_t n = 0, chars = 0;
    for (const auto& w : toks) {
      if (w.empty()) continue;
      ++n;
      chars += w.size();
    }
    words.push_back(static_cast<double>(n));
    if (n) cpw.push_back(static_cast<double>(chars) / static_cast<double>(n));
  }
  LengthStats s;
  s.n = texts.size();
  mean_se(words, s.mean_words, s.se_words);
  mean_se(cpw, s.mean_chars_per_word, s.se_chars_per_word);
  return s;
}

}  // namespace detail

inline LengthReport length_report(const std::vector<std::string>& original, const std::vector<std::string>& augmented) {
  LengthReport r;
  r.original = detail::length_stats(original);
  r.augmented = detail::length_stats(augmented);
  r.words_delta = r.augmented.mean_words - r.original.mean_words;
  r.words_delta_se = std::hypot(r.original.se_words, r.augmented.se_words);
  r.chars_per_word_delta = r.augmented.mean_chars_per_word - r.original.mean_chars_per_word;
  r.chars_per_word_delta_se = std::hypot(r.original.se_chars_per_word, r.augmented.se_chars_per_word);
  return r;
}

inline nlohmann::json to_json(const LengthReport& r) {
  auto stats = [](const LengthStats& s) {
    return nlohmann::json{{"n", s.n},
                          {"mean_words", s.mean_words},
                          {"se_words", s.se_words},
                          {"mean_chars_per_word", s.mean_chars_per_word},
                          {"se_chars_per_word", s.se_chars_per_word}};
  };
  return {{"original", stats(r.original)},
          {"augmented", stats(r.augmented)},
          {"words_delta", r.words_delta},
          {"words_delta_se", r.words_delta_se},
          {"chars_per_word_delta", r.chars_per_word_delta},
          {"chars_per_word_delta_se", r.chars_per_word_delta_se}};
}

}  // namespace sstgen
