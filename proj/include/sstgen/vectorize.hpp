#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/llmgate.hpp"

namespace sstgen {

enum class FeatureKind { tfidf, embedding, raw };

inline std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::tfidf: return "tfidf";
    case FeatureKind::embedding: return "embedding";
    case FeatureKind::raw: return "raw";
  }
  return "?";
}

/// Row-major dense matrix with one row per document.
class FeatureMatrix {
 public:
  FeatureKind kind = FeatureKind::raw;
  std::vector<std::string> doc_ids;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, FeatureKind k = FeatureKind::raw)
      : kind(k), doc_ids(rows), dim_(dim), data_(rows * dim, 0.0) {}

  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows, FeatureKind k = FeatureKind::raw,
                                 std::vector<std::string> ids = {}) {
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    FeatureMatrix m(rows.size(), dim, k);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != dim) fail(ErrorKind::invalid_input, "ragged feature rows");
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    if (!ids.empty()) {
      if (ids.size() != rows.size()) fail(ErrorKind::invalid_input, "doc id count differs from row count");
      m.doc_ids = std::move(ids);
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) m.doc_ids[i] = std::to_string(i);
    }
    m.check_finite();
    return m;
  }

  std::size_t rows() const { return doc_ids.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return doc_ids.empty(); }

  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  const std::vector<double>& data() const { return data_; }

  FeatureMatrix subset(const std::vector<std::size_t>& idx) const {
    FeatureMatrix m(idx.size(), dim_, kind);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      auto src = row(idx[r]);
      std::copy(src.begin(), src.end(), m.row(r).begin());
      m.doc_ids[r] = doc_ids[idx[r]];
    }
    return m;
  }

  void l2_normalize_rows() {
    for (std::size_t i = 0; i < rows(); ++i) {
      auto r = row(i);
      double n = 0;
      for (double x : r) n += x * x;
      if (n == 0) continue;
      n = std::sqrt(n);
      for (auto& x : r) x /= n;
    }
  }

  void check_finite() const {
    for (double x : data_) {
      if (!std::isfinite(x)) fail(ErrorKind::invalid_input, "feature matrix contains NaN/Inf");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json rows_j = nlohmann::json::array();
    for (std::size_t i = 0; i < rows(); ++i) {
      auto r = row(i);
      rows_j.push_back(std::vector<double>(r.begin(), r.end()));
    }
    return {{"kind", to_string(kind)}, {"dim", dim_}, {"doc_ids", doc_ids}, {"rows", rows_j}};
  }

  static FeatureMatrix from_json(const nlohmann::json& j) {
    const auto kind_s = j.value("kind", "raw");
    FeatureKind k = kind_s == "tfidf" ? FeatureKind::tfidf : kind_s == "embedding" ? FeatureKind::embedding : FeatureKind::raw;
    auto m = from_rows(j.at("rows").get<std::vector<std::vector<double>>>(), k,
                       j.at("doc_ids").get<std::vector<std::string>>());
    if (m.rows() == 0) m.dim_ = j.value("dim", std::size_t{0});
    return m;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean(std::span<const double> a, std::span<const double> b) { return std::sqrt(squared_distance(a, b)); }

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::invalid_input, "cosine_similarity: dimension mismatch");
  const double na = std::sqrt(dot(a, a)), nb = std::sqrt(dot(b, b));
  if (na == 0 || nb == 0) fail(ErrorKind::invalid_input, "cosine_similarity: zero vector");
  return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// TF-IDF

struct TfidfOptions {
  std::size_t max_features = 1024;
  std::size_t min_token_length = 2;
};

/// Lowercased alphanumeric tokens; shorter tokens are dropped.
inline std::vector<std::string> tfidf_tokens(std::string_view text, std::size_t min_len = 2) {
  return alnum_tokens(text, min_len);
}

class TfidfModel {
 public:
  TfidfOptions options;
  std::vector<std::string> terms;  // column order
  std::vector<double> idf;

  std::size_t size() const { return terms.size(); }

  std::optional<std::size_t> column(const std::string& term) const {
    auto it = index_.find(term);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Raw term counts times idf, L2-normalized. Documents without any
  /// vocabulary term map to the zero row.
  std::vector<double> transform(std::string_view text) const {
    std::vector<double> row(terms.size(), 0.0);
    for (const auto& tok : tfidf_tokens(text, options.min_token_length)) {
      if (auto c = column(tok)) row[*c] += 1.0;
    }
    double norm = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] *= idf[j];
      norm += row[j] * row[j];
    }
    if (norm > 0) {
      norm = std::sqrt(norm);
      for (auto& x : row) x /= norm;
    }
    return row;
  }

  FeatureMatrix transform(const Corpus& corpus) const {
    FeatureMatrix m(corpus.size(), terms.size(), FeatureKind::tfidf);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      auto r = transform(corpus[i].text);
      std::copy(r.begin(), r.end(), m.row(i).begin());
      m.doc_ids[i] = corpus[i].id;
    }
    return m;
  }

  static TfidfModel fit(const std::vector<std::string>& texts, const TfidfOptions& opt) {
    if (opt.max_features < 1) fail(ErrorKind::invalid_input, "max_features must be positive");
    if (texts.empty()) fail(ErrorKind::invalid_input, "cannot fit TF-IDF on an empty corpus");
    std::map<std::string, std::size_t> corpus_freq, doc_freq;
    for (const auto& t : texts) {
      std::map<std::string, std::size_t> seen;
      for (auto& tok : tfidf_tokens(t, opt.min_token_length)) ++seen[tok];
      for (const auto& [tok, c] : seen) {
        corpus_freq[tok] += c;
        ++doc_freq[tok];
      }
    }
    if (corpus_freq.empty()) fail(ErrorKind::invalid_input, "empty vocabulary: no document has a usable token");
    std::vector<std::pair<std::string, std::size_t>> ranked(corpus_freq.begin(), corpus_freq.end());
    // Highest corpus frequency first, ties lexicographic.
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > opt.max_features) ranked.resize(opt.max_features);
    std::sort(ranked.begin(), ranked.end());

    TfidfModel m;
    m.options = opt;
    const double n = static_cast<double>(texts.size());
    for (const auto& [tok, _] : ranked) {
      m.index_.emplace(tok, m.terms.size());
      m.terms.push_back(tok);
      m.idf.push_back(std::log((1.0 + n) / (1.0 + static_cast<double>(doc_freq[tok]))) + 1.0);
    }
    return m;
  }

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

inline std::pair<TfidfModel, FeatureMatrix> tfidf_fit_transform(const Corpus& corpus, const TfidfOptions& opt) {
  std::vector<std::string> texts;
  texts.reserve(corpus.size());
  for (const auto& d : corpus.documents()) texts.push_back(d.text);
  auto model = TfidfModel::fit(texts, opt);
  auto features = model.transform(corpus);
  return {std::move(model), std::move(features)};
}

// ---------------------------------------------------------------------------
// embeddings

inline std::filesystem::path embedding_cache_path(const std::filesystem::path& cache_dir, const std::string& model,
                                                  const std::string& doc_id) {
  std::string safe_model = model;
  std::replace(safe_model.begin(), safe_model.end(), '/', '_');
  std::string safe_id = doc_id;
  std::replace(safe_id.begin(), safe_id.end(), '/', '_');
  return cache_dir / safe_model / (safe_id + ".json");
}

/// Dense embedding per document, rows in corpus order. With a cache
/// directory, vectors are read from and written to {model}/{doc id}.json.
inline FeatureMatrix embed_corpus(const Corpus& corpus, Gateway& gateway,
                                  const std::optional<std::filesystem::path>& cache_dir = std::nullopt) {
  FeatureMatrix empty_m(0, 0, FeatureKind::embedding);
  if (corpus.empty()) return empty_m;
  const auto& model = gateway.config().embed_model;
  std::vector<std::vector<double>> rows(corpus.size());
  std::vector<std::size_t> missing;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (cache_dir) {
      auto p = embedding_cache_path(*cache_dir, model, corpus[i].id);
      if (std::filesystem::exists(p)) {
        rows[i] = nlohmann::json::parse(read_file(p)).get<std::vector<double>>();
        continue;
      }
    }
    missing.push_back(i);
  }
  if (!missing.empty()) {
    std::vector<std::string> texts;
    texts.reserve(missing.size());
    for (auto i : missing) texts.push_back(corpus[i].text);
    auto vecs = gateway.embed(texts);
    for (std::size_t m = 0; m < missing.size(); ++m) {
      rows[missing[m]] = std::move(vecs[m]);
      if (cache_dir) {
        write_file(embedding_cache_path(*cache_dir, model, corpus[missing[m]].id),
                   nlohmann::json(rows[missing[m]]).dump());
      }
    }
  }
  std::vector<std::string> ids;
  for (const auto& d : corpus.documents()) ids.push_back(d.id);
  const std::size_t dim = rows.front().size();
  for (const auto& r : rows) {
    if (r.size() != dim) fail(ErrorKind::gateway, "embedding dimension changed within a run (stale cache?)");
  }
  return FeatureMatrix::from_rows(rows, FeatureKind::embedding, std::move(ids));
}

}  // namespace sstgen
