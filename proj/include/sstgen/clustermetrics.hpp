#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sstgen/cluster.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/vectorize.hpp"

namespace sstgen {

namespace detail {

// Remaps arbitrary integer ids to 0..m-1 in order of first appearance.
inline std::vector<int> compact_ids(const std::vector<int>& v, int* count = nullptr) {
  std::map<int, int> ids;
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = ids.emplace(v[i], static_cast<int>(ids.size())).first->second;
  if (count) *count = static_cast<int>(ids.size());
  return out;
}

struct Contingency {
  std::size_t n = 0;
  std::vector<std::vector<double>> table;  // rows: u classes, cols: v classes
  std::vector<double> row_sum, col_sum;
};

inline Contingency contingency(const std::vector<int>& u, const std::vector<int>& v) {
  if (u.size() != v.size()) fail(ErrorKind::invalid_input, "label vectors differ in length");
  int nu = 0, nv = 0;
  auto cu = compact_ids(u, &nu), cv = compact_ids(v, &nv);
  Contingency c;
  c.n = u.size();
  c.table.assign(nu, std::vector<double>(nv, 0.0));
  c.row_sum.assign(nu, 0.0);
  c.col_sum.assign(nv, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    c.table[cu[i]][cv[i]] += 1;
    c.row_sum[cu[i]] += 1;
    c.col_sum[cv[i]] += 1;
  }
  return c;
}

inline double entropy_of(const std::vector<double>& counts, double n) {
  double h = 0;
  for (double c : counts) {
    if (c > 0) h -= c / n * std::log(c / n);
  }
  return h;
}

}  // namespace detail

/// 1 - H(true | pred) / H(true), natural logs. 1.0 when H(true) = 0.
inline double homogeneity(const std::vector<int>& true_labels, const std::vector<int>& pred) {
  if (true_labels.empty()) fail(ErrorKind::invalid_input, "homogeneity needs at least one point");
  auto c = detail::contingency(true_labels, pred);
  const double n = static_cast<double>(c.n);
  const double h_true = detail::entropy_of(c.row_sum, n);
  if (h_true == 0) return 1.0;
  double h_cond = 0;
  for (std::size_t t = 0; t < c.table.size(); ++t) {
    for (std::size_t k = 0; k < c.col_sum.size(); ++k) {
      const double nt = c.table[t][k];
      if (nt > 0) h_cond -= nt / n * std::log(nt / c.col_sum[k]);
    }
  }
  return std::clamp(1.0 - h_cond / h_true, 0.0, 1.0);
}

/// Mutual information over the arithmetic mean of the two entropies.
/// Returns 0 if either labeling is constant.
inline double nmi(const std::vector<int>& u, const std::vector<int>& v) {
  if (u.empty()) fail(ErrorKind::invalid_input, "nmi needs at least one point");
  auto c = detail::contingency(u, v);
  const double n = static_cast<double>(c.n);
  const double hu = detail::entropy_of(c.row_sum, n), hv = detail::entropy_of(c.col_sum, n);
  if (hu == 0 || hv == 0) return 0.0;
  double mi = 0;
  for (std::size_t a = 0; a < c.table.size(); ++a) {
    for (std::size_t b = 0; b < c.col_sum.size(); ++b) {
      const double nab = c.table[a][b];
      if (nab > 0) mi += nab / n * std::log(n * nab / (c.row_sum[a] * c.col_sum[b]));
    }
  }
  return std::clamp(mi / ((hu + hv) / 2.0), 0.0, 1.0);
}

struct SilhouettePoint {
  double a = 0, b = 0, s = 0;
};

/// Per-point silhouette for the listed points (all points when empty),
/// distances taken against the full data set.
inline std::vector<SilhouettePoint> silhouette_points(const FeatureMatrix& x, const std::vector<int>& assignments,
                                                      const std::vector<std::size_t>& which = {}) {
  if (assignments.size() != x.rows()) fail(ErrorKind::invalid_input, "silhouette: assignment count differs from rows");
  int k = 0;
  auto labels = detail::compact_ids(assignments, &k);
  if (k < 2) fail(ErrorKind::invalid_input, "silhouette needs at least two clusters");
  std::vector<double> size(k, 0.0);
  for (int l : labels) size[l] += 1;
  std::vector<std::size_t> pts = which;
  if (pts.empty()) {
    pts.resize(x.rows());
    std::iota(pts.begin(), pts.end(), 0);
  }
  std::vector<SilhouettePoint> out(pts.size());
  std::vector<double> sum(k);
  for (std::size_t p = 0; p < pts.size(); ++p) {
    const auto i = pts[p];
    std::fill(sum.begin(), sum.end(), 0.0);
    for (std::size_t j = 0; j < x.rows(); ++j) {
      if (j != i) sum[labels[j]] += euclidean(x.row(i), x.row(j));
    }
    const int own = labels[i];
    auto& sp = out[p];
    if (size[own] <= 1) continue;  // singleton convention: s = 0
    sp.a = sum[own] / (size[own] - 1);
    sp.b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c != own) sp.b = std::min(sp.b, sum[c] / size[c]);
    }
    const double m = std::max(sp.a, sp.b);
    sp.s = m > 0 ? (sp.b - sp.a) / m : 0.0;
  }
  return out;
}

/// Mean silhouette. With `sample_size` below n, averages over a seeded
/// uniform sample of points.
inline double silhouette(const FeatureMatrix& x, const std::vector<int>& assignments,
                         std::optional<std::size_t> sample_size = std::nullopt, std::uint64_t seed = 0) {
  std::vector<std::size_t> which;
  if (sample_size && *sample_size < x.rows()) {
    if (*sample_size == 0) fail(ErrorKind::invalid_input, "silhouette sample_size must be positive");
    auto rng = make_rng(seed, 0x5117);
    which = sample_without_replacement(x.rows(), *sample_size, rng);
    std::sort(which.begin(), which.end());
  }
  auto pts = silhouette_points(x, assignments, which);
  double s = 0;
  for (const auto& p : pts) s += p.s;
  return s / static_cast<double>(pts.size());
}

/// Default silhouette sample for large inputs.
inline std::optional<std::size_t> default_silhouette_sample(std::size_t n) {
  if (n > 10000) return 2000;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// sweep reports

struct ClusterQualityReport {
  std::string feature_kind;
  std::string algorithm;
  int k = 0;
  std::uint64_t seed = 0;
  double homogeneity = 0, nmi = 0, silhouette = 0;
};

inline nlohmann::json to_json(const ClusterQualityReport& r) {
  return {{"feature", r.feature_kind}, {"algorithm", r.algorithm}, {"k", r.k},
          {"seed", r.seed},            {"homogeneity", r.homogeneity}, {"nmi", r.nmi},
          {"silhouette", r.silhouette}};
}

/// Integer class per document from its first (primary) gold label.
inline std::vector<int> primary_label_ids(const Corpus& corpus, const std::vector<std::size_t>& indices) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& labels = corpus[i].gold_labels;
    if (labels.empty()) fail(ErrorKind::invalid_input, "document '" + corpus[i].id + "' has no gold label");
    out.push_back(ids.emplace(labels.front(), static_cast<int>(ids.size())).first->second);
  }
  return out;
}

struct SweepInput {
  std::string feature_kind;
  const FeatureMatrix* features = nullptr;
};

/// Fits every (features, algorithm, k, seed) combination and scores it.
/// The random baseline is added for every k even when not requested.
inline std::vector<ClusterQualityReport> sweep(const std::vector<SweepInput>& inputs, const std::vector<int>& truth,
                                               std::vector<ClusterAlgorithm> algorithms, const std::vector<int>& ks,
                                               const std::vector<std::uint64_t>& seeds, const ClusterSpec& base = {}) {
  if (std::find(algorithms.begin(), algorithms.end(), ClusterAlgorithm::random) == algorithms.end()) {
    algorithms.push_back(ClusterAlgorithm::random);
  }
  std::vector<ClusterQualityReport> out;
  for (const auto& in : inputs) {
    if (in.features->rows() != truth.size()) fail(ErrorKind::invalid_input, "sweep: label count differs from rows");
    const auto sample = default_silhouette_sample(in.features->rows());
    for (auto algo : algorithms) {
      for (int k : ks) {
        for (auto seed : seeds) {
          ClusterSpec spec = base;
          spec.algorithm = algo;
          spec.k = k;
          spec.seed = seed;
          auto model = fit_clusters(*in.features, spec);
          ClusterQualityReport r;
          r.feature_kind = in.feature_kind;
          r.algorithm = to_string(algo);
          r.k = k;
          r.seed = seed;
          r.homogeneity = homogeneity(truth, model.assignments);
          r.nmi = nmi(truth, model.assignments);
          r.silhouette = silhouette(*in.features, model.assignments, sample, seed);
          out.push_back(r);
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.feature_kind, a.algorithm, a.k, a.seed) < std::tie(b.feature_kind, b.algorithm, b.k, b.seed);
  });
  return out;
}

inline std::string fmt_fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string sweep_csv(const std::vector<ClusterQualityReport>& rows) {
  std::string out = "feature,algorithm,k,seed,homogeneity,nmi,silhouette\n";
  for (const auto& r : rows) {
    out += r.feature_kind + "," + r.algorithm + "," + std::to_string(r.k) + "," + std::to_string(r.seed) + "," +
           fmt_fixed(r.homogeneity, 6) + "," + fmt_fixed(r.nmi, 6) + "," + fmt_fixed(r.silhouette, 6) + "\n";
  }
  return out;
}

inline std::string sweep_markdown(const std::vector<ClusterQualityReport>& rows) {
  std::string out = "| Feature | Algorithm | k | Seed | Homogeneity | NMI | Silhouette |\n|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out += "| " + r.feature_kind + " | " + r.algorithm + " | " + std::to_string(r.k) + " | " + std::to_string(r.seed) +
           " | " + fmt_fixed(r.homogeneity) + " | " + fmt_fixed(r.nmi) + " | " + fmt_fixed(r.silhouette) + " |\n";
  }
  return out;
}

}  // namespace sstgen
