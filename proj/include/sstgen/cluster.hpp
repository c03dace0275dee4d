#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sstgen/common.hpp"
#include "sstgen/vectorize.hpp"

namespace sstgen {

enum class ClusterAlgorithm { gmm, hierarchical, birch, bisecting_kmeans, random };

inline std::string to_string(ClusterAlgorithm a) {
  switch (a) {
    case ClusterAlgorithm::gmm: return "gmm";
    case ClusterAlgorithm::hierarchical: return "hierarchical";
    case ClusterAlgorithm::birch: return "birch";
    case ClusterAlgorithm::bisecting_kmeans: return "bisecting_kmeans";
    case ClusterAlgorithm::random: return "random";
  }
  return "?";
}

inline ClusterAlgorithm parse_algorithm(const std::string& s) {
  if (s == "gmm") return ClusterAlgorithm::gmm;
  if (s == "hierarchical" || s == "ward") return ClusterAlgorithm::hierarchical;
  if (s == "birch") return ClusterAlgorithm::birch;
  if (s == "bisecting_kmeans" || s == "bisecting") return ClusterAlgorithm::bisecting_kmeans;
  if (s == "random") return ClusterAlgorithm::random;
  fail(ErrorKind::invalid_input, "unknown clustering algorithm '" + s + "'");
}

struct Affinity {
  int cluster = 0;
  double score = 0.0;
};

struct ClusterModel {
  ClusterAlgorithm algorithm = ClusterAlgorithm::random;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<Affinity>> affinity;  // per point, best first
  std::vector<std::string> doc_ids;

  // Fit diagnostics.
  bool converged = true;
  int iterations = 0;
  std::vector<double> log_likelihood;  // GMM: mean per-sample log-likelihood after each M-step
  std::vector<int> reseeded_at;        // GMM: iterations where a degenerate component was reseeded
  std::vector<std::string> warnings;

  std::size_t size() const { return assignments.size(); }

  std::vector<std::size_t> members(int c) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == c) out.push_back(i);
    }
    return out;
  }

  nlohmann::json to_json(std::size_t affinity_depth = 5) const {
    nlohmann::json aff = nlohmann::json::array();
    for (const auto& a : affinity) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < std::min(affinity_depth, a.size()); ++j) row.push_back({a[j].cluster, a[j].score});
      aff.push_back(row);
    }
    return {{"algorithm", to_string(algorithm)}, {"k", k},           {"seed", seed},
            {"centers", centers},                {"assignments", assignments}, {"affinity", aff},
            {"doc_ids", doc_ids},                {"converged", converged},     {"iterations", iterations},
            {"warnings", warnings}};
  }

  static ClusterModel from_json(const nlohmann::json& j) {
    ClusterModel m;
    m.algorithm = parse_algorithm(j.at("algorithm"));
    m.k = j.at("k");
    m.seed = j.value("seed", std::uint64_t{0});
    m.centers = j.at("centers").get<std::vector<std::vector<double>>>();
    m.assignments = j.at("assignments").get<std::vector<int>>();
    for (const auto& row : j.at("affinity")) {
      std::vector<Affinity> a;
      for (const auto& e : row) a.push_back({e.at(0).get<int>(), e.at(1).get<double>()});
      m.affinity.push_back(std::move(a));
    }
    m.doc_ids = j.value("doc_ids", std::vector<std::string>{});
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", 0);
    m.warnings = j.value("warnings", std::vector<std::string>{});
    return m;
  }
};

/// The m most likely clusters for a point, best first.
inline std::vector<int> top_clusters(const ClusterModel& model, std::size_t doc, std::size_t m) {
  if (m > static_cast<std::size_t>(model.k)) fail(ErrorKind::invalid_input, "top_clusters: m exceeds k");
  const auto& a = model.affinity.at(doc);
  if (m > a.size()) fail(ErrorKind::invalid_input, "top_clusters: affinity list shorter than m");
  std::vector<int> out;
  for (std::size_t j = 0; j < m; ++j) out.push_back(a[j].cluster);
  return out;
}

namespace detail {

inline std::vector<std::vector<double>> means_of(const FeatureMatrix& x, const std::vector<int>& labels, int k) {
  std::vector<std::vector<double>> centers(k, std::vector<double>(x.dim(), 0.0));
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    auto& c = centers[labels[i]];
    for (std::size_t d = 0; d < r.size(); ++d) c[d] += r[d];
    ++counts[labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    for (auto& v : centers[c]) v /= static_cast<double>(counts[c]);
  }
  return centers;
}

/// Distance-based affinity: score = -euclidean(point, center), best first,
/// ties by lowest cluster id. The point's own cluster always ranks first; if
/// another center is strictly closer, the own cluster's score is raised to
/// tie the best competitor so the list stays non-increasing.
inline std::vector<std::vector<Affinity>> distance_affinity(const FeatureMatrix& x,
                                                            const std::vector<std::vector<double>>& centers,
                                                            const std::vector<int>& labels, std::size_t depth) {
  const int k = static_cast<int>(centers.size());
  depth = std::min<std::size_t>(depth, k);
  std::vector<std::vector<Affinity>> out(x.rows());
  std::vector<Affinity> all(k);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (int c = 0; c < k; ++c) all[c] = {c, -euclidean(x.row(i), centers[c])};
    const int own = labels[i];
    const double own_score = all[own].score;
    std::vector<Affinity> others;
    others.reserve(k - 1);
    for (int c = 0; c < k; ++c) {
      if (c != own) others.push_back(all[c]);
    }
    const std::size_t keep = depth - 1;
    std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(std::min(keep, others.size())),
                      others.end(), [](const Affinity& a, const Affinity& b) {
                        return a.score != b.score ? a.score > b.score : a.cluster < b.cluster;
                      });
    auto& row = out[i];
    row.reserve(depth);
    const double best_other = others.empty() ? own_score : others.front().score;
    row.push_back({own, std::max(own_score, best_other)});
    for (std::size_t j = 0; j < keep && j < others.size(); ++j) row.push_back(others[j]);
  }
  return out;
}

inline double sse_of(const FeatureMatrix& x, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  std::vector<double> mean(x.dim(), 0.0);
  for (auto i : idx) {
    auto r = x.row(i);
    for (std::size_t d = 0; d < r.size(); ++d) mean[d] += r[d];
  }
  for (auto& v : mean) v /= static_cast<double>(idx.size());
  double s = 0;
  for (auto i : idx) s += squared_distance(x.row(i), mean);
  return s;
}

/// k-means++ seeding over the rows listed in `idx`.
inline std::vector<std::vector<double>> kmeans_pp(const FeatureMatrix& x, const std::vector<std::size_t>& idx, int k,
                                                  Rng& rng) {
  std::vector<std::vector<double>> centers;
  const auto first = idx[uniform_index(rng, idx.size())];
  centers.emplace_back(x.row(first).begin(), x.row(first).end());
  std::vector<double> d2(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) d2[j] = squared_distance(x.row(idx[j]), centers[0]);
  while (static_cast<int>(centers.size()) < k) {
    double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total <= 0) {
      pick = uniform_index(rng, idx.size());
    } else {
      double target = uniform01(rng) * total, acc = 0;
      pick = idx.size() - 1;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        acc += d2[j];
        if (acc > target) {
          pick = j;
          break;
        }
      }
    }
    auto r = x.row(idx[pick]);
    centers.emplace_back(r.begin(), r.end());
    for (std::size_t j = 0; j < idx.size(); ++j) d2[j] = std::min(d2[j], squared_distance(x.row(idx[j]), centers.back()));
  }
  return centers;
}

inline int nearest_center(std::span<const double> p, const std::vector<std::vector<double>>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < static_cast<int>(centers.size()); ++c) {
    const double d = squared_distance(p, centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct LloydResult {
  std::vector<int> labels;  // aligned with idx
  std::vector<std::vector<double>> centers;
  double sse = 0;
  bool converged = false;
};

inline LloydResult lloyd(const FeatureMatrix& x, const std::vector<std::size_t>& idx,
                         std::vector<std::vector<double>> centers, int max_iter = 300) {
  LloydResult res;
  const int k = static_cast<int>(centers.size());
  res.labels.assign(idx.size(), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const int c = nearest_center(x.row(idx[j]), centers);
      if (c != res.labels[j]) {
        res.labels[j] = c;
        changed = true;
      }
    }
    if (!changed) {
      res.converged = true;
      break;
    }
    std::vector<std::vector<double>> next(k, std::vector<double>(x.dim(), 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      auto r = x.row(idx[j]);
      for (std::size_t d = 0; d < r.size(); ++d) next[res.labels[j]][d] += r[d];
      ++counts[res.labels[j]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        next[c] = centers[c];  // keep an empty center in place
        continue;
      }
      for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
    }
    centers = std::move(next);
  }
  res.centers = std::move(centers);
  for (std::size_t j = 0; j < idx.size(); ++j) res.sse += squared_distance(x.row(idx[j]), res.centers[res.labels[j]]);
  return res;
}

// Ward agglomeration by nearest-neighbour chain. Works on weighted
// centroids, so the same routine clusters raw points (weight 1) and BIRCH
// subclusters (weight = member count). Memory is O(n d).
struct WardMerge {
  std::size_t a_rep, b_rep;  // any original item from each side
  double cost;               // increase in within-cluster sum of squares
};

inline std::vector<int> ward_labels(const std::vector<std::vector<double>>& points, const std::vector<double>& weights,
                                    int k) {
  const std::size_t n = points.size();
  if (k < 1 || static_cast<std::size_t>(k) > n) fail(ErrorKind::invalid_input, "ward: need 1 <= k <= n");
  std::vector<std::vector<double>> centroid = points;
  std::vector<double> size = weights;
  std::vector<std::size_t> rep(n);
  std::iota(rep.begin(), rep.end(), 0);
  std::vector<char> active(n, 1);
  auto cost = [&](std::size_t a, std::size_t b) {
    return size[a] * size[b] / (size[a] + size[b]) * squared_distance(centroid[a], centroid[b]);
  };
  std::vector<WardMerge> merges;
  merges.reserve(n ? n - 1 : 0);
  std::vector<std::size_t> chain;
  std::size_t remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (active[i]) {
          chain.push_back(i);
          break;
        }
      }
    }
    const std::size_t top = chain.back();
    const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
    std::size_t best = n;
    double best_cost = std::numeric_limits<double>::infinity();
    if (prev != n) {
      best = prev;
      best_cost = cost(top, prev);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j] || j == top || j == prev) continue;
      const double c = cost(top, j);
      if (c < best_cost || (c == best_cost && best != prev && j < best)) {
        best_cost = c;
        best = j;
      }
    }
    if (best == prev) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t a = std::min(top, prev), b = std::max(top, prev);
      merges.push_back({rep[a], rep[b], best_cost});
      const double sa = size[a], sb = size[b];
      for (std::size_t d = 0; d < centroid[a].size(); ++d) {
        centroid[a][d] = (sa * centroid[a][d] + sb * centroid[b][d]) / (sa + sb);
      }
      size[a] = sa + sb;
      active[b] = 0;
      --remaining;
    } else {
      chain.push_back(best);
    }
  }
  // Replay the cheapest n-k merges in order of cost.
  std::vector<std::size_t> order(merges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return merges[a].cost < merges[b].cost; });
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t m = 0; m < n - static_cast<std::size_t>(k); ++m) {
    auto ra = find(merges[order[m]].a_rep), rb = find(merges[order[m]].b_rep);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  // Label components in order of their first item.
  std::vector<int> label_of_root(n, -1), labels(n);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = find(i);
    if (label_of_root[r] < 0) label_of_root[r] = next++;
    labels[i] = label_of_root[r];
  }
  return labels;
}

inline void require_fit_inputs(const FeatureMatrix& x, int k) {
  if (k < 1) fail(ErrorKind::invalid_input, "k must be positive");
  if (x.rows() < static_cast<std::size_t>(k)) {
    fail(ErrorKind::invalid_input, "k=" + std::to_string(k) + " exceeds the number of points (" +
                                       std::to_string(x.rows()) + ")");
  }
}

inline ClusterModel finish_hard_model(const FeatureMatrix& x, ClusterAlgorithm algo, int k, std::uint64_t seed,
                                      std::vector<int> labels, std::size_t depth,
                                      std::optional<std::vector<std::vector<double>>> centers = std::nullopt) {
  ClusterModel m;
  m.algorithm = algo;
  m.k = k;
  m.seed = seed;
  m.assignments = std::move(labels);
  m.centers = centers ? std::move(*centers) : means_of(x, m.assignments, k);
  m.affinity = distance_affinity(x, m.centers, m.assignments, depth);
  m.doc_ids = x.doc_ids;
  return m;
}

}  // namespace detail

inline constexpr std::size_t kDefaultAffinityDepth = 10;

// ---------------------------------------------------------------------------
// Gaussian mixture (diagonal covariance), EM

struct GmmConfig {
  double reg_covar = 1e-6;
  int max_iter = 200;
  double tol = 1e-4;  // on the change of mean per-sample log-likelihood
  std::size_t affinity_depth = kDefaultAffinityDepth;
};

namespace detail {

struct DiagGaussians {
  std::vector<std::vector<double>> means, vars;
  std::vector<double> weights;
};

// Returns mean per-sample log-likelihood and fills responsibilities (n x k).
inline double gmm_e_step(const FeatureMatrix& x, const DiagGaussians& g, std::vector<double>& resp) {
  const std::size_t n = x.rows(), k = g.weights.size(), dim = x.dim();
  std::vector<double> log_norm(k);
  std::vector<std::vector<double>> inv_var(k, std::vector<double>(dim));
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      s += std::log(2.0 * M_PI * g.vars[c][d]);
      inv_var[c][d] = 1.0 / g.vars[c][d];
    }
    log_norm[c] = std::log(g.weights[c]) - 0.5 * s;
  }
  resp.assign(n * k, 0.0);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double* lp = &resp[i * k];
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double q = 0;
      const auto& mu = g.means[c];
      const auto& iv = inv_var[c];
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = r[d] - mu[d];
        q += diff * diff * iv[d];
      }
      lp[c] = log_norm[c] - 0.5 * q;
      mx = std::max(mx, lp[c]);
    }
    double sum = 0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(lp[c] - mx);
    const double lse = mx + std::log(sum);
    total += lse;
    for (std::size_t c = 0; c < k; ++c) lp[c] = std::exp(lp[c] - lse);
  }
  return total / static_cast<double>(n);
}

// Returns the components whose responsibility mass vanished.
inline std::vector<std::size_t> gmm_m_step(const FeatureMatrix& x, const std::vector<double>& resp, std::size_t k,
                                           double reg_covar, DiagGaussians& g) {
  const std::size_t n = x.rows(), dim = x.dim();
  const double eps = 10 * std::numeric_limits<double>::epsilon();
  std::vector<double> nk(k, 0.0);
  g.means.assign(k, std::vector<double>(dim, 0.0));
  g.vars.assign(k, std::vector<double>(dim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double w = resp[i * k + c];
      if (w == 0) continue;
      nk[c] += w;
      auto& mu = g.means[c];
      for (std::size_t d = 0; d < dim; ++d) mu[d] += w * r[d];
    }
  }
  std::vector<std::size_t> degenerate;
  for (std::size_t c = 0; c < k; ++c) {
    if (nk[c] < 1e-8) degenerate.push_back(c);
    nk[c] += eps;
    for (auto& v : g.means[c]) v /= nk[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      const double w = resp[i * k + c];
      if (w == 0) continue;
      const auto& mu = g.means[c];
      auto& var = g.vars[c];
      for (std::size_t d = 0; d < dim; ++d) {
        const double diff = r[d] - mu[d];
        var[d] += w * diff * diff;
      }
    }
  }
  g.weights.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (auto& v : g.vars[c]) v = v / nk[c] + reg_covar;
    g.weights[c] = nk[c] / static_cast<double>(n);
  }
  return degenerate;
}

}  // namespace detail

inline ClusterModel fit_gmm(const FeatureMatrix& x, int k, const GmmConfig& cfg, std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::invalid_input, "fit_gmm: k must be >= 2");
  detail::require_fit_inputs(x, k);
  if (cfg.reg_covar < 1e-10) fail(ErrorKind::invalid_input, "fit_gmm: reg_covar must be >= 1e-10");
  const std::size_t n = x.rows();
  const auto uk = static_cast<std::size_t>(k);

  // k-means++ seeding refined by Lloyd, then hard responsibilities.
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  auto rng = make_rng(seed, 0x9a3);
  auto km = detail::lloyd(x, all, detail::kmeans_pp(x, all, k, rng));
  std::vector<double> resp(n * uk, 0.0);
  for (std::size_t i = 0; i < n; ++i) resp[i * uk + km.labels[i]] = 1.0;

  ClusterModel m;
  m.algorithm = ClusterAlgorithm::gmm;
  m.k = k;
  m.seed = seed;
  m.doc_ids = x.doc_ids;
  m.converged = false;

  detail::DiagGaussians g;
  auto reseed = [&](const std::vector<std::size_t>& degenerate, int iter) {
    if (degenerate.empty()) return;
    // Move each collapsed component onto the currently worst-explained point.
    std::vector<double> global_var(x.dim(), 0.0), global_mean(x.dim(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto r = x.row(i);
      for (std::size_t d = 0; d < r.size(); ++d) global_mean[d] += r[d] / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto r = x.row(i);
      for (std::size_t d = 0; d < r.size(); ++d) {
        global_var[d] += (r[d] - global_mean[d]) * (r[d] - global_mean[d]) / static_cast<double>(n);
      }
    }
    std::vector<char> used(n, 0);
    for (auto c : degenerate) {
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < uk; ++o) {
          if (std::find(degenerate.begin(), degenerate.end(), o) != degenerate.end()) continue;
          best = std::min(best, squared_distance(x.row(i), g.means[o]));
        }
        if (best > far_d) {
          far_d = best;
          far = i;
        }
      }
      used[far] = 1;
      g.means[c].assign(x.row(far).begin(), x.row(far).end());
      for (std::size_t d = 0; d < x.dim(); ++d) g.vars[c][d] = global_var[d] + cfg.reg_covar;
      g.weights[c] = 1.0 / static_cast<double>(n);
    }
    double wsum = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
    for (auto& w : g.weights) w /= wsum;
    m.reseeded_at.push_back(iter);
    m.warnings.push_back("reseeded degenerate component(s) at iteration " + std::to_string(iter));
  };

  reseed(detail::gmm_m_step(x, resp, uk, cfg.reg_covar, g), 0);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double ll = detail::gmm_e_step(x, g, resp);
    m.log_likelihood.push_back(ll);
    m.iterations = it;
    if (std::abs(ll - prev) < cfg.tol) {
      m.converged = true;
      break;
    }
    prev = ll;
    reseed(detail::gmm_m_step(x, resp, uk, cfg.reg_covar, g), it);
  }
  if (!m.converged) {
    m.warnings.push_back("EM did not converge within " + std::to_string(cfg.max_iter) + " iterations");
  }
  // The last E-step holds posteriors for the final parameters.
  m.centers = g.means;
  m.assignments.resize(n);
  m.affinity.resize(n);
  const std::size_t depth = std::min(cfg.affinity_depth, uk);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Affinity> row(uk);
    for (std::size_t c = 0; c < uk; ++c) row[c] = {static_cast<int>(c), resp[i * uk + c]};
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(depth), row.end(),
                      [](const Affinity& a, const Affinity& b) {
                        return a.score != b.score ? a.score > b.score : a.cluster < b.cluster;
                      });
    row.resize(depth);
    m.assignments[i] = row.front().cluster;
    m.affinity[i] = std::move(row);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Agglomerative, Ward linkage

inline ClusterModel fit_hierarchical(const FeatureMatrix& x, int k, std::size_t affinity_depth = kDefaultAffinityDepth) {
  detail::require_fit_inputs(x, k);
  std::vector<std::vector<double>> pts(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) pts[i].assign(x.row(i).begin(), x.row(i).end());
  auto labels = detail::ward_labels(pts, std::vector<double>(x.rows(), 1.0), k);
  return detail::finish_hard_model(x, ClusterAlgorithm::hierarchical, k, 0, std::move(labels), affinity_depth);
}

// ---------------------------------------------------------------------------
// BIRCH

struct BirchConfig {
  std::size_t branching = 50;
  double threshold = 0.5;
  bool normalize = true;  // L2-normalize rows before building the tree
  std::size_t affinity_depth = kDefaultAffinityDepth;
};

namespace detail {

struct ClusteringFeature {
  double n = 0;
  std::vector<double> ls;
  double ss = 0;

  void add(std::span<const double> p) {
    if (ls.empty()) ls.assign(p.size(), 0.0);
    n += 1;
    for (std::size_t d = 0; d < p.size(); ++d) ls[d] += p[d];
    ss += dot(p, p);
  }
  void merge(const ClusteringFeature& o) {
    if (ls.empty()) ls.assign(o.ls.size(), 0.0);
    n += o.n;
    for (std::size_t d = 0; d < ls.size(); ++d) ls[d] += o.ls[d];
    ss += o.ss;
  }
  std::vector<double> centroid() const {
    std::vector<double> c(ls);
    for (auto& v : c) v /= n;
    return c;
  }
  // Radius after absorbing p.
  double radius_with(std::span<const double> p) const {
    const double m = n + 1;
    double ls2 = 0;
    for (std::size_t d = 0; d < p.size(); ++d) {
      const double v = (ls.empty() ? 0.0 : ls[d]) + p[d];
      ls2 += v * v;
    }
    const double r2 = (ss + dot(p, p)) / m - ls2 / (m * m);
    return std::sqrt(std::max(0.0, r2));
  }
};

struct BirchNode {
  bool leaf = true;
  std::vector<ClusteringFeature> cf;
  std::vector<std::unique_ptr<BirchNode>> child;  // parallel to cf for inner nodes
};

class BirchTree {
 public:
  BirchTree(std::size_t branching, double threshold) : branching_(branching), threshold_(threshold) {
    root_ = std::make_unique<BirchNode>();
  }

  void insert(std::span<const double> p) {
    auto split = insert_into(*root_, p);
    if (split) {
      auto new_root = std::make_unique<BirchNode>();
      new_root->leaf = false;
      for (auto* half : {&split->first, &split->second}) {
        new_root->cf.push_back(summary(**half));
        new_root->child.push_back(std::move(*half));
      }
      root_ = std::move(new_root);
    }
  }

  /// Leaf subclusters, left to right.
  std::vector<ClusteringFeature> leaves() const {
    std::vector<ClusteringFeature> out;
    collect(*root_, out);
    return out;
  }

 private:
  using Split = std::pair<std::unique_ptr<BirchNode>, std::unique_ptr<BirchNode>>;

  static ClusteringFeature summary(const BirchNode& node) {
    ClusteringFeature s;
    for (const auto& c : node.cf) s.merge(c);
    return s;
  }

  static std::size_t closest(const BirchNode& node, std::span<const double> p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < node.cf.size(); ++e) {
      const double d = squared_distance(p, node.cf[e].centroid());
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    return best;
  }

  std::optional<Split> insert_into(BirchNode& node, std::span<const double> p) {
    if (node.leaf) {
      if (!node.cf.empty()) {
        auto e = closest(node, p);
        if (node.cf[e].radius_with(p) <= threshold_) {
          node.cf[e].add(p);
          return std::nullopt;
        }
      }
      ClusteringFeature fresh;
      fresh.add(p);
      node.cf.push_back(std::move(fresh));
    } else {
      auto e = closest(node, p);
      auto split = insert_into(*node.child[e], p);
      if (!split) {
        node.cf[e].add(p);
      } else {
        node.cf[e] = summary(*split->first);
        node.child[e] = std::move(split->first);
        node.cf.insert(node.cf.begin() + static_cast<std::ptrdiff_t>(e) + 1, summary(*split->second));
        node.child.insert(node.child.begin() + static_cast<std::ptrdiff_t>(e) + 1, std::move(split->second));
      }
    }
    if (node.cf.size() <= branching_) return std::nullopt;
    return split_node(node);
  }

  // Seeds are the two entries with the farthest centroids; the rest join the
  // nearer seed.
  static Split split_node(BirchNode& node) {
    const std::size_t m = node.cf.size();
    std::vector<std::vector<double>> cent(m);
    for (std::size_t e = 0; e < m; ++e) cent[e] = node.cf[e].centroid();
    std::size_t s1 = 0, s2 = 1;
    double far = -1;
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) {
        const double d = squared_distance(cent[a], cent[b]);
        if (d > far) {
          far = d;
          s1 = a;
          s2 = b;
        }
      }
    }
    auto left = std::make_unique<BirchNode>(), right = std::make_unique<BirchNode>();
    left->leaf = right->leaf = node.leaf;
    for (std::size_t e = 0; e < m; ++e) {
      const bool to_left = e == s1 || (e != s2 && squared_distance(cent[e], cent[s1]) <= squared_distance(cent[e], cent[s2]));
      auto& dst = to_left ? *left : *right;
      dst.cf.push_back(std::move(node.cf[e]));
      if (!node.leaf) dst.child.push_back(std::move(node.child[e]));
    }
    return {std::move(left), std::move(right)};
  }

  static void collect(const BirchNode& node, std::vector<ClusteringFeature>& out) {
    if (node.leaf) {
      out.insert(out.end(), node.cf.begin(), node.cf.end());
      return;
    }
    for (const auto& c : node.child) collect(*c, out);
  }

  std::size_t branching_;
  double threshold_;
  std::unique_ptr<BirchNode> root_;
};

}  // namespace detail

inline ClusterModel fit_birch(const FeatureMatrix& input, int k, const BirchConfig& cfg) {
  if (!(cfg.threshold > 0)) fail(ErrorKind::invalid_input, "fit_birch: threshold must be > 0");
  if (cfg.branching < 2) fail(ErrorKind::invalid_input, "fit_birch: branching must be >= 2");
  detail::require_fit_inputs(input, k);
  FeatureMatrix x = input;
  if (cfg.normalize) x.l2_normalize_rows();

  detail::BirchTree tree(cfg.branching, cfg.threshold);
  for (std::size_t i = 0; i < x.rows(); ++i) tree.insert(x.row(i));
  auto leaves = tree.leaves();
  if (leaves.size() < static_cast<std::size_t>(k)) {
    fail(ErrorKind::invalid_input, "fit_birch: only " + std::to_string(leaves.size()) +
                                       " subcluster(s) for k=" + std::to_string(k) + "; lower the threshold");
  }
  std::vector<std::vector<double>> cents(leaves.size());
  std::vector<double> weights(leaves.size());
  for (std::size_t s = 0; s < leaves.size(); ++s) {
    cents[s] = leaves[s].centroid();
    weights[s] = leaves[s].n;
  }
  auto sub_label = detail::ward_labels(cents, weights, k);
  std::vector<int> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) labels[i] = sub_label[detail::nearest_center(x.row(i), cents)];

  // Centers in the caller's feature space; a global cluster that received no
  // point keeps the weighted centroid of its subclusters.
  auto centers = detail::means_of(input, labels, k);
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[l];
  for (int c = 0; c < k; ++c) {
    if (counts[c]) continue;
    std::vector<double> acc(x.dim(), 0.0);
    double w = 0;
    for (std::size_t s = 0; s < leaves.size(); ++s) {
      if (sub_label[s] != c) continue;
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += leaves[s].ls[d];
      w += leaves[s].n;
    }
    for (auto& v : acc) v /= w;
    centers[c] = acc;
  }
  auto m = detail::finish_hard_model(input, ClusterAlgorithm::birch, k, 0, std::move(labels), cfg.affinity_depth,
                                     std::move(centers));
  if (!counts.empty() && std::count(counts.begin(), counts.end(), 0)) {
    m.warnings.push_back("some BIRCH clusters received no points");
  }
  return m;
}

// ---------------------------------------------------------------------------
// k-means and bisecting k-means

/// Plain k-means (k-means++ seeding, Lloyd iterations).
inline ClusterModel kmeans(const FeatureMatrix& x, int k, std::uint64_t seed,
                           std::size_t affinity_depth = kDefaultAffinityDepth) {
  detail::require_fit_inputs(x, k);
  std::vector<std::size_t> all(x.rows());
  std::iota(all.begin(), all.end(), 0);
  auto rng = make_rng(seed, 0);
  auto res = detail::lloyd(x, all, detail::kmeans_pp(x, all, k, rng));
  auto m = detail::finish_hard_model(x, ClusterAlgorithm::bisecting_kmeans, k, seed, res.labels, affinity_depth);
  m.converged = res.converged;
  return m;
}

inline ClusterModel fit_bisecting_kmeans(const FeatureMatrix& x, int k, std::uint64_t seed,
                                         std::size_t affinity_depth = kDefaultAffinityDepth) {
  if (k < 2) fail(ErrorKind::invalid_input, "fit_bisecting_kmeans: k must be >= 2");
  detail::require_fit_inputs(x, k);
  std::vector<std::vector<std::size_t>> clusters(1);
  clusters[0].resize(x.rows());
  std::iota(clusters[0].begin(), clusters[0].end(), 0);
  std::vector<double> sse{detail::sse_of(x, clusters[0])};
  constexpr int kMaxAttempts = 5;
  for (int split_no = 0; static_cast<int>(clusters.size()) < k; ++split_no) {
    std::size_t target = clusters.size();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (clusters[c].size() < 2) continue;
      if (target == clusters.size() || sse[c] > sse[target]) target = c;
    }
    if (target == clusters.size()) fail(ErrorKind::invalid_input, "fit_bisecting_kmeans: no splittable cluster left");
    const auto& idx = clusters[target];
    detail::LloydResult res;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      auto rng = make_rng(seed, static_cast<std::uint64_t>(split_no) * kMaxAttempts + attempt);
      res = detail::lloyd(x, idx, detail::kmeans_pp(x, idx, 2, rng));
      ok = std::count(res.labels.begin(), res.labels.end(), 0) > 0 && std::count(res.labels.begin(), res.labels.end(), 1) > 0;
    }
    if (!ok) fail(ErrorKind::internal, "fit_bisecting_kmeans: empty split after retries");
    std::vector<std::size_t> left, right;
    for (std::size_t j = 0; j < idx.size(); ++j) (res.labels[j] == 0 ? left : right).push_back(idx[j]);
    clusters[target] = std::move(left);
    sse[target] = detail::sse_of(x, clusters[target]);
    clusters.push_back(std::move(right));
    sse.push_back(detail::sse_of(x, clusters.back()));
  }
  std::vector<int> labels(x.rows());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto i : clusters[c]) labels[i] = static_cast<int>(c);
  }
  return detail::finish_hard_model(x, ClusterAlgorithm::bisecting_kmeans, k, seed, std::move(labels), affinity_depth);
}

/// Sum of squared distances to each point's cluster mean.
inline double within_cluster_sse(const FeatureMatrix& x, const std::vector<int>& labels, int k) {
  auto centers = detail::means_of(x, labels, k);
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += squared_distance(x.row(i), centers[labels[i]]);
  return s;
}

// ---------------------------------------------------------------------------
// random baseline

/// Uniform random labels. A seeded permutation gives each cluster one point
/// first so no cluster is empty; the rest are iid uniform.
inline std::vector<int> random_labels(std::size_t n, int k, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > n) fail(ErrorKind::invalid_input, "random_assignment: need 1 <= k <= n");
  auto rng = make_rng(seed, 0x7a9d);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<int> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    labels[order[r]] = r < static_cast<std::size_t>(k) ? static_cast<int>(r) : static_cast<int>(uniform_index(rng, k));
  }
  return labels;
}

inline ClusterModel random_assignment(const FeatureMatrix& x, int k, std::uint64_t seed,
                                      std::size_t affinity_depth = kDefaultAffinityDepth) {
  auto m = detail::finish_hard_model(x, ClusterAlgorithm::random, k, seed, random_labels(x.rows(), k, seed),
                                     affinity_depth);
  return m;
}

// ---------------------------------------------------------------------------

struct ClusterSpec {
  ClusterAlgorithm algorithm = ClusterAlgorithm::gmm;
  int k = 8;
  std::uint64_t seed = 42;
  GmmConfig gmm;
  BirchConfig birch;
};

inline ClusterModel fit_clusters(const FeatureMatrix& x, const ClusterSpec& spec) {
  switch (spec.algorithm) {
    case ClusterAlgorithm::gmm: return fit_gmm(x, spec.k, spec.gmm, spec.seed);
    case ClusterAlgorithm::hierarchical: return fit_hierarchical(x, spec.k);
    case ClusterAlgorithm::birch: return fit_birch(x, spec.k, spec.birch);
    case ClusterAlgorithm::bisecting_kmeans: return fit_bisecting_kmeans(x, spec.k, spec.seed);
    case ClusterAlgorithm::random: return random_assignment(x, spec.k, spec.seed);
  }
  fail(ErrorKind::internal, "unreachable");
}

}  // namespace sstgen
