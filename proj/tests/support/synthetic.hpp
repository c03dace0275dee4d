#pragma once

// Test-only data generators and brute-force reference implementations. The
// references evaluate the textbook formulas directly (joint entropies,
// pairwise distance matrices) and share no code with the library.

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sstgen/vectorize.hpp"

namespace testsupport {

struct Synthetic {
  sstgen::FeatureMatrix x;
  std::vector<int> labels;
};

/// Isotropic Gaussian blobs: centers ~ N(0, spread^2 I), points ~ N(center, I).
/// Labels are generated round-robin so every blob has n / blobs points.
inline Synthetic gaussian_blobs(std::size_t n, std::size_t dim, int blobs, std::uint64_t seed, double spread = 6.0,
                                double sigma = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> centers(blobs, std::vector<double>(dim));
  for (auto& c : centers) {
    for (auto& v : c) v = spread * z(gen);
  }
  std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
  Synthetic s;
  for (std::size_t i = 0; i < n; ++i) {
    const int b = static_cast<int>(i % blobs);
    s.labels.push_back(b);
    for (std::size_t d = 0; d < dim; ++d) rows[i][d] = centers[b][d] + sigma * z(gen);
  }
  s.x = sstgen::FeatureMatrix::from_rows(rows);
  return s;
}

/// The acceptance data set: 6 blobs, n = 600, d = 16, seed 42.
inline Synthetic six_blobs() { return gaussian_blobs(600, 16, 6, 42); }

namespace oracle {

inline double entropy_from_counts(const std::map<int, double>& counts, double n) {
  double h = 0;
  for (const auto& [_, c] : counts) h -= (c / n) * std::log(c / n);
  return h;
}

inline double joint_entropy(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) joint[{a[i], b[i]}] += 1;
  const double n = static_cast<double>(a.size());
  double h = 0;
  for (const auto& [_, c] : joint) h -= (c / n) * std::log(c / n);
  return h;
}

inline double entropy(const std::vector<int>& a) {
  std::map<int, double> c;
  for (int v : a) c[v] += 1;
  return entropy_from_counts(c, static_cast<double>(a.size()));
}

/// H(C|K) = H(C,K) - H(K).
inline double homogeneity(const std::vector<int>& truth, const std::vector<int>& pred) {
  const double hc = entropy(truth);
  if (hc == 0) return 1.0;
  return 1.0 - (joint_entropy(truth, pred) - entropy(pred)) / hc;
}

/// I(U;V) = H(U) + H(V) - H(U,V).
inline double nmi(const std::vector<int>& u, const std::vector<int>& v) {
  const double hu = entropy(u), hv = entropy(v);
  if (hu == 0 || hv == 0) return 0.0;
  return (hu + hv - joint_entropy(u, v)) / ((hu + hv) / 2.0);
}

inline double silhouette(const std::vector<std::vector<double>>& pts, const std::vector<int>& lab) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t d = 0; d < pts[i].size(); ++d) s += (pts[i][d] - pts[j][d]) * (pts[i][d] - pts[j][d]);
      dist[i][j] = std::sqrt(s);
    }
  }
  std::set<int> clusters(lab.begin(), lab.end());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double a_sum = 0;
    int a_cnt = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && lab[j] == lab[i]) {
        a_sum += dist[i][j];
        ++a_cnt;
      }
    }
    if (a_cnt == 0) continue;
    const double a = a_sum / a_cnt;
    double b = 1e300;
    for (int c : clusters) {
      if (c == lab[i]) continue;
      double s = 0;
      int cnt = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (lab[j] == c) {
          s += dist[i][j];
          ++cnt;
        }
      }
      b = std::min(b, s / cnt);
    }
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / static_cast<double>(n);
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace oracle
}  // namespace testsupport
