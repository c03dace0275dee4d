#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "sstgen/cluster.hpp"
#include "sstgen/clustermetrics.hpp"
#include "support/synthetic.hpp"

using namespace sstgen;
namespace oracle = testsupport::oracle;

namespace {

FeatureMatrix points_1d(const std::vector<double>& xs) {
  std::vector<std::vector<double>> rows;
  for (double v : xs) rows.push_back({v});
  return FeatureMatrix::from_rows(rows);
}

void expect_model_invariants(const ClusterModel& m, std::size_t n) {
  ASSERT_EQ(m.assignments.size(), n);
  ASSERT_EQ(m.affinity.size(), n);
  EXPECT_EQ(m.centers.size(), static_cast<std::size_t>(m.k));
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_GE(m.assignments[i], 0);
    EXPECT_LT(m.assignments[i], m.k);
    EXPECT_GE(m.affinity[i].size(), std::min<std::size_t>(5, m.k));
    EXPECT_EQ(m.assignments[i], m.affinity[i][0].cluster);
    EXPECT_EQ(top_clusters(m, i, 1)[0], m.assignments[i]);
    for (std::size_t j = 1; j < m.affinity[i].size(); ++j) EXPECT_GE(m.affinity[i][j - 1].score, m.affinity[i][j].score);
  }
}

testsupport::Synthetic two_blobs_2d(std::uint64_t seed) {
  // sigma 0.1, centers 10 apart
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z(0, 0.1);
  std::vector<std::vector<double>> rows;
  testsupport::Synthetic s;
  for (int i = 0; i < 100; ++i) {
    const int b = i % 2;
    rows.push_back({b * 10.0 + z(g), z(g)});
    s.labels.push_back(b);
  }
  s.x = FeatureMatrix::from_rows(rows);
  return s;
}

}  // namespace

// --- metrics ---------------------------------------------------------------

TEST(Homogeneity, WorkedExamples) {
  EXPECT_DOUBLE_EQ(homogeneity({0, 1, 2, 2}, {0, 1, 2, 2}), 1.0);
  EXPECT_NEAR(homogeneity({0, 0, 1, 1}, {0, 1, 0, 1}), 0.0, 1e-12);
  EXPECT_NEAR(homogeneity({0, 0, 0, 1}, {0, 0, 1, 1}), 0.3837, 1e-4);
  EXPECT_DOUBLE_EQ(homogeneity({3, 3, 3}, {0, 1, 2}), 1.0);  // H(true) = 0
  EXPECT_THROW(homogeneity({0, 1}, {0}), Error);
}

TEST(Homogeneity, InvariantUnderRelabeling) {
  std::vector<int> t{0, 0, 1, 1, 2, 2, 2}, p{0, 1, 1, 2, 2, 0, 2}, q;
  for (int v : p) q.push_back((v + 7) * 3);
  EXPECT_NEAR(homogeneity(t, p), homogeneity(t, q), 1e-15);
}

TEST(Nmi, WorkedExamples) {
  EXPECT_NEAR(nmi({0, 0, 1, 1}, {0, 0, 1, 1}), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(nmi({0, 0, 0, 0}, {0, 0, 1, 1}), 0.0);
  const std::vector<int> u{0, 0, 1, 1}, v{0, 0, 1, 2};
  EXPECT_NEAR(nmi(u, v), oracle::nmi(u, v), 1e-12);
  // H(U) = ln 2, H(V) = 1.5 ln 2, I = ln 2
  EXPECT_NEAR(nmi(u, v), 1.0 / 1.25, 1e-12);
  EXPECT_NEAR(nmi(u, v), nmi(v, u), 1e-12);
}

TEST(Silhouette, WorkedExamples) {
  auto x = points_1d({0, 1, 10, 11});
  auto pts = silhouette_points(x, {0, 0, 1, 1});
  EXPECT_NEAR(pts[0].a, 1.0, 1e-12);
  EXPECT_NEAR(pts[0].b, 10.5, 1e-12);
  EXPECT_NEAR(pts[0].s, 0.9048, 1e-4);
  // singleton gets zero
  auto x2 = points_1d({0, 1, 5});
  EXPECT_DOUBLE_EQ(silhouette_points(x2, {0, 0, 1})[2].s, 0.0);
  EXPECT_THROW(silhouette(x, {0, 0, 0, 0}), Error);
}

TEST(Silhouette, CoincidentCloudsNonPositive) {
  auto x = points_1d({0, 1, 2, 0, 1, 2});
  EXPECT_LE(silhouette(x, {0, 0, 0, 1, 1, 1}), 1e-12);
}

TEST(Silhouette, FullSampleEqualsUnsampled) {
  auto s = testsupport::gaussian_blobs(60, 3, 3, 5);
  const double full = silhouette(s.x, s.labels);
  EXPECT_EQ(silhouette(s.x, s.labels, 60, 9), full);
  const double sampled = silhouette(s.x, s.labels, 20, 9);
  EXPECT_NEAR(sampled, full, 0.2);
}

TEST(Metrics, MatchOracleOnRandomInstances) {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + g() % 40;
    const int ka = 1 + g() % 6, kb = 2 + g() % 6;
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(g() % ka);
    for (auto& v : b) v = static_cast<int>(g() % kb);
    EXPECT_NEAR(homogeneity(a, b), oracle::homogeneity(a, b), 1e-9);
    EXPECT_NEAR(nmi(a, b), oracle::nmi(a, b), 1e-9);
    if (std::set<int>(b.begin(), b.end()).size() >= 2) {
      std::vector<std::vector<double>> rows(n, std::vector<double>(2));
      for (auto& r : rows) {
        for (auto& v : r) v = static_cast<double>(g() % 1000) / 100.0;
      }
      EXPECT_NEAR(silhouette(FeatureMatrix::from_rows(rows), b), oracle::silhouette(rows, b), 1e-9);
    }
  }
}

// --- clustering ------------------------------------------------------------

TEST(Gmm, SeparableBlobsArePure) {
  auto s = two_blobs_2d(1);
  auto m = fit_gmm(s.x, 2, {}, 3);
  expect_model_invariants(m, s.x.rows());
  EXPECT_DOUBLE_EQ(homogeneity(s.labels, m.assignments), 1.0);
}

TEST(Gmm, ResponsibilitiesSumToOne) {
  auto s = testsupport::gaussian_blobs(90, 4, 3, 11, 1.5);
  GmmConfig cfg;
  cfg.affinity_depth = 3;
  auto m = fit_gmm(s.x, 3, cfg, 5);
  for (const auto& row : m.affinity) {
    double sum = 0;
    for (const auto& a : row) sum += a.score;
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(Gmm, LogLikelihoodMonotone) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = testsupport::gaussian_blobs(120, 5, 4, seed, 1.0);
    auto m = fit_gmm(s.x, 4, {}, seed);
    for (std::size_t t = 1; t < m.log_likelihood.size(); ++t) {
      EXPECT_GE(m.log_likelihood[t], m.log_likelihood[t - 1] - 1e-8) << "seed " << seed << " iter " << t;
    }
  }
}

TEST(Gmm, NonConvergenceIsFlagged) {
  auto s = testsupport::gaussian_blobs(120, 5, 4, 2, 0.5);
  GmmConfig cfg;
  cfg.max_iter = 1;
  cfg.tol = 1e-12;
  auto m = fit_gmm(s.x, 4, cfg, 1);
  EXPECT_FALSE(m.converged);
  EXPECT_FALSE(m.warnings.empty());
  expect_model_invariants(m, s.x.rows());
}

TEST(Gmm, RejectsBadInput) {
  auto x = points_1d({0, 1, 2});
  EXPECT_THROW(fit_gmm(x, 1, {}, 0), Error);
  EXPECT_THROW(fit_gmm(x, 4, {}, 0), Error);
  GmmConfig bad;
  bad.reg_covar = 0;
  EXPECT_THROW(fit_gmm(x, 2, bad, 0), Error);
}

TEST(Gmm, DuplicatePointsDoNotBreakFit) {
  auto x = points_1d({1, 1, 1, 1, 1, 1, 5});
  auto m = fit_gmm(x, 3, {}, 0);
  expect_model_invariants(m, 7);
  for (const auto& c : m.centers) {
    for (double v : c) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Hierarchical, ChainExample) {
  auto m = fit_hierarchical(points_1d({0, 1, 10, 11}), 2);
  EXPECT_EQ(m.assignments, (std::vector<int>{0, 0, 1, 1}));
  expect_model_invariants(m, 4);
}

TEST(Hierarchical, NEqualsKGivesSingletons) {
  auto m = fit_hierarchical(points_1d({3, 1, 4, 1.5}), 4);
  EXPECT_EQ(std::set<int>(m.assignments.begin(), m.assignments.end()).size(), 4u);
  EXPECT_DOUBLE_EQ(silhouette_points(points_1d({3, 1, 4, 1.5}), m.assignments)[0].s, 0.0);
  EXPECT_THROW(fit_hierarchical(points_1d({1, 2}), 3), Error);
}

TEST(Hierarchical, MatchesNaiveWardOnSmallInputs) {
  // Naive O(n^3) Ward over explicit member lists.
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + g() % 10;
    std::vector<std::vector<double>> rows(n, std::vector<double>(2));
    for (auto& r : rows) {
      for (auto& v : r) v = static_cast<double>(g() % 10000) / 100.0;
    }
    const int k = 2 + static_cast<int>(g() % 3);
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < n; ++i) groups.push_back({i});
    auto mean = [&](const std::vector<std::size_t>& gr) {
      std::vector<double> m(2, 0.0);
      for (auto i : gr) {
        m[0] += rows[i][0] / gr.size();
        m[1] += rows[i][1] / gr.size();
      }
      return m;
    };
    auto sse = [&](const std::vector<std::size_t>& gr) {
      auto m = mean(gr);
      double s = 0;
      for (auto i : gr) s += (rows[i][0] - m[0]) * (rows[i][0] - m[0]) + (rows[i][1] - m[1]) * (rows[i][1] - m[1]);
      return s;
    };
    while (static_cast<int>(groups.size()) > k) {
      double best = 1e300;
      std::size_t ba = 0, bb = 0;
      for (std::size_t a = 0; a < groups.size(); ++a) {
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
          auto u = groups[a];
          u.insert(u.end(), groups[b].begin(), groups[b].end());
          const double d = sse(u) - sse(groups[a]) - sse(groups[b]);
          if (d < best) {
            best = d;
            ba = a;
            bb = b;
          }
        }
      }
      groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
      groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
    }
    std::vector<int> naive(n);
    for (std::size_t c = 0; c < groups.size(); ++c) {
      for (auto i : groups[c]) naive[i] = static_cast<int>(c);
    }
    auto m = fit_hierarchical(FeatureMatrix::from_rows(rows), k);
    // Same partition: homogeneity both ways is 1.
    EXPECT_NEAR(homogeneity(naive, m.assignments), 1.0, 1e-12) << "trial " << trial;
    EXPECT_NEAR(homogeneity(m.assignments, naive), 1.0, 1e-12) << "trial " << trial;
  }
}

TEST(Birch, TwoDistantBlobsArePure) {
  auto s = two_blobs_2d(4);
  BirchConfig cfg;
  cfg.normalize = false;
  cfg.threshold = 0.5;
  auto m = fit_birch(s.x, 2, cfg);
  expect_model_invariants(m, s.x.rows());
  EXPECT_DOUBLE_EQ(homogeneity(s.labels, m.assignments), 1.0);
}

TEST(Birch, InsertionOrderBarelyMatters) {
  auto s = testsupport::six_blobs();
  BirchConfig cfg;
  cfg.normalize = false;
  cfg.threshold = 3.0;
  auto a = fit_birch(s.x, 6, cfg);
  std::vector<std::size_t> perm(s.x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 g(9);
  std::shuffle(perm.begin(), perm.end(), g);
  auto xp = s.x.subset(perm);
  std::vector<int> lp;
  for (auto i : perm) lp.push_back(s.labels[i]);
  auto b = fit_birch(xp, 6, cfg);
  EXPECT_NEAR(homogeneity(s.labels, a.assignments), homogeneity(lp, b.assignments), 0.05);
}

TEST(Birch, CollapsedTreeIsAnError) {
  auto x = points_1d({0, 0.01, 0.02, 0.03});
  BirchConfig cfg;
  cfg.normalize = false;
  cfg.threshold = 100;
  EXPECT_THROW(fit_birch(x, 2, cfg), Error);
  cfg.threshold = 0;
  EXPECT_THROW(fit_birch(x, 2, cfg), Error);
}

TEST(Birch, SplitsNodesWithSmallBranching) {
  auto s = testsupport::gaussian_blobs(300, 3, 3, 8, 8.0);
  BirchConfig cfg;
  cfg.normalize = false;
  cfg.branching = 3;
  cfg.threshold = 0.3;
  auto m = fit_birch(s.x, 3, cfg);
  expect_model_invariants(m, 300);
  EXPECT_GT(homogeneity(s.labels, m.assignments), 0.9);
}

TEST(BisectingKMeans, KTwoEqualsPlainTwoMeans) {
  auto s = testsupport::gaussian_blobs(120, 4, 3, 21, 2.0);
  for (std::uint64_t seed : {1, 2, 3}) {
    EXPECT_EQ(fit_bisecting_kmeans(s.x, 2, seed).assignments, kmeans(s.x, 2, seed).assignments);
  }
}

TEST(BisectingKMeans, SseNonIncreasingInK) {
  auto s = testsupport::gaussian_blobs(150, 4, 5, 13, 3.0);
  double prev = 1e300;
  for (int k = 2; k <= 10; ++k) {
    auto m = fit_bisecting_kmeans(s.x, k, 4);
    const double sse = within_cluster_sse(s.x, m.assignments, k);
    EXPECT_LE(sse, prev + 1e-9) << "k=" << k;
    prev = sse;
  }
  EXPECT_THROW(fit_bisecting_kmeans(s.x, 1, 0), Error);
}

TEST(Random, BaselineProperties) {
  auto x = points_1d({1, 2, 3, 4, 5});
  auto m = random_assignment(x, 5, 3);
  EXPECT_EQ(std::set<int>(m.assignments.begin(), m.assignments.end()).size(), 5u);
  EXPECT_DOUBLE_EQ(homogeneity({0, 0, 1, 1, 2}, m.assignments), 1.0);
  auto s = testsupport::gaussian_blobs(200, 2, 4, 1);
  EXPECT_EQ(random_assignment(s.x, 7, 5).assignments, random_assignment(s.x, 7, 5).assignments);
  EXPECT_NE(random_assignment(s.x, 7, 5).assignments, random_assignment(s.x, 7, 6).assignments);
  expect_model_invariants(random_assignment(s.x, 7, 5), 200);
  EXPECT_THROW(random_assignment(x, 6, 0), Error);
}

TEST(TopClusters, OrdersByScore) {
  ClusterModel m;
  m.k = 3;
  m.assignments = {0};
  m.affinity = {{{0, 0.7}, {1, 0.2}, {2, 0.1}}};
  EXPECT_EQ(top_clusters(m, 0, 2), (std::vector<int>{0, 1}));
  EXPECT_THROW(top_clusters(m, 0, 4), Error);
}

TEST(ClusterModel, JsonRoundTripKeepsTopFive) {
  auto s = testsupport::gaussian_blobs(60, 3, 3, 2);
  auto m = fit_hierarchical(s.x, 8);
  auto back = ClusterModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  EXPECT_EQ(back.assignments, m.assignments);
  EXPECT_EQ(back.k, 8);
  EXPECT_EQ(back.affinity[0].size(), 5u);
  EXPECT_EQ(back.centers.size(), 8u);
  EXPECT_EQ(top_clusters(back, 3, 5), top_clusters(m, 3, 5));
}

TEST(Determinism, AllAlgorithmsRepeatExactly) {
  auto s = testsupport::gaussian_blobs(150, 6, 4, 17);
  for (auto algo : {ClusterAlgorithm::gmm, ClusterAlgorithm::hierarchical, ClusterAlgorithm::birch,
                    ClusterAlgorithm::bisecting_kmeans, ClusterAlgorithm::random}) {
    ClusterSpec spec;
    spec.algorithm = algo;
    spec.k = 4;
    spec.seed = 8;
    auto a = fit_clusters(s.x, spec), b = fit_clusters(s.x, spec);
    EXPECT_EQ(a.assignments, b.assignments) << to_string(algo);
    expect_model_invariants(a, 150);
  }
}

TEST(Synthetic, EveryAlgorithmRecoversBlobs) {
  auto s = testsupport::six_blobs();
  const double rnd = homogeneity(s.labels, random_assignment(s.x, 6, 42).assignments);
  const double gmm = homogeneity(s.labels, fit_gmm(s.x, 6, {}, 42).assignments);
  const double ward = homogeneity(s.labels, fit_hierarchical(s.x, 6).assignments);
  const double bis = homogeneity(s.labels, fit_bisecting_kmeans(s.x, 6, 42).assignments);
  const double bir = homogeneity(s.labels, fit_birch(s.x, 6, {}).assignments);
  EXPECT_GE(gmm, 0.95);
  EXPECT_GE(ward, 0.95);
  EXPECT_GE(bis, 0.90);
  for (double h : {gmm, ward, bis, bir}) EXPECT_GE(h - rnd, 0.5);
}

TEST(Sweep, IncludesRandomRowsAndSortsOutput) {
  auto s = testsupport::gaussian_blobs(90, 4, 3, 3);
  auto rows = sweep({{"raw", &s.x}}, s.labels, {ClusterAlgorithm::hierarchical}, {2, 3}, {1});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].algorithm, "hierarchical");
  EXPECT_EQ(rows[2].algorithm, "random");
  EXPECT_NE(sweep_csv(rows).find("raw,random,3,1,"), std::string::npos);
  EXPECT_NE(sweep_markdown(rows).find("| Homogeneity | NMI | Silhouette |"), std::string::npos);
}
