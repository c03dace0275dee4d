// Acceptance suite: one PASS/FAIL line per release criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sstgen/augment.hpp"
#include "sstgen/clustermetrics.hpp"
#include "sstgen/diagnostics.hpp"
#include "sstgen/emit.hpp"
#include "sstgen/evaluate.hpp"
#include "sstgen/pipeline.hpp"
#include "support/mock_run.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

using namespace sstgen;
namespace oracle = testsupport::oracle;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Verdict metric_oracle() {
  Stopwatch sw;
  std::mt19937_64 g(20240601);
  double worst = 0;
  std::size_t checks = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + g() % 63;  // 2..64
    const int ka = 1 + static_cast<int>(g() % 8), kb = 1 + static_cast<int>(g() % 8);
    std::vector<int> a(n), b(n);
    for (auto& v : a) v = static_cast<int>(g() % ka);
    for (auto& v : b) v = static_cast<int>(g() % kb);
    worst = std::max(worst, std::abs(homogeneity(a, b) - oracle::homogeneity(a, b)));
    worst = std::max(worst, std::abs(nmi(a, b) - oracle::nmi(a, b)));
    checks += 2;
    const std::set<int> distinct(b.begin(), b.end());
    if (distinct.size() >= 2 && distinct.size() < n) {
      const std::size_t d = 1 + g() % 4;
      std::vector<std::vector<double>> rows(n, std::vector<double>(d));
      std::normal_distribution<double> z(0.0, 3.0);
      for (auto& r : rows) {
        for (auto& v : r) v = z(g);
      }
      worst = std::max(worst, std::abs(silhouette(FeatureMatrix::from_rows(rows), b) - oracle::silhouette(rows, b)));
      ++checks;
    }
    TokenSet ta, tb;
    std::set<std::string> sa, sb;
    for (std::size_t i = 0, m = g() % 20; i < m; ++i) {
      auto w = "t" + std::to_string(g() % 25);
      ta.insert(w), sa.insert(w);
    }
    for (std::size_t i = 0, m = g() % 20; i < m; ++i) {
      auto w = "t" + std::to_string(g() % 25);
      tb.insert(w), sb.insert(w);
    }
    worst = std::max(worst, std::abs(jaccard(ta, tb) - oracle::jaccard(sa, sb)));
    ++checks;
  }
  const double t = sw.seconds();
  return {worst <= 1e-9 && t < 10.0,
          std::to_string(checks) + " checks, max |diff| " + std::to_string(worst) + ", " + fmt(t, 2) + " s"};
}

Verdict clustering_recovery() {
  Stopwatch sw;
  auto s = testsupport::six_blobs();
  const double rnd = homogeneity(s.labels, random_assignment(s.x, 6, 42).assignments);
  const double gmm = homogeneity(s.labels, fit_gmm(s.x, 6, {}, 42).assignments);
  const double ward = homogeneity(s.labels, fit_hierarchical(s.x, 6).assignments);
  const double bis = homogeneity(s.labels, fit_bisecting_kmeans(s.x, 6, 42).assignments);
  const double bir = homogeneity(s.labels, fit_birch(s.x, 6, {}).assignments);
  const double t = sw.seconds();
  bool ok = gmm >= 0.95 && ward >= 0.95 && bis >= 0.90 && t < 30.0;
  for (double h : {gmm, ward, bis, bir}) ok = ok && h - rnd >= 0.5;
  return {ok, "gmm " + fmt(gmm) + ", hierarchical " + fmt(ward) + ", bisecting " + fmt(bis) + ", birch " + fmt(bir) +
                  ", random " + fmt(rnd) + ", " + fmt(t, 2) + " s"};
}

Verdict monotonic_k() {
  auto s = testsupport::six_blobs();
  const std::vector<int> ks{4, 8, 16};
  const std::vector<ClusterAlgorithm> algos{ClusterAlgorithm::gmm, ClusterAlgorithm::hierarchical,
                                            ClusterAlgorithm::bisecting_kmeans, ClusterAlgorithm::random};
  bool ok = true;
  std::string detail;
  for (auto a : algos) {
    std::vector<double> means;
    for (int k : ks) {
      double sum = 0;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ClusterSpec spec;
        spec.algorithm = a;
        spec.k = k;
        spec.seed = seed;
        sum += homogeneity(s.labels, fit_clusters(s.x, spec).assignments);
      }
      means.push_back(sum / 5.0);
    }
    for (std::size_t i = 1; i < means.size(); ++i) ok = ok && means[i] >= means[i - 1] - 1e-12;
    if (!detail.empty()) detail += "; ";
    detail += to_string(a) + " " + fmt(means[0]) + " <= " + fmt(means[1]) + " <= " + fmt(means[2]);
  }
  return {ok, detail};
}

Verdict gmm_log_likelihood() {
  std::mt19937_64 g(99);
  std::size_t violations = 0, iterations = 0;
  for (int f = 0; f < 100; ++f) {
    const std::size_t n = 30 + g() % 120, d = 2 + g() % 5;
    const int blobs = 2 + static_cast<int>(g() % 4), k = 2 + static_cast<int>(g() % 5);
    const double spread = 0.5 + static_cast<double>(g() % 50) / 10.0;
    auto s = testsupport::gaussian_blobs(n, d, blobs, g(), spread);
    auto m = fit_gmm(s.x, k, {}, g());
    for (std::size_t t = 1; t < m.log_likelihood.size(); ++t) {
      ++iterations;
      violations += m.log_likelihood[t] < m.log_likelihood[t - 1] - 1e-8;
    }
  }
  return {violations == 0, "100 fixtures, " + std::to_string(iterations) + " EM steps, " + std::to_string(violations) +
                               " decreases"};
}

Verdict match_logic() {
  std::mt19937_64 g(5);
  const std::vector<std::string> vocab{"wheat", "corn", "grain", "earn", "acq", "CS", "Medical", "ship"};
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    auto draw = [&] {
      std::vector<std::string> v;
      for (std::size_t j = 0, n = g() % 5; j < n; ++j) v.push_back(vocab[g() % vocab.size()]);
      return v;
    };
    auto pred = draw(), gold = draw();
    if (g() % 4 == 0) pred = gold;
    if (g() % 8 == 0) std::reverse(pred.begin(), pred.end());
    const bool order = in_right_order(pred, gold), all = all_match(pred, gold), part = part_match(pred, gold);
    const auto da = domain_area_match(pred, gold);
    violations += (order && !all) + (all && !part) + (da.area && !da.domain);
  }
  const std::vector<std::string> gold{"wheat", "corn"}, swapped{"corn", "wheat"};
  const bool worked = all_match(swapped, gold) && !in_right_order(swapped, gold) && part_match(swapped, gold) &&
                      in_right_order(gold, gold) && part_match({"corn"}, gold) && !all_match({"corn"}, gold);
  return {violations == 0 && worked,
          "10000 pairs, " + std::to_string(violations) + " violations; worked examples " + (worked ? "ok" : "WRONG")};
}

Verdict round_trips() {
  std::size_t combos = 0, failures = 0;
  auto check_catalog = [&](const LabelCatalog& cat, LabelScheme scheme) {
    const auto& labels = cat.labels();
    const std::size_t n = labels.size();
    auto check = [&](const std::vector<std::string>& combo) {
      ++combos;
      auto rec = build_train_record("Document body.", combo, "Subject", scheme, &cat);
      auto p = parse_prediction(rec.output);
      std::multiset<std::string> want(combo.begin(), combo.end()), got(p.labels.begin(), p.labels.end());
      bool ok = valid_output(rec.output) && p.parse_ok && want == got;
      if (scheme == LabelScheme::multi_label) ok = ok && p.labels == combo;
      failures += !ok;
    };
    for (std::size_t a = 0; a < n; ++a) {
      check({labels[a]});
      for (std::size_t b = a + 1; b < n; ++b) {
        check({labels[a], labels[b]});
        for (std::size_t c = b + 1; c < n; ++c) check({labels[a], labels[b], labels[c]});
      }
    }
  };
  check_catalog(LabelCatalog::reuters(), LabelScheme::multi_label);
  check_catalog(LabelCatalog::wos(), LabelScheme::hierarchical_2);

  std::mt19937_64 g(17);
  const auto cat = LabelCatalog::reuters();
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,;:'\"!?()-%$ ";
  std::size_t extraction_failures = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string content;
    const std::size_t len = 1 + g() % 200;
    for (std::size_t j = 0; j < len; ++j) content += alphabet[g() % alphabet.size()];
    if (g() % 5 == 0) content += "\nSecond line of text";
    content = trim(content);
    if (content.empty()) content = "x";
    std::vector<std::string> labels;
    for (std::size_t j = 0, m = 1 + g() % 3; j < m; ++j) {
      const auto& l = cat.labels()[g() % cat.size()];
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    auto ex = extract_content_label(format_content_label(content, labels));
    extraction_failures += !(ex.ok && ex.content == content && ex.labels == labels);
  }
  return {failures == 0 && extraction_failures == 0,
          std::to_string(combos) + " label combinations (" + std::to_string(failures) + " failures); 1000 extraction fixtures (" +
              std::to_string(extraction_failures) + " failures)"};
}

struct E2E {
  Verdict verdict;
  std::map<std::string, double> jaccard;
};

E2E end_to_end() {
  E2E out;
  testsupport::TempDir dir("acceptance");
  Stopwatch sw;
  std::ostringstream log;
  try {
    Pipeline p(PipelineConfig::resolve(testsupport::mock_config(dir / "run", 20), dir.path()), log);
    p.run(Stage::emit);
    const double t = sw.seconds();

    auto corpus = p.load_corpus_artifact();
    const std::size_t train = corpus.indices_in(Split::train).size();
    auto landmarks = p.load_landmarks(Stage::annotate);
    std::set<std::string> landmark_ids;
    for (const auto& e : landmarks.entries()) {
      if (e.status == LandmarkStatus::labeled) landmark_ids.insert(e.doc_id);
    }

    auto per_source = [](const std::vector<AugmentedSample>& v) {
      std::map<std::string, int> m;
      for (const auto& s : v) m[s.source_id]++;
      return m;
    };
    const auto aug = p.stage_dir(Stage::augment);
    auto rag = per_source(read_samples(aug / "rag.jsonl"));
    auto rw = per_source(read_samples(aug / "rewrite.jsonl"));
    auto wn = per_source(read_samples(aug / "wordnet.jsonl"));
    bool counts = rag.size() == train;
    for (const auto& [id, n] : rag) counts = counts && n == 3;
    counts = counts && rw.size() == landmark_ids.size() && wn.size() == landmark_ids.size();
    for (const auto& id : landmark_ids) counts = counts && rw[id] == 10 && wn[id] == 10;

    bool identity = true;
    auto acct = nlohmann::json::parse(read_file(aug / "accounting.json"));
    for (const auto& [method, a] : acct.items()) {
      identity = identity && a["attempted"].get<std::size_t>() ==
                                 a["ok"].get<std::size_t>() + a["regex_fail"].get<std::size_t>() +
                                     a["label_filtered"].get<std::size_t>() + a["gateway_failed"].get<std::size_t>();
    }

    const auto combined_path = p.stage_dir(Stage::emit) / "combined.jsonl";
    auto records = read_records(combined_path);
    auto manifest = DatasetManifest::from_json(nlohmann::json::parse(read_file(manifest_path_for(combined_path))));
    bool valid = !records.empty() && manifest.total == records.size();
    for (const auto& r : records) valid = valid && valid_output(r.output) && !r.instruction.empty();

    auto div = nlohmann::json::parse(read_file(p.stage_dir(Stage::diagnose) / "diversity.json"));
    for (const auto& r : div) {
      if (!r["jaccard"].is_null()) out.jaccard[r["method"]] = r["jaccard"].get<double>();
    }

    out.verdict.pass = counts && identity && valid && t < 120.0;
    out.verdict.detail = std::to_string(train) + " train docs x 3 RAG, " + std::to_string(landmark_ids.size()) +
                         " landmarks x (10 rewrite + 10 wordnet) " + (counts ? "ok" : "WRONG") + "; accounting " +
                         (identity ? "balances" : "UNBALANCED") + "; combined " + std::to_string(records.size()) +
                         " records " + (valid ? "valid" : "INVALID") + "; " + fmt(t, 2) + " s";
  } catch (const std::exception& e) {
    out.verdict = {false, std::string("pipeline error: ") + e.what()};
  }
  return out;
}

Verdict adversarial_extraction() {
  auto lines = read_lines(testsupport::fixture("adversarial_extraction.jsonl"));
  std::size_t cases = 0, expected_ok = 0, matched = 0;
  std::string first_miss;
  for (const auto& line : lines) {
    if (trim(line).empty()) continue;
    auto c = nlohmann::json::parse(line);
    ++cases;
    auto ex = extract_content_label(c["response"].get<std::string>());
    const bool want_ok = c["expect_ok"].get<bool>();
    expected_ok += want_ok;
    bool same = ex.ok == want_ok;
    if (same && want_ok) {
      same = ex.content == c["content"].get<std::string>() && ex.labels == c["labels"].get<std::vector<std::string>>();
    } else if (same) {
      same = ex.reason == c["reason"].get<std::string>();
    }
    matched += same;
    if (!same && first_miss.empty()) first_miss = c["name"].get<std::string>();
  }
  return {cases > 0 && matched == cases,
          std::to_string(matched) + "/" + std::to_string(cases) + " cases match (" + std::to_string(expected_ok) +
              " extract, " + std::to_string(cases - expected_ok) + " classified failures)" +
              (first_miss.empty() ? "" : "; first mismatch " + first_miss)};
}

Verdict diversity_and_scope(const std::map<std::string, double>& jac) {
  auto get = [&](const std::string& m) { return jac.count(m) ? jac.at(m) : -1.0; };
  const double w = get("wordnet"), r = get("rewrite"), g = get("rag");
  const bool ordered = w > r && r > g && g >= 0;
  const auto readme = std::filesystem::path(SSTGEN_SOURCE_DIR) / "README.md";
  const bool documented =
      std::filesystem::exists(readme) && read_file(readme).find("not reproducible at desk scale") != std::string::npos;
  return {ordered && documented, "mock Jaccard wordnet " + fmt(w * 100, 2) + "% > rewrite " + fmt(r * 100, 2) +
                                     "% > rag " + fmt(g * 100, 2) + "%; headline fine-tuning results documented as " +
                                     (documented ? "out of CI scope" : "MISSING from README")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << name << "  (" << v.detail << ")" << std::endl;
    failures += !v.pass;
  };
  report("metric-oracle-equivalence", metric_oracle());
  report("clustering-recovery", clustering_recovery());
  report("monotonic-k", monotonic_k());
  report("gmm-loglik-nondecreasing", gmm_log_likelihood());
  report("match-metric-logic", match_logic());
  report("round-trips", round_trips());
  auto e2e = end_to_end();
  report("end-to-end-mock-run", e2e.verdict);
  report("extraction-robustness", adversarial_extraction());
  report("diversity-ordering-and-scope", diversity_and_scope(e2e.jaccard));
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed") << std::endl;
  return failures ? 1 : 0;
}
