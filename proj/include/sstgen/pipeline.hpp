#pragma once

// Stage runner over a single JSON config. Each stage writes into
// <run_dir>/<stage>-<hash12>, where the hash covers the config sections the
// stage reads, the fingerprints of its input files, and its upstream hashes.
// A directory holding a DONE marker is reused as is.

#include <json.hpp>

#include <array>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sstgen/augment.hpp"
#include "sstgen/cluster.hpp"
#include "sstgen/clustermetrics.hpp"
#include "sstgen/common.hpp"
#include "sstgen/corpus.hpp"
#include "sstgen/diagnostics.hpp"
#include "sstgen/emit.hpp"
#include "sstgen/evaluate.hpp"
#include "sstgen/http_transport.hpp"
#include "sstgen/landmark.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/mock_llm.hpp"
#include "sstgen/mock_server.hpp"
#include "sstgen/vectorize.hpp"

namespace sstgen {

enum class Stage { ingest, features, cluster, metrics, landmarks, annotate, augment, diagnose, emit, evaluate };

inline constexpr std::array<Stage, 10> kAllStages = {Stage::ingest,    Stage::features, Stage::cluster, Stage::metrics,
                                                     Stage::landmarks, Stage::annotate, Stage::augment, Stage::diagnose,
                                                     Stage::emit,      Stage::evaluate};

inline std::string to_string(Stage s) {
  static const char* names[] = {"ingest",   "features", "cluster",  "metrics", "landmarks",
                                "annotate", "augment",  "diagnose", "emit",    "evaluate"};
  return names[static_cast<int>(s)];
}

inline Stage parse_stage(const std::string& s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  fail(ErrorKind::invalid_input, "unknown stage '" + s + "'");
}

enum class AnnotateMode { reveal_gold, import_file, interactive };

inline AnnotateMode parse_annotate_mode(const std::string& s) {
  if (s == "reveal_gold") return AnnotateMode::reveal_gold;
  if (s == "import") return AnnotateMode::import_file;
  if (s == "interactive") return AnnotateMode::interactive;
  fail(ErrorKind::config, "annotate.mode must be reveal_gold, import or interactive (got '" + s + "')");
}

// ---------------------------------------------------------------------------
// configuration

/// Every accepted key with its default. Keys absent here are rejected.
inline nlohmann::json default_config() {
  return nlohmann::json::parse(R"({
    "run_dir": "runs",
    "dataset": "reuters",
    "catalog": "",
    "corpus": {"path": "", "format": "auto", "name": "",
               "split": {"train": 0.5, "validation": 0.3, "test": 0.2}, "split_seed": 42},
    "features": {"kind": "embedding", "max_features": 1024, "min_token_length": 2},
    "cluster": {"algorithm": "gmm", "k": 300, "seed": 42,
                "gmm": {"reg_covar": 1e-6, "max_iter": 200, "tol": 1e-4},
                "birch": {"branching": 50, "threshold": 0.5, "normalize": true}},
    "metrics": {"enabled": true, "algorithms": ["gmm", "hierarchical", "birch", "bisecting_kmeans"],
                "ks": [4, 8, 16], "seeds": [0, 1, 2]},
    "landmarks": {"strategy": "llm_choice", "seed": 42, "word_cap": 400, "prompt_word_budget": 12000},
    "annotate": {"mode": "reveal_gold", "labels_file": "", "annotator": ""},
    "augment": {"seed": 42,
                "wordnet": {"enabled": false, "synonyms": "", "variants": 10, "replace_prob": 0.15, "top_k": 3},
                "rewrite": {"enabled": false, "variants": 10, "temperature": 0.3},
                "rag": {"enabled": true, "variants": 3, "labeled_refs": 5, "unlabeled_refs": 3,
                        "temperature": 0.7, "policy": "drop_unknown"}},
    "diagnose": {"embedding_similarity": true},
    "emit": {"scheme": "", "subject": "", "seed": 42, "parts": ["landmarks", "rag"]},
    "evaluate": {"predictions": "", "cot_rag": false, "references": 5},
    "llm": {"mode": "mock", "base_url": "", "embed_base_url": "", "chat_model": "generator",
            "embed_model": "embedder", "transcripts": "", "max_inflight": 4, "timeout_s": 600,
            "mock": {"seed": 0, "rewrite_rule": "perturb", "rewrite_change_prob": 0.25,
                     "rag_malformed_rate": 0.05, "rag_offcatalog_rate": 0.05, "embed_dim": 32}}
  })");
}

namespace detail {

inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

/// Overlays `user` onto `base`, refusing keys or types `base` does not know.
inline void merge_checked(nlohmann::json& base, const nlohmann::json& user, const std::string& where) {
  if (!user.is_object()) fail(ErrorKind::config, (where.empty() ? "config" : where) + " must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) fail(ErrorKind::config, "unknown config key '" + key + "'");
    auto& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key);
    } else if (!same_kind(slot, it.value())) {
      fail(ErrorKind::config, "config key '" + key + "' expects " + std::string(slot.type_name()) + ", got " +
                                  it.value().type_name());
    } else {
      slot = it.value();
    }
  }
}

inline std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base_dir) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return (path.is_absolute() ? path : base_dir / path).lexically_normal();
}

inline std::string file_fingerprint(const std::filesystem::path& p) {
  if (p.empty()) return "";
  return sha256_hex(read_file(p));
}

template <class T>
T get_checked(const nlohmann::json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, section + "." + key + ": " + e.what());
  }
}

}  // namespace detail

struct LlmSettings {
  std::string mode = "mock";  // mock | live | replay
  std::string base_url, embed_base_url;
  std::string chat_model = "generator", embed_model = "embedder";
  std::optional<std::filesystem::path> transcripts;
  std::size_t max_inflight = 4;
  int timeout_s = 600;
  MockLlmConfig mock;
};

struct PipelineConfig {
  nlohmann::json resolved;  // defaults overlaid with the file, paths made absolute
  std::filesystem::path source;

  std::filesystem::path run_dir;
  std::string dataset;
  LabelCatalog catalog;
  std::filesystem::path corpus_path;
  CorpusFormat corpus_format = CorpusFormat::jsonl;
  std::string corpus_name;
  SplitRatios ratios;
  std::uint64_t split_seed = 42;

  FeatureKind feature_kind = FeatureKind::embedding;
  TfidfOptions tfidf;
  ClusterSpec cluster;

  bool metrics_enabled = true;
  std::vector<ClusterAlgorithm> metrics_algorithms;
  std::vector<int> metrics_ks;
  std::vector<std::uint64_t> metrics_seeds;

  LandmarkStrategy landmark_strategy = LandmarkStrategy::llm_choice;
  std::uint64_t landmark_seed = 42;
  LlmChoiceConfig choice;

  AnnotateMode annotate_mode = AnnotateMode::reveal_gold;
  std::filesystem::path labels_file;
  std::string annotator;

  std::uint64_t augment_seed = 42;
  bool wordnet_enabled = false, rewrite_enabled = false, rag_enabled = true;
  std::filesystem::path synonyms;
  WordnetConfig wordnet;
  RewriteConfig rewrite;
  RagConfig rag;

  bool diagnose_embeddings = true;

  LabelScheme scheme = LabelScheme::multi_label;
  std::string subject;
  std::uint64_t emit_seed = 42;
  std::vector<std::string> parts;

  std::filesystem::path predictions;
  bool cot_rag = false;
  CotConfig cot;

  LlmSettings llm;

  /// Validates and resolves a config object. Relative paths are taken
  /// relative to `base_dir`.
  static PipelineConfig resolve(const nlohmann::json& user, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    c.resolved = default_config();
    detail::merge_checked(c.resolved, user, "");
    auto& r = c.resolved;
    using detail::get_checked;
    using detail::resolve_path;

    auto set_path = [&](nlohmann::json& slot) {
      const auto p = resolve_path(slot.get<std::string>(), base_dir);
      slot = p.string();
      return p;
    };
    auto require_file = [](const std::filesystem::path& p, const std::string& key) {
      if (p.empty()) fail(ErrorKind::config, key + " is required");
      if (!std::filesystem::is_regular_file(p)) fail(ErrorKind::config, key + ": no such file " + p.string());
    };

    c.run_dir = set_path(r["run_dir"]);
    if (c.run_dir.empty()) fail(ErrorKind::config, "run_dir must not be empty");
    c.dataset = to_lower(r["dataset"].get<std::string>());

    // catalog: builtin name, a JSON file, or empty for the dataset's own
    std::string cat = r["catalog"].get<std::string>();
    if (cat.empty()) cat = c.dataset;
    if (cat == "reuters") {
      c.catalog = LabelCatalog::reuters();
    } else if (cat == "wos") {
      c.catalog = LabelCatalog::wos();
    } else {
      const auto p = resolve_path(cat, base_dir);
      require_file(p, "catalog");
      r["catalog"] = p.string();
      c.catalog = LabelCatalog::load(p);
    }

    auto& corpus = r["corpus"];
    c.corpus_path = set_path(corpus["path"]);
    require_file(c.corpus_path, "corpus.path");
    const auto fmt = corpus["format"].get<std::string>();
    if (fmt == "auto") {
      c.corpus_format = corpus_format_for(c.corpus_path);
    } else if (fmt == "jsonl" || fmt == "csv") {
      c.corpus_format = fmt == "csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
    } else {
      fail(ErrorKind::config, "corpus.format must be auto, jsonl or csv");
    }
    c.corpus_name = corpus["name"].get<std::string>();
    if (c.corpus_name.empty()) c.corpus_name = c.dataset;
    c.ratios = {get_checked<double>(corpus["split"], "train", "corpus.split"),
                get_checked<double>(corpus["split"], "validation", "corpus.split"),
                get_checked<double>(corpus["split"], "test", "corpus.split")};
    if (c.ratios.train <= 0 || c.ratios.validation <= 0 || c.ratios.test <= 0 ||
        std::abs(c.ratios.train + c.ratios.validation + c.ratios.test - 1.0) > 1e-9) {
      fail(ErrorKind::config, "corpus.split ratios must be positive and sum to 1");
    }
    c.split_seed = get_checked<std::uint64_t>(corpus, "split_seed", "corpus");

    const auto& feat = r["features"];
    const auto kind = feat["kind"].get<std::string>();
    if (kind != "tfidf" && kind != "embedding") fail(ErrorKind::config, "features.kind must be tfidf or embedding");
    c.feature_kind = kind == "tfidf" ? FeatureKind::tfidf : FeatureKind::embedding;
    c.tfidf.max_features = get_checked<std::size_t>(feat, "max_features", "features");
    c.tfidf.min_token_length = get_checked<std::size_t>(feat, "min_token_length", "features");
    if (c.tfidf.max_features < 1) fail(ErrorKind::config, "features.max_features must be at least 1");

    const auto& cl = r["cluster"];
    try {
      c.cluster.algorithm = parse_algorithm(cl["algorithm"].get<std::string>());
    } catch (const Error& e) {
      fail(ErrorKind::config, std::string("cluster.algorithm: ") + e.what());
    }
    c.cluster.k = get_checked<int>(cl, "k", "cluster");
    if (c.cluster.k < 1) fail(ErrorKind::config, "cluster.k must be positive");
    c.cluster.seed = get_checked<std::uint64_t>(cl, "seed", "cluster");
    c.cluster.gmm.reg_covar = get_checked<double>(cl["gmm"], "reg_covar", "cluster.gmm");
    c.cluster.gmm.max_iter = get_checked<int>(cl["gmm"], "max_iter", "cluster.gmm");
    c.cluster.gmm.tol = get_checked<double>(cl["gmm"], "tol", "cluster.gmm");
    if (c.cluster.gmm.reg_covar <= 0 || c.cluster.gmm.max_iter < 1 || c.cluster.gmm.tol < 0) {
      fail(ErrorKind::config, "cluster.gmm: reg_covar > 0, max_iter >= 1 and tol >= 0 required");
    }
    c.cluster.birch.branching = get_checked<std::size_t>(cl["birch"], "branching", "cluster.birch");
    c.cluster.birch.threshold = get_checked<double>(cl["birch"], "threshold", "cluster.birch");
    c.cluster.birch.normalize = get_checked<bool>(cl["birch"], "normalize", "cluster.birch");
    if (c.cluster.birch.branching < 2 || c.cluster.birch.threshold <= 0) {
      fail(ErrorKind::config, "cluster.birch: branching >= 2 and threshold > 0 required");
    }

    const auto& met = r["metrics"];
    c.metrics_enabled = met["enabled"].get<bool>();
    for (const auto& a : met["algorithms"]) {
      try {
        c.metrics_algorithms.push_back(parse_algorithm(a.get<std::string>()));
      } catch (const std::exception& e) {
        fail(ErrorKind::config, std::string("metrics.algorithms: ") + e.what());
      }
    }
    c.metrics_ks = get_checked<std::vector<int>>(met, "ks", "metrics");
    c.metrics_seeds = get_checked<std::vector<std::uint64_t>>(met, "seeds", "metrics");
    for (int k : c.metrics_ks) {
      if (k < 2) fail(ErrorKind::config, "metrics.ks entries must be at least 2");
    }
    if (c.metrics_enabled && (c.metrics_ks.empty() || c.metrics_seeds.empty())) {
      fail(ErrorKind::config, "metrics.ks and metrics.seeds must not be empty");
    }

    const auto& lm = r["landmarks"];
    try {
      c.landmark_strategy = parse_landmark_strategy(lm["strategy"].get<std::string>());
    } catch (const Error& e) {
      fail(ErrorKind::config, std::string("landmarks.strategy: ") + e.what());
    }
    c.landmark_seed = get_checked<std::uint64_t>(lm, "seed", "landmarks");
    c.choice.word_cap = get_checked<std::size_t>(lm, "word_cap", "landmarks");
    c.choice.prompt_word_budget = get_checked<std::size_t>(lm, "prompt_word_budget", "landmarks");
    if (c.choice.word_cap < 1 || c.choice.prompt_word_budget < 1) {
      fail(ErrorKind::config, "landmarks.word_cap and prompt_word_budget must be positive");
    }

    auto& an = r["annotate"];
    c.annotate_mode = parse_annotate_mode(an["mode"].get<std::string>());
    c.labels_file = set_path(an["labels_file"]);
    if (c.annotate_mode == AnnotateMode::import_file) require_file(c.labels_file, "annotate.labels_file");
    c.annotator = an["annotator"].get<std::string>();
    if (c.annotator.empty()) {
      c.annotator = c.annotate_mode == AnnotateMode::reveal_gold ? "gold" : c.annotate_mode == AnnotateMode::import_file
                                                                             ? "import"
                                                                             : "human";
    }

    auto& au = r["augment"];
    c.augment_seed = get_checked<std::uint64_t>(au, "seed", "augment");
    auto& wn = au["wordnet"];
    c.wordnet_enabled = wn["enabled"].get<bool>();
    c.synonyms = set_path(wn["synonyms"]);
    c.wordnet.variants = get_checked<int>(wn, "variants", "augment.wordnet");
    c.wordnet.replace_prob = get_checked<double>(wn, "replace_prob", "augment.wordnet");
    c.wordnet.top_k = get_checked<std::size_t>(wn, "top_k", "augment.wordnet");
    if (c.wordnet_enabled) {
      require_file(c.synonyms, "augment.wordnet.synonyms");
      if (c.wordnet.variants < 1 || c.wordnet.top_k < 1 || c.wordnet.replace_prob < 0 || c.wordnet.replace_prob > 1) {
        fail(ErrorKind::config, "augment.wordnet: variants >= 1, top_k >= 1 and replace_prob in [0, 1] required");
      }
    }
    const auto& rw = au["rewrite"];
    c.rewrite_enabled = rw["enabled"].get<bool>();
    c.rewrite.variants = get_checked<int>(rw, "variants", "augment.rewrite");
    c.rewrite.temperature = get_checked<double>(rw, "temperature", "augment.rewrite");
    if (c.rewrite_enabled && c.rewrite.variants < 1) fail(ErrorKind::config, "augment.rewrite.variants must be >= 1");
    const auto& rg = au["rag"];
    c.rag_enabled = rg["enabled"].get<bool>();
    c.rag.variants = get_checked<int>(rg, "variants", "augment.rag");
    c.rag.labeled_refs = get_checked<std::size_t>(rg, "labeled_refs", "augment.rag");
    c.rag.unlabeled_refs = get_checked<std::size_t>(rg, "unlabeled_refs", "augment.rag");
    c.rag.temperature = get_checked<double>(rg, "temperature", "augment.rag");
    try {
      c.rag.policy = parse_label_policy(rg["policy"].get<std::string>());
    } catch (const Error& e) {
      fail(ErrorKind::config, std::string("augment.rag.policy: ") + e.what());
    }
    if (c.rag_enabled && (c.rag.variants < 1 || c.rag.labeled_refs < 1)) {
      fail(ErrorKind::config, "augment.rag: variants and labeled_refs must be >= 1");
    }

    c.diagnose_embeddings = r["diagnose"]["embedding_similarity"].get<bool>();

    auto& em = r["emit"];
    const auto scheme = em["scheme"].get<std::string>();
    try {
      c.scheme = !scheme.empty()              ? parse_scheme(scheme)
                 : c.catalog.hierarchical() ? LabelScheme::hierarchical_2
                                              : LabelScheme::multi_label;
    } catch (const Error& e) {
      fail(ErrorKind::config, std::string("emit.scheme: ") + e.what());
    }
    em["scheme"] = to_string(c.scheme);
    c.subject = em["subject"].get<std::string>();
    if (c.subject.empty()) c.subject = default_subject(c.dataset);
    em["subject"] = c.subject;
    c.emit_seed = get_checked<std::uint64_t>(em, "seed", "emit");
    c.parts = get_checked<std::vector<std::string>>(em, "parts", "emit");
    if (c.parts.empty()) fail(ErrorKind::config, "emit.parts must name at least one part");
    for (const auto& p : c.parts) {
      const bool ok = p == "landmarks" || (p == "wordnet" && c.wordnet_enabled) ||
                      (p == "rewrite" && c.rewrite_enabled) || (p == "rag" && c.rag_enabled);
      if (!ok) fail(ErrorKind::config, "emit.parts: '" + p + "' is unknown or its augmentation is disabled");
    }

    auto& ev = r["evaluate"];
    c.predictions = set_path(ev["predictions"]);
    if (!c.predictions.empty()) require_file(c.predictions, "evaluate.predictions");
    c.cot_rag = ev["cot_rag"].get<bool>();
    c.cot.references = get_checked<std::size_t>(ev, "references", "evaluate");
    if (c.cot.references < 1) fail(ErrorKind::config, "evaluate.references must be >= 1");

    auto& llm = r["llm"];
    c.llm.mode = llm["mode"].get<std::string>();
    if (c.llm.mode != "mock" && c.llm.mode != "live" && c.llm.mode != "replay") {
      fail(ErrorKind::config, "llm.mode must be mock, live or replay");
    }
    c.llm.base_url = llm["base_url"].get<std::string>();
    c.llm.embed_base_url = llm["embed_base_url"].get<std::string>();
    c.llm.chat_model = llm["chat_model"].get<std::string>();
    c.llm.embed_model = llm["embed_model"].get<std::string>();
    if (auto t = set_path(llm["transcripts"]); !t.empty()) c.llm.transcripts = t;
    if (c.llm.mode == "replay" && !c.llm.transcripts) fail(ErrorKind::config, "llm.mode replay needs llm.transcripts");
    c.llm.max_inflight = get_checked<std::size_t>(llm, "max_inflight", "llm");
    c.llm.timeout_s = get_checked<int>(llm, "timeout_s", "llm");
    if (c.llm.max_inflight < 1 || c.llm.timeout_s < 1) fail(ErrorKind::config, "llm.max_inflight and timeout_s must be >= 1");
    const auto& mk = llm["mock"];
    c.llm.mock.seed = get_checked<std::uint64_t>(mk, "seed", "llm.mock");
    c.llm.mock.rewrite_rule = mk["rewrite_rule"].get<std::string>();
    if (c.llm.mock.rewrite_rule != "perturb" && c.llm.mock.rewrite_rule != "echo") {
      fail(ErrorKind::config, "llm.mock.rewrite_rule must be perturb or echo");
    }
    c.llm.mock.rewrite_change_prob = get_checked<double>(mk, "rewrite_change_prob", "llm.mock");
    c.llm.mock.rag_malformed_rate = get_checked<double>(mk, "rag_malformed_rate", "llm.mock");
    c.llm.mock.rag_offcatalog_rate = get_checked<double>(mk, "rag_offcatalog_rate", "llm.mock");
    c.llm.mock.embed_dim = get_checked<std::size_t>(mk, "embed_dim", "llm.mock");
    if (c.llm.mock.embed_dim < 1) fail(ErrorKind::config, "llm.mock.embed_dim must be >= 1");
    return c;
  }

  static nlohmann::json read_json(const std::filesystem::path& path) {
    try {
      return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::config, path.string() + ": " + e.what());
    }
  }

  static PipelineConfig load(const std::filesystem::path& path, const nlohmann::json& overrides = nlohmann::json::object()) {
    auto user = read_json(path);
    if (!user.is_object()) fail(ErrorKind::config, path.string() + ": config must be a JSON object");
    user.merge_patch(overrides);
    auto c = resolve(user, std::filesystem::absolute(path).parent_path());
    c.source = std::filesystem::absolute(path);
    return c;
  }

  /// Identity of the generator and embedder, as far as it affects outputs.
  nlohmann::json llm_identity() const {
    nlohmann::json j{{"chat_model", llm.chat_model}, {"embed_model", llm.embed_model}};
    if (llm.mode == "mock") j["mock"] = resolved["llm"]["mock"];
    return j;
  }
};

// ---------------------------------------------------------------------------
// LLM session

/// Gateway wired per llm.mode. Mock mode serves a MockLlm over loopback HTTP
/// so runs exercise the same wire path as live endpoints.
class LlmSession {
 public:
  explicit LlmSession(const LlmSettings& s) {
    GatewayConfig g;
    g.chat_model = s.chat_model;
    g.embed_model = s.embed_model;
    g.max_inflight = s.max_inflight;
    g.transcript_dir = s.transcripts;
    g.mode = s.mode == "replay" ? GatewayMode::replay : s.transcripts ? GatewayMode::record : GatewayMode::live;
    const auto timeout = std::chrono::seconds(s.timeout_s);
    std::shared_ptr<Transport> chat, embed;
    if (s.mode == "mock") {
      server_ = std::make_unique<MockServer>(std::make_shared<const MockLlm>(s.mock));
      server_->start();
      chat = std::make_shared<HttpTransport>(server_->base_url(), "", timeout);
    } else {
      auto base = s.base_url.empty() ? env_or("LLM_BASE_URL") : s.base_url;
      if (base.empty()) base = "http://127.0.0.1:8000";
      chat = std::make_shared<HttpTransport>(base, env_or("LLM_API_KEY"), timeout);
      auto ebase = s.embed_base_url.empty() ? env_or("EMBED_BASE_URL") : s.embed_base_url;
      if (!ebase.empty()) embed = std::make_shared<HttpTransport>(ebase, env_or("EMBED_API_KEY", env_or("LLM_API_KEY")), timeout);
    }
    gateway_ = std::make_unique<Gateway>(g, chat, embed);
  }

  Gateway& gateway() { return *gateway_; }

 private:
  std::unique_ptr<MockServer> server_;  // declared first so it outlives the gateway
  std::unique_ptr<Gateway> gateway_;
};

// ---------------------------------------------------------------------------
// stage runner

struct StageOutcome {
  Stage stage = Stage::ingest;
  std::string hash;
  std::filesystem::path dir;
  bool cache_hit = false;
  bool completed = true;  // false when an interactive session stopped early
  std::string note;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg, std::ostream& log = std::cerr, std::istream* in = nullptr,
                    std::ostream* out = nullptr)
      : cfg_(std::move(cfg)), log_(log), in_(in ? in : &std::cin), out_(out ? out : &std::cout) {}

  const PipelineConfig& config() const { return cfg_; }

  std::vector<Stage> upstream(Stage s) const {
    switch (s) {
      case Stage::ingest: return {};
      case Stage::features: return {Stage::ingest};
      case Stage::cluster: return {Stage::features};
      case Stage::metrics: return {Stage::features};
      case Stage::landmarks: return {Stage::cluster};
      case Stage::annotate: return {Stage::landmarks};
      case Stage::augment: return {Stage::annotate};
      case Stage::diagnose: return {Stage::augment};
      case Stage::emit: return {Stage::augment};
      case Stage::evaluate: {
        std::vector<Stage> up{cfg_.predictions.empty() ? Stage::emit : Stage::ingest};
        if (cfg_.cot_rag && !cfg_.predictions.empty()) up.push_back(Stage::annotate);
        return up;
      }
    }
    return {};
  }

  /// Config fragment and input fingerprints a stage depends on, excluding upstream.
  nlohmann::json stage_inputs(Stage s) const {
    const auto& r = cfg_.resolved;
    switch (s) {
      case Stage::ingest:
        return {{"dataset", cfg_.dataset},
                {"catalog", sha256_hex(cfg_.catalog.to_json().dump())},
                {"corpus", r["corpus"]},
                {"corpus_sha256", detail::file_fingerprint(cfg_.corpus_path)}};
      case Stage::features: {
        nlohmann::json j{{"features", r["features"]}};
        if (cfg_.feature_kind == FeatureKind::embedding) j["llm"] = cfg_.llm_identity();
        return j;
      }
      case Stage::cluster: return {{"cluster", r["cluster"]}};
      case Stage::metrics:
        return {{"metrics", r["metrics"]}, {"gmm", r["cluster"]["gmm"]}, {"birch", r["cluster"]["birch"]}};
      case Stage::landmarks: {
        nlohmann::json j{{"landmarks", r["landmarks"]}};
        if (cfg_.landmark_strategy == LandmarkStrategy::llm_choice) j["llm"] = cfg_.llm_identity();
        return j;
      }
      case Stage::annotate:
        return {{"annotate", r["annotate"]}, {"labels_sha256", detail::file_fingerprint(cfg_.labels_file)}};
      case Stage::augment:
        return {{"augment", r["augment"]},
                {"synonyms_sha256", cfg_.wordnet_enabled ? detail::file_fingerprint(cfg_.synonyms) : ""},
                {"llm", cfg_.llm_identity()}};
      case Stage::diagnose: {
        nlohmann::json j{{"diagnose", r["diagnose"]}};
        if (cfg_.diagnose_embeddings) j["llm"] = cfg_.llm_identity();
        return j;
      }
      case Stage::emit: return {{"emit", r["emit"]}};
      case Stage::evaluate: {
        nlohmann::json j{{"evaluate", r["evaluate"]}, {"predictions_sha256", detail::file_fingerprint(cfg_.predictions)}};
        if (cfg_.cot_rag) j["llm"] = cfg_.llm_identity();
        return j;
      }
    }
    return {};
  }

  std::string stage_hash(Stage s) const {
    auto it = hashes_.find(s);
    if (it != hashes_.end()) return it->second;
    nlohmann::json up = nlohmann::json::object();
    for (auto u : upstream(s)) up[to_string(u)] = stage_hash(u);
    const nlohmann::json key{{"stage", to_string(s)}, {"inputs", stage_inputs(s)}, {"upstream", up}};
    return hashes_[s] = sha256_hex(key.dump()).substr(0, 12);
  }

  std::filesystem::path stage_dir(Stage s) const { return cfg_.run_dir / (to_string(s) + "-" + stage_hash(s)); }
  bool is_done(Stage s) const { return std::filesystem::exists(stage_dir(s) / "DONE"); }

  /// Stages `run` visits, in order, up to and including `until`.
  std::vector<Stage> plan(std::optional<Stage> until = std::nullopt) const {
    std::vector<Stage> out;
    for (auto s : kAllStages) {
      const bool wanted = (s != Stage::metrics || cfg_.metrics_enabled || until == Stage::metrics) &&
                          (s != Stage::evaluate || !cfg_.predictions.empty() || cfg_.cot_rag);
      if (wanted) out.push_back(s);
      if (until && s == *until) break;
    }
    return out;
  }

  std::vector<StageOutcome> run(std::optional<Stage> until = std::nullopt) {
    const auto stages = plan(until);
    if (until == Stage::evaluate && (stages.empty() || stages.back() != Stage::evaluate)) {
      fail(ErrorKind::config, "evaluate needs evaluate.predictions or evaluate.cot_rag");
    }
    std::vector<StageOutcome> out;
    for (auto s : stages) {
      out.push_back(run_stage(s));
      if (!out.back().completed) break;
    }
    return out;
  }

  /// Runs one stage. Upstream stages must already be complete.
  StageOutcome run_stage(Stage s) {
    for (auto u : upstream(s)) {
      if (!is_done(u)) {
        if (s == Stage::evaluate && u == Stage::emit) {
          fail(ErrorKind::invalid_input,
               "evaluate needs emit outputs or an external predictions file (evaluate.predictions); run 'emit' first");
        }
        fail(ErrorKind::invalid_input, "stage '" + to_string(s) + "' needs upstream stage '" + to_string(u) +
                                           "' (missing " + stage_dir(u).string() + ")");
      }
    }
    if (s == Stage::evaluate && cfg_.predictions.empty() && !cfg_.cot_rag) {
      fail(ErrorKind::config, "evaluate needs evaluate.predictions or evaluate.cot_rag");
    }
    StageOutcome o;
    o.stage = s;
    o.hash = stage_hash(s);
    o.dir = stage_dir(s);
    if (is_done(s)) {
      o.cache_hit = true;
      log_ << "[sstgen] " << to_string(s) << ": cache hit, reusing " << o.dir.string() << "\n";
      return o;
    }
    const bool resumable = s == Stage::annotate && cfg_.annotate_mode == AnnotateMode::interactive;
    if (!resumable) std::filesystem::remove_all(o.dir);
    std::filesystem::create_directories(o.dir);
    write_file(o.dir / "config.json", cfg_.resolved.dump(2) + "\n");
    log_ << "[sstgen] " << to_string(s) << ": running into " << o.dir.string() << "\n";

    nlohmann::json summary = nlohmann::json::object();
    switch (s) {
      case Stage::ingest: summary = do_ingest(o.dir); break;
      case Stage::features: summary = do_features(o.dir); break;
      case Stage::cluster: summary = do_cluster(o.dir); break;
      case Stage::metrics: summary = do_metrics(o.dir); break;
      case Stage::landmarks: summary = do_landmarks(o.dir); break;
      case Stage::annotate: summary = do_annotate(o.dir, o.completed); break;
      case Stage::augment: summary = do_augment(o.dir); break;
      case Stage::diagnose: summary = do_diagnose(o.dir); break;
      case Stage::emit: summary = do_emit(o.dir); break;
      case Stage::evaluate: summary = do_evaluate(o.dir); break;
    }
    nlohmann::json up = nlohmann::json::object();
    for (auto u : upstream(s)) up[to_string(u)] = stage_hash(u);
    write_file(o.dir / "stage.json",
               nlohmann::json{{"stage", to_string(s)}, {"hash", o.hash}, {"inputs", stage_inputs(s)}, {"upstream", up},
                              {"summary", summary}}
                       .dump(2) +
                   "\n");
    if (!o.completed) {
      o.note = "stopped before every landmark was answered; rerun to resume";
      log_ << "[sstgen] " << to_string(s) << ": " << o.note << "\n";
      return o;
    }
    write_file(o.dir / "DONE", "");
    return o;
  }

  // Artifact loaders, usable once the producing stage is done.
  Corpus load_corpus_artifact() const {
    return load_corpus(stage_dir(Stage::ingest) / "corpus.jsonl", CorpusFormat::jsonl, cfg_.corpus_name);
  }
  FeatureMatrix load_features() const {
    return FeatureMatrix::from_json(nlohmann::json::parse(read_file(stage_dir(Stage::features) / "features.json")));
  }
  ClusterModel load_model() const {
    return ClusterModel::from_json(nlohmann::json::parse(read_file(stage_dir(Stage::cluster) / "model.json")));
  }
  LandmarkSet load_landmarks(Stage s) const { return LandmarkSet::load(stage_dir(s) / "landmarks.jsonl"); }

 private:
  Gateway& gateway() {
    if (!llm_) llm_ = std::make_unique<LlmSession>(cfg_.llm);
    return llm_->gateway();
  }

  std::filesystem::path embedding_cache() const {
    return cfg_.run_dir / "embeddings" / sha256_hex(cfg_.llm_identity().dump()).substr(0, 12);
  }

  void warn(const std::string& stage, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) log_ << "[sstgen] " << stage << ": warning: " << w << "\n";
  }

  nlohmann::json do_ingest(const std::filesystem::path& dir) {
    auto raw = load_corpus(cfg_.corpus_path, cfg_.corpus_format, cfg_.corpus_name);
    if (raw.empty()) fail(ErrorKind::invalid_input, cfg_.corpus_path.string() + ": corpus is empty");
    raw.scheme = cfg_.scheme;
    std::size_t with_split = 0;
    for (const auto& d : raw.documents()) {
      with_split += d.split.has_value();
      if (d.gold_labels.empty()) fail(ErrorKind::invalid_input, "document '" + d.id + "' has no gold label");
    }
    if (with_split != 0 && with_split != raw.size()) {
      fail(ErrorKind::invalid_input, "corpus mixes documents with and without a split assignment");
    }
    if (auto bad = raw.unknown_labels(cfg_.catalog); !bad.empty()) {
      fail(ErrorKind::invalid_input, std::to_string(bad.size()) + " gold label(s) outside the catalog, e.g. '" +
                                         bad.front() + "'");
    }
    Corpus corpus = with_split ? raw : split_corpus(raw, cfg_.ratios, cfg_.split_seed);
    write_corpus_jsonl(corpus, dir / "corpus.jsonl");
    write_file(dir / "catalog.json", cfg_.catalog.to_json().dump(2) + "\n");
    return {{"documents", corpus.size()},
            {"train", corpus.indices_in(Split::train).size()},
            {"validation", corpus.indices_in(Split::validation).size()},
            {"test", corpus.indices_in(Split::test).size()},
            {"split_source", with_split ? "corpus" : "seeded"}};
  }

  FeatureMatrix compute_features(const Corpus& corpus) {
    if (cfg_.feature_kind == FeatureKind::embedding) return embed_corpus(corpus, gateway(), embedding_cache());
    // TF-IDF vocabulary and idf come from the training split only.
    std::vector<std::string> texts;
    for (auto i : corpus.indices_in(Split::train)) texts.push_back(corpus[i].text);
    auto model = TfidfModel::fit(texts, cfg_.tfidf);
    return model.transform(corpus);
  }

  nlohmann::json do_features(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    auto x = compute_features(corpus);
    x.check_finite();
    write_file(dir / "features.json", x.to_json().dump() + "\n");
    return {{"kind", to_string(x.kind)}, {"rows", x.rows()}, {"dim", x.dim()}};
  }

  nlohmann::json do_cluster(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto x = load_features();
    const auto train = corpus.indices_in(Split::train);
    if (static_cast<std::size_t>(cfg_.cluster.k) > train.size()) {
      fail(ErrorKind::invalid_input, "cluster.k = " + std::to_string(cfg_.cluster.k) + " exceeds the " +
                                         std::to_string(train.size()) + " training documents");
    }
    auto sub = x.subset(train);
    auto model = fit_clusters(sub, cfg_.cluster);
    model.doc_ids.clear();
    for (auto i : train) model.doc_ids.push_back(corpus[i].id);
    warn("cluster", model.warnings);
    write_file(dir / "model.json", model.to_json().dump() + "\n");
    std::vector<std::size_t> sizes(model.k, 0);
    for (int a : model.assignments) ++sizes[a];
    return {{"algorithm", to_string(model.algorithm)}, {"k", model.k},          {"rows", model.size()},
            {"converged", model.converged},            {"iterations", model.iterations},
            {"cluster_sizes", sizes},                  {"warnings", model.warnings}};
  }

  nlohmann::json do_metrics(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto x = load_features();
    const auto val = corpus.indices_in(Split::validation);
    if (val.size() < 2) fail(ErrorKind::invalid_input, "metrics needs at least two validation documents");
    std::vector<int> ks;
    for (int k : cfg_.metrics_ks) {
      if (static_cast<std::size_t>(k) <= val.size()) ks.push_back(k);
      else log_ << "[sstgen] metrics: skipping k = " << k << " (only " << val.size() << " validation documents)\n";
    }
    if (ks.empty()) fail(ErrorKind::invalid_input, "no metrics.ks value fits the validation split");
    const auto sub = x.subset(val);
    const auto truth = primary_label_ids(corpus, val);
    std::vector<ClusterQualityReport> rows;
    // A configuration that cannot produce k clusters (BIRCH with too few
    // leaves) is reported and skipped rather than failing the sweep.
    for (auto algo : cfg_.metrics_algorithms) {
      try {
        auto part = sweep({{to_string(x.kind), &sub}}, truth, {algo}, ks, cfg_.metrics_seeds, cfg_.cluster);
        for (auto& r : part) {
          if (r.algorithm == to_string(algo)) rows.push_back(r);
        }
      } catch (const Error& e) {
        log_ << "[sstgen] metrics: " << to_string(algo) << " skipped: " << e.what() << "\n";
      }
    }
    auto baseline = sweep({{to_string(x.kind), &sub}}, truth, {ClusterAlgorithm::random}, ks, cfg_.metrics_seeds, cfg_.cluster);
    rows.insert(rows.end(), baseline.begin(), baseline.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      return std::tie(a.feature_kind, a.algorithm, a.k, a.seed) < std::tie(b.feature_kind, b.algorithm, b.k, b.seed);
    });
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows) j.push_back(to_json(r));
    write_file(dir / "sweep.json", j.dump(2) + "\n");
    write_file(dir / "sweep.csv", sweep_csv(rows));
    write_file(dir / "sweep.md", sweep_markdown(rows));
    return {{"rows", rows.size()}, {"validation_documents", val.size()}};
  }

  nlohmann::json do_landmarks(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto model = load_model();
    const auto x = load_features();
    std::vector<std::size_t> rows;
    std::vector<std::string> texts;
    for (const auto& id : model.doc_ids) {
      rows.push_back(*corpus.index_of(id));
      texts.push_back(corpus.find(id)->text);
    }
    const auto sub = x.subset(rows);
    Gateway* gw = cfg_.landmark_strategy == LandmarkStrategy::llm_choice ? &gateway() : nullptr;
    auto outcome = select_landmarks(model, sub, texts, cfg_.landmark_strategy, gw, cfg_.landmark_seed, cfg_.choice);
    warn("landmarks", outcome.warnings);
    outcome.landmarks.save(dir / "landmarks.jsonl");
    return {{"strategy", to_string(cfg_.landmark_strategy)},
            {"landmarks", outcome.landmarks.size()},
            {"warnings", outcome.warnings}};
  }

  nlohmann::json do_annotate(const std::filesystem::path& dir, bool& completed) {
    const auto corpus = load_corpus_artifact();
    const auto state = dir / "landmarks.jsonl";
    auto set = (cfg_.annotate_mode == AnnotateMode::interactive && std::filesystem::exists(state))
                   ? LandmarkSet::load(state)
                   : load_landmarks(Stage::landmarks);
    nlohmann::json summary{{"mode", cfg_.resolved["annotate"]["mode"]}, {"annotator", cfg_.annotator}};
    switch (cfg_.annotate_mode) {
      case AnnotateMode::reveal_gold:
        summary["revealed"] = reveal_gold_labels(set, corpus, cfg_.catalog);
        break;
      case AnnotateMode::import_file: {
        auto rep = import_labels(set, cfg_.labels_file, cfg_.catalog, cfg_.annotator);
        warn("annotate", rep.rejected);
        summary["applied"] = rep.applied;
        summary["rejected"] = rep.rejected;
        break;
      }
      case AnnotateMode::interactive: {
        auto res = annotate_interactive(set, corpus, cfg_.catalog, *in_, *out_, cfg_.annotator, state);
        completed = !res.quit;
        summary["answered"] = res.labeled;
        summary["skipped"] = res.skipped;
        break;
      }
    }
    set.save(state);
    summary["labeled"] = set.labeled_count();
    summary["landmarks"] = set.size();
    if (completed && set.labeled_count() == 0) fail(ErrorKind::invalid_input, "no landmark received a label");
    return summary;
  }

  nlohmann::json do_augment(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto landmarks = load_landmarks(Stage::annotate);
    std::vector<const LandmarkEntry*> labeled;
    for (const auto& e : landmarks.entries()) {
      if (e.status == LandmarkStatus::labeled) labeled.push_back(&e);
    }
    nlohmann::json acct = nlohmann::json::object();
    Accounting total;
    std::vector<std::string> warnings;
    auto finish = [&](const std::string& method, const std::vector<AugmentedSample>& samples) {
      write_samples(samples, dir / (method + ".jsonl"));
      auto a = tally(samples);
      if (!a.balanced()) fail(ErrorKind::internal, method + ": sample accounting does not balance");
      acct[method] = a.to_json();
      for (const auto& s : samples) total.add(s.status);
      log_ << "[sstgen] augment: " << method << " attempted " << a.attempted << ", ok " << a.ok << "\n";
    };
    if (cfg_.wordnet_enabled) {
      const auto db = SynonymDb::load(cfg_.synonyms);
      std::vector<AugmentedSample> out;
      for (const auto* e : labeled) {
        auto v = wordnet_replace(e->doc_id, corpus.find(e->doc_id)->text, e->labels, db, cfg_.wordnet, cfg_.augment_seed);
        out.insert(out.end(), v.begin(), v.end());
      }
      finish("wordnet", out);
    }
    if (cfg_.rewrite_enabled) {
      std::vector<AugmentedSample> out;
      for (const auto* e : labeled) {
        auto v = llm_rewrite(e->doc_id, corpus.find(e->doc_id)->text, e->labels, gateway(), cfg_.rewrite, cfg_.augment_seed);
        out.insert(out.end(), v.begin(), v.end());
      }
      finish("rewrite", out);
    }
    if (cfg_.rag_enabled) {
      const auto model = load_model();
      RagContext ctx(model, landmarks, corpus, cfg_.catalog);
      std::vector<std::size_t> rows(model.size());
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
      finish("rag", rag_generate(ctx, rows, gateway(), cfg_.catalog, cfg_.rag, cfg_.augment_seed, &warnings));
    }
    warn("augment", warnings);
    acct["total"] = total.to_json();
    write_file(dir / "accounting.json", acct.dump(2) + "\n");
    return {{"accounting", acct}, {"labeled_landmarks", labeled.size()}, {"warnings", warnings}};
  }

  std::vector<std::string> enabled_methods() const {
    std::vector<std::string> m;
    if (cfg_.wordnet_enabled) m.push_back("wordnet");
    if (cfg_.rewrite_enabled) m.push_back("rewrite");
    if (cfg_.rag_enabled) m.push_back("rag");
    return m;
  }

  nlohmann::json do_diagnose(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto landmarks = load_landmarks(Stage::annotate);
    std::vector<AugmentedSample> samples;
    std::map<std::string, std::vector<AugmentedSample>> by_method;
    for (const auto& m : enabled_methods()) {
      by_method[m] = read_samples(stage_dir(Stage::augment) / (m + ".jsonl"));
      samples.insert(samples.end(), by_method[m].begin(), by_method[m].end());
    }
    std::map<std::string, std::string> originals;
    for (auto i : corpus.indices_in(Split::train)) originals[corpus[i].id] = corpus[i].text;

    auto diversity = diversity_report(samples, originals, cfg_.diagnose_embeddings ? &gateway() : nullptr);
    nlohmann::json dj = nlohmann::json::array();
    for (const auto& r : diversity) dj.push_back(to_json(r));
    write_file(dir / "diversity.json", dj.dump(2) + "\n");
    write_file(dir / "diversity.csv", diversity_csv(diversity));
    write_file(dir / "diversity.md", diversity_markdown(diversity));

    // Labels as the generator produced them, before catalog filtering, so
    // hallucinated labels show up in the distribution.
    Corpus labeled;
    for (const auto& e : landmarks.entries()) {
      if (e.status != LandmarkStatus::labeled) continue;
      Document d{e.doc_id, corpus.find(e.doc_id)->text, e.labels, std::nullopt, false};
      labeled.add(std::move(d));
    }
    std::vector<AugmentedSample> unfiltered;
    for (auto s : samples) {
      if (s.method == AugmentMethod::rag && s.status == SampleStatus::label_filtered) {
        auto ex = extract_content_label(s.raw);
        if (ex.ok) {
          s.status = SampleStatus::ok;
          s.labels = ex.labels;
        }
      } else if (s.method == AugmentMethod::rag && s.status == SampleStatus::ok) {
        if (auto ex = extract_content_label(s.raw); ex.ok) s.labels = ex.labels;
      }
      unfiltered.push_back(std::move(s));
    }
    auto dist = label_distribution_report(labeled, unfiltered, cfg_.catalog);
    write_file(dir / "label_distribution.json", to_json(dist).dump(2) + "\n");
    write_file(dir / "label_distribution.csv", label_distribution_csv(dist));

    nlohmann::json lengths = nlohmann::json::object();
    for (const auto& [method, group] : by_method) {
      std::set<std::string> sources;
      std::vector<std::string> aug, orig;
      for (const auto& s : group) {
        if (s.status != SampleStatus::ok) continue;
        aug.push_back(s.text);
        sources.insert(s.source_id);
      }
      for (const auto& id : sources) orig.push_back(originals.count(id) ? originals[id] : corpus.find(id)->text);
      lengths[method] = to_json(length_report(orig, aug));
    }
    write_file(dir / "lengths.json", lengths.dump(2) + "\n");
    return {{"diversity", dj}, {"off_catalog_labels", dist.off_catalog_labels.size()},
            {"catalog_share", dist.catalog_share()}};
  }

  nlohmann::json do_emit(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto landmarks = load_landmarks(Stage::annotate);
    std::vector<DatasetPart> parts;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& name : cfg_.parts) {
      DatasetPart p{name, cfg_.scheme, {}};
      if (name == "landmarks") {
        p.records = records_from_landmarks(landmarks, corpus, cfg_.subject, cfg_.scheme, &cfg_.catalog);
      } else {
        p.records = records_from_samples(read_samples(stage_dir(Stage::augment) / (name + ".jsonl")), cfg_.subject,
                                         cfg_.scheme, &cfg_.catalog);
      }
      write_part(p, cfg_.subject, dir / "parts" / (name + ".jsonl"));
      counts[name] = p.records.size();
      parts.push_back(std::move(p));
    }
    auto combined = combine_datasets(parts, cfg_.emit_seed, cfg_.subject);
    for (const auto& r : combined.records) {
      if (!valid_output(r.output)) fail(ErrorKind::internal, "emitted output violates the label-list format: " + r.output);
    }
    write_dataset(combined, dir / "combined.jsonl");

    std::string prompts_out;
    const auto gold = gold_documents(corpus);
    for (const auto* d : gold) {
      nlohmann::ordered_json j;
      j["id"] = d->id;
      j["instruction"] = build_predict_prompt(d->text, cfg_.subject);
      j["input"] = "";
      prompts_out += j.dump() + "\n";
    }
    write_file(dir / "predict_prompts.jsonl", prompts_out);
    return {{"parts", counts}, {"combined", combined.records.size()}, {"predict_prompts", gold.size()},
            {"scheme", to_string(cfg_.scheme)}, {"subject", cfg_.subject}};
  }

  nlohmann::json do_evaluate(const std::filesystem::path& dir) {
    const auto corpus = load_corpus_artifact();
    const auto gold = gold_documents(corpus);
    if (gold.empty()) fail(ErrorKind::invalid_input, "no gold documents to evaluate against");
    std::vector<MetricsReport> reports;
    if (!cfg_.predictions.empty()) {
      reports.push_back(score_run(read_predictions(cfg_.predictions), gold, cfg_.scheme, "external"));
    }
    if (cfg_.cot_rag) {
      const auto model = load_model();
      const auto x = load_features();
      const auto landmarks = load_landmarks(Stage::annotate);
      std::vector<std::vector<int>> clusters;
      for (const auto* d : gold) {
        clusters.push_back(nearest_clusters(model, x.row(*corpus.index_of(d->id)), cfg_.cot.references));
      }
      auto preds = cot_rag_label(gold, clusters, landmarks, corpus, cfg_.catalog, gateway(), cfg_.cot);
      std::vector<RawPrediction> raw;
      for (const auto& p : preds) raw.push_back({p.doc_id, prediction_output(p)});
      write_predictions(raw, dir / "cot_rag_predictions.jsonl");
      reports.push_back(score_run(raw, gold, cfg_.scheme, "cot_rag"));
    }
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    write_file(dir / "metrics.json", j.dump(2) + "\n");
    write_file(dir / "metrics.md", metrics_markdown(reports));
    return {{"reports", j}};
  }

  PipelineConfig cfg_;
  std::ostream& log_;
  std::istream* in_;
  std::ostream* out_;
  std::unique_ptr<LlmSession> llm_;
  mutable std::map<Stage, std::string> hashes_;
};

}  // namespace sstgen
