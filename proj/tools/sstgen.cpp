// sstgen command line: pipeline stages over one config file, module-level
// subcommands that override the relevant config keys, and the mock LLM
// server for offline runs.
//
// Exit codes: 0 ok, 1 user error (bad input, config or file), 2 internal or
// gateway failure.

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "sstgen/pipeline.hpp"

namespace {

using nlohmann::json;
using namespace sstgen;

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_input:
    case ErrorKind::config:
    case ErrorKind::parse:
    case ErrorKind::io: return 1;
    case ErrorKind::gateway:
    case ErrorKind::internal: return 2;
  }
  return 2;
}

/// "tfidf:<max>" or "embedding" as a config patch.
json features_patch(const std::string& spec) {
  if (spec == "embedding") return {{"kind", "embedding"}};
  if (starts_with(spec, "tfidf")) {
    json j{{"kind", "tfidf"}};
    if (spec.size() > 5) {
      if (spec[5] != ':') fail(ErrorKind::invalid_input, "--features expects tfidf:<max> or embedding");
      std::size_t max = 0;
      try {
        max = std::stoul(spec.substr(6));
      } catch (const std::exception&) {
        fail(ErrorKind::invalid_input, "--features tfidf:<max> needs an integer, got '" + spec.substr(6) + "'");
      }
      if (max < 16) fail(ErrorKind::invalid_input, "--features tfidf:<max> needs max >= 16");
      j["max_features"] = max;
    }
    return j;
  }
  fail(ErrorKind::invalid_input, "--features expects tfidf:<max> or embedding, got '" + spec + "'");
}

void print_outcomes(const std::vector<StageOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    std::cout << to_string(o.stage) << "\t" << (o.cache_hit ? "cached" : o.completed ? "done" : "incomplete") << "\t"
              << o.dir.string() << "\n";
  }
}

struct Globals {
  std::string config;
  std::string run_dir;
  std::string features;
  std::string llm_mode;
};

Pipeline make_pipeline(const Globals& g, json patch) {
  if (g.config.empty()) fail(ErrorKind::config, "--config is required for this command");
  if (!g.run_dir.empty()) patch["run_dir"] = std::filesystem::absolute(g.run_dir).string();
  if (!g.features.empty()) patch["features"].merge_patch(features_patch(g.features));
  if (!g.llm_mode.empty()) patch["llm"]["mode"] = g.llm_mode;
  return Pipeline(PipelineConfig::load(g.config, patch));
}

int run_one(const Globals& g, const json& patch, Stage s) {
  auto p = make_pipeline(g, patch);
  auto o = p.run_stage(s);
  print_outcomes({o});
  return 0;
}

int serve_mock(const std::string& host, int port, const std::string& fixtures, const std::string& rule,
               std::uint64_t seed, std::size_t embed_dim) {
  MockLlmConfig mc;
  mc.rewrite_rule = rule;
  mc.seed = seed;
  mc.embed_dim = embed_dim;
  if (!fixtures.empty()) {
    if (!std::filesystem::is_directory(fixtures)) fail(ErrorKind::invalid_input, "no such fixture directory: " + fixtures);
    mc.transcript_dir = fixtures;
  }
  MockServer server(std::make_shared<const MockLlm>(mc));
  const int bound = server.start(host, port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "mock LLM listening on http://" << host << ":" << bound << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::cout << "mock LLM stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sstgen: cluster, label landmarks, augment and emit instruction-tuning data"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("-c,--config", g.config, "Pipeline config file (JSON)");
  app.add_option("--run-dir", g.run_dir, "Override run_dir");
  app.add_option("--features", g.features, "Feature spec: tfidf:<max> or embedding");
  app.add_option("--llm-mode", g.llm_mode, "Override llm.mode (mock, live, replay)")
      ->check(CLI::IsMember({"mock", "live", "replay"}));

  int rc = 0;
  std::function<int()> action;

  auto* run = app.add_subcommand("run", "Run every stage in order, reusing completed ones");
  std::string until;
  run->add_option("--until", until, "Last stage to run");
  run->callback([&] {
    action = [&] {
      auto p = make_pipeline(g, json::object());
      std::optional<Stage> u;
      if (!until.empty()) u = parse_stage(until);
      print_outcomes(p.run(u));
      return 0;
    };
  });

  auto* stage = app.add_subcommand("stage", "Run one stage (its upstream stages must be complete)");
  std::string stage_name;
  stage->add_option("name", stage_name, "Stage name")->required();
  stage->callback([&] { action = [&] { return run_one(g, json::object(), parse_stage(stage_name)); }; });

  auto* status = app.add_subcommand("status", "List stage directories and whether they are complete");
  status->callback([&] {
    action = [&] {
      auto p = make_pipeline(g, json::object());
      for (auto s : kAllStages) {
        std::cout << to_string(s) << "\t" << (p.is_done(s) ? "done" : "missing") << "\t" << p.stage_dir(s).string()
                  << "\n";
      }
      return 0;
    };
  });

  // cluster fit
  auto* cluster = app.add_subcommand("cluster", "Clustering commands");
  cluster->require_subcommand(1);
  auto* fit = cluster->add_subcommand("fit", "Fit the clustering model on the training split");
  std::string algo;
  int k = 0;
  long long cseed = -1;
  fit->add_option("--algo", algo, "gmm, hierarchical, birch, bisecting_kmeans or random");
  fit->add_option("--k", k, "Number of clusters");
  fit->add_option("--seed", cseed, "Random seed");
  fit->callback([&] {
    action = [&] {
      json c = json::object();
      if (!algo.empty()) c["algorithm"] = algo;
      if (k) c["k"] = k;
      if (cseed >= 0) c["seed"] = cseed;
      return run_one(g, {{"cluster", c}}, Stage::cluster);
    };
  });

  // landmark select / annotate
  auto* landmark = app.add_subcommand("landmark", "Landmark selection and annotation");
  landmark->require_subcommand(1);
  auto* select = landmark->add_subcommand("select", "Pick one representative document per cluster");
  std::string strategy;
  long long lseed = -1;
  select->add_option("--strategy", strategy, "llm, centroid or random");
  select->add_option("--seed", lseed, "Seed for the random strategy");
  select->callback([&] {
    action = [&] {
      json l = json::object();
      if (!strategy.empty()) l["strategy"] = strategy;
      if (lseed >= 0) l["seed"] = lseed;
      return run_one(g, {{"landmarks", l}}, Stage::landmarks);
    };
  });
  auto* annotate = landmark->add_subcommand("annotate", "Attach labels to the selected landmarks");
  bool interactive = false, reveal = false;
  std::string import_path, annotator;
  auto* o_int = annotate->add_flag("--interactive", interactive, "Prompt for labels on the console");
  auto* o_imp = annotate->add_option("--import", import_path, "JSONL labels file {cluster, doc_id, labels}");
  auto* o_rev = annotate->add_flag("--reveal-gold", reveal, "Use the hidden gold labels (simulated annotator)");
  o_int->excludes(o_imp)->excludes(o_rev);
  o_imp->excludes(o_rev);
  annotate->add_option("--annotator", annotator, "Annotator name recorded with each label");
  annotate->callback([&] {
    action = [&] {
      json a = json::object();
      if (interactive) a["mode"] = "interactive";
      if (reveal) a["mode"] = "reveal_gold";
      if (!import_path.empty()) {
        a["mode"] = "import";
        a["labels_file"] = std::filesystem::absolute(import_path).string();
      }
      if (!annotator.empty()) a["annotator"] = annotator;
      return run_one(g, {{"annotate", a}}, Stage::annotate);
    };
  });

  // augment wordnet|rewrite|rag
  auto* augment = app.add_subcommand("augment", "Generate augmented samples");
  std::string method;
  int variants = 0;
  augment->add_option("method", method, "wordnet, rewrite or rag")
      ->required()
      ->check(CLI::IsMember({"wordnet", "rewrite", "rag"}));
  augment->add_option("--variants", variants, "Variants per source document");
  augment->callback([&] {
    action = [&] {
      json m{{"enabled", true}};
      if (variants) m["variants"] = variants;
      return run_one(g, {{"augment", {{method, m}}}}, Stage::augment);
    };
  });

  // emit
  auto* emit = app.add_subcommand("emit", "Build instruction-tuning JSONL");
  std::string scheme, subject, out;
  std::vector<std::string> parts;
  long long eseed = -1;
  emit->add_option("--scheme", scheme, "multi_label or hierarchical_2");
  emit->add_option("--subject", subject, "Subject phrase in the instruction");
  emit->add_option("--parts", parts, "Part names (config mode) or part JSONL files to combine")->delimiter(',');
  emit->add_option("--out", out, "Output JSONL when combining part files");
  emit->add_option("--seed", eseed, "Shuffle seed");
  emit->callback([&] {
    action = [&] {
      const bool files = !parts.empty() && std::all_of(parts.begin(), parts.end(), [](const std::string& p) {
        return std::filesystem::path(p).extension() == ".jsonl";
      });
      if (files) {
        if (out.empty()) fail(ErrorKind::invalid_input, "--out is required when combining part files");
        const auto fallback = scheme.empty() ? LabelScheme::multi_label : parse_scheme(scheme);
        std::vector<DatasetPart> loaded;
        for (const auto& p : parts) {
          auto part = read_part(p, fallback);
          if (!scheme.empty() && part.scheme != fallback) {
            fail(ErrorKind::invalid_input, p + " uses scheme " + to_string(part.scheme) + ", not " + scheme);
          }
          for (const auto& r : part.records) {
            if (!valid_output(r.output)) fail(ErrorKind::invalid_input, p + ": invalid output field '" + r.output + "'");
          }
          loaded.push_back(std::move(part));
        }
        auto ds = combine_datasets(loaded, eseed >= 0 ? static_cast<std::uint64_t>(eseed) : 42, subject);
        write_dataset(ds, out);
        std::cout << "wrote " << ds.records.size() << " records to " << out << "\n";
        return 0;
      }
      json e = json::object();
      if (!scheme.empty()) e["scheme"] = scheme;
      if (!subject.empty()) e["subject"] = subject;
      if (!parts.empty()) e["parts"] = parts;
      if (eseed >= 0) e["seed"] = eseed;
      auto p = make_pipeline(g, {{"emit", e}});
      auto o = p.run_stage(Stage::emit);
      if (!out.empty()) std::filesystem::copy_file(o.dir / "combined.jsonl", out, std::filesystem::copy_options::overwrite_existing);
      print_outcomes({o});
      return 0;
    };
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the test split");
  std::string predictions;
  bool cot = false;
  evaluate->add_option("--predictions", predictions, "Predictions JSONL {id, output}");
  evaluate->add_flag("--cot-rag", cot, "Also label the test split with the chain-of-thought baseline");
  evaluate->callback([&] {
    action = [&] {
      json e = json::object();
      if (!predictions.empty()) e["predictions"] = std::filesystem::absolute(predictions).string();
      if (cot) e["cot_rag"] = true;
      auto p = make_pipeline(g, {{"evaluate", e}});
      auto o = p.run_stage(Stage::evaluate);
      print_outcomes({o});
      std::cout << read_file(o.dir / "metrics.md");
      return 0;
    };
  });

  // mock-llm serve
  auto* mock = app.add_subcommand("mock-llm", "Deterministic stand-in for the chat and embedding endpoints");
  mock->require_subcommand(1);
  auto* serve = mock->add_subcommand("serve", "Serve until interrupted");
  std::string host = "127.0.0.1", fixtures, rule = "perturb";
  int port = 8000;
  std::uint64_t mseed = 0;
  std::size_t dim = 32;
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--fixtures", fixtures, "Transcript directory replayed before the rules");
  serve->add_option("--rule", rule, "Rewrite rule")->check(CLI::IsMember({"perturb", "echo"}));
  serve->add_option("--seed", mseed, "Response seed");
  serve->add_option("--embed-dim", dim, "Embedding dimension");
  serve->callback([&] { action = [&] { return serve_mock(host, port, fixtures, rule, mseed, dim); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    rc = action ? action() : 0;
  } catch (const Error& e) {
    std::cerr << "sstgen: error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "sstgen: error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "sstgen: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sstgen: internal error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
