#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace testsupport {

inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(SSTGEN_FIXTURE_DIR) / name; }

/// Mock-endpoint config over the 200-document Reuters-style fixture with
/// every augmentation method on. Metrics are off unless re-enabled.
inline nlohmann::json mock_config(const std::filesystem::path& run_dir, int k = 20) {
  return {
      {"run_dir", run_dir.string()},
      {"dataset", "reuters"},
      {"corpus", {{"path", fixture("reuters_200.jsonl").string()}, {"split_seed", 42}}},
      {"features", {{"kind", "embedding"}}},
      {"cluster", {{"algorithm", "gmm"}, {"k", k}, {"seed", 42}}},
      {"metrics", {{"enabled", false}}},
      {"landmarks", {{"strategy", "llm_choice"}}},
      {"annotate", {{"mode", "reveal_gold"}}},
      {"augment",
       {{"seed", 42},
        {"wordnet", {{"enabled", true}, {"synonyms", fixture("synonyms.tsv").string()}, {"variants", 10}}},
        {"rewrite", {{"enabled", true}, {"variants", 10}}},
        {"rag", {{"enabled", true}, {"variants", 3}}}}},
      {"emit", {{"parts", {"landmarks", "wordnet", "rewrite", "rag"}}}},
      {"llm", {{"mode", "mock"}}},
  };
}

}  // namespace testsupport
