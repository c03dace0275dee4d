#pragma once

// Deterministic stand-in for the chat and embedding endpoints. Responses are
// pure functions of the request (prompt text, seed), so offline pipeline runs
// are reproducible. Recognized prompt families get rule-based answers:
//
//   rewrite   -> the original text with a seeded share of words swapped
//                (or echoed verbatim with rewrite_rule = "echo")
//   rag       -> "Content: <words drawn from the primary and references>\nLabel: [<first reference labels>]"
//                with a configurable share of malformed or off-catalog answers
//   landmark  -> "[k]" for a seeded 1-based k
//   cot       -> "Thought: ...\nLabel: [<first reference labels>]"
//
// Recorded transcripts in `transcript_dir` take precedence over the rules.

#include <json.hpp>

#include <cctype>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sstgen/common.hpp"
#include "sstgen/llmgate.hpp"
#include "sstgen/prompts.hpp"

namespace sstgen {

struct MockLlmConfig {
  std::string rewrite_rule = "perturb";  // perturb | echo
  double rewrite_change_prob = 0.25;
  double rag_malformed_rate = 0.05;
  double rag_offcatalog_rate = 0.05;
  std::size_t embed_dim = 32;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> transcript_dir;
};

class MockLlm {
 public:
  explicit MockLlm(MockLlmConfig cfg = {}) : cfg_(std::move(cfg)) {
    if (cfg_.transcript_dir) store_.emplace(*cfg_.transcript_dir);
  }

  const MockLlmConfig& config() const { return cfg_; }

  std::string chat_content(const ChatRequest& req) const {
    if (store_) {
      if (auto t = store_->find(request_hash(req))) return t->response.get<std::string>();
    }
    const std::string& prompt = req.messages.back().content;
    const std::uint64_t seed = cfg_.seed ^ req.seed.value_or(0);
    std::string out;
    if (prompt.find("*Task Description: Rewrite the following text") != std::string::npos) {
      out = rewrite(prompt, seed);
    } else if (prompt.find(prompts::kRagPrimaryMarker) != std::string::npos) {
      out = rag(prompt, seed);
    } else if (prompt.find(prompts::kClusterDocsMarker) != std::string::npos) {
      out = choose(prompt, seed);
    } else if (prompt.find(prompts::kCotTargetMarker) != std::string::npos) {
      out = "Thought: The target shares vocabulary with the first reference document.\nLabel: " +
            first_reference_labels(prompt);
    } else if (starts_with(prompt, "Assign tags for the following")) {
      out = "[unknown]";
    } else {
      out = prompt;
    }
    if (req.stop) out = truncate_at_stop(out, *req.stop);
    return out;
  }

  /// Seeded hash projection: each token maps to a fixed pseudo-random
  /// direction; a text embeds as the normalized sum over its tokens.
  std::vector<double> embed_one(const std::string& text) const {
    std::vector<double> v(cfg_.embed_dim, 0.0);
    auto tokens = alnum_tokens(text, 2);
    for (const auto& tok : tokens) {
      auto rng = make_rng(fnv1a64(tok) ^ cfg_.seed, 0xe3bd);
      for (auto& x : v) x += standard_normal(rng);
    }
    double norm = 0;
    for (double x : v) norm += x * x;
    if (norm == 0) {
      v[0] = 1.0;
      return v;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
  }

  /// Handles one wire request; `path` is the endpoint path.
  HttpResult handle(const std::string& path, const std::string& body) const {
    nlohmann::json req;
    try {
      req = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      return {400, nlohmann::json{{"error", e.what()}}.dump(), {}};
    }
    try {
      if (path == "/v1/chat/completions") {
        auto content = chat_content(chat_request_from_wire(req));
        nlohmann::json resp{{"object", "chat.completion"},
                            {"model", req.value("model", "")},
                            {"choices", {{{"index", 0},
                                          {"message", {{"role", "assistant"}, {"content", content}}},
                                          {"finish_reason", "stop"}}}}};
        return {200, resp.dump(), {}};
      }
      if (path == "/v1/embeddings") {
        std::vector<std::string> input = req.at("input").is_string()
                                             ? std::vector<std::string>{req["input"].get<std::string>()}
                                             : req.at("input").get<std::vector<std::string>>();
        nlohmann::json data = nlohmann::json::array();
        for (std::size_t i = 0; i < input.size(); ++i) {
          data.push_back({{"object", "embedding"}, {"index", i}, {"embedding", embed_one(input[i])}});
        }
        return {200, nlohmann::json{{"object", "list"}, {"model", req.value("model", "")}, {"data", data}}.dump(), {}};
      }
    } catch (const std::exception& e) {
      return {400, nlohmann::json{{"error", e.what()}}.dump(), {}};
    }
    return {404, R"({"error":"unknown endpoint"})", {}};
  }

 private:
  static std::string section_after(const std::string& prompt, std::string_view marker, std::string_view until) {
    auto b = prompt.find(marker);
    if (b == std::string::npos) return {};
    b += marker.size();
    auto e = prompt.find(until, b);
    return prompt.substr(b, e == std::string::npos ? std::string::npos : e - b);
  }

  std::string rewrite(const std::string& prompt, std::uint64_t seed) const {
    auto text = section_after(prompt, "*Original Text:\n", "\n\nRewritten Text:");
    if (cfg_.rewrite_rule == "echo") return text;
    auto rng = make_rng(fnv1a64(text) ^ seed, 0x7e37);
    auto words = split(text, ' ');
    for (auto& w : words) {
      if (w.size() < 3 || uniform01(rng) >= cfg_.rewrite_change_prob) continue;
      // One of three stand-in alternatives per word, so different variants
      // sometimes agree on a replacement.
      const auto pick = uniform_index(rng, 3);
      w = "alt" + std::to_string(fnv1a64(to_lower(w), pick) % 997);
    }
    return join(words, " ");
  }

  static std::vector<std::string> alnum_words(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& w : split(text, ' ')) {
      std::string t;
      for (char c : w) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') t += c;
      }
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  }

  static std::string first_reference_labels(const std::string& prompt) {
    auto refs = section_after(prompt, prompts::kRagLabeledMarker, "\n*");
    auto pos = refs.find("Label: [");
    if (pos == std::string::npos) return "[unknown]";
    auto end = refs.find(']', pos);
    return refs.substr(pos + 7, end == std::string::npos ? std::string::npos : end - pos - 6);
  }

  std::string rag(const std::string& prompt, std::uint64_t seed) const {
    auto primary = section_after(prompt, prompts::kRagPrimaryMarker, "\n\n*Task:");
    auto unlabeled_block = section_after(prompt, prompts::kRagUnlabeledMarker, "\n\n*Primary");
    std::vector<std::string> unlabeled;
    for (const auto& part : split(unlabeled_block, '\n')) {
      if (starts_with(part, "Content: ")) unlabeled.push_back(part.substr(9));
    }
    auto rng = make_rng(fnv1a64(prompt) ^ seed, 0x4a6);
    const double roll = uniform01(rng);
    if (roll < cfg_.rag_malformed_rate) {
      return "I am unable to produce a document in the requested format.";
    }
    // A new document of the primary's length, drawn word by word from the
    // primary and every reference, so each variant mixes vocabulary anew.
    const auto primary_words = alnum_words(primary);
    std::vector<std::string> pool = primary_words;
    auto labeled_block = section_after(prompt, prompts::kRagLabeledMarker, "\n*");
    for (const auto& part : split(labeled_block, '\n')) {
      if (starts_with(part, "Content: ")) unlabeled.push_back(part.substr(9));
    }
    for (const auto& doc : unlabeled) {
      auto w = alnum_words(doc);
      pool.insert(pool.end(), w.begin(), w.end());
    }
    std::vector<std::string> out_words;
    for (std::size_t i = 0; i < primary_words.size() && !pool.empty(); ++i) {
      out_words.push_back(pool[uniform_index(rng, pool.size())]);
    }
    std::string content = join(out_words, " ");
    if (content.empty()) content = "Empty primary document";
    content += ".";
    std::string label = first_reference_labels(prompt);
    if (roll < cfg_.rag_malformed_rate + cfg_.rag_offcatalog_rate) label = "[made-up-tag]";
    return "Content: " + content + "\nLabel: " + label;
  }

  static std::string choose(const std::string& prompt, std::uint64_t seed) {
    std::size_t n = 0;
    while (prompt.find("\n" + std::to_string(n + 1) + "-. ") != std::string::npos) ++n;
    if (n == 0) return "[1]";
    const auto k = 1 + (fnv1a64(prompt) ^ seed) % n;
    return "The most representative document is [" + std::to_string(k) + "].";
  }

  MockLlmConfig cfg_;
  std::optional<TranscriptStore> store_;
};

/// In-process transport speaking the wire protocol to a MockLlm.
class MockTransport : public Transport {
 public:
  explicit MockTransport(std::shared_ptr<const MockLlm> llm) : llm_(std::move(llm)) {}
  HttpResult post(const std::string& path, const std::string& body) override {
    ++calls_;
    return llm_->handle(path, body);
  }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::shared_ptr<const MockLlm> llm_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace sstgen
