#pragma once

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sstgen/common.hpp"

namespace sstgen {

struct Message {
  std::string role;  // system | user | assistant
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  double temperature = 0.0;
  std::optional<std::vector<std::string>> stop;
  std::optional<int> max_tokens;
  // Sampling seed forwarded to the endpoint. Part of the request identity so
  // repeated variants of one prompt get distinct transcripts.
  std::optional<std::uint64_t> seed;
};

inline ChatRequest user_request(std::string model, std::string prompt, double temperature,
                                std::optional<std::uint64_t> seed = std::nullopt) {
  ChatRequest r;
  r.model = std::move(model);
  r.messages.push_back({"user", std::move(prompt)});
  r.temperature = temperature;
  r.seed = seed;
  return r;
}

inline void validate(const ChatRequest& req) {
  if (req.messages.empty()) fail(ErrorKind::invalid_input, "chat request has no messages");
  for (const auto& m : req.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant") {
      fail(ErrorKind::invalid_input, "bad message role '" + m.role + "'");
    }
  }
  if (!(req.temperature >= 0.0)) fail(ErrorKind::invalid_input, "temperature must be >= 0");
  if (req.max_tokens && *req.max_tokens <= 0) fail(ErrorKind::invalid_input, "max_tokens must be positive");
}

/// Wire body for POST /v1/chat/completions.
inline nlohmann::json to_wire(const ChatRequest& req) {
  nlohmann::json j;
  j["model"] = req.model;
  j["messages"] = nlohmann::json::array();
  for (const auto& m : req.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["temperature"] = req.temperature;
  if (req.stop) j["stop"] = *req.stop;
  if (req.max_tokens) j["max_tokens"] = *req.max_tokens;
  if (req.seed) j["seed"] = *req.seed;
  return j;
}

inline ChatRequest chat_request_from_wire(const nlohmann::json& j) {
  ChatRequest r;
  r.model = j.value("model", "");
  for (const auto& m : j.at("messages")) r.messages.push_back({m.at("role"), m.at("content")});
  r.temperature = j.value("temperature", 0.0);
  if (j.contains("stop") && !j["stop"].is_null()) {
    r.stop = j["stop"].is_string() ? std::vector<std::string>{j["stop"].get<std::string>()}
                                   : j["stop"].get<std::vector<std::string>>();
  }
  if (j.contains("max_tokens") && !j["max_tokens"].is_null()) r.max_tokens = j["max_tokens"].get<int>();
  if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::uint64_t>();
  return r;
}

/// Cuts `text` right after the earliest stop sequence, keeping the sequence
/// itself (a bracketed answer stops at, and includes, its closing "]").
inline std::string truncate_at_stop(const std::string& text, const std::vector<std::string>& stop) {
  std::size_t cut = std::string::npos;
  for (const auto& s : stop) {
    if (s.empty()) continue;
    auto pos = text.find(s);
    if (pos != std::string::npos) cut = std::min(cut, pos + s.size());
  }
  return cut == std::string::npos ? text : text.substr(0, cut);
}

/// Stable digest of the request. nlohmann::json serializes object keys in
/// sorted order, so the digest does not depend on field insertion order.
inline std::string request_hash(const ChatRequest& req) { return sha256_hex(to_wire(req).dump()); }

inline std::string embed_request_hash(const std::string& model, const std::vector<std::string>& texts) {
  return sha256_hex(nlohmann::json{{"model", model}, {"input", texts}}.dump());
}

// ---------------------------------------------------------------------------
// transport

struct HttpResult {
  int status = 0;  // 0 when the transport itself failed
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult post(const std::string& path, const std::string& body) = 0;
};

inline bool is_retryable(const HttpResult& r) {
  return r.status == 0 || r.status == 408 || r.status == 429 || r.status >= 500;
}

// ---------------------------------------------------------------------------
// transcripts

enum class GatewayMode { live, record, replay };

inline GatewayMode parse_gateway_mode(const std::string& s) {
  if (s == "live") return GatewayMode::live;
  if (s == "record") return GatewayMode::record;
  if (s == "replay") return GatewayMode::replay;
  fail(ErrorKind::config, "unknown gateway mode '" + s + "'");
}

struct Transcript {
  std::string request_hash;
  nlohmann::json request;
  nlohmann::json response;  // string for chat, array of vectors for embeddings
  double latency_ms = 0.0;
  std::string mode;  // live | replay
};

/// Directory of `<hash>.json` files.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  std::optional<Transcript> find(const std::string& hash) const {
    auto path = dir_ / (hash + ".json");
    if (!std::filesystem::exists(path)) return std::nullopt;
    auto j = nlohmann::json::parse(read_file(path));
    Transcript t;
    t.request_hash = j.at("hash");
    t.request = j.value("request", nlohmann::json());
    t.response = j.at("response");
    t.latency_ms = j.value("latency_ms", 0.0);
    t.mode = "replay";
    return t;
  }

  void save(const Transcript& t) {
    nlohmann::json j{{"hash", t.request_hash},
                     {"request", t.request},
                     {"response", t.response},
                     {"latency_ms", t.latency_ms},
                     {"mode", t.mode}};
    std::lock_guard lock(mu_);
    auto tmp = dir_ / (t.request_hash + ".json.tmp");
    write_file(tmp, j.dump(2) + "\n");
    std::filesystem::rename(tmp, dir_ / (t.request_hash + ".json"));
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// gateway

struct GatewayConfig {
  std::string chat_model = "generator";
  std::string embed_model = "embedder";
  GatewayMode mode = GatewayMode::live;
  std::optional<std::filesystem::path> transcript_dir;
  int max_attempts = 5;
  std::chrono::milliseconds backoff_initial{250};
  double backoff_factor = 2.0;
  std::size_t max_inflight = 4;
  std::size_t embed_batch = 32;
  std::size_t embed_token_limit = 8192;  // approximated as characters / 3
};

struct ChatOutcome {
  bool ok = false;
  std::string text;
  std::string error;
};

struct GatewayStats {
  std::size_t requests = 0;  // caller-issued requests
  std::size_t attempts = 0;  // HTTP attempts, retries included
  std::size_t replayed = 0;
};

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(GatewayConfig cfg, std::shared_ptr<Transport> chat_transport, std::shared_ptr<Transport> embed_transport = nullptr)
      : cfg_(std::move(cfg)), chat_(std::move(chat_transport)), embed_(std::move(embed_transport)) {
    if (!embed_) embed_ = chat_;
    if (cfg_.transcript_dir) store_ = std::make_unique<TranscriptStore>(*cfg_.transcript_dir);
    if ((cfg_.mode != GatewayMode::live) && !store_) {
      fail(ErrorKind::config, "record/replay mode needs a transcript directory");
    }
    sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  void set_sleeper(Sleeper s) { sleep_ = std::move(s); }
  const GatewayConfig& config() const { return cfg_; }

  GatewayStats stats() const {
    return {requests_.load(), attempts_.load(), replayed_.load()};
  }

  /// First-choice message content for the request.
  std::string chat(const ChatRequest& req) {
    validate(req);
    ++requests_;
    const auto hash = request_hash(req);
    if (store_ && cfg_.mode != GatewayMode::live) {
      if (auto t = store_->find(hash)) {
        ++replayed_;
        return t->response.get<std::string>();
      }
      if (cfg_.mode == GatewayMode::replay) fail(ErrorKind::gateway, "replay miss for request " + hash);
    }
    const auto wire = to_wire(req);
    const auto start = std::chrono::steady_clock::now();
    const auto body = post_with_retry(*chat_, "/v1/chat/completions", wire.dump());
    std::string content;
    try {
      auto j = nlohmann::json::parse(body);
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::gateway, std::string("malformed chat response: ") + e.what());
    }
    if (req.stop) content = truncate_at_stop(content, *req.stop);
    if (store_ && cfg_.mode == GatewayMode::record) {
      store_->save({hash, wire, content, elapsed_ms(start), "live"});
    }
    return content;
  }

  /// Issues every request with at most max_inflight outstanding. Result i
  /// belongs to request i; failures are captured per slot.
  std::vector<ChatOutcome> chat_many(const std::vector<ChatRequest>& reqs) {
    std::vector<ChatOutcome> out(reqs.size());
    parallel_for(reqs.size(), cfg_.max_inflight, [&](std::size_t i) {
      try {
        out[i].text = chat(reqs[i]);
        out[i].ok = true;
      } catch (const Error& e) {
        out[i].error = e.what();
      }
    });
    return out;
  }

  /// One dense vector per input text, input order preserved.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
      if (texts[i].size() / 3 > cfg_.embed_token_limit) {
        fail(ErrorKind::invalid_input, "text " + std::to_string(i) + " exceeds the embedding token limit");
      }
    }
    const std::size_t batch = std::max<std::size_t>(1, cfg_.embed_batch);
    const std::size_t nbatches = (texts.size() + batch - 1) / batch;
    std::vector<std::vector<std::vector<double>>> parts(nbatches);
    parallel_for(nbatches, cfg_.max_inflight, [&](std::size_t b) {
      std::vector<std::string> chunk(texts.begin() + b * batch,
                                     texts.begin() + std::min(texts.size(), (b + 1) * batch));
      parts[b] = embed_batch(chunk);
    });
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    std::size_t dim = 0;
    for (auto& p : parts) {
      for (auto& v : p) {
        if (out.empty()) dim = v.size();
        if (v.size() != dim || dim == 0) fail(ErrorKind::gateway, "embedding dimension mismatch across batches");
        out.push_back(std::move(v));
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<double>> embed_batch(const std::vector<std::string>& texts) {
    ++requests_;
    const auto hash = embed_request_hash(cfg_.embed_model, texts);
    if (store_ && cfg_.mode != GatewayMode::live) {
      if (auto t = store_->find(hash)) {
        ++replayed_;
        return t->response.get<std::vector<std::vector<double>>>();
      }
      if (cfg_.mode == GatewayMode::replay) fail(ErrorKind::gateway, "replay miss for embedding batch " + hash);
    }
    nlohmann::json wire{{"model", cfg_.embed_model}, {"input", texts}};
    const auto start = std::chrono::steady_clock::now();
    const auto body = post_with_retry(*embed_, "/v1/embeddings", wire.dump());
    std::vector<std::vector<double>> vecs(texts.size());
    try {
      auto j = nlohmann::json::parse(body);
      const auto& data = j.at("data");
      if (data.size() != texts.size()) fail(ErrorKind::gateway, "embedding response has wrong row count");
      for (std::size_t i = 0; i < data.size(); ++i) {
        // Entries carry an explicit index; fall back to position.
        std::size_t idx = data[i].value("index", i);
        if (idx >= vecs.size()) fail(ErrorKind::gateway, "embedding index out of range");
        vecs[idx] = data[i].at("embedding").get<std::vector<double>>();
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::gateway, std::string("malformed embedding response: ") + e.what());
    }
    if (store_ && cfg_.mode == GatewayMode::record) {
      store_->save({hash, wire, vecs, elapsed_ms(start), "live"});
    }
    return vecs;
  }

  std::string post_with_retry(Transport& t, const std::string& path, const std::string& body) {
    auto delay = cfg_.backoff_initial;
    HttpResult last;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      ++attempts_;
      last = t.post(path, body);
      if (last.status >= 200 && last.status < 300) return last.body;
      if (!is_retryable(last)) {
        fail(ErrorKind::gateway, path + " failed with HTTP " + std::to_string(last.status) + ": " + last.body);
      }
      if (attempt < cfg_.max_attempts) {
        sleep_(delay);
        delay = std::chrono::milliseconds(static_cast<long long>(delay.count() * cfg_.backoff_factor));
      }
    }
    fail(ErrorKind::gateway, path + " failed after " + std::to_string(cfg_.max_attempts) + " attempts (last status " +
                                 std::to_string(last.status) + (last.error.empty() ? "" : ", " + last.error) + ")");
  }

  static double elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }

  GatewayConfig cfg_;
  std::shared_ptr<Transport> chat_;
  std::shared_ptr<Transport> embed_;
  std::unique_ptr<TranscriptStore> store_;
  Sleeper sleep_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> attempts_{0};
  std::atomic<std::size_t> replayed_{0};
};

}  // namespace sstgen
