#pragma once

// HTTP transport for the gateway, backed by cpp-httplib. Kept out of
// llmgate.hpp so only binaries that talk to real endpoints pay for it.

#ifndef CPPHTTPLIB_TCP_NODELAY
#define CPPHTTPLIB_TCP_NODELAY true  // small JSON requests; avoid Nagle delays
#endif
#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "sstgen/llmgate.hpp"

namespace sstgen {

class HttpTransport : public Transport {
 public:
  /// `base_url` is scheme://host[:port][/prefix]; request paths are appended
  /// to the prefix.
  HttpTransport(const std::string& base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(600))
      : api_key_(std::move(api_key)), timeout_(timeout) {
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::config, "endpoint URL needs a scheme: " + base_url);
    auto path_start = base_url.find('/', scheme_end + 3);
    origin_ = base_url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = base_url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }

  // httplib clients are not safe for concurrent requests, so each call
  // borrows one from a pool and returns it afterwards.
  HttpResult post(const std::string& path, const std::string& body) override {
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto client = acquire();
    auto res = client->Post(prefix_ + path, headers, body, "application/json");
    HttpResult out = res ? HttpResult{res->status, res->body, {}} : HttpResult{0, {}, httplib::to_string(res.error())};
    release(std::move(client));
    return out;
  }

 private:
  std::unique_ptr<httplib::Client> acquire() {
    {
      std::lock_guard lock(mu_);
      if (!idle_.empty()) {
        auto c = std::move(idle_.back());
        idle_.pop_back();
        return c;
      }
    }
    auto c = std::make_unique<httplib::Client>(origin_);
    c->set_read_timeout(timeout_);
    c->set_write_timeout(timeout_);
    c->set_connection_timeout(std::chrono::seconds(10));
    c->set_keep_alive(true);
    return c;
  }

  void release(std::unique_ptr<httplib::Client> c) {
    std::lock_guard lock(mu_);
    idle_.push_back(std::move(c));
  }

  std::string origin_;
  std::string prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
  std::vector<std::unique_ptr<httplib::Client>> idle_;
  std::mutex mu_;
};

inline std::string env_or(const char* name, const std::string& fallback = {}) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

}  // namespace sstgen
