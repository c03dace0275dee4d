#pragma once

#ifndef CPPHTTPLIB_TCP_NODELAY
#define CPPHTTPLIB_TCP_NODELAY true  // small JSON requests; avoid Nagle delays
#endif
#include <httplib.h>

#include <memory>
#include <string>
#include <thread>

#include "sstgen/mock_llm.hpp"

namespace sstgen {

/// Serves a MockLlm over HTTP on a background thread. Stops and joins on
/// destruction.
class MockServer {
 public:
  explicit MockServer(std::shared_ptr<const MockLlm> llm) : llm_(std::move(llm)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      auto r = llm_->handle(req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server_.Post("/v1/chat/completions", handler);
    server_.Post("/v1/embeddings", handler);
    // SO_REUSEADDR only: httplib's default SO_REUSEPORT would let a second
    // server share a busy port instead of failing.
    server_.set_socket_options([](auto sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
  }

  ~MockServer() { stop(); }
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds to `port` (0 picks a free one) and starts serving. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      if (!server_.bind_to_port(host, port)) fail(ErrorKind::io, "port " + std::to_string(port) + " is in use");
      port_ = port;
    }
    if (port_ < 0) fail(ErrorKind::io, "could not bind mock server");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  /// Blocks serving on the calling thread.
  void serve_forever(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port)) fail(ErrorKind::io, "port " + std::to_string(port) + " is in use");
    port_ = port;
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  std::shared_ptr<const MockLlm> llm_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace sstgen
