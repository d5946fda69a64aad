#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "interleaf/mock.hpp"
#include "interleaf/synthetic.hpp"

namespace interleaf {

/// Serves the mock backends over the /v1/* wire protocol.
class MockServer {
 public:
  MockServer(TruthIndex truth, MockBackendConfig cfg);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  /// Returns the bound port. Throws IoError when binding fails.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  /// Answer the next `n` requests with 503 (fault injection for tests).
  void fail_next(int n) { fail_budget_.store(n); }
  std::uint64_t requests() const { return requests_.load(); }
  std::string base_url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  std::atomic<int> fail_budget_{0};
  std::atomic<std::uint64_t> requests_{0};
  std::string host_;
  int port_ = 0;
};

}  // namespace interleaf
