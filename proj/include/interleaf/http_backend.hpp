#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "json.hpp"

#include "interleaf/backend.hpp"

namespace interleaf {

/// Base URLs ("http://host:port") for each service.
struct Endpoints {
  std::string parse;
  std::string detect;
  std::string verify;
  std::string segment;

  /// Every endpoint set to `base`.
  static Endpoints all(const std::string& base);
  bool complete() const { return !detect.empty() && !verify.empty() && !segment.empty(); }
  /// Throws ValidationError on a non-empty URL that is not http(s)://host[:port].
  void validate() const;
};

struct ClientConfig {
  double timeout_s = 30.0;
  int retries = 3;
  double backoff_initial_s = 0.2;
  double backoff_max_s = 5.0;
  /// Each backoff is scaled by a uniform factor in [1 - jitter, 1 + jitter].
  double jitter = 0.5;
  int max_in_flight = 8;
};

/// Talks to the four services over HTTP. 4xx answers raise ProtocolError
/// immediately; connection failures, timeouts, 429 and 5xx are retried and
/// end in StageUnavailable. Safe for concurrent callers.
class HttpBackend : public ModelBackend {
 public:
  HttpBackend(Endpoints endpoints, ClientConfig cfg);
  ~HttpBackend() override;

  ParseResponse parse(const ParseRequest& request) override;
  DetectResponse detect(const DetectRequest& request) override;
  VerifyResponse verify(const VerifyRequest& request) override;
  SegmentResponse segment(const SegmentRequest& request) override;

  /// Raw call; exposed for tests.
  nlohmann::json call(RequestKind kind, const nlohmann::json& body);
  std::uint64_t attempts() const { return attempts_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::uint64_t> attempts_{0};
};

}  // namespace interleaf
