#include "interleaf/http_backend.hpp"

#include <chrono>
#include <random>
#include <regex>
#include <semaphore>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"

#include "interleaf/errors.hpp"

namespace interleaf {

Endpoints Endpoints::all(const std::string& base) { return {base, base, base, base}; }

void Endpoints::validate() const {
  static const std::regex url(R"(^https?://[A-Za-z0-9_.\-]+(:[0-9]{1,5})?/?$)");
  for (const std::string* u : {&parse, &detect, &verify, &segment}) {
    if (!u->empty() && !std::regex_match(*u, url)) {
      throw ValidationError("malformed endpoint URL '" + *u + "'");
    }
  }
}

struct HttpBackend::Impl {
  Endpoints endpoints;
  ClientConfig cfg;
  std::counting_semaphore<4096> in_flight;

  Impl(Endpoints e, ClientConfig c)
      : endpoints(std::move(e)), cfg(c), in_flight(std::clamp(c.max_in_flight, 1, 4096)) {}

  const std::string& base_for(RequestKind k) const {
    switch (k) {
      case RequestKind::Parse: return endpoints.parse;
      case RequestKind::Detect: return endpoints.detect;
      case RequestKind::Verify: return endpoints.verify;
      case RequestKind::Segment: return endpoints.segment;
    }
    return endpoints.detect;
  }
};

HttpBackend::HttpBackend(Endpoints endpoints, ClientConfig cfg) {
  endpoints.validate();
  if (cfg.retries < 0 || cfg.timeout_s <= 0 || cfg.max_in_flight < 1) {
    throw ValidationError("client config needs retries >= 0, timeout > 0, max_in_flight >= 1");
  }
  impl_ = std::make_unique<Impl>(std::move(endpoints), cfg);
}

HttpBackend::~HttpBackend() = default;

namespace {

double jitter_factor(double jitter) {
  thread_local std::mt19937_64 gen{std::random_device{}()};
  std::uniform_real_distribution<double> dist(1.0 - jitter, 1.0 + jitter);
  return dist(gen);
}

struct SemaphoreGuard {
  std::counting_semaphore<4096>& sem;
  explicit SemaphoreGuard(std::counting_semaphore<4096>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreGuard() { sem.release(); }
};

}  // namespace

nlohmann::json HttpBackend::call(RequestKind kind, const nlohmann::json& body) {
  const std::string& base = impl_->base_for(kind);
  if (base.empty()) {
    throw StageUnavailable(std::string("no endpoint configured for ") + std::string(to_string(kind)));
  }
  const ClientConfig& cfg = impl_->cfg;
  const std::string path(endpoint_path(kind));
  const std::string payload = body.dump();
  const httplib::Headers headers{{kProtocolHeader, std::string(kProtocolVersion)}};

  std::string last_error;
  double backoff = cfg.backoff_initial_s;
  for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
    if (attempt > 0) {
      const double wait = std::min(backoff, cfg.backoff_max_s) * jitter_factor(cfg.jitter);
      std::this_thread::sleep_for(std::chrono::duration<double>(std::max(0.0, wait)));
      backoff *= 2.0;
    }
    ++attempts_;
    httplib::Result res;
    {
      SemaphoreGuard guard(impl_->in_flight);
      httplib::Client client(base);
      const auto timeout = std::chrono::duration<double>(cfg.timeout_s);
      client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      res = client.Post(path, headers, payload, "application/json");
    }
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::debug("{} {} attempt {} failed: {}", base, path, attempt + 1, last_error);
      continue;
    }
    const int status = res->status;
    if (status == 200) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("response is not JSON: ") + e.what());
      }
    }
    if (status == 429 || status >= 500) {
      last_error = "HTTP " + std::to_string(status);
      spdlog::debug("{} {} attempt {} got {}", base, path, attempt + 1, status);
      continue;
    }
    throw ProtocolError("HTTP " + std::to_string(status) + " from " + base + path + ": " + res->body);
  }
  throw StageUnavailable(std::string(to_string(kind)) + " service at " + base + " unavailable after " +
                         std::to_string(cfg.retries + 1) + " attempts: " + last_error);
}

ParseResponse HttpBackend::parse(const ParseRequest& r) {
  return parse_response_from_json(call(RequestKind::Parse, to_json(r)));
}

DetectResponse HttpBackend::detect(const DetectRequest& r) {
  return detect_response_from_json(call(RequestKind::Detect, to_json(r)));
}

VerifyResponse HttpBackend::verify(const VerifyRequest& r) {
  return verify_response_from_json(call(RequestKind::Verify, to_json(r)));
}

SegmentResponse HttpBackend::segment(const SegmentRequest& r) {
  return segment_response_from_json(call(RequestKind::Segment, to_json(r)));
}

}  // namespace interleaf
