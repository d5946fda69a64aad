#include "interleaf/mock_server.hpp"

#include <spdlog/spdlog.h>

#include "httplib.h"

#include "interleaf/errors.hpp"

namespace interleaf {

struct MockServer::Impl {
  TruthIndex truth;
  MockBackendConfig cfg;
  httplib::Server server;
};

MockServer::MockServer(TruthIndex truth, MockBackendConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate();
  impl_->truth = std::move(truth);
  impl_->cfg = cfg;

  auto json_reply = [](httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  for (RequestKind kind :
       {RequestKind::Parse, RequestKind::Detect, RequestKind::Verify, RequestKind::Segment}) {
    impl_->server.Post(std::string(endpoint_path(kind)),
                       [this, kind, json_reply](const httplib::Request& req, httplib::Response& res) {
                         ++requests_;
                         if (fail_budget_.load() > 0 && fail_budget_.fetch_sub(1) > 0) {
                           json_reply(res, 503, {{"error", "injected fault"}});
                           return;
                         }
                         if (req.get_header_value(kProtocolHeader) != kProtocolVersion) {
                           json_reply(res, 400,
                                      {{"error", std::string("missing or unsupported ") +
                                                     kProtocolHeader + " header"}});
                           return;
                         }
                         try {
                           const auto body = nlohmann::json::parse(req.body);
                           json_reply(res, 200, mock_infer(kind, body, impl_->truth, impl_->cfg));
                         } catch (const nlohmann::json::exception& e) {
                           json_reply(res, 400, {{"error", std::string("bad JSON: ") + e.what()}});
                         } catch (const ProtocolError& e) {
                           json_reply(res, 400, {{"error", e.what()}});
                         } catch (const std::exception& e) {
                           json_reply(res, 500, {{"error", e.what()}});
                         }
                       });
  }
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? impl_->server.bind_to_any_port(host) : port;
  if (port_ <= 0 || (port != 0 && !impl_->server.bind_to_port(host, port))) {
    throw IoError("cannot bind mock server to " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void MockServer::listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  spdlog::info("mock backends listening on {}", base_url());
  if (!impl_->server.listen(host, port)) {
    throw IoError("cannot listen on " + host + ":" + std::to_string(port));
  }
}

void MockServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace interleaf
