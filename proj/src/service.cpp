#include "explang/service.hpp"

#include <httplib.h>

#include "explang/error.hpp"

namespace explang {

namespace {

std::string error_body(std::string_view message) {
  return nlohmann::json{{"error", message}}.dump();
}

}  // namespace

HttpReply handle_score(std::string_view body, const ScoringContext& ctx, std::size_t max_batch) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    return {400, error_body("request body is not valid JSON")};
  }
  // Checked before full validation so oversized batches are refused cheaply.
  if (doc.is_object()) {
    auto rs = doc.find("responses");
    if (rs != doc.end() && rs->is_array() && rs->size() > max_batch) {
      return {413, error_body("batch of " + std::to_string(rs->size()) +
                              " responses exceeds the limit of " + std::to_string(max_batch))};
    }
  }
  try {
    const ScoreRequest req = ScoreRequest::from_json(doc);
    return {200, score_request(req, ctx).to_json().dump()};
  } catch (const ValidationError& e) {
    return {400, error_body(e.what())};
  }
}

HttpReply handle_health() {
  return {200, nlohmann::json{{"status", "ok"}, {"engine_version", kEngineVersion}}.dump()};
}

struct ScoringService::Impl {
  ScoringContext ctx;
  ServiceSettings settings;
  httplib::Server server;
  bool bound = false;
};

ScoringService::ScoringService(ScoringContext ctx, ServiceSettings settings)
    : impl_(std::make_unique<Impl>()) {
  impl_->ctx = std::move(ctx);
  impl_->settings = std::move(settings);
  Impl* impl = impl_.get();
  impl->server.Post("/v1/score", [impl](const httplib::Request& req, httplib::Response& res) {
    const HttpReply reply = handle_score(req.body, impl->ctx, impl->settings.max_batch);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  impl->server.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    const HttpReply reply = handle_health();
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
}

ScoringService::~ScoringService() { stop(); }

int ScoringService::bind() {
  const auto& s = impl_->settings;
  int port = s.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(s.bind);
  } else if (!impl_->server.bind_to_port(s.bind, port)) {
    port = -1;
  }
  if (port < 0) {
    throw Error("cannot bind " + s.bind + ":" + std::to_string(s.port));
  }
  impl_->bound = true;
  return port;
}

void ScoringService::run() {
  if (!impl_->bound) throw Error("service is not bound");
  impl_->server.listen_after_bind();
}

void ScoringService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace explang
