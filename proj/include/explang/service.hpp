#pragma once

// Stateless HTTP scoring service:
//   POST /v1/score   ScoreRequest -> ScoreResponse
//   GET  /v1/health  {"status":"ok"}

#include <memory>
#include <string>
#include <string_view>

#include "explang/config.hpp"
#include "explang/scoring.hpp"

namespace explang {

struct HttpReply {
  int status = 200;
  std::string body;
};

/// Transport-free request handling: 400 for malformed or invalid requests,
/// 413 when the batch exceeds `max_batch`, 200 otherwise.
HttpReply handle_score(std::string_view body, const ScoringContext& ctx, std::size_t max_batch);
HttpReply handle_health();

class ScoringService {
 public:
  ScoringService(ScoringContext ctx, ServiceSettings settings);
  ~ScoringService();
  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  /// Binds to settings.bind:settings.port (port 0 picks a free port) and
  /// returns the bound port. Throws Error when binding fails.
  int bind();
  /// Serves until stop() is called. bind() must have succeeded.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace explang
