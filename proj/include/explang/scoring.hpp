#pragma once

// Request-level scoring shared by the offline CLI and the HTTP service, so the
// two produce identical documents for identical inputs.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "explang/config.hpp"
#include "explang/lang_id.hpp"
#include "explang/reward_engine.hpp"

namespace explang {

inline constexpr std::string_view kEngineVersion = "explang-reward/1.0.0";

struct ScoreRequest {
  std::string ground_truth;
  std::vector<std::string> responses;
  /// Exactly one of `stage` or `step` resolves the stage.
  std::optional<StageConfig> stage;
  std::optional<std::size_t> step;
  std::optional<std::size_t> total_steps;
  std::optional<LanguageCode> forced_lang;
  ParseMode mode = ParseMode::explang;

  /// Field-level problems raise ValidationError.
  static ScoreRequest from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct ScoreResult {
  RewardBreakdown rewards;
  std::optional<LanguageCode> detected_lang;
  std::optional<LanguageCode> declared_lang;
  bool format_ok = false;
  int correct = 0;
  std::size_t token_count = 0;
};

struct ScoreResponse {
  StageConfig stage;
  std::vector<ScoreResult> results;
  std::vector<double> advantages;
  std::string engine_version{kEngineVersion};

  nlohmann::json to_json() const;
  static ScoreResponse from_json(const nlohmann::json& doc);
};

/// Immutable state needed to score requests.
struct ScoringContext {
  LanguageProfileSet profiles;
  RewardSettings rewards;
  ScheduleConfig schedule;
};

/// Stage settings for a request. A named stage maps to the context's settings
/// for that stage; a step uses the schedule (with total_steps overridden when
/// given). Throws ValidationError when neither or both are present.
StageConfig resolve_stage(const ScoreRequest& request, const ScoringContext& ctx);

ScoreResponse score_request(const ScoreRequest& request, const ScoringContext& ctx);

/// Parses a stage name ("explore", "exploration", "exploit", "exploitation").
std::optional<Stage> parse_stage_name(std::string_view name);

}  // namespace explang
