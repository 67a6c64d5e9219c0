#pragma once

// JSON configuration documents. Every parse failure is reported as a
// ConfigError naming the offending field path (for example
// "schedule.total_steps") or the line and column of a syntax error.

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "explang/language.hpp"
#include "explang/reward_engine.hpp"

namespace explang {

struct LanguageSettings {
  std::vector<LanguageCode> seen = default_seen_languages();
  std::vector<LanguageCode> unseen = default_unseen_languages();
  /// Profile JSON path; empty means the bundled default.
  std::string profiles;
};

struct RewardSettings {
  StageConfig exploration = StageConfig::exploration();
  StageConfig exploitation = StageConfig::exploitation();
  PasskCredit passk_credit = PasskCredit::include_self;

  StageConfig for_stage(Stage stage) const {
    return stage == Stage::exploration ? exploration : exploitation;
  }
};

struct ServiceSettings {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::size_t max_batch = 64;
};

struct AppConfig {
  LanguageSettings languages;
  RewardSettings rewards;
  ScheduleConfig schedule;
  ServiceSettings service;

  static AppConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  static AppConfig load(const std::filesystem::path& path);
};

/// Parses JSON text; syntax errors become ConfigError with "line L, column C".
nlohmann::json parse_json_document(std::string_view text, std::string_view source);
nlohmann::json read_json_file(const std::filesystem::path& path);

nlohmann::json stage_to_json(const StageConfig& cfg);
/// Accepts "exploration"/"exploitation" (stage defaults) or a full object whose
/// missing coefficients fall back to the named stage's defaults.
StageConfig stage_from_json(const nlohmann::json& doc, std::string_view field = "stage");

nlohmann::json schedule_to_json(const ScheduleConfig& cfg);
ScheduleConfig schedule_from_json(const nlohmann::json& doc, std::string_view field = "schedule");

RewardSettings rewards_from_json(const nlohmann::json& doc, std::string_view field = "rewards");
nlohmann::json rewards_to_json(const RewardSettings& rewards);

std::string_view to_string(PasskCredit credit);

namespace json_field {

/// Typed accessors that raise ConfigError("<path>: ...") on type mismatch.
double number(const nlohmann::json& obj, std::string_view key, std::string_view path, double fallback);
std::size_t count(const nlohmann::json& obj, std::string_view key, std::string_view path,
                  std::size_t fallback);
bool boolean(const nlohmann::json& obj, std::string_view key, std::string_view path, bool fallback);
std::string string(const nlohmann::json& obj, std::string_view key, std::string_view path,
                   const std::string& fallback);
std::vector<LanguageCode> languages(const nlohmann::json& obj, std::string_view key,
                                    std::string_view path, std::vector<LanguageCode> fallback);
void expect_object(const nlohmann::json& obj, std::string_view path);
/// Rejects keys outside `allowed` so misspelled options do not pass silently.
void reject_unknown(const nlohmann::json& obj, std::string_view path,
                    std::initializer_list<std::string_view> allowed);

}  // namespace json_field

}  // namespace explang
