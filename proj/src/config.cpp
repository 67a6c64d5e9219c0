#include "explang/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "explang/error.hpp"

namespace explang {

namespace json_field {

namespace {
std::string join_path(std::string_view path, std::string_view key) {
  if (path.empty()) return std::string(key);
  return std::string(path) + "." + std::string(key);
}
}  // namespace

void expect_object(const nlohmann::json& obj, std::string_view path) {
  if (!obj.is_object()) {
    throw ConfigError("field '" + std::string(path) + "': expected a JSON object");
  }
}

void reject_unknown(const nlohmann::json& obj, std::string_view path,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("field '" + join_path(path, key) + "': unknown option");
    }
  }
}

double number(const nlohmann::json& obj, std::string_view key, std::string_view path,
              double fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number()) {
    throw ConfigError("field '" + join_path(path, key) + "': expected a number");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) throw ConfigError("field '" + join_path(path, key) + "': not finite");
  return v;
}

std::size_t count(const nlohmann::json& obj, std::string_view key, std::string_view path,
                  std::size_t fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw ConfigError("field '" + join_path(path, key) + "': expected a non-negative integer");
  }
  return it->get<std::size_t>();
}

bool boolean(const nlohmann::json& obj, std::string_view key, std::string_view path,
             bool fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) {
    throw ConfigError("field '" + join_path(path, key) + "': expected true or false");
  }
  return it->get<bool>();
}

std::string string(const nlohmann::json& obj, std::string_view key, std::string_view path,
                   const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) {
    throw ConfigError("field '" + join_path(path, key) + "': expected a string");
  }
  return it->get<std::string>();
}

}  // namespace json_field

namespace {

template <typename Fn>
auto wrap_validation(std::string_view path, Fn&& fn) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ConfigError("field '" + std::string(path) + "': " + e.what());
  }
}

std::vector<LanguageCode> language_list(const nlohmann::json& obj, std::string_view key,
                                        std::string_view path,
                                        std::vector<LanguageCode> fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const std::string full = std::string(path) + "." + std::string(key);
  if (!it->is_array()) throw ConfigError("field '" + full + "': expected an array of codes");
  std::vector<LanguageCode> out;
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& v = (*it)[i];
    auto code = v.is_string() ? LanguageCode::parse(v.get<std::string>()) : std::nullopt;
    if (!code) {
      throw ConfigError("field '" + full + "[" + std::to_string(i) +
                        "]': expected a two-letter lowercase language code");
    }
    out.push_back(*code);
  }
  return out;
}

}  // namespace

std::vector<LanguageCode> json_field::languages(const nlohmann::json& obj, std::string_view key,
                                                std::string_view path,
                                                std::vector<LanguageCode> fallback) {
  return language_list(obj, key, path, std::move(fallback));
}

std::string_view to_string(PasskCredit credit) {
  return credit == PasskCredit::include_self ? "include_self" : "others_only";
}

nlohmann::json parse_json_document(std::string_view text, std::string_view source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError(std::string(source) + ": JSON syntax error at line " +
                      std::to_string(line) + ", column " + std::to_string(column));
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_json_document(ss.str(), path.string());
}

nlohmann::json stage_to_json(const StageConfig& cfg) {
  return {{"stage", to_string(cfg.stage)},   {"lambda_f", cfg.lambda_f},
          {"lambda_c", cfg.lambda_c},        {"lambda_d", cfg.lambda_d},
          {"lambda_p", cfg.lambda_p},        {"lambda_v", cfg.lambda_v},
          {"kl_enabled", cfg.kl_enabled}};
}

StageConfig stage_from_json(const nlohmann::json& doc, std::string_view field) {
  auto parse_stage = [&](const std::string& name, std::string_view path) {
    if (name == "exploration" || name == "explore") return Stage::exploration;
    if (name == "exploitation" || name == "exploit") return Stage::exploitation;
    throw ConfigError("field '" + std::string(path) +
                      "': expected 'exploration' or 'exploitation', got '" + name + "'");
  };
  if (doc.is_string()) return StageConfig::defaults_for(parse_stage(doc.get<std::string>(), field));
  json_field::expect_object(doc, field);
  json_field::reject_unknown(doc, field, {"stage", "lambda_f", "lambda_c", "lambda_d", "lambda_p",
                                          "lambda_v", "kl_enabled"});
  auto it = doc.find("stage");
  if (it == doc.end() || !it->is_string()) {
    throw ConfigError("field '" + std::string(field) + ".stage': required string");
  }
  StageConfig cfg =
      StageConfig::defaults_for(parse_stage(it->get<std::string>(), std::string(field) + ".stage"));
  cfg.lambda_f = json_field::number(doc, "lambda_f", field, cfg.lambda_f);
  cfg.lambda_c = json_field::number(doc, "lambda_c", field, cfg.lambda_c);
  cfg.lambda_d = json_field::number(doc, "lambda_d", field, cfg.lambda_d);
  cfg.lambda_p = json_field::number(doc, "lambda_p", field, cfg.lambda_p);
  cfg.lambda_v = json_field::number(doc, "lambda_v", field, cfg.lambda_v);
  cfg.kl_enabled = json_field::boolean(doc, "kl_enabled", field, cfg.kl_enabled);
  wrap_validation(field, [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

nlohmann::json schedule_to_json(const ScheduleConfig& cfg) {
  return {{"total_steps", cfg.total_steps},
          {"exploration_fraction", cfg.exploration_fraction},
          {"group_size", cfg.group_size},
          {"epsilon_std", cfg.epsilon_std},
          {"total_batch_size", cfg.total_batch_size},
          {"mini_batch_size", cfg.mini_batch_size},
          {"kl_coefficient", cfg.kl_coefficient}};
}

ScheduleConfig schedule_from_json(const nlohmann::json& doc, std::string_view field) {
  json_field::expect_object(doc, field);
  json_field::reject_unknown(doc, field,
                             {"total_steps", "exploration_fraction", "group_size", "epsilon_std",
                              "total_batch_size", "mini_batch_size", "kl_coefficient"});
  ScheduleConfig cfg;
  cfg.total_steps = json_field::count(doc, "total_steps", field, cfg.total_steps);
  cfg.exploration_fraction =
      json_field::number(doc, "exploration_fraction", field, cfg.exploration_fraction);
  cfg.group_size = json_field::count(doc, "group_size", field, cfg.group_size);
  cfg.epsilon_std = json_field::number(doc, "epsilon_std", field, cfg.epsilon_std);
  cfg.total_batch_size = json_field::count(doc, "total_batch_size", field, cfg.total_batch_size);
  cfg.mini_batch_size = json_field::count(doc, "mini_batch_size", field, cfg.mini_batch_size);
  cfg.kl_coefficient = json_field::number(doc, "kl_coefficient", field, cfg.kl_coefficient);
  wrap_validation(field, [&] {
    cfg.validate();
    return 0;
  });
  return cfg;
}

RewardSettings rewards_from_json(const nlohmann::json& doc, std::string_view field) {
  const std::string path(field);
  json_field::expect_object(doc, path);
  json_field::reject_unknown(doc, path, {"exploration", "exploitation", "passk_credit"});
  RewardSettings out;
  for (auto [key, dst] : {std::pair{"exploration", &out.exploration},
                          std::pair{"exploitation", &out.exploitation}}) {
    if (auto e = doc.find(key); e != doc.end()) {
      nlohmann::json obj = *e;
      if (obj.is_object() && !obj.contains("stage")) obj["stage"] = key;
      *dst = stage_from_json(obj, path + "." + key);
    }
  }
  const std::string credit = json_field::string(doc, "passk_credit", path, "include_self");
  if (credit == "include_self") {
    out.passk_credit = PasskCredit::include_self;
  } else if (credit == "others_only") {
    out.passk_credit = PasskCredit::others_only;
  } else {
    throw ConfigError("field '" + path + ".passk_credit': expected 'include_self' or 'others_only'");
  }
  return out;
}

nlohmann::json rewards_to_json(const RewardSettings& rewards) {
  return {{"exploration", stage_to_json(rewards.exploration)},
          {"exploitation", stage_to_json(rewards.exploitation)},
          {"passk_credit", to_string(rewards.passk_credit)}};
}

AppConfig AppConfig::from_json(const nlohmann::json& doc) {
  json_field::expect_object(doc, "<root>");
  json_field::reject_unknown(doc, "", {"languages", "rewards", "schedule", "service"});
  AppConfig cfg;
  if (auto it = doc.find("languages"); it != doc.end()) {
    json_field::expect_object(*it, "languages");
    json_field::reject_unknown(*it, "languages", {"seen", "unseen", "profiles"});
    cfg.languages.seen = language_list(*it, "seen", "languages", cfg.languages.seen);
    cfg.languages.unseen = language_list(*it, "unseen", "languages", cfg.languages.unseen);
    cfg.languages.profiles = json_field::string(*it, "profiles", "languages", "");
  }
  if (auto it = doc.find("rewards"); it != doc.end()) {
    cfg.rewards = rewards_from_json(*it, "rewards");
  }
  if (auto it = doc.find("schedule"); it != doc.end()) {
    cfg.schedule = schedule_from_json(*it, "schedule");
  }
  if (auto it = doc.find("service"); it != doc.end()) {
    json_field::expect_object(*it, "service");
    json_field::reject_unknown(*it, "service", {"bind", "port", "max_batch"});
    cfg.service.bind = json_field::string(*it, "bind", "service", cfg.service.bind);
    const std::size_t port = json_field::count(*it, "port", "service", 8080);
    if (port > 65535) throw ConfigError("field 'service.port': must be at most 65535");
    cfg.service.port = static_cast<int>(port);
    cfg.service.max_batch = json_field::count(*it, "max_batch", "service", cfg.service.max_batch);
    if (cfg.service.max_batch == 0) throw ConfigError("field 'service.max_batch': must be positive");
  }
  return cfg;
}

nlohmann::json AppConfig::to_json() const {
  auto codes = [](const std::vector<LanguageCode>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : v) arr.push_back(c.str());
    return arr;
  };
  return {{"languages",
           {{"seen", codes(languages.seen)},
            {"unseen", codes(languages.unseen)},
            {"profiles", languages.profiles}}},
          {"rewards", rewards_to_json(rewards)},
          {"schedule", schedule_to_json(schedule)},
          {"service",
           {{"bind", service.bind}, {"port", service.port}, {"max_batch", service.max_batch}}}};
}

AppConfig AppConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

}  // namespace explang
