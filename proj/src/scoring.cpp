#include "explang/scoring.hpp"

#include "explang/error.hpp"

namespace explang {

std::optional<Stage> parse_stage_name(std::string_view name) {
  if (name == "explore" || name == "exploration") return Stage::exploration;
  if (name == "exploit" || name == "exploitation") return Stage::exploitation;
  return std::nullopt;
}

namespace {

std::size_t count_field(const nlohmann::json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

nlohmann::json optional_code(const std::optional<LanguageCode>& code) {
  return code ? nlohmann::json(code->str()) : nlohmann::json(nullptr);
}

nlohmann::json breakdown_json(const RewardBreakdown& r) {
  return {{"r_f", r.r_f}, {"r_c", r.r_c}, {"r_d", r.r_d},
          {"r_p", r.r_p}, {"r_v", r.r_v}, {"total", r.total}};
}

}  // namespace

ScoreRequest ScoreRequest::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("request must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "ground_truth" && key != "responses" && key != "stage" && key != "step" &&
        key != "total_steps" && key != "forced_lang" && key != "mode") {
      throw ValidationError("unknown field '" + key + "'");
    }
  }
  ScoreRequest req;
  auto gt = doc.find("ground_truth");
  if (gt == doc.end() || !gt->is_string()) {
    throw ValidationError("field 'ground_truth' must be a string");
  }
  req.ground_truth = gt->get<std::string>();
  auto rs = doc.find("responses");
  if (rs == doc.end() || !rs->is_array()) {
    throw ValidationError("field 'responses' must be an array of strings");
  }
  for (const auto& r : *rs) {
    if (!r.is_string()) throw ValidationError("field 'responses' must be an array of strings");
    req.responses.push_back(r.get<std::string>());
  }
  if (req.responses.empty()) throw ValidationError("field 'responses' must not be empty");

  if (auto st = doc.find("stage"); st != doc.end() && !st->is_null()) {
    try {
      req.stage = stage_from_json(*st, "stage");
    } catch (const ConfigError& e) {
      throw ValidationError(e.what());
    }
  }
  if (doc.contains("step") && !doc.at("step").is_null()) req.step = count_field(doc, "step");
  if (doc.contains("total_steps") && !doc.at("total_steps").is_null()) {
    req.total_steps = count_field(doc, "total_steps");
  }
  if (auto fl = doc.find("forced_lang"); fl != doc.end() && !fl->is_null()) {
    auto code = fl->is_string() ? LanguageCode::parse(fl->get<std::string>()) : std::nullopt;
    if (!code) throw ValidationError("field 'forced_lang' must be a two-letter language code");
    req.forced_lang = *code;
  }
  if (auto m = doc.find("mode"); m != doc.end() && !m->is_null()) {
    const std::string mode = m->is_string() ? m->get<std::string>() : "";
    if (mode == "explang") {
      req.mode = ParseMode::explang;
    } else if (mode == "plain") {
      req.mode = ParseMode::plain;
    } else {
      throw ValidationError("field 'mode' must be 'explang' or 'plain'");
    }
  }
  return req;
}

nlohmann::json ScoreRequest::to_json() const {
  nlohmann::json doc = {{"ground_truth", ground_truth}, {"responses", responses}};
  if (stage) doc["stage"] = stage_to_json(*stage);
  if (step) doc["step"] = *step;
  if (total_steps) doc["total_steps"] = *total_steps;
  if (forced_lang) doc["forced_lang"] = forced_lang->str();
  if (mode == ParseMode::plain) doc["mode"] = "plain";
  return doc;
}

nlohmann::json ScoreResponse::to_json() const {
  nlohmann::json results_json = nlohmann::json::array();
  for (const auto& r : results) {
    results_json.push_back({{"rewards", breakdown_json(r.rewards)},
                            {"detected_lang", optional_code(r.detected_lang)},
                            {"declared_lang", optional_code(r.declared_lang)},
                            {"format_ok", r.format_ok},
                            {"correct", r.correct},
                            {"token_count", r.token_count}});
  }
  return {{"engine_version", engine_version},
          {"stage", stage_to_json(stage)},
          {"results", results_json},
          {"advantages", advantages}};
}

ScoreResponse ScoreResponse::from_json(const nlohmann::json& doc) {
  ScoreResponse out;
  try {
    out.engine_version = doc.at("engine_version").get<std::string>();
    out.stage = stage_from_json(doc.at("stage"), "stage");
    auto code = [](const nlohmann::json& v) -> std::optional<LanguageCode> {
      if (v.is_null()) return std::nullopt;
      return LanguageCode(v.get<std::string>());
    };
    for (const auto& r : doc.at("results")) {
      ScoreResult res;
      const auto& b = r.at("rewards");
      res.rewards = {b.at("r_f").get<double>(), b.at("r_c").get<double>(),
                     b.at("r_d").get<double>(), b.at("r_p").get<double>(),
                     b.at("r_v").get<double>(), b.at("total").get<double>()};
      res.detected_lang = code(r.at("detected_lang"));
      res.declared_lang = code(r.at("declared_lang"));
      res.format_ok = r.at("format_ok").get<bool>();
      res.correct = r.at("correct").get<int>();
      res.token_count = r.at("token_count").get<std::size_t>();
      out.results.push_back(std::move(res));
    }
    out.advantages = doc.at("advantages").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed score response: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("malformed score response: ") + e.what());
  }
  return out;
}

StageConfig resolve_stage(const ScoreRequest& request, const ScoringContext& ctx) {
  if (request.stage && request.step) {
    throw ValidationError("give either 'stage' or 'step', not both");
  }
  if (request.stage) return *request.stage;
  if (!request.step) {
    throw ValidationError("the stage is unresolved: give 'stage' or 'step'");
  }
  ScheduleConfig sched = ctx.schedule;
  if (request.total_steps) sched.total_steps = *request.total_steps;
  sched.validate();
  if (*request.step >= sched.total_steps) {
    throw ValidationError("'step' must be below the total number of steps");
  }
  return ctx.rewards.for_stage(stage_for_step(*request.step, sched).stage);
}

ScoreResponse score_request(const ScoreRequest& request, const ScoringContext& ctx) {
  if (request.responses.empty()) throw ValidationError("no responses to score");
  if (request.forced_lang && !ctx.profiles.contains(*request.forced_lang)) {
    throw ValidationError("forced language '" + request.forced_lang->str() + "' has no profile");
  }
  ScoreResponse out;
  out.stage = resolve_stage(request, ctx);
  ScoreOptions opts;
  opts.forced = request.forced_lang;
  opts.mode = request.mode;
  opts.passk_credit = ctx.rewards.passk_credit;
  const auto scored =
      score_batch_detailed(request.responses, request.ground_truth, out.stage, ctx.profiles, opts);
  std::vector<double> totals;
  totals.reserve(scored.size());
  for (const auto& s : scored) {
    ScoreResult r;
    r.rewards = s.rewards;
    r.detected_lang = s.detected;
    r.declared_lang = s.parsed.declared_lang;
    r.format_ok = s.parsed.format_ok;
    r.correct = s.correct;
    r.token_count = s.parsed.token_count;
    out.results.push_back(r);
    totals.push_back(s.rewards.total);
  }
  out.advantages = group_advantages(totals, ctx.schedule.epsilon_std);
  return out;
}

}  // namespace explang
