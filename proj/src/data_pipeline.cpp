#include "explang/data_pipeline.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "explang/error.hpp"
#include "explang/math_verify.hpp"
#include "explang/response_schema.hpp"

namespace explang {

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::malformed:
      return "malformed";
    case RejectReason::wrong_language:
      return "wrong_language";
    case RejectReason::wrong_answer:
      return "wrong_answer";
  }
  return "unknown";
}

std::optional<RejectReason> parse_reject_reason(std::string_view text) {
  if (text == "malformed") return RejectReason::malformed;
  if (text == "wrong_language") return RejectReason::wrong_language;
  if (text == "wrong_answer") return RejectReason::wrong_answer;
  return std::nullopt;
}

nlohmann::json DatasetRecord::to_json() const {
  nlohmann::json doc = {{"id", id},
                        {"problem", problem},
                        {"truth", truth},
                        {"target_lang", target_lang.str()},
                        {"generation", generation},
                        {"accepted", accepted}};
  doc["reject_reason"] = reject_reason ? nlohmann::json(to_string(*reject_reason)) : nullptr;
  doc["tagged_text"] = tagged_text ? nlohmann::json(*tagged_text) : nullptr;
  return doc;
}

DatasetRecord DatasetRecord::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("record must be a JSON object");
  auto required_string = [&](const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || !it->is_string()) {
      throw ValidationError(std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };
  DatasetRecord rec;
  rec.id = required_string("id");
  rec.truth = required_string("truth");
  rec.generation = required_string("generation");
  const std::string lang = required_string("target_lang");
  auto code = LanguageCode::parse(lang);
  if (!code) throw ValidationError("field 'target_lang': invalid language code '" + lang + "'");
  rec.target_lang = *code;
  if (auto it = doc.find("problem"); it != doc.end() && it->is_string()) {
    rec.problem = it->get<std::string>();
  }
  // Provenance written by a previous filtration pass.
  if (auto it = doc.find("accepted"); it != doc.end() && it->is_boolean()) {
    rec.accepted = it->get<bool>();
  }
  if (auto it = doc.find("reject_reason"); it != doc.end() && !it->is_null()) {
    auto reason = it->is_string() ? parse_reject_reason(it->get<std::string>()) : std::nullopt;
    if (!reason) throw ValidationError("field 'reject_reason': unknown reason " + it->dump());
    rec.reject_reason = reason;
  }
  if (auto it = doc.find("tagged_text"); it != doc.end() && it->is_string()) {
    rec.tagged_text = it->get<std::string>();
  }
  return rec;
}

AnswerVerifier default_verifier() {
  return [](std::string_view response, std::string_view truth) { return verify(response, truth); };
}

std::string tag_generation(std::string_view generation, const LanguageCode& lang) {
  std::size_t start = 0;
  while (start < generation.size() &&
         (generation[start] == ' ' || generation[start] == '\t' || generation[start] == '\n' ||
          generation[start] == '\r')) {
    ++start;
  }
  std::string out;
  out.reserve(generation.size() - start + 32);
  out += kLangOpen;
  out += lang.str();
  out += kLangClose;
  out += generation.substr(start);
  return out;
}

DatasetRecord filter_record(DatasetRecord rec, const LanguageProfileSet& profiles,
                            const AnswerVerifier& verifier) {
  if (!profiles.contains(rec.target_lang)) {
    throw ConfigError("target language '" + rec.target_lang.str() + "' has no profile");
  }
  rec.accepted = false;
  rec.reject_reason.reset();
  rec.tagged_text.reset();

  const ParsedResponse parsed = parse_response(rec.generation, ParseMode::plain);
  if (!parsed.format_ok) {
    rec.reject_reason = RejectReason::malformed;
    return rec;
  }
  std::optional<LanguageCode> detected;
  try {
    detected = detect_thinking(parsed, profiles);
  } catch (const UndetectableError&) {
  }
  if (!detected || *detected != rec.target_lang) {
    rec.reject_reason = RejectReason::wrong_language;
    return rec;
  }
  if (verifier(rec.generation, rec.truth) != 1) {
    rec.reject_reason = RejectReason::wrong_answer;
    return rec;
  }
  rec.accepted = true;
  rec.tagged_text = tag_generation(rec.generation, rec.target_lang);
  return rec;
}

std::size_t needed_samples(double rate, std::size_t target, std::size_t cap) {
  if (!(rate > 0.0) || rate > 1.0) {
    throw ValidationError("acceptance rate must lie in (0, 1]");
  }
  const double raw = std::ceil(static_cast<double>(target) / rate);
  if (raw >= static_cast<double>(cap)) return cap;
  auto needed = static_cast<std::size_t>(raw);
  while (static_cast<double>(needed) * rate < static_cast<double>(target) && needed < cap) {
    ++needed;
  }
  return needed;
}

LanguageBudget budget_from_counts(std::size_t accepted, std::size_t pilot_size, std::size_t target,
                                  std::size_t cap) {
  if (pilot_size == 0) throw ValidationError("pilot size must be positive");
  if (accepted > pilot_size) throw ValidationError("accepted count exceeds pilot size");
  LanguageBudget b;
  b.pilot_size = pilot_size;
  b.pilot_accepted = accepted;
  const std::size_t effective = accepted == 0 ? 1 : accepted;
  b.rate = static_cast<double>(effective) / static_cast<double>(pilot_size);
  // ceil(target * size / effective) in integers
  const unsigned __int128 num = static_cast<unsigned __int128>(target) * pilot_size;
  const unsigned __int128 needed = (num + effective - 1) / effective;
  if (needed > cap) {
    b.needed_samples = cap;
    b.capped = true;
  } else {
    b.needed_samples = static_cast<std::size_t>(needed);
  }
  return b;
}

nlohmann::json AcceptancePlan::to_json() const {
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [lang, b] : languages) {
    langs[lang.str()] = {{"pilot_size", b.pilot_size},
                         {"pilot_accepted", b.pilot_accepted},
                         {"rate", b.rate},
                         {"needed_samples", b.needed_samples},
                         {"capped", b.capped}};
  }
  return {{"target_accepted", target_accepted}, {"cap", cap}, {"languages", langs}};
}

AcceptancePlan estimate_acceptance(std::span<const DatasetRecord> pilot,
                                   const LanguageProfileSet& profiles, const PlanOptions& options,
                                   const AnswerVerifier& verifier) {
  std::map<LanguageCode, std::pair<std::size_t, std::size_t>> counts;  // accepted, size
  for (const auto& lang : options.required) counts.try_emplace(lang, 0, 0);
  for (const auto& rec : pilot) {
    if (!options.required.empty() && !counts.contains(rec.target_lang)) continue;
    auto& [acc, size] = counts[rec.target_lang];
    ++size;
    if (filter_record(rec, profiles, verifier).accepted) ++acc;
  }
  AcceptancePlan plan;
  plan.target_accepted = options.target_accepted;
  plan.cap = options.cap;
  for (const auto& [lang, c] : counts) {
    if (c.second == 0) {
      throw ValidationError("no pilot records for language '" + lang.str() + "'");
    }
    plan.languages[lang] = budget_from_counts(c.first, c.second, options.target_accepted, options.cap);
  }
  return plan;
}

void LanguageCounts::add(const DatasetRecord& rec) {
  if (rec.accepted) {
    ++accepted;
    return;
  }
  switch (rec.reject_reason.value_or(RejectReason::malformed)) {
    case RejectReason::malformed:
      ++malformed;
      break;
    case RejectReason::wrong_language:
      ++wrong_language;
      break;
    case RejectReason::wrong_answer:
      ++wrong_answer;
      break;
  }
}

namespace {

nlohmann::json counts_json(const LanguageCounts& c) {
  return {{"accepted", c.accepted},
          {"wrong_language", c.wrong_language},
          {"wrong_answer", c.wrong_answer},
          {"malformed", c.malformed},
          {"total", c.total()}};
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

}  // namespace

nlohmann::json FiltrationSummary::to_json() const {
  nlohmann::json langs = nlohmann::json::object();
  for (const auto& [lang, c] : per_language) langs[lang.str()] = counts_json(c);
  nlohmann::json doc = counts_json(overall);
  doc["languages"] = langs;
  doc["plan"] = plan ? plan->to_json() : nlohmann::json(nullptr);
  return doc;
}

std::string FiltrationSummary::to_table() const {
  std::string out = fmt::format("{:<6} {:>8} {:>14} {:>12} {:>9} {:>6}\n", "lang", "accepted",
                                "wrong_language", "wrong_answer", "malformed", "total");
  auto row = [&](std::string_view name, const LanguageCounts& c) {
    out += fmt::format("{:<6} {:>8} {:>14} {:>12} {:>9} {:>6}\n", name, c.accepted,
                       c.wrong_language, c.wrong_answer, c.malformed, c.total());
  };
  for (const auto& [lang, c] : per_language) row(lang.str(), c);
  row("all", overall);
  return out;
}

FiltrationPaths FiltrationPaths::for_output(const std::filesystem::path& output) {
  return {output, std::filesystem::path(output.string() + ".rejects.jsonl"),
          std::filesystem::path(output.string() + ".summary.json")};
}

std::vector<DatasetRecord> read_records(const std::filesystem::path& input) {
  std::ifstream is(input, std::ios::binary);
  if (!is) throw IoError("cannot read " + input.string());
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(DatasetRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}:{}: invalid JSON", input.string(), line_no));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}:{}: {}", input.string(), line_no, e.what()));
    }
  }
  if (is.bad()) throw IoError("error while reading " + input.string());
  return records;
}

FiltrationSummary run_filtration(const std::filesystem::path& input, const FiltrationPaths& paths,
                                 const LanguageProfileSet& profiles,
                                 const std::optional<AcceptancePlan>& plan,
                                 const AnswerVerifier& verifier) {
  const std::vector<DatasetRecord> records = read_records(input);
  for (const auto& rec : records) {
    if (!profiles.contains(rec.target_lang)) {
      throw ConfigError("record '" + rec.id + "': target language '" + rec.target_lang.str() +
                        "' has no profile");
    }
  }
  std::ofstream accepted_os = open_output(paths.accepted);
  std::ofstream rejects_os = open_output(paths.rejects);

  FiltrationSummary summary;
  summary.plan = plan;
  for (const auto& rec : records) {
    const DatasetRecord out = filter_record(rec, profiles, verifier);
    summary.per_language[out.target_lang].add(out);
    summary.overall.add(out);
    (out.accepted ? accepted_os : rejects_os) << out.to_json().dump() << '\n';
  }
  if (!accepted_os.flush() || !rejects_os.flush()) {
    throw IoError("error while writing " + paths.accepted.string());
  }
  std::ofstream summary_os = open_output(paths.summary);
  summary_os << summary.to_json().dump(2) << '\n';
  if (!summary_os.flush()) throw IoError("error while writing " + paths.summary.string());
  return summary;
}

}  // namespace explang
