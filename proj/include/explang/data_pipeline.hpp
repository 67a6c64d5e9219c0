#pragma once

// Two-way filtration of multilingual generations (thinking language and answer
// correctness) and per-language sampling budgets for reaching a target number
// of accepted records.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "explang/lang_id.hpp"
#include "explang/language.hpp"

namespace explang {

enum class RejectReason { malformed, wrong_language, wrong_answer };

std::string_view to_string(RejectReason reason);
std::optional<RejectReason> parse_reject_reason(std::string_view text);

struct DatasetRecord {
  std::string id;
  std::string problem;
  std::string truth;
  LanguageCode target_lang = kEnglish;
  std::string generation;
  bool accepted = false;
  std::optional<RejectReason> reject_reason;
  std::optional<std::string> tagged_text;

  nlohmann::json to_json() const;
  /// Only id, truth, target_lang and generation are required.
  static DatasetRecord from_json(const nlohmann::json& doc);
};

/// Returns 1 when `response` answers `truth` correctly.
using AnswerVerifier = std::function<int(std::string_view response, std::string_view truth)>;

/// The library verifier (last boxed answer, exact equivalence).
AnswerVerifier default_verifier();

/// Checks run in order malformed, wrong_language, wrong_answer; the first
/// failure is recorded. Undetectable thinking counts as wrong_language.
/// Throws ConfigError when target_lang is not in `profiles`.
DatasetRecord filter_record(DatasetRecord rec, const LanguageProfileSet& profiles,
                            const AnswerVerifier& verifier = default_verifier());

/// Generation with leading whitespace removed and the selection tag prepended.
std::string tag_generation(std::string_view generation, const LanguageCode& lang);

inline constexpr std::size_t kDefaultTargetAccepted = 500;
inline constexpr std::size_t kDefaultPilotSize = 100;
inline constexpr std::size_t kDefaultSampleCap = 50000;

/// ceil(target / rate), at least `target`-consistent so that
/// needed * rate >= target, then capped.
std::size_t needed_samples(double rate, std::size_t target, std::size_t cap = kDefaultSampleCap);

struct LanguageBudget {
  std::size_t pilot_size = 0;
  std::size_t pilot_accepted = 0;
  double rate = 0.0;
  std::size_t needed_samples = 0;
  bool capped = false;
};

struct AcceptancePlan {
  std::map<LanguageCode, LanguageBudget> languages;
  std::size_t target_accepted = kDefaultTargetAccepted;
  std::size_t cap = kDefaultSampleCap;

  nlohmann::json to_json() const;
};

/// Budget from exact pilot counts. The rate is floored at 1/pilot_size and
/// needed samples use integer arithmetic: ceil(target * size / accepted).
LanguageBudget budget_from_counts(std::size_t accepted, std::size_t pilot_size, std::size_t target,
                                  std::size_t cap = kDefaultSampleCap);

struct PlanOptions {
  std::size_t target_accepted = kDefaultTargetAccepted;
  std::size_t cap = kDefaultSampleCap;
  /// Languages that must be present in the pilot. Empty means every language
  /// that occurs in it.
  std::vector<LanguageCode> required;
};

/// Filters every pilot record and derives a per-language budget. Throws
/// ValidationError naming a required language with no pilot records.
AcceptancePlan estimate_acceptance(std::span<const DatasetRecord> pilot,
                                   const LanguageProfileSet& profiles,
                                   const PlanOptions& options = {},
                                   const AnswerVerifier& verifier = default_verifier());

struct LanguageCounts {
  std::size_t accepted = 0;
  std::size_t malformed = 0;
  std::size_t wrong_language = 0;
  std::size_t wrong_answer = 0;

  std::size_t rejected() const { return malformed + wrong_language + wrong_answer; }
  std::size_t total() const { return accepted + rejected(); }
  void add(const DatasetRecord& rec);
};

struct FiltrationSummary {
  std::map<LanguageCode, LanguageCounts> per_language;
  LanguageCounts overall;
  std::optional<AcceptancePlan> plan;

  nlohmann::json to_json() const;
  /// Aligned text table, one row per language plus a total row.
  std::string to_table() const;
};

struct FiltrationPaths {
  std::filesystem::path accepted;
  std::filesystem::path rejects;
  std::filesystem::path summary;

  /// `<output>`, `<output>.rejects.jsonl`, `<output>.summary.json`.
  static FiltrationPaths for_output(const std::filesystem::path& output);
};

/// Filters JSON-lines input records in order. Accepted records (tagged) go to
/// paths.accepted, rejected ones with their reason to paths.rejects and the
/// summary to paths.summary. Malformed input lines raise ValidationError with
/// the line number; unreadable or unwritable files raise IoError.
FiltrationSummary run_filtration(const std::filesystem::path& input, const FiltrationPaths& paths,
                                 const LanguageProfileSet& profiles,
                                 const std::optional<AcceptancePlan>& plan = std::nullopt,
                                 const AnswerVerifier& verifier = default_verifier());

/// Reads JSON-lines records; blank lines are skipped.
std::vector<DatasetRecord> read_records(const std::filesystem::path& input);

}  // namespace explang
