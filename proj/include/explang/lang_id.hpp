#pragma once

// Character n-gram (n = 1..3) language identification for thinking traces.
//
// Each language profile is a multinomial over its most frequent n-grams with
// add-one smoothing. Detection scores the mean log-likelihood per n-gram of the
// text under every profile; n-grams missing from a profile fall back to half
// of that profile's smallest frequency.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "explang/language.hpp"
#include "explang/response_schema.hpp"

namespace explang {

inline constexpr std::size_t kDefaultNgramCap = 2000;
/// Minimum UTF-8 bytes of letter content left after stripping.
inline constexpr std::size_t kMinDetectableBytes = 20;

using NgramProfile = std::map<std::string, double>;

class LanguageProfileSet {
 public:
  LanguageProfileSet() = default;

  /// Validates that `freqs` is non-empty, positive and sums to 1 (1e-9).
  void add(const LanguageCode& lang, NgramProfile freqs);

  bool empty() const noexcept { return profiles_.empty(); }
  std::size_t size() const noexcept { return profiles_.size(); }
  bool contains(const LanguageCode& lang) const { return profiles_.contains(lang); }
  std::vector<LanguageCode> languages() const;
  const NgramProfile& profile(const LanguageCode& lang) const;
  /// Probability charged for an n-gram absent from `lang`'s profile.
  double unseen_probability(const LanguageCode& lang) const;

  /// Restricts the set to `langs`; throws ConfigError for unknown codes.
  LanguageProfileSet subset(std::span<const LanguageCode> langs) const;

  nlohmann::json to_json() const;
  static LanguageProfileSet from_json(const nlohmann::json& doc);
  void save(const std::filesystem::path& path) const;
  static LanguageProfileSet load(const std::filesystem::path& path);

 private:
  struct Entry {
    NgramProfile freqs;
    double unseen = 0.0;
  };
  std::map<LanguageCode, Entry> profiles_;
};

struct TrainingText {
  std::string text;
  LanguageCode lang;
};

/// Keeps the `ngram_cap` most frequent n-grams per language (ties broken by
/// byte-wise n-gram order) and smooths them additively. When `registered` is
/// non-empty every listed language must have at least one text.
LanguageProfileSet train_profiles(std::span<const TrainingText> corpus, std::size_t ngram_cap,
                                  std::span<const LanguageCode> registered = {});

/// Reads `<dir>/<code>.txt` files; blank-line separated paragraphs become
/// individual texts. Files whose stem is not a language code are ignored.
std::vector<TrainingText> load_corpus_dir(const std::filesystem::path& dir);

/// Removes math spans (\boxed{..}, $..$, $$..$$, \[..\], \(..\)), digit and
/// operator runs of four or more characters, tags and LaTeX commands.
/// Applied to a fixed point, so it is idempotent.
std::string strip_math(std::string_view text);

/// Letter-only, lowercased, space-padded code point sequence that n-grams are
/// drawn from (UTF-8 encoded).
std::string normalize_for_ngrams(std::string_view text);

/// All 1..3-gram occurrences of `text` in order (duplicates retained).
std::vector<std::string> extract_ngrams(std::string_view text);

struct Detection {
  LanguageCode language;
  double confidence;  ///< softmax(top1) - softmax(top2), in [0,1]
};

struct LanguageScore {
  LanguageCode language;
  double mean_log_likelihood;
};

/// Mean log-likelihood per n-gram of already-stripped text, sorted by
/// descending score (ties by code).
std::vector<LanguageScore> score_languages(std::string_view stripped,
                                           const LanguageProfileSet& profiles);

/// Throws UndetectableError when fewer than kMinDetectableBytes of letters
/// remain after stripping, ConfigError when `profiles` is empty.
Detection detect(std::string_view text, const LanguageProfileSet& profiles);

LanguageCode detect_thinking(const ParsedResponse& resp, const LanguageProfileSet& profiles);

}  // namespace explang
