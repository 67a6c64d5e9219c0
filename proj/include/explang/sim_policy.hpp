#pragma once

// Desk-scale simulator of on-policy thinking-language selection. A prompt set
// has per-language success probabilities; the policy is a contextual softmax
// over languages (shared logits plus per-prompt offsets) with a per-language
// competence multiplier. Training follows the staged reward schedule with
// group-relative advantages and a score-function update.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "explang/config.hpp"
#include "explang/language.hpp"
#include "explang/reward_engine.hpp"

namespace explang {

struct WorldConfig {
  std::vector<LanguageCode> languages = default_seen_languages();
  std::size_t prompts = 16;
  /// English success is drawn from base_english +- english_spread per prompt.
  double base_english = 0.6;
  double english_spread = 0.15;
  /// Per-language penalty relative to English, uniform in [min, max].
  double penalty_min = 0.0;
  double penalty_max = 0.05;
  /// Fraction of prompts where one non-English language beats English.
  double advantage_share = 0.25;
  /// On advantage prompts English drops to this level (minus penalties) ...
  double advantage_english = 0.25;
  /// ... and one random non-English language succeeds with this probability.
  double advantage_p = 0.9;

  void validate() const;
};

struct SimWorld {
  std::vector<LanguageCode> languages;
  /// p[prompt][language index]
  std::vector<std::vector<double>> p;
  std::vector<std::size_t> advantage_prompts;
  /// Language index that wins on each advantage prompt (aligned).
  std::vector<std::size_t> advantage_langs;
  std::uint64_t seed = 0;

  std::size_t prompt_count() const { return p.size(); }
  std::size_t language_count() const { return languages.size(); }
  std::size_t index_of(const LanguageCode& lang) const;
};

SimWorld init_world(const WorldConfig& config, std::uint64_t seed);

struct PolicyConfig {
  /// Logit of every language at initialization; English gets english_logit.
  double english_logit = 3.0;
  double other_logit = 0.0;
  /// Added to the initial logits before training (supervised warm-start
  /// analog). Keys are language codes.
  std::map<LanguageCode, double> warm_start;
  double english_competence = 1.0;
  double other_competence = 1.0;
  double lr = 0.05;
  double lr_context = 0.3;
  double lr_competence = 0.005;
  /// Share of non-English positive-advantage competence gains that also
  /// accrue to English (cross-lingual transfer). Off by default.
  double transfer = 0.0;

  void validate() const;
};

struct SimPolicy {
  std::vector<double> logits;                 ///< shared, per language
  std::vector<std::vector<double>> context;   ///< per prompt, per language
  std::vector<double> competence;             ///< per language, in [0,1]

  /// softmax(logits + context[prompt])
  std::vector<double> distribution(std::size_t prompt) const;
  /// Selection distribution averaged over prompts.
  std::vector<double> marginal() const;
};

SimPolicy init_policy(const SimWorld& world, const PolicyConfig& config, bool apply_warm_start);

using SimRng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits; platform independent.
double uniform01(SimRng& rng);

struct SimResponse {
  std::size_t language = 0;
  int correct = 0;
};

/// Draws n languages from the prompt's distribution and Bernoulli correctness
/// at p(prompt, lang) * competence(lang). Throws ValidationError when n < 2.
std::vector<SimResponse> rollout(const SimWorld& world, const SimPolicy& policy,
                                 std::size_t prompt, std::size_t n, SimRng& rng);

struct UpdateRates {
  double lr = 0.05;
  double lr_context = 0.3;
  double lr_competence = 0.005;
  double transfer = 0.0;
};

/// Score-function step for the categorical selection at `prompt`:
/// g_l = sum_i A_i (1[l_i = l] - pi(l)); shared logits move by lr * g and the
/// prompt's offsets by lr_context * g. competence(l) += lr_competence *
/// sum_{i: l_i = l} max(A_i, 0), clamped to [0,1].
void policy_update(SimPolicy& policy, std::size_t prompt, std::span<const std::size_t> languages,
                   std::span<const double> advantages, const UpdateRates& rates,
                   std::size_t english_index = 0);

enum class SimSchedule { two_stage, exploitation_only };

std::string_view to_string(SimSchedule schedule);

struct SimConfig {
  WorldConfig world;
  PolicyConfig policy;
  RewardSettings rewards;
  ScheduleConfig schedule;
  SimSchedule mode = SimSchedule::two_stage;
  /// World seed; when empty it is derived from the training seed.
  std::optional<std::uint64_t> world_seed;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults; diagnostics name the field path.
  static SimConfig from_json(const nlohmann::json& doc);
};

struct TraceRecord {
  std::size_t step = 0;
  Stage stage = Stage::exploration;
  std::vector<double> distribution;
  double entropy = 0.0;
  double mean_reward = 0.0;
  double expected_accuracy = 0.0;
};

struct Snapshot {
  std::string name;
  std::vector<double> distribution;
  double entropy = 0.0;
  double expected_accuracy = 0.0;
};

struct TrainingTrace {
  std::vector<LanguageCode> languages;
  std::vector<TraceRecord> records;  ///< state after each step's update
  /// initial, post_sft, post_exploration, post_exploitation
  std::vector<Snapshot> snapshots;
  std::uint64_t seed = 0;
  std::uint64_t world_seed = 0;

  const Snapshot& snapshot(std::string_view name) const;
  /// One JSON object per line, one line per step.
  std::string to_jsonl() const;
  nlohmann::json summary_json() const;
};

/// Expected accuracy: mean over prompts of sum_l pi(l|q) p(q,l) competence(l).
double expected_accuracy(const SimWorld& world, const SimPolicy& policy);

TrainingTrace run_training(const SimWorld& world, const SimConfig& config, std::uint64_t seed);

/// init_world with config.world_seed (or a seed derived from `seed`) followed
/// by run_training.
TrainingTrace simulate(const SimConfig& config, std::uint64_t seed);

}  // namespace explang
