#pragma once

// Staged five-term reward
//
//   r = lambda_f r_f + lambda_c r_c + lambda_d r_d + lambda_p r_p + lambda_v r_v
//
// with an exploration stage (diversity bonus r_d = k_min / k, KL off) over the
// first quarter of training and an exploitation stage (language-group Pass@k
// bonus r_p, KL on) afterwards, plus GRPO group-relative advantages.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "explang/lang_id.hpp"
#include "explang/language.hpp"
#include "explang/response_schema.hpp"

namespace explang {

enum class Stage { exploration, exploitation };

std::string_view to_string(Stage stage);

struct StageConfig {
  Stage stage = Stage::exploration;
  double lambda_f = 0.2;
  double lambda_c = 0.2;
  double lambda_d = 0.2;
  double lambda_p = 0.0;
  double lambda_v = 1.0;
  bool kl_enabled = false;

  static StageConfig exploration();
  static StageConfig exploitation();
  static StageConfig defaults_for(Stage stage);

  /// Throws ValidationError when a coefficient leaves [0,1].
  void validate() const;

  bool operator==(const StageConfig&) const = default;
};

struct ScheduleConfig {
  std::size_t total_steps = 200;
  double exploration_fraction = 0.25;
  std::size_t group_size = 8;
  double epsilon_std = 1e-6;
  std::size_t total_batch_size = 256;
  std::size_t mini_batch_size = 128;
  double kl_coefficient = 0.001;

  void validate() const;
  /// floor(exploration_fraction * total_steps)
  std::size_t exploration_steps() const;

  bool operator==(const ScheduleConfig&) const = default;
};

struct RewardBreakdown {
  double r_f = 0.0;
  double r_c = 0.0;
  double r_d = 0.0;
  double r_p = 0.0;
  double r_v = 0.0;
  double total = 0.0;

  bool operator==(const RewardBreakdown&) const = default;
};

/// Language a response is grouped under; empty means undetectable.
using GroupKey = std::optional<LanguageCode>;

struct LanguageGroupStats {
  std::map<GroupKey, std::size_t> counts;
  std::size_t k_min = 0;
  std::size_t n = 0;

  /// Throws ValidationError when `lang` has no responses in the batch.
  std::size_t count(const GroupKey& lang) const;
};

/// Whether the correct response itself earns the language-group bonus.
enum class PasskCredit { include_self, others_only };

LanguageGroupStats group_language_stats(std::span<const GroupKey> langs);

/// k_min / k(lang).
double diversity_reward(const LanguageGroupStats& stats, const GroupKey& lang);

/// Response i gets 1 iff its language group holds a correct response
/// (other than itself under others_only). Undetectable responses always get 0.
std::vector<int> passk_reward(std::span<const GroupKey> langs, std::span<const int> correct,
                              PasskCredit credit = PasskCredit::include_self);

RewardBreakdown total_reward(double r_f, double r_c, double r_d, double r_p, double r_v,
                             const StageConfig& cfg);

/// Stage defaults for a 0-based step; exploration iff step < exploration_steps().
StageConfig stage_for_step(std::size_t step, const ScheduleConfig& sched);

/// A_i = (r_i - mean) / (population_std + epsilon_std); all zeros on a flat group.
std::vector<double> group_advantages(std::span<const double> totals, double epsilon_std = 1e-6);

struct ScoreOptions {
  std::optional<LanguageCode> forced;
  ParseMode mode = ParseMode::explang;
  PasskCredit passk_credit = PasskCredit::include_self;
};

struct ScoredResponse {
  ParsedResponse parsed;
  GroupKey detected;
  int correct = 0;
  RewardBreakdown rewards;
};

/// Scores one rollout group sharing a prompt: parse, detect, verify, group
/// statistics, weighted totals. Per-response failures (malformed text,
/// undetectable thinking, missing answer) zero the affected components.
std::vector<ScoredResponse> score_batch_detailed(std::span<const std::string> responses,
                                                 std::string_view ground_truth,
                                                 const StageConfig& cfg,
                                                 const LanguageProfileSet& profiles,
                                                 const ScoreOptions& options = {});

std::vector<RewardBreakdown> score_batch(std::span<const std::string> responses,
                                         std::string_view ground_truth, const StageConfig& cfg,
                                         const LanguageProfileSet& profiles,
                                         const ScoreOptions& options = {});

}  // namespace explang
