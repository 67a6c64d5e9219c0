#include "explang/reward_engine.hpp"

#include <algorithm>
#include <cmath>

#include "explang/error.hpp"
#include "explang/math_verify.hpp"

namespace explang {

namespace {

void check_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(std::string(name) + " must lie in [0,1], got " + std::to_string(v));
  }
}

}  // namespace

std::string_view to_string(Stage stage) {
  return stage == Stage::exploration ? "exploration" : "exploitation";
}

StageConfig StageConfig::exploration() {
  return StageConfig{Stage::exploration, 0.2, 0.2, 0.2, 0.0, 1.0, false};
}

StageConfig StageConfig::exploitation() {
  return StageConfig{Stage::exploitation, 0.2, 0.2, 0.0, 0.5, 1.0, true};
}

StageConfig StageConfig::defaults_for(Stage stage) {
  return stage == Stage::exploration ? exploration() : exploitation();
}

void StageConfig::validate() const {
  check_unit(lambda_f, "lambda_f");
  check_unit(lambda_c, "lambda_c");
  check_unit(lambda_d, "lambda_d");
  check_unit(lambda_p, "lambda_p");
  check_unit(lambda_v, "lambda_v");
}

void ScheduleConfig::validate() const {
  if (total_steps == 0) throw ValidationError("total_steps must be positive");
  if (!(exploration_fraction > 0.0 && exploration_fraction < 1.0)) {
    throw ValidationError("exploration_fraction must lie strictly between 0 and 1");
  }
  if (group_size < 2) throw ValidationError("group_size must be at least 2");
  if (!(epsilon_std >= 0.0) || !std::isfinite(epsilon_std)) {
    throw ValidationError("epsilon_std must be a finite non-negative number");
  }
  if (!(kl_coefficient >= 0.0)) throw ValidationError("kl_coefficient must be non-negative");
}

std::size_t ScheduleConfig::exploration_steps() const {
  // The small offset keeps products such as 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(
      std::floor(exploration_fraction * static_cast<double>(total_steps) + 1e-9));
}

std::size_t LanguageGroupStats::count(const GroupKey& lang) const {
  auto it = counts.find(lang);
  if (it == counts.end()) {
    throw ValidationError("language '" + (lang ? lang->str() : std::string("<undetectable>")) +
                          "' has no responses in the batch");
  }
  return it->second;
}

LanguageGroupStats group_language_stats(std::span<const GroupKey> langs) {
  if (langs.empty()) throw ValidationError("cannot compute language statistics of an empty batch");
  LanguageGroupStats stats;
  for (const auto& l : langs) ++stats.counts[l];
  stats.n = langs.size();
  stats.k_min = stats.n;
  for (const auto& [_, k] : stats.counts) stats.k_min = std::min(stats.k_min, k);
  return stats;
}

double diversity_reward(const LanguageGroupStats& stats, const GroupKey& lang) {
  return static_cast<double>(stats.k_min) / static_cast<double>(stats.count(lang));
}

std::vector<int> passk_reward(std::span<const GroupKey> langs, std::span<const int> correct,
                              PasskCredit credit) {
  if (langs.size() != correct.size()) {
    throw ValidationError("passk_reward: " + std::to_string(langs.size()) + " languages but " +
                          std::to_string(correct.size()) + " correctness flags");
  }
  std::map<LanguageCode, int> correct_in_group;
  for (std::size_t i = 0; i < langs.size(); ++i) {
    if (langs[i] && correct[i]) ++correct_in_group[*langs[i]];
  }
  std::vector<int> out(langs.size(), 0);
  for (std::size_t i = 0; i < langs.size(); ++i) {
    if (!langs[i]) continue;
    auto it = correct_in_group.find(*langs[i]);
    int hits = it == correct_in_group.end() ? 0 : it->second;
    if (credit == PasskCredit::others_only && correct[i]) --hits;
    out[i] = hits > 0 ? 1 : 0;
  }
  return out;
}

RewardBreakdown total_reward(double r_f, double r_c, double r_d, double r_p, double r_v,
                             const StageConfig& cfg) {
  RewardBreakdown b{r_f, r_c, r_d, r_p, r_v, 0.0};
  b.total = cfg.lambda_f * r_f + cfg.lambda_c * r_c + cfg.lambda_d * r_d + cfg.lambda_p * r_p +
            cfg.lambda_v * r_v;
  return b;
}

StageConfig stage_for_step(std::size_t step, const ScheduleConfig& sched) {
  sched.validate();
  if (step >= sched.total_steps) {
    throw ValidationError("step " + std::to_string(step) + " outside [0, " +
                          std::to_string(sched.total_steps) + ")");
  }
  return StageConfig::defaults_for(step < sched.exploration_steps() ? Stage::exploration
                                                                    : Stage::exploitation);
}

std::vector<double> group_advantages(std::span<const double> totals, double epsilon_std) {
  if (totals.size() < 2) throw ValidationError("group advantages need at least 2 rewards");
  const double n = static_cast<double>(totals.size());
  double mean = 0.0;
  for (double r : totals) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : totals) var += (r - mean) * (r - mean);
  var /= n;
  const double denom = std::sqrt(var) + epsilon_std;
  std::vector<double> out(totals.size(), 0.0);
  const bool flat = std::all_of(totals.begin(), totals.end(),
                                [&](double r) { return r == totals.front(); });
  if (flat || denom == 0.0) return out;
  for (std::size_t i = 0; i < totals.size(); ++i) out[i] = (totals[i] - mean) / denom;
  return out;
}

std::vector<ScoredResponse> score_batch_detailed(std::span<const std::string> responses,
                                                 std::string_view ground_truth,
                                                 const StageConfig& cfg,
                                                 const LanguageProfileSet& profiles,
                                                 const ScoreOptions& options) {
  if (responses.empty()) throw ValidationError("score_batch needs at least one response");
  if (profiles.empty()) throw ConfigError("language profile set is empty");
  cfg.validate();

  std::vector<ScoredResponse> out(responses.size());
  std::vector<GroupKey> langs(responses.size());
  std::vector<int> correct(responses.size(), 0);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    auto& s = out[i];
    s.parsed = parse_response(responses[i], options.mode);
    try {
      s.detected = detect_thinking(s.parsed, profiles);
    } catch (const UndetectableError&) {
      s.detected = std::nullopt;
    }
    s.correct = verify(responses[i], ground_truth);
    langs[i] = s.detected;
    correct[i] = s.correct;
  }

  const LanguageGroupStats stats = group_language_stats(langs);
  const std::vector<int> rp = passk_reward(langs, correct, options.passk_credit);
  for (std::size_t i = 0; i < responses.size(); ++i) {
    auto& s = out[i];
    const double r_f = format_reward(s.parsed);
    const double r_c = compliance_reward(s.parsed, s.detected, options.forced);
    const double r_d = s.detected ? diversity_reward(stats, s.detected) : 0.0;
    s.rewards = total_reward(r_f, r_c, r_d, rp[i], s.correct, cfg);
  }
  return out;
}

std::vector<RewardBreakdown> score_batch(std::span<const std::string> responses,
                                         std::string_view ground_truth, const StageConfig& cfg,
                                         const LanguageProfileSet& profiles,
                                         const ScoreOptions& options) {
  std::vector<RewardBreakdown> out;
  for (auto& s : score_batch_detailed(responses, ground_truth, cfg, profiles, options)) {
    out.push_back(s.rewards);
  }
  return out;
}

}  // namespace explang
