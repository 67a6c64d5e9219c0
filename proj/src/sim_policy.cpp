#include "explang/sim_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "explang/error.hpp"
#include "explang/metrics.hpp"

namespace explang {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::size_t uniform_index(SimRng& rng, std::size_t n) {
  const auto i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  return std::min(i, n - 1);
}

double uniform_in(SimRng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

std::vector<double> softmax(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

void require_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(fmt::format("{} must lie in [0, 1]", name));
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw ValidationError(fmt::format("{} must be finite", name));
}

}  // namespace

double uniform01(SimRng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void WorldConfig::validate() const {
  if (languages.size() < 2) throw ValidationError("world needs at least two languages");
  if (std::find(languages.begin(), languages.end(), kEnglish) == languages.end()) {
    throw ValidationError("world languages must include en");
  }
  for (std::size_t i = 0; i < languages.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (languages[i] == languages[j]) {
        throw ValidationError("duplicate world language '" + languages[i].str() + "'");
      }
    }
  }
  if (prompts == 0) throw ValidationError("world needs at least one prompt");
  require_fraction(base_english, "base_english");
  require_fraction(english_spread, "english_spread");
  require_fraction(penalty_min, "penalty_min");
  require_fraction(penalty_max, "penalty_max");
  if (penalty_min > penalty_max) throw ValidationError("penalty_min exceeds penalty_max");
  require_fraction(advantage_share, "advantage_share");
  require_fraction(advantage_english, "advantage_english");
  require_fraction(advantage_p, "advantage_p");
  if (advantage_share > 0.0 && advantage_p <= advantage_english) {
    throw ValidationError("advantage_p must exceed advantage_english");
  }
}

std::size_t SimWorld::index_of(const LanguageCode& lang) const {
  auto it = std::find(languages.begin(), languages.end(), lang);
  if (it == languages.end()) throw ValidationError("language '" + lang.str() + "' not in world");
  return static_cast<std::size_t>(it - languages.begin());
}

SimWorld init_world(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  SimRng rng(seed);
  SimWorld w;
  w.languages = config.languages;
  w.seed = seed;
  const std::size_t nl = w.languages.size();
  const std::size_t en = w.index_of(kEnglish);

  std::vector<double> penalty(nl, 0.0);
  for (std::size_t l = 0; l < nl; ++l) {
    const double v = uniform_in(rng, config.penalty_min, config.penalty_max);
    if (l != en) penalty[l] = v;
  }
  w.p.assign(config.prompts, std::vector<double>(nl, 0.0));
  for (auto& row : w.p) {
    const double english =
        clamp01(config.base_english + uniform_in(rng, -config.english_spread, config.english_spread));
    for (std::size_t l = 0; l < nl; ++l) row[l] = clamp01(english - penalty[l]);
  }

  const auto n_adv = static_cast<std::size_t>(
      std::llround(config.advantage_share * static_cast<double>(config.prompts)));
  std::vector<std::size_t> order(config.prompts);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_adv; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, config.prompts - i)]);
  }
  w.advantage_prompts.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_adv));
  std::sort(w.advantage_prompts.begin(), w.advantage_prompts.end());
  for (std::size_t q : w.advantage_prompts) {
    std::size_t star = uniform_index(rng, nl - 1);
    if (star >= en) ++star;
    for (std::size_t l = 0; l < nl; ++l) w.p[q][l] = clamp01(config.advantage_english - penalty[l]);
    w.p[q][star] = config.advantage_p;
    w.advantage_langs.push_back(star);
  }
  return w;
}

void PolicyConfig::validate() const {
  require_finite(english_logit, "english_logit");
  require_finite(other_logit, "other_logit");
  for (const auto& [lang, v] : warm_start) require_finite(v, "warm_start");
  require_fraction(english_competence, "english_competence");
  require_fraction(other_competence, "other_competence");
  for (auto [v, name] : {std::pair{lr, "lr"}, std::pair{lr_context, "lr_context"},
                         std::pair{lr_competence, "lr_competence"}}) {
    require_finite(v, name);
    if (v < 0.0) throw ValidationError(fmt::format("{} must be non-negative", name));
  }
  require_fraction(transfer, "transfer");
}

std::vector<double> SimPolicy::distribution(std::size_t prompt) const {
  std::vector<double> x = logits;
  for (std::size_t l = 0; l < x.size(); ++l) x[l] += context[prompt][l];
  return softmax(x);
}

std::vector<double> SimPolicy::marginal() const {
  std::vector<double> m(logits.size(), 0.0);
  for (std::size_t q = 0; q < context.size(); ++q) {
    const auto d = distribution(q);
    for (std::size_t l = 0; l < m.size(); ++l) m[l] += d[l];
  }
  for (double& v : m) v /= static_cast<double>(context.size());
  return m;
}

SimPolicy init_policy(const SimWorld& world, const PolicyConfig& config, bool apply_warm_start) {
  config.validate();
  const std::size_t nl = world.language_count();
  const std::size_t en = world.index_of(kEnglish);
  SimPolicy p;
  p.logits.assign(nl, config.other_logit);
  p.logits[en] = config.english_logit;
  p.competence.assign(nl, config.other_competence);
  p.competence[en] = config.english_competence;
  p.context.assign(world.prompt_count(), std::vector<double>(nl, 0.0));
  if (apply_warm_start) {
    for (const auto& [lang, delta] : config.warm_start) p.logits[world.index_of(lang)] += delta;
  }
  return p;
}

std::vector<SimResponse> rollout(const SimWorld& world, const SimPolicy& policy,
                                 std::size_t prompt, std::size_t n, SimRng& rng) {
  if (n < 2) throw ValidationError("rollout needs at least two responses");
  if (prompt >= world.prompt_count()) throw ValidationError("prompt index out of range");
  const auto dist = policy.distribution(prompt);
  std::vector<SimResponse> out(n);
  for (auto& r : out) {
    const double u = uniform01(rng);
    double acc = 0.0;
    r.language = dist.size() - 1;
    for (std::size_t l = 0; l < dist.size(); ++l) {
      acc += dist[l];
      if (u < acc) {
        r.language = l;
        break;
      }
    }
    const double p = world.p[prompt][r.language] * policy.competence[r.language];
    r.correct = uniform01(rng) < p ? 1 : 0;
  }
  return out;
}

void policy_update(SimPolicy& policy, std::size_t prompt, std::span<const std::size_t> languages,
                   std::span<const double> advantages, const UpdateRates& rates,
                   std::size_t english_index) {
  if (languages.size() != advantages.size()) {
    throw ValidationError("policy update: languages and advantages are misaligned");
  }
  if (prompt >= policy.context.size()) throw ValidationError("prompt index out of range");
  const std::size_t nl = policy.logits.size();
  const auto pi = policy.distribution(prompt);
  std::vector<double> g(nl, 0.0);
  for (std::size_t i = 0; i < languages.size(); ++i) {
    if (languages[i] >= nl) throw ValidationError("policy update: language index out of range");
    g[languages[i]] += advantages[i];
    for (std::size_t l = 0; l < nl; ++l) g[l] -= advantages[i] * pi[l];
  }
  for (std::size_t l = 0; l < nl; ++l) {
    policy.logits[l] += rates.lr * g[l];
    policy.context[prompt][l] += rates.lr_context * g[l];
  }
  for (std::size_t i = 0; i < languages.size(); ++i) {
    const double gain = rates.lr_competence * std::max(advantages[i], 0.0);
    auto& c = policy.competence[languages[i]];
    c = clamp01(c + gain);
    if (languages[i] != english_index && english_index < nl) {
      auto& ce = policy.competence[english_index];
      ce = clamp01(ce + rates.transfer * gain);
    }
  }
}

std::string_view to_string(SimSchedule schedule) {
  return schedule == SimSchedule::two_stage ? "two_stage" : "exploitation_only";
}

void SimConfig::validate() const {
  world.validate();
  policy.validate();
  rewards.exploration.validate();
  rewards.exploitation.validate();
  schedule.validate();
  for (const auto& [lang, _] : policy.warm_start) {
    if (std::find(world.languages.begin(), world.languages.end(), lang) == world.languages.end()) {
      throw ValidationError("warm_start language '" + lang.str() + "' not in world");
    }
  }
}

nlohmann::json SimConfig::to_json() const {
  nlohmann::json langs = nlohmann::json::array();
  for (const auto& l : world.languages) langs.push_back(l.str());
  nlohmann::json warm = nlohmann::json::object();
  for (const auto& [l, v] : policy.warm_start) warm[l.str()] = v;
  nlohmann::json doc = {
      {"world",
       {{"languages", langs},
        {"prompts", world.prompts},
        {"base_english", world.base_english},
        {"english_spread", world.english_spread},
        {"penalty_min", world.penalty_min},
        {"penalty_max", world.penalty_max},
        {"advantage_share", world.advantage_share},
        {"advantage_english", world.advantage_english},
        {"advantage_p", world.advantage_p}}},
      {"policy",
       {{"english_logit", policy.english_logit},
        {"other_logit", policy.other_logit},
        {"warm_start", warm},
        {"english_competence", policy.english_competence},
        {"other_competence", policy.other_competence},
        {"lr", policy.lr},
        {"lr_context", policy.lr_context},
        {"lr_competence", policy.lr_competence},
        {"transfer", policy.transfer}}},
      {"rewards", rewards_to_json(rewards)},
      {"schedule", schedule_to_json(schedule)},
      {"mode", to_string(mode)}};
  doc["world_seed"] = world_seed ? nlohmann::json(*world_seed) : nlohmann::json(nullptr);
  return doc;
}

SimConfig SimConfig::from_json(const nlohmann::json& doc) {
  namespace jf = json_field;
  jf::expect_object(doc, "<root>");
  jf::reject_unknown(doc, "", {"world", "policy", "rewards", "schedule", "mode", "world_seed"});
  SimConfig cfg;
  if (auto it = doc.find("world"); it != doc.end()) {
    const auto& w = *it;
    jf::expect_object(w, "world");
    jf::reject_unknown(w, "world",
                       {"languages", "prompts", "base_english", "english_spread", "penalty_min",
                        "penalty_max", "advantage_share", "advantage_english", "advantage_p"});
    auto& d = cfg.world;
    d.languages = jf::languages(w, "languages", "world", d.languages);
    d.prompts = jf::count(w, "prompts", "world", d.prompts);
    d.base_english = jf::number(w, "base_english", "world", d.base_english);
    d.english_spread = jf::number(w, "english_spread", "world", d.english_spread);
    d.penalty_min = jf::number(w, "penalty_min", "world", d.penalty_min);
    d.penalty_max = jf::number(w, "penalty_max", "world", d.penalty_max);
    d.advantage_share = jf::number(w, "advantage_share", "world", d.advantage_share);
    d.advantage_english = jf::number(w, "advantage_english", "world", d.advantage_english);
    d.advantage_p = jf::number(w, "advantage_p", "world", d.advantage_p);
  }
  if (auto it = doc.find("policy"); it != doc.end()) {
    const auto& p = *it;
    jf::expect_object(p, "policy");
    jf::reject_unknown(p, "policy",
                       {"english_logit", "other_logit", "warm_start", "english_competence",
                        "other_competence", "lr", "lr_context", "lr_competence", "transfer"});
    auto& d = cfg.policy;
    d.english_logit = jf::number(p, "english_logit", "policy", d.english_logit);
    d.other_logit = jf::number(p, "other_logit", "policy", d.other_logit);
    if (auto ws = p.find("warm_start"); ws != p.end()) {
      jf::expect_object(*ws, "policy.warm_start");
      for (const auto& [key, _] : ws->items()) {
        auto code = LanguageCode::parse(key);
        if (!code) throw ConfigError("field 'policy.warm_start." + key + "': invalid language code");
        d.warm_start[*code] = jf::number(*ws, key, "policy.warm_start", 0.0);
      }
    }
    d.english_competence = jf::number(p, "english_competence", "policy", d.english_competence);
    d.other_competence = jf::number(p, "other_competence", "policy", d.other_competence);
    d.lr = jf::number(p, "lr", "policy", d.lr);
    d.lr_context = jf::number(p, "lr_context", "policy", d.lr_context);
    d.lr_competence = jf::number(p, "lr_competence", "policy", d.lr_competence);
    d.transfer = jf::number(p, "transfer", "policy", d.transfer);
  }
  if (auto it = doc.find("rewards"); it != doc.end()) cfg.rewards = rewards_from_json(*it, "rewards");
  if (auto it = doc.find("schedule"); it != doc.end()) cfg.schedule = schedule_from_json(*it, "schedule");
  const std::string mode = jf::string(doc, "mode", "", "two_stage");
  if (mode == "two_stage") {
    cfg.mode = SimSchedule::two_stage;
  } else if (mode == "exploitation_only") {
    cfg.mode = SimSchedule::exploitation_only;
  } else {
    throw ConfigError("field 'mode': expected 'two_stage' or 'exploitation_only'");
  }
  if (auto it = doc.find("world_seed"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw ConfigError("field 'world_seed': expected a non-negative integer");
    cfg.world_seed = it->get<std::uint64_t>();
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("invalid simulation config: ") + e.what());
  }
  return cfg;
}

const Snapshot& TrainingTrace::snapshot(std::string_view name) const {
  for (const auto& s : snapshots) {
    if (s.name == name) return s;
  }
  throw ValidationError("no snapshot named '" + std::string(name) + "'");
}

namespace {

nlohmann::json distribution_json(const std::vector<LanguageCode>& langs,
                                 const std::vector<double>& dist) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t l = 0; l < langs.size(); ++l) out[langs[l].str()] = dist[l];
  return out;
}

}  // namespace

std::string TrainingTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json line = {{"step", r.step},
                           {"stage", to_string(r.stage)},
                           {"distribution", distribution_json(languages, r.distribution)},
                           {"entropy", r.entropy},
                           {"mean_reward", r.mean_reward},
                           {"expected_accuracy", r.expected_accuracy}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

nlohmann::json TrainingTrace::summary_json() const {
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : snapshots) {
    snaps.push_back({{"name", s.name},
                     {"distribution", distribution_json(languages, s.distribution)},
                     {"entropy", s.entropy},
                     {"expected_accuracy", s.expected_accuracy}});
  }
  return {{"seed", seed}, {"world_seed", world_seed}, {"steps", records.size()},
          {"snapshots", snaps}};
}

double expected_accuracy(const SimWorld& world, const SimPolicy& policy) {
  double total = 0.0;
  for (std::size_t q = 0; q < world.prompt_count(); ++q) {
    const auto pi = policy.distribution(q);
    for (std::size_t l = 0; l < pi.size(); ++l) {
      total += pi[l] * world.p[q][l] * policy.competence[l];
    }
  }
  return total / static_cast<double>(world.prompt_count());
}

TrainingTrace run_training(const SimWorld& world, const SimConfig& config, std::uint64_t seed) {
  config.validate();
  if (world.languages != config.world.languages) {
    throw ValidationError("world languages differ from the configured languages");
  }
  SimRng rng(seed);
  const std::size_t en = world.index_of(kEnglish);
  const std::size_t total = config.schedule.total_steps;
  const std::size_t n = config.schedule.group_size;
  const std::size_t explore_steps =
      config.mode == SimSchedule::two_stage ? std::min(config.schedule.exploration_steps(), total) : 0;
  const UpdateRates rates{config.policy.lr, config.policy.lr_context, config.policy.lr_competence,
                          config.policy.transfer};

  TrainingTrace trace;
  trace.languages = world.languages;
  trace.seed = seed;
  trace.world_seed = world.seed;
  auto snap = [&](std::string name, const SimPolicy& p) {
    Snapshot s;
    s.name = std::move(name);
    s.distribution = p.marginal();
    s.entropy = entropy_of(s.distribution);
    s.expected_accuracy = expected_accuracy(world, p);
    trace.snapshots.push_back(std::move(s));
  };

  snap("initial", init_policy(world, config.policy, false));
  SimPolicy policy = init_policy(world, config.policy, true);
  snap("post_sft", policy);

  std::optional<SimPolicy> anchor;
  std::vector<GroupKey> keys(n);
  std::vector<std::size_t> langs(n);
  std::vector<int> correct(n);
  std::vector<double> totals(n);
  trace.records.reserve(total);
  for (std::size_t step = 0; step < total; ++step) {
    if (step == explore_steps) snap("post_exploration", policy);
    const Stage stage = step < explore_steps ? Stage::exploration : Stage::exploitation;
    const StageConfig& cfg =
        stage == Stage::exploration ? config.rewards.exploration : config.rewards.exploitation;
    if (cfg.kl_enabled && !anchor) anchor = policy;

    const std::size_t prompt = uniform_index(rng, world.prompt_count());
    const auto batch = rollout(world, policy, prompt, n, rng);
    for (std::size_t i = 0; i < n; ++i) {
      langs[i] = batch[i].language;
      keys[i] = world.languages[batch[i].language];
      correct[i] = batch[i].correct;
    }
    const auto stats = group_language_stats(keys);
    const auto rp = passk_reward(keys, correct, config.rewards.passk_credit);
    double reward_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      totals[i] = total_reward(1.0, 1.0, diversity_reward(stats, keys[i]), rp[i], correct[i], cfg).total;
      reward_sum += totals[i];
    }
    const auto adv = group_advantages(totals, config.schedule.epsilon_std);
    policy_update(policy, prompt, langs, adv, rates, en);

    if (cfg.kl_enabled) {
      const double c = config.schedule.kl_coefficient;
      for (std::size_t l = 0; l < policy.logits.size(); ++l) {
        policy.logits[l] -= c * (policy.logits[l] - anchor->logits[l]);
        for (std::size_t q = 0; q < policy.context.size(); ++q) {
          policy.context[q][l] -= c * (policy.context[q][l] - anchor->context[q][l]);
        }
      }
    }

    TraceRecord rec;
    rec.step = step;
    rec.stage = stage;
    rec.distribution = policy.marginal();
    rec.entropy = entropy_of(rec.distribution);
    rec.mean_reward = reward_sum / static_cast<double>(n);
    rec.expected_accuracy = expected_accuracy(world, policy);
    trace.records.push_back(std::move(rec));
  }
  if (explore_steps == total) snap("post_exploration", policy);
  snap("post_exploitation", policy);
  return trace;
}

TrainingTrace simulate(const SimConfig& config, std::uint64_t seed) {
  // Offset so the world and the rollouts never share a random stream.
  const SimWorld world =
      init_world(config.world, config.world_seed.value_or(seed + 0x9E3779B97F4A7C15ULL));
  return run_training(world, config, seed);
}

}  // namespace explang
