#include "explang/sim_policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "explang/error.hpp"
#include "explang/metrics.hpp"

namespace explang {
namespace {

double mean_entropy(const TrainingTrace& t, std::size_t begin, std::size_t end) {
  double sum = 0.0;
  for (std::size_t s = begin; s < end; ++s) sum += t.records[s].entropy;
  return sum / static_cast<double>(end - begin);
}

TEST(InitWorld, AdvantageSubset) {
  WorldConfig cfg;
  cfg.prompts = 100;
  cfg.advantage_share = 0.2;
  const auto w = init_world(cfg, 9);
  EXPECT_EQ(w.advantage_prompts.size(), 20u);
  const auto en = w.index_of(kEnglish);
  for (std::size_t i = 0; i < w.advantage_prompts.size(); ++i) {
    const auto q = w.advantage_prompts[i];
    EXPECT_GT(w.p[q][w.advantage_langs[i]], w.p[q][en]);
  }
  for (const auto& row : w.p) {
    for (double v : row) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(InitWorld, SeedDeterminesWorld) {
  const auto a = init_world(WorldConfig{}, 5);
  const auto b = init_world(WorldConfig{}, 5);
  EXPECT_EQ(a.p, b.p);
  EXPECT_EQ(a.advantage_prompts, b.advantage_prompts);
  EXPECT_NE(a.p, init_world(WorldConfig{}, 6).p);
}

TEST(InitWorld, NoAdvantageMeansEnglishBest) {
  WorldConfig cfg;
  cfg.advantage_share = 0.0;
  const auto w = init_world(cfg, 1);
  const auto en = w.index_of(kEnglish);
  for (const auto& row : w.p) {
    EXPECT_EQ(*std::max_element(row.begin(), row.end()), row[en]);
  }
}

TEST(InitWorld, InvalidConfig) {
  WorldConfig cfg;
  cfg.advantage_share = 1.5;
  EXPECT_THROW(init_world(cfg, 1), ValidationError);
  cfg = WorldConfig{};
  cfg.languages = {LanguageCode("fr"), LanguageCode("de")};
  EXPECT_THROW(init_world(cfg, 1), ValidationError);
}

TEST(Rollout, DegenerateLogits) {
  const auto w = init_world(WorldConfig{}, 2);
  auto pol = init_policy(w, PolicyConfig{}, false);
  std::fill(pol.logits.begin(), pol.logits.end(), -1e6);
  pol.logits[3] = 1e6;
  SimRng rng(1);
  for (const auto& r : rollout(w, pol, 0, 8, rng)) EXPECT_EQ(r.language, 3u);
}

TEST(Rollout, CertainSuccess) {
  auto w = init_world(WorldConfig{}, 2);
  for (auto& row : w.p) std::fill(row.begin(), row.end(), 1.0);
  const auto pol = init_policy(w, PolicyConfig{}, false);
  SimRng rng(1);
  for (const auto& r : rollout(w, pol, 1, 8, rng)) EXPECT_EQ(r.correct, 1);
}

TEST(Rollout, SeededAndValidated) {
  const auto w = init_world(WorldConfig{}, 2);
  const auto pol = init_policy(w, PolicyConfig{}, false);
  SimRng a(77), b(77);
  const auto x = rollout(w, pol, 0, 8, a);
  const auto y = rollout(w, pol, 0, 8, b);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(x[i].language, y[i].language);
    EXPECT_EQ(x[i].correct, y[i].correct);
  }
  EXPECT_THROW(rollout(w, pol, 0, 1, a), ValidationError);
}

TEST(Uniform01, Range) {
  SimRng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

SimPolicy flat_policy(std::size_t langs, double competence) {
  SimPolicy p;
  p.logits.assign(langs, 0.0);
  p.context.assign(1, std::vector<double>(langs, 0.0));
  p.competence.assign(langs, competence);
  return p;
}

TEST(PolicyUpdate, HandComputedThreeResponses) {
  // pi = (1/3, 1/3, 1/3); A = (1, 0.5, -1.5) on languages (0, 0, 1).
  // sum A = 0, so g = (1.5, -1.5, 0).
  auto p = flat_policy(3, 0.5);
  const std::vector<std::size_t> langs{0, 0, 1};
  const std::vector<double> adv{1.0, 0.5, -1.5};
  UpdateRates rates;
  rates.lr = 0.1;
  rates.lr_context = 0.3;
  rates.lr_competence = 0.01;
  policy_update(p, 0, langs, adv, rates);
  EXPECT_NEAR(p.logits[0], 0.15, 1e-12);
  EXPECT_NEAR(p.logits[1], -0.15, 1e-12);
  EXPECT_NEAR(p.logits[2], 0.0, 1e-12);
  EXPECT_NEAR(p.context[0][0], 0.45, 1e-12);
  EXPECT_NEAR(p.context[0][1], -0.45, 1e-12);
  EXPECT_NEAR(p.context[0][2], 0.0, 1e-12);
  EXPECT_NEAR(p.competence[0], 0.515, 1e-12);
  EXPECT_NEAR(p.competence[1], 0.5, 1e-12);
  EXPECT_NEAR(p.competence[2], 0.5, 1e-12);
}

TEST(PolicyUpdate, ZeroAdvantagesLeavePolicy) {
  auto p = flat_policy(4, 0.7);
  p.logits = {0.3, -0.2, 1.0, 0.0};
  const auto before = p.logits;
  const std::vector<std::size_t> langs{0, 1, 2};
  const std::vector<double> adv{0.0, 0.0, 0.0};
  policy_update(p, 0, langs, adv, UpdateRates{});
  EXPECT_EQ(p.logits, before);
  EXPECT_EQ(p.competence, std::vector<double>(4, 0.7));
}

TEST(PolicyUpdate, PositiveAdvantageRaisesLogit) {
  auto p = flat_policy(3, 1.0);
  const std::vector<std::size_t> langs{2, 2};
  const std::vector<double> adv{1.0, 1.0};
  policy_update(p, 0, langs, adv, UpdateRates{});
  EXPECT_GT(p.logits[2], p.logits[0]);
  EXPECT_GT(p.logits[2], p.logits[1]);
  EXPECT_THROW(policy_update(p, 0, langs, std::vector<double>{1.0}, UpdateRates{}),
               ValidationError);
}

TEST(PolicyUpdate, TransferFeedsEnglish) {
  auto p = flat_policy(3, 0.5);
  UpdateRates rates;
  rates.lr_competence = 0.1;
  rates.transfer = 0.5;
  policy_update(p, 0, std::vector<std::size_t>{1}, std::vector<double>{1.0}, rates, 0);
  EXPECT_NEAR(p.competence[1], 0.6, 1e-12);
  EXPECT_NEAR(p.competence[0], 0.55, 1e-12);
}

TEST(Training, DeterministicTraces) {
  const SimConfig cfg;
  const auto a = simulate(cfg, 42);
  const auto b = simulate(cfg, 42);
  EXPECT_EQ(a.to_jsonl(), b.to_jsonl());
  EXPECT_EQ(a.summary_json().dump(), b.summary_json().dump());
}

TEST(Training, TraceInvariants) {
  const SimConfig cfg;
  const auto t = simulate(cfg, 7);
  ASSERT_EQ(t.records.size(), cfg.schedule.total_steps);
  for (std::size_t s = 0; s < t.records.size(); ++s) {
    const auto& r = t.records[s];
    EXPECT_EQ(r.step, s);
    EXPECT_EQ(r.stage, s < 50 ? Stage::exploration : Stage::exploitation);
    EXPECT_NEAR(std::accumulate(r.distribution.begin(), r.distribution.end(), 0.0), 1.0, 1e-12);
    EXPECT_NEAR(r.entropy, entropy_of(r.distribution), 1e-9);
  }
  for (const auto* name : {"initial", "post_sft", "post_exploration", "post_exploitation"}) {
    EXPECT_NO_THROW(t.snapshot(name));
  }
}

TEST(Training, ExplorationRaisesThenExploitationLowersEntropy) {
  const SimConfig cfg;
  const auto t = simulate(cfg, 0);
  const double start = t.snapshot("post_sft").entropy;
  const double mid = t.snapshot("post_exploration").entropy;
  const double end = t.snapshot("post_exploitation").entropy;
  EXPECT_GT(t.records[49].entropy, start);
  EXPECT_GT(mid, start);
  EXPECT_LT(end, mid);
}

TEST(Training, DiversityRewardDrivesExplorationEntropy) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SimConfig with;
    SimConfig without;
    without.rewards.exploration.lambda_d = 0.0;
    const auto a = simulate(with, seed);
    const auto b = simulate(without, seed);
    if (mean_entropy(a, 0, 50) > mean_entropy(b, 0, 50)) ++wins;
  }
  EXPECT_GE(wins, 9);
}

TEST(Training, ZeroLearningRateIsFlat) {
  SimConfig cfg;
  cfg.policy.lr = 0.0;
  cfg.policy.lr_context = 0.0;
  cfg.policy.lr_competence = 0.0;
  const auto t = simulate(cfg, 3);
  for (const auto& r : t.records) {
    EXPECT_EQ(r.distribution, t.records.front().distribution);
    EXPECT_EQ(r.expected_accuracy, t.records.front().expected_accuracy);
  }
}

TEST(Training, WarmStartShapesPostSftSnapshot) {
  SimConfig cfg;
  cfg.policy.warm_start[LanguageCode("fr")] = 2.0;
  const auto t = simulate(cfg, 1);
  const auto fr = static_cast<std::size_t>(
      std::find(t.languages.begin(), t.languages.end(), LanguageCode("fr")) - t.languages.begin());
  ASSERT_LT(fr, t.languages.size());
  EXPECT_GT(t.snapshot("post_sft").distribution[fr], t.snapshot("initial").distribution[fr]);
}

TEST(SimConfig, JsonRoundTripAndDiagnostics) {
  SimConfig cfg;
  cfg.world.prompts = 9;
  cfg.policy.lr = 0.02;
  cfg.mode = SimSchedule::exploitation_only;
  cfg.world_seed = 1234;
  const auto back = SimConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());

  auto bad = cfg.to_json();
  bad["policy"]["lr"] = "fast";
  try {
    SimConfig::from_json(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("policy.lr"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace explang
