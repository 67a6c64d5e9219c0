#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "explang/cli.hpp"
#include "explang/config.hpp"
#include "explang/error.hpp"
#include "explang/scoring.hpp"
#include "explang/service.hpp"
#include "support.hpp"

namespace explang {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "explang");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string fixture(const char* name) { return (testing::data_dir() / "fixtures" / name).string(); }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("explang_iface_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ScoringContext context() { return {testing::bundled_profiles(), RewardSettings{}, ScheduleConfig{}}; }

nlohmann::json fixture_request() {
  return testing::read_jsonl(fixture("score_batch.jsonl")).at(0);
}

TEST(Config, DefaultsFileMatchesBuiltIns) {
  const auto cfg = AppConfig::load(testing::data_dir() / "config" / "default.json");
  EXPECT_EQ(cfg.rewards.exploration, StageConfig::exploration());
  EXPECT_EQ(cfg.rewards.exploitation, StageConfig::exploitation());
  EXPECT_EQ(cfg.schedule, ScheduleConfig{});
  EXPECT_EQ(cfg.schedule.group_size, 8u);
  EXPECT_EQ(cfg.service.max_batch, 64u);
  EXPECT_EQ(cfg.languages.seen.size(), 13u);
  EXPECT_EQ(cfg.languages.unseen.size(), 4u);
}

TEST(Config, DiagnosticsNameFieldAndLine) {
  try {
    parse_json_document("{\n  \"schedule\": {\n    \"total_steps\": ,\n}", "cfg.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  try {
    AppConfig::from_json(nlohmann::json{{"schedule", {{"total_stepz", 3}}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("total_stepz"), std::string::npos) << e.what();
  }
  try {
    AppConfig::from_json(nlohmann::json{{"rewards", {{"exploration", {{"lambda_d", 2.0}}}}}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("lambda_d"), std::string::npos) << e.what();
  }
}

TEST(Scoring, StageResolution) {
  const auto ctx = context();
  ScoreRequest req;
  req.ground_truth = "1";
  req.responses = {"x"};
  EXPECT_THROW(resolve_stage(req, ctx), ValidationError);
  req.step = 49;
  EXPECT_EQ(resolve_stage(req, ctx).stage, Stage::exploration);
  req.step = 50;
  EXPECT_EQ(resolve_stage(req, ctx).stage, Stage::exploitation);
  req.total_steps = 400;
  EXPECT_EQ(resolve_stage(req, ctx).stage, Stage::exploration);
  req.stage = StageConfig::exploitation();
  EXPECT_THROW(resolve_stage(req, ctx), ValidationError);
}

TEST(Scoring, RequestValidation) {
  EXPECT_THROW(ScoreRequest::from_json(nlohmann::json{{"ground_truth", "1"}, {"stage", "explore"}}),
               ValidationError);
  EXPECT_THROW(ScoreRequest::from_json(nlohmann::json{
                   {"ground_truth", "1"}, {"responses", nlohmann::json::array()}, {"stage", "explore"}}),
               ValidationError);
  EXPECT_THROW(ScoreRequest::from_json(nlohmann::json{
                   {"ground_truth", "1"}, {"responses", {"a"}}, {"stage", "explore"}, {"bogus", 1}}),
               ValidationError);
  EXPECT_THROW(ScoreRequest::from_json(nlohmann::json{
                   {"ground_truth", "1"}, {"responses", {"a"}}, {"stage", "sideways"}}),
               ValidationError);
  const auto ok = ScoreRequest::from_json(nlohmann::json{
      {"ground_truth", "1"}, {"responses", {"a", "b"}}, {"step", 3}, {"forced_lang", "ro"}});
  EXPECT_EQ(ok.step, 3u);
  EXPECT_EQ(ok.forced_lang, LanguageCode("ro"));
}

TEST(Scoring, FixtureResponse) {
  const auto resp = score_request(ScoreRequest::from_json(fixture_request()), context());
  ASSERT_EQ(resp.results.size(), 8u);
  EXPECT_EQ(resp.engine_version, kEngineVersion);
  EXPECT_NEAR(std::accumulate(resp.advantages.begin(), resp.advantages.end(), 0.0), 0.0, 1e-9);
  EXPECT_NEAR(resp.results[0].rewards.total, 1.9, 1e-12);
  EXPECT_EQ(resp.results[5].detected_lang, LanguageCode("zh"));
  const auto back = ScoreResponse::from_json(resp.to_json());
  EXPECT_EQ(back.to_json(), resp.to_json());
}

TEST(Service, HandlerStatuses) {
  const auto ctx = context();
  EXPECT_EQ(handle_score("{not json", ctx, 64).status, 400);
  EXPECT_EQ(handle_score(R"({"ground_truth":"1"})", ctx, 64).status, 400);
  const auto bad = nlohmann::json::parse(handle_score("{not json", ctx, 64).body);
  EXPECT_TRUE(bad.contains("error"));

  nlohmann::json big = fixture_request();
  big["responses"] = std::vector<std::string>(65, "x");
  EXPECT_EQ(handle_score(big.dump(), ctx, 64).status, 413);
  big["responses"] = std::vector<std::string>(64, "x");
  EXPECT_EQ(handle_score(big.dump(), ctx, 64).status, 200);

  const auto ok = handle_score(fixture_request().dump(), ctx, 64);
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body, handle_score(fixture_request().dump(), ctx, 64).body);

  const auto health = handle_health();
  EXPECT_EQ(health.status, 200);
  EXPECT_EQ(nlohmann::json::parse(health.body)["status"], "ok");
}

TEST(Service, HttpRoundTripMatchesOffline) {
  ServiceSettings settings;
  settings.port = 0;
  ScoringService svc(context(), settings);
  const int port = svc.bind();
  ASSERT_GT(port, 0);
  std::thread worker([&] { svc.run(); });

  httplib::Client client("127.0.0.1", port);
  const auto health = client.Get("/v1/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  const auto req = fixture_request();
  const auto res = client.Post("/v1/score", req.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  const auto offline = score_request(ScoreRequest::from_json(req), context()).to_json();
  EXPECT_EQ(nlohmann::json::parse(res->body), offline);

  const auto bad = client.Post("/v1/score", "[]", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  svc.stop();
  worker.join();
}

TEST(Service, BindFailureThrows) {
  ServiceSettings settings;
  settings.bind = "203.0.113.1";
  settings.port = 1;
  ScoringService svc(context(), settings);
  EXPECT_THROW(svc.bind(), Error);
}

TEST(Cli, ScoreFixtureMatchesOracle) {
  const auto r = cli({"score", "--input", fixture("score_batch.jsonl"), "--stage", "exploit"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(r.out);
  const auto expected = nlohmann::json::parse(testing::slurp(fixture("score_expected.json")));
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(doc["results"][i]["rewards"]["total"].get<double>(),
                expected["totals"]["exploitation"][i].get<double>(), 1e-12);
  }
}

TEST(Cli, ScoreStepSelectsStage) {
  const auto dir = scratch("score_step");
  auto req = fixture_request();
  req.erase("stage");
  std::ofstream(dir / "req.jsonl") << req.dump() << "\n";
  const auto r = cli({"score", "--input", (dir / "req.jsonl").string(), "--step", "49",
                      "--total-steps", "200"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["stage"]["stage"], "exploration");
  const auto conflict = cli({"score", "--input", (dir / "req.jsonl").string(), "--step", "49",
                             "--stage", "exploit"});
  EXPECT_EQ(conflict.code, kExitValidation);
}

TEST(Cli, FilterExitCodes) {
  EXPECT_EQ(cli({"filter", "--output", "/tmp/x.jsonl"}).code, kExitValidation);
  const auto dir = scratch("filter");
  const auto ok = cli({"filter", "--input", fixture("filtration.jsonl"), "--output",
                       (dir / "out.jsonl").string(), "--pilot-size", "1"});
  EXPECT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(ok.out.find("all"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "out.jsonl.rejects.jsonl"));
  const auto io = cli({"filter", "--input", fixture("filtration.jsonl"), "--output",
                       (dir / "missing" / "out.jsonl").string()});
  EXPECT_EQ(io.code, kExitIo);
  const auto missing_in = cli({"filter", "--input", (dir / "nope.jsonl").string(), "--output",
                               (dir / "o.jsonl").string()});
  EXPECT_EQ(missing_in.code, kExitIo);
}

TEST(Cli, SimulateDeterministicAndSeedEcho) {
  const auto dir = scratch("sim");
  const auto cfg = (testing::data_dir() / "config" / "simulate.json").string();
  const auto a = cli({"simulate", "--config", cfg, "--seed", "5", "--trace-out",
                      (dir / "a.jsonl").string()});
  const auto b = cli({"simulate", "--config", cfg, "--seed", "5", "--trace-out",
                      (dir / "b.jsonl").string(), "--snapshot-out", (dir / "s.json").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(testing::slurp(dir / "a.jsonl"), testing::slurp(dir / "b.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "s.json"));

  const auto random = cli({"simulate", "--config", cfg});
  ASSERT_EQ(random.code, 0) << random.err;
  EXPECT_TRUE(nlohmann::json::parse(random.out)["seed"].is_number_unsigned());
}

TEST(Cli, SimulateInvalidConfig) {
  const auto dir = scratch("sim_bad");
  std::ofstream(dir / "bad.json") << "{\n  \"policy\": {\"lr\": -1}\n}\n";
  const auto r = cli({"simulate", "--config", (dir / "bad.json").string(), "--seed", "1"});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("lr"), std::string::npos) << r.err;
  std::ofstream(dir / "syntax.json") << "{\n  \"policy\": {\"lr\": }\n}\n";
  const auto s = cli({"simulate", "--config", (dir / "syntax.json").string(), "--seed", "1"});
  EXPECT_EQ(s.code, kExitValidation);
  EXPECT_NE(s.err.find("line 2"), std::string::npos) << s.err;
}

TEST(Cli, MetricsReportAndClusters) {
  const auto r = cli({"metrics", "--results", fixture("eval_results.jsonl"), "--embeddings",
                      fixture("embeddings_3blobs.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto* col : {"Acc", "Pass@k", "Tokens", "Compl.", "Acc^F", "Acc^*"}) {
    EXPECT_NE(r.out.find(col), std::string::npos) << col;
  }
  EXPECT_NE(r.out.find("clusters: 3"), std::string::npos) << r.out;
}

TEST(Cli, MetricsMalformedLine) {
  const auto dir = scratch("metrics_bad");
  std::ifstream in(fixture("eval_results.jsonl"));
  std::ofstream out(dir / "r.jsonl");
  std::string line;
  for (int i = 0; i < 4 && std::getline(in, line); ++i) out << line << "\n";
  out << "{\"sample_id\": 3\n";
  out.close();
  const auto r = cli({"metrics", "--results", (dir / "r.jsonl").string()});
  EXPECT_EQ(r.code, kExitValidation);
  EXPECT_NE(r.err.find("5"), std::string::npos) << r.err;
}

TEST(Cli, UnknownSubcommand) {
  EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
  EXPECT_EQ(cli({}).code, kExitValidation);
}

}  // namespace
}  // namespace explang
