#include "explang/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "explang/config.hpp"
#include "explang/data_pipeline.hpp"
#include "explang/error.hpp"
#include "explang/lang_id.hpp"
#include "explang/metrics.hpp"
#include "explang/scoring.hpp"
#include "explang/service.hpp"
#include "explang/sim_policy.hpp"

#ifndef EXPLANG_DATA_DIR
#define EXPLANG_DATA_DIR "data"
#endif

namespace explang {

std::filesystem::path default_profiles_path() {
  if (const char* env = std::getenv("EXPLANG_PROFILES"); env != nullptr && *env != '\0') {
    return env;
  }
  return std::filesystem::path(EXPLANG_DATA_DIR) / "lang" / "profiles.json";
}

namespace {

struct Common {
  std::string config;
  std::string profiles;

  AppConfig app() const { return config.empty() ? AppConfig{} : AppConfig::load(config); }

  LanguageProfileSet load_profiles(const AppConfig& cfg) const {
    std::filesystem::path path = profiles;
    if (path.empty()) path = cfg.languages.profiles;
    if (path.empty()) path = default_profiles_path();
    return LanguageProfileSet::load(path);
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON configuration file");
  cmd->add_option("--profiles", c.profiles, "Language profile JSON");
}

std::string read_text(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os.flush()) throw IoError("error while writing " + path);
}

// filter -----------------------------------------------------------------

struct FilterArgs {
  Common common;
  std::string input;
  std::string output;
  std::size_t target = kDefaultTargetAccepted;
  std::size_t pilot_size = kDefaultPilotSize;
  std::size_t cap = kDefaultSampleCap;
};

int cmd_filter(const FilterArgs& a, std::ostream& out) {
  const AppConfig cfg = a.common.app();
  const LanguageProfileSet profiles = a.common.load_profiles(cfg);
  if (a.pilot_size == 0) throw ValidationError("--pilot-size must be positive");

  // The first pilot_size records of each language estimate its acceptance rate.
  const std::vector<DatasetRecord> records = read_records(a.input);
  std::map<LanguageCode, std::size_t> taken;
  std::vector<DatasetRecord> pilot;
  for (const auto& r : records) {
    if (taken[r.target_lang]++ < a.pilot_size) pilot.push_back(r);
  }
  std::optional<AcceptancePlan> plan;
  if (!pilot.empty()) {
    PlanOptions opts;
    opts.target_accepted = a.target;
    opts.cap = a.cap;
    plan = estimate_acceptance(pilot, profiles, opts);
  }
  const FiltrationSummary summary =
      run_filtration(a.input, FiltrationPaths::for_output(a.output), profiles, plan);
  out << summary.to_table();
  if (plan) {
    out << fmt::format("\n{:<6} {:>8} {:>8}\n", "lang", "rate", "needed");
    for (const auto& [lang, b] : plan->languages) {
      out << fmt::format("{:<6} {:>8.3f} {:>8}{}\n", lang.str(), b.rate, b.needed_samples,
                         b.capped ? " (capped)" : "");
    }
  }
  return kExitOk;
}

// score ------------------------------------------------------------------

struct ScoreArgs {
  Common common;
  std::string input = "-";
  std::string output;
  std::string stage;
  std::optional<std::size_t> step;
  std::optional<std::size_t> total_steps;
  std::string forced_lang;
  std::string mode;
};

int cmd_score(const ScoreArgs& a, std::ostream& out) {
  if (!a.stage.empty() && a.step) throw ValidationError("--stage conflicts with --step");
  if (a.total_steps && !a.step) throw ValidationError("--total-steps requires --step");
  std::optional<StageConfig> stage;
  const AppConfig cfg = a.common.app();
  if (!a.stage.empty()) {
    auto s = parse_stage_name(a.stage);
    if (!s) throw ValidationError("--stage must be explore or exploit");
    stage = cfg.rewards.for_stage(*s);
  }
  std::optional<LanguageCode> forced;
  if (!a.forced_lang.empty()) {
    forced = LanguageCode::parse(a.forced_lang);
    if (!forced) throw ValidationError("--forced-lang must be a two-letter language code");
  }
  ScoringContext ctx{a.common.load_profiles(cfg), cfg.rewards, cfg.schedule};

  const std::string text = read_text(a.input);
  std::string result;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw ValidationError("invalid JSON");
      }
      ScoreRequest req = ScoreRequest::from_json(doc);
      if (!req.stage && !req.step) {
        req.stage = stage;
        req.step = a.step;
        req.total_steps = a.total_steps;
      }
      if (!req.forced_lang) req.forced_lang = forced;
      if (!a.mode.empty()) req.mode = a.mode == "plain" ? ParseMode::plain : ParseMode::explang;
      result += score_request(req, ctx).to_json().dump();
      result += '\n';
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: line {}: {}", a.input, line_no, e.what()));
    }
  }
  if (a.output.empty()) {
    out << result;
  } else {
    write_text(a.output, result);
  }
  return kExitOk;
}

// simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string trace_out;
  std::string snapshot_out;
  std::string mode;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  SimConfig cfg = a.config.empty() ? SimConfig{} : SimConfig::from_json(read_json_file(a.config));
  if (!a.mode.empty()) {
    if (a.mode == "two_stage") {
      cfg.mode = SimSchedule::two_stage;
    } else if (a.mode == "exploitation_only") {
      cfg.mode = SimSchedule::exploitation_only;
    } else {
      throw ValidationError("--mode must be two_stage or exploitation_only");
    }
  }
  const std::uint64_t seed = a.seed ? *a.seed : std::random_device{}();
  const TrainingTrace trace = simulate(cfg, seed);
  if (!a.trace_out.empty()) write_text(a.trace_out, trace.to_jsonl());
  nlohmann::json summary = trace.summary_json();
  summary["mode"] = to_string(cfg.mode);
  if (!a.snapshot_out.empty()) write_text(a.snapshot_out, summary.dump(2) + "\n");
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// metrics ----------------------------------------------------------------

struct MetricsArgs {
  std::string results;
  std::string passk_mode = "any";
  std::size_t k = 0;
  std::string embeddings;
  std::size_t max_k = 0;
  std::string json_out;
  std::vector<std::string> languages;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out) {
  auto mode = parse_passk_mode(a.passk_mode);
  if (!mode) throw ValidationError("--passk-mode must be any or unbiased");
  ReportOptions opts;
  opts.passk_mode = *mode;
  opts.k = a.k;
  opts.max_k = a.max_k;
  opts.languages = parse_language_list(a.languages);
  const auto results = read_eval_results(a.results);
  if (!a.embeddings.empty()) opts.embeddings = read_embeddings(a.embeddings);
  const MetricsReport rep = report(results, opts);
  if (!a.json_out.empty()) write_text(a.json_out, rep.to_json().dump(2) + "\n");
  out << rep.to_table();
  return kExitOk;
}

// serve ------------------------------------------------------------------

struct ServeArgs {
  Common common;
  std::string bind;
  std::optional<int> port;
  std::optional<std::size_t> max_batch;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  AppConfig cfg = a.common.app();
  if (!a.bind.empty()) cfg.service.bind = a.bind;
  if (a.port) cfg.service.port = *a.port;
  if (a.max_batch) cfg.service.max_batch = *a.max_batch;
  if (cfg.service.max_batch == 0) throw ValidationError("--max-batch must be positive");
  ScoringService service(ScoringContext{a.common.load_profiles(cfg), cfg.rewards, cfg.schedule},
                         cfg.service);
  const int port = service.bind();
  out << fmt::format("listening on {}:{}", cfg.service.bind, port) << std::endl;
  service.run();
  return kExitOk;
}

// train-profiles ---------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string output;
  std::size_t cap = kDefaultNgramCap;
  std::vector<std::string> languages;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const auto registered = parse_language_list(a.languages);
  auto corpus = load_corpus_dir(a.corpus);
  if (!registered.empty()) {
    std::erase_if(corpus, [&](const TrainingText& t) {
      return std::find(registered.begin(), registered.end(), t.lang) == registered.end();
    });
  }
  const LanguageProfileSet profiles = train_profiles(corpus, a.cap, registered);
  profiles.save(a.output);
  out << fmt::format("trained {} profiles from {} texts -> {}\n", profiles.size(), corpus.size(),
                     a.output);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilingual thinking-language reward engine and tooling", "explang"};
  app.set_version_flag("--version", std::string(kEngineVersion));
  app.require_subcommand(1);

  FilterArgs filter;
  auto* f = app.add_subcommand("filter", "Two-way filtration of multilingual generations");
  add_common(f, filter.common);
  f->add_option("--input", filter.input, "JSON-lines records")->required();
  f->add_option("--output", filter.output, "Accepted records (JSON lines)")->required();
  f->add_option("--target-per-lang", filter.target, "Accepted records wanted per language");
  f->add_option("--pilot-size", filter.pilot_size, "Records per language used to estimate rates");
  f->add_option("--max-samples-cap", filter.cap, "Upper bound on needed samples");

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score JSON-lines request batches offline");
  add_common(s, score.common);
  s->add_option("--input", score.input, "JSON-lines requests, '-' for stdin");
  s->add_option("--output", score.output, "Write responses here instead of stdout");
  s->add_option("--stage", score.stage, "explore or exploit");
  s->add_option("--step", score.step, "0-based training step");
  s->add_option("--total-steps", score.total_steps, "Total training steps");
  s->add_option("--forced-lang", score.forced_lang, "Language every response must think in");
  s->add_option("--mode", score.mode, "explang or plain")->check(CLI::IsMember({"explang", "plain"}));

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Run the language-selection simulator");
  m->add_option("--config", sim.config, "Simulation config JSON");
  m->add_option("--seed", sim.seed, "Training seed (random when omitted)");
  m->add_option("--trace-out", sim.trace_out, "Per-step trace (JSON lines)");
  m->add_option("--snapshot-out", sim.snapshot_out, "Stage snapshot summary (JSON)");
  m->add_option("--mode", sim.mode, "two_stage or exploitation_only");

  MetricsArgs metrics;
  auto* r = app.add_subcommand("metrics", "Evaluation report from per-run results");
  r->add_option("--results", metrics.results, "JSON-lines evaluation results")->required();
  r->add_option("--passk-mode", metrics.passk_mode, "any or unbiased");
  r->add_option("--k", metrics.k, "k for Pass@k (default: runs per sample)");
  r->add_option("--embeddings", metrics.embeddings, "Embedding matrices for cluster counts");
  r->add_option("--max-k", metrics.max_k, "Largest cluster count considered");
  r->add_option("--json-out", metrics.json_out, "Write the JSON report here");
  r->add_option("--languages", metrics.languages, "Only report these languages");

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Run the HTTP scoring service");
  add_common(v, serve.common);
  v->add_option("--bind", serve.bind, "Bind address");
  v->add_option("--port", serve.port, "Port (0 picks a free one)");
  v->add_option("--max-batch", serve.max_batch, "Largest accepted batch");

  TrainArgs train;
  auto* t = app.add_subcommand("train-profiles", "Train language profiles from a corpus directory");
  t->add_option("--corpus", train.corpus, "Directory of <code>.txt files")->required();
  t->add_option("--output", train.output, "Profile JSON to write")->required();
  t->add_option("--cap", train.cap, "N-grams kept per language");
  t->add_option("--languages", train.languages, "Languages that must be present");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*f) return cmd_filter(filter, out);
    if (*s) return cmd_score(score, out);
    if (*m) return cmd_simulate(sim, out);
    if (*r) return cmd_metrics(metrics, out);
    if (*v) return cmd_serve(serve, out);
    if (*t) return cmd_train(train, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace explang
