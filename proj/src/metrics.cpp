#include "explang/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "explang/error.hpp"

namespace explang {

void EvalResult::validate() const {
  if (correct != 0 && correct != 1) throw ValidationError("correct must be 0 or 1");
  if (compliant != 0 && compliant != 1) throw ValidationError("compliant must be 0 or 1");
}

nlohmann::json EvalResult::to_json() const {
  return {{"sample_id", sample_id}, {"run_index", run_index}, {"correct", correct},
          {"compliant", compliant}, {"language", language.str()}, {"tokens", tokens},
          {"dataset", dataset},     {"setting", setting}};
}

EvalResult EvalResult::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("expected a JSON object");
  auto field = [&](const char* key) -> const nlohmann::json& {
    auto it = doc.find(key);
    if (it == doc.end()) throw ValidationError(std::string("missing field '") + key + "'");
    return *it;
  };
  auto flag = [&](const char* key) {
    const auto& v = field(key);
    if (v.is_boolean()) return v.get<bool>() ? 1 : 0;
    if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1)) {
      throw ValidationError(std::string("field '") + key + "' must be 0 or 1");
    }
    return static_cast<int>(v.get<long long>());
  };
  auto count = [&](const char* key) {
    const auto& v = field(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ValidationError(std::string("field '") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  EvalResult r;
  const auto& id = field("sample_id");
  if (id.is_string()) {
    r.sample_id = id.get<std::string>();
  } else if (id.is_number_integer()) {
    r.sample_id = std::to_string(id.get<long long>());
  } else {
    throw ValidationError("field 'sample_id' must be a string");
  }
  r.run_index = count("run_index");
  r.correct = flag("correct");
  r.compliant = flag("compliant");
  const auto& lang = field("language");
  auto code = lang.is_string() ? LanguageCode::parse(lang.get<std::string>()) : std::nullopt;
  if (!code) throw ValidationError("field 'language' must be a two-letter code");
  r.language = *code;
  r.tokens = count("tokens");
  for (auto [key, dst] : {std::pair{"dataset", &r.dataset}, std::pair{"setting", &r.setting}}) {
    if (auto it = doc.find(key); it != doc.end()) {
      if (!it->is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
      *dst = it->get<std::string>();
    }
  }
  return r;
}

std::vector<EvalResult> parse_eval_results(std::string_view text, std::string_view source) {
  std::vector<EvalResult> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    try {
      out.push_back(EvalResult::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(fmt::format("{}: line {}: invalid JSON", source, line_no));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{}: line {}: {}", source, line_no, e.what()));
    }
    if (end == text.size()) break;
  }
  return out;
}

std::vector<EvalResult> read_eval_results(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_eval_results(ss.str(), path.string());
}

namespace {

void require_non_empty(std::span<const EvalResult> results, std::string_view what) {
  if (results.empty()) throw ValidationError(std::string(what) + " of an empty result set");
}

template <typename Fn>
double mean_of(std::span<const EvalResult> results, Fn&& fn) {
  double sum = 0.0;
  for (const auto& r : results) sum += fn(r);
  return sum / static_cast<double>(results.size());
}

}  // namespace

double accuracy(std::span<const EvalResult> results) {
  require_non_empty(results, "accuracy");
  return mean_of(results, [](const EvalResult& r) { return r.correct; });
}

double compliance(std::span<const EvalResult> results) {
  require_non_empty(results, "compliance");
  return mean_of(results, [](const EvalResult& r) { return r.compliant; });
}

double mean_tokens(std::span<const EvalResult> results) {
  require_non_empty(results, "mean tokens");
  return mean_of(results, [](const EvalResult& r) { return static_cast<double>(r.tokens); });
}

double acc_filtered(std::span<const EvalResult> results) {
  require_non_empty(results, "filtered accuracy");
  std::size_t kept = 0;
  std::size_t correct = 0;
  for (const auto& r : results) {
    if (r.compliant == 1) {
      ++kept;
      correct += r.correct == 1 ? 1 : 0;
    }
  }
  if (kept == 0) throw ValidationError("filtered accuracy is undefined without compliant runs");
  return static_cast<double>(correct) / static_cast<double>(kept);
}

double acc_strict(std::span<const EvalResult> results) {
  require_non_empty(results, "strict accuracy");
  return mean_of(results, [](const EvalResult& r) { return r.correct & r.compliant; });
}

std::string_view to_string(PasskMode mode) {
  return mode == PasskMode::any_of_n ? "any" : "unbiased";
}

std::optional<PasskMode> parse_passk_mode(std::string_view text) {
  if (text == "any" || text == "any-of-n") return PasskMode::any_of_n;
  if (text == "unbiased") return PasskMode::unbiased;
  return std::nullopt;
}

double pass_at_k(std::size_t n, std::size_t c, std::size_t k, PasskMode mode) {
  if (c > n) throw ValidationError("pass@k: correct runs exceed total runs");
  if (k < 1 || k > n) throw ValidationError("pass@k: k must lie in [1, n]");
  if (mode == PasskMode::any_of_n) return c >= 1 ? 1.0 : 0.0;
  if (n - c < k) return 1.0;
  // C(n-c, k) / C(n, k) = prod_{i=n-c+1}^{n} (1 - k / i)
  double miss = 1.0;
  for (std::size_t i = n - c + 1; i <= n; ++i) {
    miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - miss;
}

std::map<LanguageCode, double> selection_rates(std::span<const LanguageCode> languages) {
  if (languages.empty()) throw ValidationError("selection rates of an empty result set");
  std::map<LanguageCode, std::size_t> counts;
  for (const auto& l : languages) ++counts[l];
  std::map<LanguageCode, double> rates;
  for (const auto& [l, c] : counts) {
    rates[l] = static_cast<double>(c) / static_cast<double>(languages.size());
  }
  return rates;
}

std::map<LanguageCode, double> selection_rates(std::span<const EvalResult> results) {
  std::vector<LanguageCode> langs;
  langs.reserve(results.size());
  for (const auto& r : results) langs.push_back(r.language);
  return selection_rates(langs);
}

double entropy_of(std::span<const double> probs) {
  double sum = 0.0;
  double h = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("entropy: negative or non-finite mass");
    sum += p;
    if (p > 0.0) h -= p * std::log(p);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("entropy: masses do not sum to 1");
  return h;
}

double selection_entropy(const std::map<LanguageCode, double>& rates) {
  std::vector<double> probs;
  probs.reserve(rates.size());
  for (const auto& [_, p] : rates) probs.push_back(p);
  return entropy_of(probs);
}

WinTieLose win_tie_lose(std::span<const AccuracyPair> per_sample) {
  if (per_sample.empty()) throw ValidationError("win/tie/lose of an empty sample list");
  std::size_t win = 0;
  std::size_t tie = 0;
  for (const auto& p : per_sample) {
    for (double v : {p.non_english, p.english}) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("accuracies must lie in [0, 1]");
    }
    if (p.non_english > p.english) {
      ++win;
    } else if (p.non_english == p.english) {
      ++tie;
    }
  }
  const auto n = static_cast<double>(per_sample.size());
  WinTieLose out;
  out.win = static_cast<double>(win) / n;
  out.tie = static_cast<double>(tie) / n;
  // Derived by subtraction so the three shares sum to exactly 1.
  out.lose = 1.0 - (out.win + out.tie);
  return out;
}

void EmbeddingMatrix::validate() const {
  if (rows < 2) throw ValidationError("embedding matrix needs at least two rows");
  if (dims < 1) throw ValidationError("embedding matrix needs at least one dimension");
  if (values.size() != rows * dims) {
    throw ValidationError(fmt::format("embedding matrix declares {}x{} but holds {} values", rows,
                                      dims, values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("embedding matrix holds a non-finite value");
  }
}

namespace {

EmbeddingMatrix embedding_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ValidationError("embedding entry must be an object");
  EmbeddingMatrix m;
  try {
    m.rows = doc.at("rows").get<std::size_t>();
    m.dims = doc.at("dims").get<std::size_t>();
    const auto& vals = doc.at("values");
    for (const auto& v : vals) {
      if (v.is_array()) {
        for (const auto& x : v) m.values.push_back(x.get<double>());
      } else {
        m.values.push_back(v.get<double>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embedding entry: ") + e.what());
  }
  m.validate();
  return m;
}

std::vector<EmbeddingMatrix> embeddings_from_text(std::string_view text) {
  std::vector<EmbeddingMatrix> out;
  EmbeddingMatrix cur;
  auto flush = [&] {
    if (cur.rows > 0) {
      cur.validate();
      out.push_back(std::move(cur));
      cur = EmbeddingMatrix{};
    }
  };
  std::istringstream is{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size()) {
        throw ValidationError(fmt::format("embeddings line {}: '{}' is not a number", line_no, tok));
      }
      row.push_back(v);
    }
    if (row.empty()) {
      flush();
      continue;
    }
    if (cur.rows == 0) cur.dims = row.size();
    if (row.size() != cur.dims) {
      throw ValidationError(fmt::format("embeddings line {}: expected {} values, found {}",
                                        line_no, cur.dims, row.size()));
    }
    cur.values.insert(cur.values.end(), row.begin(), row.end());
    ++cur.rows;
  }
  flush();
  return out;
}

}  // namespace

std::vector<EmbeddingMatrix> parse_embeddings(std::string_view text) {
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) throw ValidationError("embeddings input is empty");
  if (text[first] == '{' || text[first] == '[') {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(std::string("embeddings: invalid JSON: ") + e.what());
    }
    std::vector<EmbeddingMatrix> out;
    if (doc.is_array()) {
      for (const auto& m : doc) out.push_back(embedding_from_json(m));
    } else {
      out.push_back(embedding_from_json(doc));
    }
    if (out.empty()) throw ValidationError("embeddings input holds no matrices");
    return out;
  }
  return embeddings_from_text(text);
}

std::vector<EmbeddingMatrix> read_embeddings(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_embeddings(ss.str());
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

namespace {

GroupMetrics summarize(std::span<const EvalResult> rs, const ReportOptions& options) {
  GroupMetrics g;
  g.runs = rs.size();
  g.acc = accuracy(rs);
  g.tokens = mean_tokens(rs);
  g.compl_rate = compliance(rs);
  g.acc_strict = acc_strict(rs);
  const bool any_compliant =
      std::any_of(rs.begin(), rs.end(), [](const EvalResult& r) { return r.compliant == 1; });
  if (any_compliant) g.acc_filtered = acc_filtered(rs);

  std::map<std::string, std::pair<std::size_t, std::size_t>> per_sample;  // runs, correct
  for (const auto& r : rs) {
    auto& [n, c] = per_sample[r.sample_id];
    ++n;
    c += static_cast<std::size_t>(r.correct);
  }
  g.samples = per_sample.size();
  double sum = 0.0;
  for (const auto& [id, nc] : per_sample) {
    const std::size_t k = options.k == 0 ? nc.first : options.k;
    if (k > nc.first) {
      throw ValidationError(fmt::format("sample '{}' has {} runs, fewer than k={}", id, nc.first, k));
    }
    sum += pass_at_k(nc.first, nc.second, k, options.passk_mode);
  }
  g.pass_at_k = sum / static_cast<double>(per_sample.size());
  return g;
}

}  // namespace

MetricsReport report(std::span<const EvalResult> results, const ReportOptions& options) {
  MetricsReport rep;
  rep.passk_mode = options.passk_mode;
  const std::set<LanguageCode> wanted(options.languages.begin(), options.languages.end());

  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<EvalResult>> groups;
  std::map<std::pair<std::string, std::string>, std::vector<EvalResult>> aggregates;
  std::vector<EvalResult> kept;
  std::set<LanguageCode> seen;
  for (const auto& r : results) {
    r.validate();
    if (!wanted.empty() && !wanted.contains(r.language)) continue;
    groups[{r.dataset, r.setting, r.language.str()}].push_back(r);
    aggregates[{r.dataset, r.setting}].push_back(r);
    kept.push_back(r);
    seen.insert(r.language);
  }
  for (const auto& lang : wanted) {
    if (!seen.contains(lang)) {
      rep.warnings.push_back("no results for language '" + lang.str() + "'; group omitted");
    }
  }

  for (const auto& [key, agg] : aggregates) {
    GroupMetrics all = summarize(agg, options);
    all.dataset = key.first;
    all.setting = key.second;
    all.language = "*";
    rep.groups.push_back(all);
    for (auto it = groups.lower_bound({key.first, key.second, ""});
         it != groups.end() && std::get<0>(it->first) == key.first &&
         std::get<1>(it->first) == key.second;
         ++it) {
      GroupMetrics g = summarize(it->second, options);
      g.dataset = key.first;
      g.setting = key.second;
      g.language = std::get<2>(it->first);
      if (!g.acc_filtered) {
        rep.warnings.push_back(fmt::format("{}/{}/{}: no compliant runs; Acc^F undefined",
                                           g.dataset, g.setting, g.language));
      }
      rep.groups.push_back(std::move(g));
    }
  }

  if (!kept.empty()) {
    rep.selection = selection_rates(kept);
    rep.selection_entropy = selection_entropy(rep.selection);
  } else if (!results.empty()) {
    rep.warnings.push_back("no results left after language filtering");
  }
  for (const auto& emb : options.embeddings) {
    rep.cluster_counts.push_back(cluster_count(emb, options.max_k));
  }
  return rep;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    groups_json.push_back({{"dataset", g.dataset},
                           {"setting", g.setting},
                           {"language", g.language},
                           {"samples", g.samples},
                           {"runs", g.runs},
                           {"acc", g.acc},
                           {"pass_at_k", g.pass_at_k},
                           {"tokens", g.tokens},
                           {"compliance", g.compl_rate},
                           {"acc_filtered", g.acc_filtered ? nlohmann::json(*g.acc_filtered)
                                                           : nlohmann::json(nullptr)},
                           {"acc_strict", g.acc_strict}});
  }
  nlohmann::json sel = nlohmann::json::object();
  for (const auto& [l, p] : selection) sel[l.str()] = p;
  nlohmann::json doc = {{"passk_mode", to_string(passk_mode)},
                        {"groups", groups_json},
                        {"selection_rates", sel},
                        {"selection_entropy", selection_entropy},
                        {"warnings", warnings}};
  if (!cluster_counts.empty()) {
    double mean = 0.0;
    for (auto c : cluster_counts) mean += static_cast<double>(c);
    mean /= static_cast<double>(cluster_counts.size());
    doc["clusters"] = {{"counts", cluster_counts}, {"mean", mean}};
  }
  return doc;
}

std::string MetricsReport::to_table() const {
  auto pct = [](double v) { return fmt::format("{:.1f}", 100.0 * v); };
  std::string out = fmt::format("{:<12} {:<12} {:<4} {:>7} {:>5} {:>7} {:>7} {:>8} {:>7} {:>7} {:>7}\n",
                                "dataset", "setting", "lang", "samples", "runs", "Acc",
                                "Pass@k", "Tokens", "Compl.", "Acc^F", "Acc^*");
  for (const auto& g : groups) {
    out += fmt::format("{:<12} {:<12} {:<4} {:>7} {:>5} {:>7} {:>7} {:>8.1f} {:>7} {:>7} {:>7}\n",
                       g.dataset, g.setting, g.language, g.samples, g.runs, pct(g.acc),
                       pct(g.pass_at_k), g.tokens, pct(g.compl_rate),
                       g.acc_filtered ? pct(*g.acc_filtered) : std::string("-"),
                       pct(g.acc_strict));
  }
  if (!selection.empty()) {
    out += "selection:";
    for (const auto& [l, p] : selection) out += fmt::format(" {}={:.4f}", l.str(), p);
    out += fmt::format("  entropy={:.4f}\n", selection_entropy);
  }
  if (!cluster_counts.empty()) {
    out += "clusters:";
    for (auto c : cluster_counts) out += fmt::format(" {}", c);
    out += '\n';
  }
  for (const auto& w : warnings) out += "warning: " + w + '\n';
  return out;
}

}  // namespace explang
