#pragma once

// Evaluation metrics over repeated runs: accuracy, compliance, accuracy
// restricted to compliant runs (Acc^F), accuracy counting non-compliant runs
// as errors (Acc^*), Pass@k, language-selection statistics, win/tie/lose
// comparisons and spectral cluster counts of trajectory embeddings.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "explang/language.hpp"

namespace explang {

struct EvalResult {
  std::string sample_id;
  std::size_t run_index = 0;
  int correct = 0;
  int compliant = 0;
  LanguageCode language = kEnglish;
  std::size_t tokens = 0;
  std::string dataset = "default";
  std::string setting = "default";

  /// Throws ValidationError when correct/compliant are outside {0,1}.
  void validate() const;
  nlohmann::json to_json() const;
  static EvalResult from_json(const nlohmann::json& doc);
};

/// JSON-lines; errors name the offending line number.
std::vector<EvalResult> read_eval_results(const std::filesystem::path& path);
std::vector<EvalResult> parse_eval_results(std::string_view text, std::string_view source = "input");

double accuracy(std::span<const EvalResult> results);
double compliance(std::span<const EvalResult> results);
double mean_tokens(std::span<const EvalResult> results);
/// Mean correctness over compliant runs; throws ValidationError when none.
double acc_filtered(std::span<const EvalResult> results);
/// Share of runs that are both correct and compliant.
double acc_strict(std::span<const EvalResult> results);

enum class PasskMode {
  any_of_n,  ///< 1 iff at least one run is correct; k is only range-checked
  unbiased,  ///< 1 - C(n-c, k) / C(n, k)
};

std::string_view to_string(PasskMode mode);
std::optional<PasskMode> parse_passk_mode(std::string_view text);

double pass_at_k(std::size_t n, std::size_t c, std::size_t k,
                 PasskMode mode = PasskMode::any_of_n);

std::map<LanguageCode, double> selection_rates(std::span<const EvalResult> results);
std::map<LanguageCode, double> selection_rates(std::span<const LanguageCode> languages);

/// Shannon entropy in nats of a distribution (values >= 0 summing to 1).
double selection_entropy(const std::map<LanguageCode, double>& rates);
double entropy_of(std::span<const double> probs);

struct WinTieLose {
  double win = 0.0;
  double tie = 0.0;
  double lose = 0.0;
};

struct AccuracyPair {
  double non_english = 0.0;
  double english = 0.0;
};

/// Exact comparison of the two accuracies per sample.
WinTieLose win_tie_lose(std::span<const AccuracyPair> per_sample);

struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dims = 0;
  std::vector<double> values;  ///< row-major

  /// rows >= 2, dims >= 1, values.size() == rows * dims, all finite.
  void validate() const;
  double at(std::size_t r, std::size_t c) const { return values[r * dims + c]; }
};

/// Accepts a JSON object {rows, dims, values}, a JSON array of such objects,
/// or whitespace-separated text with one row per line and blank lines between
/// matrices.
std::vector<EmbeddingMatrix> parse_embeddings(std::string_view text);
std::vector<EmbeddingMatrix> read_embeddings(const std::filesystem::path& path);

struct Clustering {
  std::size_t k = 0;
  std::vector<std::size_t> labels;
  std::vector<double> eigenvalues;  ///< ascending, of the normalized Laplacian
};

inline constexpr std::size_t kMaxSpectralRows = 64;

/// Shifted-cosine affinity (1 + cos) / 2 without self-loops, symmetric
/// normalized Laplacian, k at the largest gap lambda_{k+1} - lambda_k over
/// 2 <= k < max_k, then k-means on the row-normalized spectral embedding
/// with deterministic farthest-first seeding. max_k = 0 means min(rows, 8).
Clustering spectral_cluster(const EmbeddingMatrix& emb, std::size_t max_k = 0);
std::size_t cluster_count(const EmbeddingMatrix& emb, std::size_t max_k = 0);

struct ReportOptions {
  PasskMode passk_mode = PasskMode::any_of_n;
  /// 0 uses each sample's run count.
  std::size_t k = 0;
  /// When non-empty, only these languages are reported; requested languages
  /// without results are omitted with a warning.
  std::vector<LanguageCode> languages;
  std::vector<EmbeddingMatrix> embeddings;
  std::size_t max_k = 0;
};

struct GroupMetrics {
  std::string dataset;
  std::string setting;
  std::string language;  ///< "*" aggregates all languages
  std::size_t samples = 0;
  std::size_t runs = 0;
  double acc = 0.0;
  double pass_at_k = 0.0;
  double tokens = 0.0;
  double compl_rate = 0.0;
  std::optional<double> acc_filtered;
  double acc_strict = 0.0;
};

struct MetricsReport {
  std::vector<GroupMetrics> groups;
  std::map<LanguageCode, double> selection;
  double selection_entropy = 0.0;
  std::vector<std::size_t> cluster_counts;
  std::vector<std::string> warnings;
  PasskMode passk_mode = PasskMode::any_of_n;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

/// Groups by (dataset, setting, language) plus a per-(dataset, setting)
/// aggregate; deterministic ordering.
MetricsReport report(std::span<const EvalResult> results, const ReportOptions& options = {});

}  // namespace explang
