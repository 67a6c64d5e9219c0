#include "explang/lang_id.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "explang/error.hpp"
#include "utf8.hpp"

namespace explang {

namespace {

bool is_letter(char32_t cp) {
  if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  if (cp <= 0xBF) return false;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp == 0x0640 || cp == 0x060C || cp == 0x061B || cp == 0x061F) return false;
  if (cp >= 0x0660 && cp <= 0x0669) return false;
  if (cp >= 0x066A && cp <= 0x066D) return false;
  if (cp >= 0x06F0 && cp <= 0x06F9) return false;
  if (cp >= 0x0964 && cp <= 0x096F) return false;
  if (cp >= 0x0E50 && cp <= 0x0E5B) return false;
  if (cp >= 0x2000 && cp <= 0x2BFF) return false;
  if (cp >= 0x2E00 && cp <= 0x2E7F) return false;
  if (cp >= 0x3000 && cp <= 0x303F) return cp == 0x3005;
  if (cp >= 0xFE30 && cp <= 0xFE6F) return false;
  if (cp >= 0xFF00 && cp <= 0xFF20) return false;
  if (cp >= 0xFF3B && cp <= 0xFF40) return false;
  if (cp >= 0xFF5B && cp <= 0xFF65) return false;
  if (cp == 0xFFFD || cp == 0xFEFF) return false;
  if (cp >= 0x1F000) return false;
  return true;
}

char32_t to_lower(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  return cp;
}

bool is_math_run_char(char c) {
  if (c >= '0' && c <= '9') return true;
  switch (c) {
    case '+': case '-': case '*': case '/': case '=': case '^': case '<': case '>':
    case '(': case ')': case '[': case ']': case '{': case '}': case '.': case ',':
    case ':': case ';': case '|': case '!': case '_':
      return true;
    default:
      return false;
  }
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

// Index one past the brace matching the '{' at `open`, or npos.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}') {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::string strip_spans_once(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  auto skip_to = [&](std::size_t end) {
    out.push_back(' ');
    i = end;
  };
  while (i < s.size()) {
    const std::string_view rest = s.substr(i);
    if (rest.starts_with("\\boxed{")) {
      const std::size_t end = match_brace(s, i + 6);
      if (end != std::string_view::npos) {
        skip_to(end);
        continue;
      }
    }
    if (rest.starts_with("$$")) {
      const std::size_t close = s.find("$$", i + 2);
      if (close != std::string_view::npos) {
        skip_to(close + 2);
        continue;
      }
    } else if (rest.starts_with("$")) {
      const std::size_t close = s.find('$', i + 1);
      if (close != std::string_view::npos) {
        skip_to(close + 1);
        continue;
      }
    }
    if (rest.starts_with("\\[")) {
      const std::size_t close = s.find("\\]", i + 2);
      if (close != std::string_view::npos) {
        skip_to(close + 2);
        continue;
      }
    }
    if (rest.starts_with("\\(")) {
      const std::size_t close = s.find("\\)", i + 2);
      if (close != std::string_view::npos) {
        skip_to(close + 2);
        continue;
      }
    }
    if (rest.starts_with(kLangOpen)) {
      const std::size_t close = s.find(kLangClose, i);
      if (close != std::string_view::npos) {
        skip_to(close + kLangClose.size());
        continue;
      }
    }
    if (rest.starts_with("<")) {
      std::size_t j = 1;
      if (j < rest.size() && rest[j] == '/') ++j;
      const std::size_t name_begin = j;
      while (j < rest.size() && (is_alpha(rest[j]) || rest[j] == '_')) ++j;
      if (j > name_begin && j < rest.size() && rest[j] == '>') {
        skip_to(i + j + 1);
        continue;
      }
    }
    if (rest.starts_with("\\") && rest.size() > 1 && is_alpha(rest[1])) {
      std::size_t j = 1;
      while (j < rest.size() && is_alpha(rest[j])) ++j;
      skip_to(i + j);
      continue;
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

std::string strip_math_runs(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_math_run_char(s[i])) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    // Maximal run of math characters with embedded spaces, trimmed of
    // trailing spaces.
    std::size_t j = i;
    std::size_t last = i;
    std::size_t non_space = 0;
    while (j < s.size() && (is_math_run_char(s[j]) || is_space(s[j]))) {
      if (!is_space(s[j])) {
        last = j;
        ++non_space;
      }
      ++j;
    }
    if (non_space >= 4) {
      out.push_back(' ');
    } else {
      out.append(s.substr(i, last + 1 - i));
    }
    i = last + 1;
  }
  return out;
}

struct Normalized {
  std::u32string seq;
  std::size_t letter_bytes = 0;
};

Normalized normalize(std::string_view text) {
  Normalized out;
  const std::u32string cps = utf8::decode(text);
  out.seq.push_back(U' ');
  for (char32_t cp : cps) {
    if (is_letter(cp)) {
      out.seq.push_back(to_lower(cp));
      out.letter_bytes += utf8::encode(cp).size();
    } else if (out.seq.back() != U' ') {
      out.seq.push_back(U' ');
    }
  }
  if (out.seq.size() == 1) out.seq.clear();
  if (!out.seq.empty() && out.seq.back() != U' ') out.seq.push_back(U' ');
  return out;
}

void for_each_ngram(const std::u32string& seq, auto&& fn) {
  for (std::size_t n = 1; n <= 3; ++n) {
    if (seq.size() < n) break;
    for (std::size_t i = 0; i + n <= seq.size(); ++i) {
      if (n == 1 && seq[i] == U' ') continue;
      fn(utf8::encode(std::u32string_view(seq).substr(i, n)));
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// LanguageProfileSet

void LanguageProfileSet::add(const LanguageCode& lang, NgramProfile freqs) {
  if (freqs.empty()) {
    throw ConfigError("empty n-gram profile for language '" + lang.str() + "'");
  }
  double sum = 0.0;
  double min_freq = std::numeric_limits<double>::infinity();
  for (const auto& [gram, f] : freqs) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ConfigError("non-positive frequency for n-gram '" + gram + "' in profile '" +
                        lang.str() + "'");
    }
    sum += f;
    min_freq = std::min(min_freq, f);
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("profile '" + lang.str() + "' frequencies sum to " + std::to_string(sum) +
                      ", expected 1");
  }
  profiles_[lang] = Entry{std::move(freqs), 0.5 * min_freq};
}

std::vector<LanguageCode> LanguageProfileSet::languages() const {
  std::vector<LanguageCode> out;
  out.reserve(profiles_.size());
  for (const auto& [lang, _] : profiles_) out.push_back(lang);
  return out;
}

const NgramProfile& LanguageProfileSet::profile(const LanguageCode& lang) const {
  auto it = profiles_.find(lang);
  if (it == profiles_.end()) throw ConfigError("no profile for language '" + lang.str() + "'");
  return it->second.freqs;
}

double LanguageProfileSet::unseen_probability(const LanguageCode& lang) const {
  auto it = profiles_.find(lang);
  if (it == profiles_.end()) throw ConfigError("no profile for language '" + lang.str() + "'");
  return it->second.unseen;
}

LanguageProfileSet LanguageProfileSet::subset(std::span<const LanguageCode> langs) const {
  LanguageProfileSet out;
  for (const auto& lang : langs) out.add(lang, profile(lang));
  return out;
}

nlohmann::json LanguageProfileSet::to_json() const {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [lang, entry] : profiles_) {
    nlohmann::json p = nlohmann::json::object();
    for (const auto& [gram, f] : entry.freqs) p[gram] = f;
    doc[lang.str()] = std::move(p);
  }
  return doc;
}

LanguageProfileSet LanguageProfileSet::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("profile document must be a JSON object");
  LanguageProfileSet out;
  for (const auto& [code, p] : doc.items()) {
    auto lang = LanguageCode::parse(code);
    if (!lang) throw ConfigError("profile key '" + code + "' is not a language code");
    if (!p.is_object()) throw ConfigError("profile '" + code + "' must be an object");
    NgramProfile freqs;
    for (const auto& [gram, f] : p.items()) {
      if (!f.is_number()) throw ConfigError("profile '" + code + "' has a non-numeric entry");
      freqs[gram] = f.get<double>();
    }
    out.add(*lang, std::move(freqs));
  }
  return out;
}

void LanguageProfileSet::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write profiles to " + path.string());
  os << to_json().dump() << '\n';
  if (!os) throw IoError("failed writing profiles to " + path.string());
}

LanguageProfileSet LanguageProfileSet::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read profiles from " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed profile JSON in " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

// ---------------------------------------------------------------------------
// Training

LanguageProfileSet train_profiles(std::span<const TrainingText> corpus, std::size_t ngram_cap,
                                  std::span<const LanguageCode> registered) {
  if (ngram_cap == 0) throw ValidationError("ngram_cap must be positive");
  std::map<LanguageCode, std::unordered_map<std::string, std::uint64_t>> counts;
  for (const auto& item : corpus) {
    auto& table = counts[item.lang];
    for_each_ngram(normalize(item.text).seq, [&](std::string gram) { ++table[std::move(gram)]; });
  }
  for (const auto& lang : registered) {
    auto it = counts.find(lang);
    if (it == counts.end() || it->second.empty()) {
      throw ConfigError("training corpus has no text for registered language '" + lang.str() +
                        "'");
    }
  }

  LanguageProfileSet out;
  for (auto& [lang, table] : counts) {
    if (table.empty()) {
      throw ConfigError("training corpus for language '" + lang.str() + "' has no letters");
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(table.begin(), table.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (ranked.size() > ngram_cap) ranked.resize(ngram_cap);
    double total = 0.0;
    for (const auto& [_, c] : ranked) total += static_cast<double>(c + 1);
    NgramProfile freqs;
    for (const auto& [gram, c] : ranked) freqs[gram] = static_cast<double>(c + 1) / total;
    out.add(lang, std::move(freqs));
  }
  return out;
}

std::vector<TrainingText> load_corpus_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw IoError("corpus directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<TrainingText> out;
  for (const auto& file : files) {
    auto lang = LanguageCode::parse(file.stem().string());
    if (!lang) continue;
    std::ifstream is(file, std::ios::binary);
    if (!is) throw IoError("cannot read corpus file " + file.string());
    std::string line;
    std::string paragraph;
    auto flush = [&] {
      if (!paragraph.empty()) out.push_back({paragraph, *lang});
      paragraph.clear();
    };
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) {
        flush();
      } else {
        if (!paragraph.empty()) paragraph.push_back('\n');
        paragraph += line;
      }
    }
    flush();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection

std::string strip_math(std::string_view text) {
  std::string current(text);
  while (true) {
    std::string next = strip_math_runs(strip_spans_once(current));
    if (next == current) return current;
    current = std::move(next);
  }
}

std::string normalize_for_ngrams(std::string_view text) {
  return utf8::encode(normalize(text).seq);
}

std::vector<std::string> extract_ngrams(std::string_view text) {
  std::vector<std::string> out;
  for_each_ngram(normalize(text).seq, [&](std::string gram) { out.push_back(std::move(gram)); });
  return out;
}

std::vector<LanguageScore> score_languages(std::string_view stripped,
                                           const LanguageProfileSet& profiles) {
  const auto grams = extract_ngrams(stripped);
  std::vector<LanguageScore> scores;
  for (const auto& lang : profiles.languages()) {
    const auto& prof = profiles.profile(lang);
    const double unseen = std::log(profiles.unseen_probability(lang));
    double sum = 0.0;
    for (const auto& g : grams) {
      auto it = prof.find(g);
      sum += it == prof.end() ? unseen : std::log(it->second);
    }
    const double mean = grams.empty() ? unseen : sum / static_cast<double>(grams.size());
    scores.push_back({lang, mean});
  }
  std::stable_sort(scores.begin(), scores.end(), [](const auto& a, const auto& b) {
    return a.mean_log_likelihood > b.mean_log_likelihood;
  });
  return scores;
}

Detection detect(std::string_view text, const LanguageProfileSet& profiles) {
  if (profiles.empty()) throw ConfigError("language profile set is empty");
  const std::string stripped = strip_math(text);
  if (normalize(stripped).letter_bytes < kMinDetectableBytes) {
    throw UndetectableError("text has fewer than " + std::to_string(kMinDetectableBytes) +
                            " bytes of letters after stripping math and markup");
  }
  const auto scores = score_languages(stripped, profiles);
  const double top = scores.front().mean_log_likelihood;
  double z = 0.0;
  for (const auto& s : scores) z += std::exp(s.mean_log_likelihood - top);
  const double p1 = 1.0 / z;
  const double p2 = scores.size() > 1 ? std::exp(scores[1].mean_log_likelihood - top) / z : 0.0;
  return {scores.front().language, std::clamp(p1 - p2, 0.0, 1.0)};
}

LanguageCode detect_thinking(const ParsedResponse& resp, const LanguageProfileSet& profiles) {
  if (resp.thinking.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw UndetectableError("thinking segment is empty");
  }
  return detect(resp.thinking, profiles).language;
}

}  // namespace explang
