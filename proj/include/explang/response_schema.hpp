#pragma once

// Parsing of model outputs against the tag grammar
//
//   response     := WS? lang_tag? think_block answer_region
//   lang_tag     := "<lang_select>" CODE "</lang_select>"
//   think_block  := "<think>" TEXT "</think>"
//   CODE         := 2 x [a-z]
//
// and the two structural rewards derived from it: format (r_f) and thinking
// language compliance (r_c).

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "explang/language.hpp"

namespace explang {

inline constexpr std::string_view kLangOpen = "<lang_select>";
inline constexpr std::string_view kLangClose = "</lang_select>";
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";

enum class ParseMode {
  explang,  ///< the selection tag is mandatory
  plain,    ///< no selection tag is expected; declared_lang stays empty
};

struct ParsedResponse {
  std::optional<LanguageCode> declared_lang;
  std::string thinking;
  std::string answer_region;
  /// Whitespace-delimited tokens of the whole raw text.
  std::size_t token_count = 0;
  bool format_ok = false;
  std::string raw;
};

/// Total: never throws on content. Malformed input yields format_ok=false with
/// whatever segments could be recovered.
ParsedResponse parse_response(std::string_view text, ParseMode mode = ParseMode::explang);

/// Renders the canonical text of a response. For format_ok inputs, re-parsing
/// the result reproduces declared_lang, thinking and answer_region.
std::string render_response(const ParsedResponse& resp);

std::size_t count_whitespace_tokens(std::string_view text);

int format_reward(const ParsedResponse& resp);

/// `detected` is empty when the thinking segment was undetectable, which
/// always scores 0.
int compliance_reward(const ParsedResponse& resp, const std::optional<LanguageCode>& detected,
                      const std::optional<LanguageCode>& forced = std::nullopt);

}  // namespace explang
