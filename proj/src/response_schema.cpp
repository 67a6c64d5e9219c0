#include "explang/response_schema.hpp"

#include <cctype>

namespace explang {

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::size_t skip_ws(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_ws(s[pos])) ++pos;
  return pos;
}

bool blank(std::string_view s) {
  for (char c : s) {
    if (!is_ws(c)) return false;
  }
  return true;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

}  // namespace

std::size_t count_whitespace_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_ws(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

ParsedResponse parse_response(std::string_view text, ParseMode mode) {
  ParsedResponse out;
  out.raw = std::string(text);
  out.token_count = count_whitespace_tokens(text);

  bool ok = true;
  std::size_t pos = skip_ws(text, 0);

  // Selection tag.
  if (text.substr(pos).starts_with(kLangOpen)) {
    const std::size_t payload_begin = pos + kLangOpen.size();
    const std::size_t close = text.find(kLangClose, payload_begin);
    if (close == std::string_view::npos) {
      ok = false;
      // No closing tag: treat the remainder as unparseable tag payload but still
      // try to recover a think block below.
      const std::size_t think = text.find(kThinkOpen, payload_begin);
      pos = think == std::string_view::npos ? payload_begin : think;
    } else {
      const std::string_view payload = text.substr(payload_begin, close - payload_begin);
      auto code = LanguageCode::parse(payload);
      if (!code) ok = false;
      if (mode == ParseMode::explang) out.declared_lang = code;
      pos = close + kLangClose.size();
    }
  } else if (mode == ParseMode::explang) {
    ok = false;
  }

  // Think block.
  const std::string_view rest = text.substr(pos);
  if (rest.starts_with(kThinkOpen)) {
    const std::size_t body = pos + kThinkOpen.size();
    const std::size_t close = text.find(kThinkClose, body);
    if (close == std::string_view::npos) {
      ok = false;
      out.thinking = std::string(text.substr(body));
    } else {
      out.thinking = std::string(text.substr(body, close - body));
      out.answer_region = std::string(text.substr(close + kThinkClose.size()));
    }
  } else {
    ok = false;
    const std::size_t open = text.find(kThinkOpen, pos);
    const std::size_t close = text.find(kThinkClose, pos);
    if (open != std::string_view::npos &&
        (close == std::string_view::npos || open < close)) {
      const std::size_t body = open + kThinkOpen.size();
      const std::size_t end = text.find(kThinkClose, body);
      if (end == std::string_view::npos) {
        out.thinking = std::string(text.substr(body));
      } else {
        out.thinking = std::string(text.substr(body, end - body));
        out.answer_region = std::string(text.substr(end + kThinkClose.size()));
      }
    } else if (close != std::string_view::npos) {
      out.thinking = std::string(text.substr(pos, close - pos));
      out.answer_region = std::string(text.substr(close + kThinkClose.size()));
    } else {
      out.answer_region = std::string(rest);
    }
  }

  if (blank(out.thinking)) ok = false;
  if (contains(out.thinking, kThinkOpen) || contains(out.thinking, kLangOpen) ||
      contains(out.thinking, kLangClose)) {
    ok = false;
  }
  if (contains(out.answer_region, kThinkOpen) || contains(out.answer_region, kThinkClose) ||
      contains(out.answer_region, kLangOpen) || contains(out.answer_region, kLangClose)) {
    ok = false;
  }
  if (mode == ParseMode::explang && !out.declared_lang) ok = false;

  out.format_ok = ok;
  return out;
}

std::string render_response(const ParsedResponse& resp) {
  std::string out;
  if (resp.declared_lang) {
    out += kLangOpen;
    out += resp.declared_lang->str();
    out += kLangClose;
  }
  out += kThinkOpen;
  out += resp.thinking;
  out += kThinkClose;
  out += resp.answer_region;
  return out;
}

int format_reward(const ParsedResponse& resp) { return resp.format_ok ? 1 : 0; }

int compliance_reward(const ParsedResponse& resp, const std::optional<LanguageCode>& detected,
                      const std::optional<LanguageCode>& forced) {
  if (!detected || !resp.declared_lang) return 0;
  if (forced) {
    return (*resp.declared_lang == *forced && *detected == *forced) ? 1 : 0;
  }
  return *resp.declared_lang == *detected ? 1 : 0;
}

}  // namespace explang
