#include "explang/language.hpp"

#include "explang/error.hpp"

namespace explang {

bool LanguageCode::is_valid(std::string_view code) noexcept {
  return code.size() == 2 && code[0] >= 'a' && code[0] <= 'z' && code[1] >= 'a' &&
         code[1] <= 'z';
}

LanguageCode::LanguageCode(std::string_view code) : code_(code) {
  if (!is_valid(code)) {
    throw ValidationError("invalid language code '" + std::string(code) +
                          "': expected two lowercase ASCII letters");
  }
}

std::optional<LanguageCode> LanguageCode::parse(std::string_view code) noexcept {
  if (!is_valid(code)) return std::nullopt;
  return LanguageCode(Unchecked{}, code);
}

std::vector<LanguageCode> default_seen_languages() {
  return parse_language_list(
      {"en", "de", "fr", "es", "it", "pt", "ru", "zh", "ja", "ko", "ar", "hi", "th"});
}

std::vector<LanguageCode> default_unseen_languages() {
  return parse_language_list({"id", "he", "ro", "sw"});
}

std::vector<LanguageCode> parse_language_list(const std::vector<std::string>& codes) {
  std::vector<LanguageCode> out;
  out.reserve(codes.size());
  for (const auto& c : codes) out.emplace_back(c);
  return out;
}

}  // namespace explang
