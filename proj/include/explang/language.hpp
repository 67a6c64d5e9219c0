#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace explang {

/// Two-letter lowercase language identifier such as "en" or "zh".
///
/// Only the syntax is enforced here. Whether a code is known to a profile set
/// or registry is checked where the code is used.
class LanguageCode {
 public:
  /// Throws ValidationError unless `code` is exactly two ASCII lowercase letters.
  explicit LanguageCode(std::string_view code);

  static std::optional<LanguageCode> parse(std::string_view code) noexcept;
  static bool is_valid(std::string_view code) noexcept;

  const std::string& str() const noexcept { return code_; }

  auto operator<=>(const LanguageCode&) const = default;
  bool operator==(const LanguageCode&) const = default;

 private:
  struct Unchecked {};
  LanguageCode(Unchecked, std::string_view code) : code_(code) {}

  std::string code_;
};

inline const LanguageCode kEnglish{"en"};

/// English plus the twelve default non-English thinking languages.
std::vector<LanguageCode> default_seen_languages();

/// Low-resource languages reachable only through the selection tag.
std::vector<LanguageCode> default_unseen_languages();

std::vector<LanguageCode> parse_language_list(const std::vector<std::string>& codes);

}  // namespace explang

template <>
struct std::hash<explang::LanguageCode> {
  std::size_t operator()(const explang::LanguageCode& c) const noexcept {
    return std::hash<std::string>{}(c.str());
  }
};
