#pragma once

// Rule-based final-answer checking: extraction of the last \boxed{...},
// canonicalization into exact numeric or textual form, and equivalence.
// Radicals and transcendental constants are never evaluated numerically.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "explang/error.hpp"

namespace explang {

class ExtractionError : public Error {
 public:
  enum class Kind { missing, malformed };
  ExtractionError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Exact rational in lowest terms with a positive denominator.
class Rational {
 public:
  Rational() = default;
  /// Throws ValidationError on a zero denominator or int64 overflow after reduction.
  Rational(std::int64_t num, std::int64_t den);
  static Rational from_int128(__int128 num, __int128 den);
  /// Empty on a zero denominator or when the reduced value leaves int64.
  static std::optional<Rational> try_from_int128(__int128 num, __int128 den) noexcept;

  std::int64_t num() const noexcept { return num_; }
  std::int64_t den() const noexcept { return den_; }
  double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }

  bool operator==(const Rational&) const = default;
  std::strong_ordering operator<=>(const Rational& o) const;

 private:
  struct Reduced {};
  Rational(Reduced, std::int64_t num, std::int64_t den) noexcept : num_(num), den_(den) {}

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

struct AnswerExpr {
  std::string raw;
  std::size_t begin = 0;  ///< byte offset of raw within the source text
  std::size_t end = 0;
};

struct CanonicalAnswer {
  enum class Kind { rational, decimal, symbolic, tuple, set };

  Kind kind = Kind::symbolic;
  Rational value;                         ///< rational and decimal kinds
  std::vector<CanonicalAnswer> elements;  ///< tuple and set kinds
  /// Whitespace-free canonical rendering; re-normalizing it is idempotent for
  /// numeric kinds.
  std::string normalized_text;

  bool is_numeric() const noexcept { return kind == Kind::rational || kind == Kind::decimal; }
  bool operator==(const CanonicalAnswer&) const = default;
};

/// Last `\boxed{` occurrence with nesting-aware brace matching.
/// Throws ExtractionError(missing) when absent and ExtractionError(malformed)
/// when the last occurrence never closes.
AnswerExpr extract_final_answer(std::string_view text);

CanonicalAnswer normalize(const AnswerExpr& answer);
CanonicalAnswer normalize_answer(std::string_view raw);

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b);

/// 1 iff the response's final boxed answer is equivalent to the truth. The
/// truth may be boxed or bare. Never throws on content.
int verify(std::string_view response_text, std::string_view ground_truth);

}  // namespace explang
