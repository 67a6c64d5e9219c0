#include "explang/math_verify.hpp"

#include <algorithm>
#include <optional>

namespace explang {

namespace {

using Kind = CanonicalAnswer::Kind;

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a;
}

constexpr __int128 kInt64Max = static_cast<__int128>(INT64_MAX);

bool fits(__int128 v) { return v <= kInt64Max && v >= -kInt64Max; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// ---------------------------------------------------------------------------
// Numeric literals

std::optional<__int128> parse_digits(std::string_view s) {
  if (!all_digits(s) || s.size() > 30) return std::nullopt;
  __int128 v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

std::optional<__int128> parse_signed_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  auto v = parse_digits(s);
  if (!v) return std::nullopt;
  return neg ? -*v : *v;
}

std::optional<Rational> make_rational(__int128 num, __int128 den) {
  return Rational::try_from_int128(num, den);
}

// "12", "-3", "1,234,567"
std::optional<Rational> parse_integer(std::string_view s) {
  if (auto v = parse_signed_int(s)) return make_rational(*v, 1);
  // Thousands separators: 1-3 leading digits, then groups of exactly three.
  std::string_view body = s;
  bool neg = false;
  if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
    neg = body[0] == '-';
    body.remove_prefix(1);
  }
  if (body.find(',') == std::string_view::npos) return std::nullopt;
  std::string digits;
  std::size_t group = 0;
  bool first = true;
  for (std::size_t i = 0; i <= body.size(); ++i) {
    if (i == body.size() || body[i] == ',') {
      if (first ? (group == 0 || group > 3) : group != 3) return std::nullopt;
      first = false;
      group = 0;
      continue;
    }
    if (!is_digit(body[i])) return std::nullopt;
    digits.push_back(body[i]);
    ++group;
  }
  auto v = parse_digits(digits);
  if (!v) return std::nullopt;
  return make_rational(neg ? -*v : *v, 1);
}

// "0.5", ".25", "-3.", "+1.50"
std::optional<Rational> parse_decimal(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  const std::size_t dot = s.find('.');
  if (dot == std::string_view::npos || s.find('.', dot + 1) != std::string_view::npos) {
    return std::nullopt;
  }
  const std::string_view int_part = s.substr(0, dot);
  const std::string_view frac_part = s.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if ((!int_part.empty() && !all_digits(int_part)) ||
      (!frac_part.empty() && !all_digits(frac_part))) {
    return std::nullopt;
  }
  if (int_part.size() + frac_part.size() > 30) return std::nullopt;
  __int128 num = 0;
  for (char c : int_part) num = num * 10 + (c - '0');
  __int128 den = 1;
  for (char c : frac_part) {
    num = num * 10 + (c - '0');
    den *= 10;
  }
  return make_rational(neg ? -num : num, den);
}

// "\frac{p}{q}", "\frac12", "-\frac{3}{4}"
std::optional<Rational> parse_latex_frac(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (!s.starts_with("\\frac")) return std::nullopt;
  s.remove_prefix(5);
  auto take_arg = [&](std::string_view& rest) -> std::optional<std::string_view> {
    if (rest.empty()) return std::nullopt;
    if (rest[0] != '{') {
      if (!is_digit(rest[0])) return std::nullopt;
      auto arg = rest.substr(0, 1);
      rest.remove_prefix(1);
      return arg;
    }
    const std::size_t close = rest.find('}');
    if (close == std::string_view::npos) return std::nullopt;
    auto arg = rest.substr(1, close - 1);
    rest.remove_prefix(close + 1);
    return arg;
  };
  auto p = take_arg(s);
  auto q = take_arg(s);
  if (!p || !q || !s.empty()) return std::nullopt;
  auto pn = parse_signed_int(*p);
  auto qn = parse_signed_int(*q);
  if (!pn || !qn) return std::nullopt;
  return make_rational(neg ? -*pn : *pn, *qn);
}

// "p/q"
std::optional<Rational> parse_slash_frac(std::string_view s) {
  const std::size_t slash = s.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto p = parse_signed_int(s.substr(0, slash));
  auto q = parse_signed_int(s.substr(slash + 1));
  if (!p || !q) return std::nullopt;
  return make_rational(*p, *q);
}

std::optional<Rational> parse_plain_number(std::string_view s, Kind& kind) {
  if (auto r = parse_integer(s)) {
    kind = Kind::rational;
    return r;
  }
  if (auto r = parse_decimal(s)) {
    kind = Kind::decimal;
    return r;
  }
  if (auto r = parse_latex_frac(s)) {
    kind = Kind::rational;
    return r;
  }
  if (auto r = parse_slash_frac(s)) {
    kind = Kind::rational;
    return r;
  }
  return std::nullopt;
}

std::optional<CanonicalAnswer> parse_numeric(std::string_view s);

// ---------------------------------------------------------------------------
// Rendering

std::string render_rational(const Rational& r) {
  if (r.den() == 1) return std::to_string(r.num());
  return std::to_string(r.num()) + "/" + std::to_string(r.den());
}

// Exact decimal expansion; the denominator of a parsed decimal only has
// factors 2 and 5.
std::string render_decimal(const Rational& r) {
  __int128 num = r.num();
  __int128 den = r.den();
  const bool neg = num < 0;
  if (neg) num = -num;
  int scale = 0;
  __int128 d = den;
  __int128 mult = 1;
  while (d % 10 == 0) {
    d /= 10;
    ++scale;
  }
  while (d % 2 == 0) {
    d /= 2;
    mult *= 5;
    ++scale;
  }
  while (d % 5 == 0) {
    d /= 5;
    mult *= 2;
    ++scale;
  }
  if (d != 1) return render_rational(r);  // not a terminating decimal
  __int128 scaled = num * mult;
  std::string digits;
  if (scaled == 0) digits = "0";
  while (scaled > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(scaled % 10)));
    scaled /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  if (scale == 0) {
    digits += ".0";
  } else {
    if (static_cast<int>(digits.size()) <= scale) {
      digits.insert(0, static_cast<std::size_t>(scale) - digits.size() + 1, '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(scale), ".");
  }
  return (neg ? "-" : "") + digits;
}

CanonicalAnswer make_number(Kind kind, Rational value) {
  CanonicalAnswer out;
  out.kind = kind;
  out.value = value;
  out.normalized_text = kind == Kind::decimal ? render_decimal(value) : render_rational(value);
  return out;
}

std::optional<CanonicalAnswer> parse_numeric(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::string_view body = s;
  bool percent = false;
  if (body.ends_with("\\%")) {
    percent = true;
    body.remove_suffix(2);
  } else if (body.ends_with("%")) {
    percent = true;
    body.remove_suffix(1);
  }
  Kind kind = Kind::rational;
  auto value = parse_plain_number(body, kind);
  if (!value) return std::nullopt;
  if (percent) {
    auto scaled = make_rational(static_cast<__int128>(value->num()),
                                static_cast<__int128>(value->den()) * 100);
    if (!scaled) return std::nullopt;
    return make_number(Kind::rational, *scaled);
  }
  return make_number(kind, *value);
}

// ---------------------------------------------------------------------------
// Structure

std::string clean(std::string_view raw) {
  std::string s(raw);
  for (std::string_view cmd : {"\\left", "\\right", "\\displaystyle"}) replace_all(s, cmd, "");
  for (std::string_view cmd : {"\\!", "\\,", "\\;", "\\:", "\\ "}) replace_all(s, cmd, "");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  replace_all(s, "\xE2\x88\x92", "-");  // U+2212 minus sign
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\f' && c != '\v') out.push_back(c);
  }
  while (out.size() >= 2 && out.front() == '$' && out.back() == '$') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

bool is_open(char c) { return c == '{' || c == '(' || c == '['; }
bool is_close(char c) { return c == '}' || c == ')' || c == ']'; }

// Splits at top-level occurrences of `sep` (outside any bracket pair).
std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      depth += s[i + 1] == '{' ? 1 : -1;
      ++i;
      continue;
    }
    if (is_open(s[i])) ++depth;
    if (is_close(s[i])) --depth;
    if (depth == 0 && s[i] == sep) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

// True when the bracket opened at 0 closes exactly at the last character.
bool outer_pair(std::string_view s, char open, char close) {
  if (s.size() < 2 || s.front() != open || s.back() != close) return false;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (is_open(s[i])) ++depth;
    if (is_close(s[i])) --depth;
    if (depth == 0 && i + 1 < s.size()) return false;
  }
  return depth == 0;
}

bool brackets_balanced(std::string_view s) {
  int depth = 0;
  for (char c : s) {
    if (is_open(c)) ++depth;
    if (is_close(c)) --depth;
    if (depth < 0) return false;
  }
  return depth == 0;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Splits a product on top-level '*', \cdot and \times and sorts the factors.
std::string sort_product(std::string_view term) {
  std::string s(term);
  replace_all(s, "\\cdot", "*");
  replace_all(s, "\\times", "*");
  if (!brackets_balanced(s)) return s;
  auto factors = split_top_level(s, '*');
  if (factors.size() < 2) return s;
  for (const auto& f : factors) {
    if (f.empty()) return s;
  }
  std::sort(factors.begin(), factors.end());
  return join(factors, "*");
}

// One-level commutative canonicalization of sums of products.
std::string sort_terms(std::string_view s) {
  if (!brackets_balanced(s)) return std::string(s);
  std::vector<std::string> terms;
  int depth = 0;
  std::size_t start = 0;
  auto push = [&](std::size_t end) {
    std::string term(s.substr(start, end - start));
    bool neg = false;
    if (!term.empty() && (term[0] == '+' || term[0] == '-')) {
      neg = term[0] == '-';
      term.erase(0, 1);
    }
    term = sort_product(term);
    terms.push_back(neg ? "-" + term : term);
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (is_open(c)) ++depth;
    if (is_close(c)) --depth;
    if (depth != 0 || (c != '+' && c != '-') || i == 0) continue;
    const char prev = s[i - 1];
    static constexpr std::string_view kNoSplitAfter = "^*/([{+-=,_";
    if (kNoSplitAfter.find(prev) != std::string_view::npos) continue;
    push(i);
    start = i;
  }
  push(s.size());
  for (const auto& t : terms) {
    if (t.empty() || t == "-") return std::string(s);
  }
  std::sort(terms.begin(), terms.end());
  std::string out = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) {
    if (terms[i][0] != '-') out += '+';
    out += terms[i];
  }
  return out;
}

CanonicalAnswer make_symbolic(std::string_view s) {
  CanonicalAnswer out;
  out.kind = Kind::symbolic;
  out.normalized_text = sort_terms(s);
  return out;
}

bool set_order(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.is_numeric() != b.is_numeric()) return a.is_numeric();
  if (a.is_numeric() && a.value != b.value) return a.value < b.value;
  return a.normalized_text < b.normalized_text;
}

CanonicalAnswer normalize_clean(std::string_view s);

CanonicalAnswer make_collection(Kind kind, std::string_view inner) {
  CanonicalAnswer out;
  out.kind = kind;
  if (!inner.empty()) {
    for (const auto& part : split_top_level(inner, ',')) {
      out.elements.push_back(normalize_clean(part));
    }
  }
  if (kind == Kind::set) {
    std::vector<CanonicalAnswer> unique;
    for (auto& e : out.elements) {
      const bool dup = std::any_of(unique.begin(), unique.end(),
                                   [&](const CanonicalAnswer& u) { return equivalent(u, e); });
      if (!dup) unique.push_back(std::move(e));
    }
    std::sort(unique.begin(), unique.end(), set_order);
    out.elements = std::move(unique);
  }
  std::vector<std::string> texts;
  for (const auto& e : out.elements) texts.push_back(e.normalized_text);
  out.normalized_text = kind == Kind::set ? "\\{" + join(texts, ",") + "\\}"
                                          : "(" + join(texts, ",") + ")";
  return out;
}

CanonicalAnswer normalize_clean(std::string_view s) {
  if (s.size() >= 4 && s.starts_with("\\{") && s.ends_with("\\}")) {
    return make_collection(Kind::set, s.substr(2, s.size() - 4));
  }
  if (outer_pair(s, '(', ')')) {
    const std::string_view inner = s.substr(1, s.size() - 2);
    if (split_top_level(inner, ',').size() >= 2) return make_collection(Kind::tuple, inner);
    return normalize_clean(inner);
  }
  if (auto num = parse_numeric(s)) return *num;
  return make_symbolic(s);
}

}  // namespace

// ---------------------------------------------------------------------------

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw ValidationError("rational with zero denominator");
  auto r = try_from_int128(num, den);
  if (!r) throw ValidationError("rational out of range");
  *this = *r;
}

Rational Rational::from_int128(__int128 num, __int128 den) {
  auto r = try_from_int128(num, den);
  if (!r) throw ValidationError("rational out of range or zero denominator");
  return *r;
}

std::optional<Rational> Rational::try_from_int128(__int128 num, __int128 den) noexcept {
  if (den == 0) return std::nullopt;
  const __int128 g = gcd128(num, den);
  if (g != 0) {
    num /= g;
    den /= g;
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  if (!fits(num) || !fits(den)) return std::nullopt;
  return Rational(Reduced{}, static_cast<std::int64_t>(num), static_cast<std::int64_t>(den));
}

std::strong_ordering Rational::operator<=>(const Rational& o) const {
  const __int128 lhs = static_cast<__int128>(num_) * o.den_;
  const __int128 rhs = static_cast<__int128>(o.num_) * den_;
  if (lhs < rhs) return std::strong_ordering::less;
  if (lhs > rhs) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

AnswerExpr extract_final_answer(std::string_view text) {
  static constexpr std::string_view kBoxed = "\\boxed{";
  const std::size_t pos = text.rfind(kBoxed);
  if (pos == std::string_view::npos) {
    throw ExtractionError(ExtractionError::Kind::missing, "no \\boxed{...} answer found");
  }
  const std::size_t open = pos + kBoxed.size() - 1;
  int depth = 0;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}') {
      --depth;
      if (depth == 0) {
        AnswerExpr out;
        out.begin = open + 1;
        out.end = i;
        out.raw = std::string(text.substr(out.begin, out.end - out.begin));
        return out;
      }
    }
  }
  throw ExtractionError(ExtractionError::Kind::malformed,
                        "unbalanced braces in final \\boxed{...} answer");
}

CanonicalAnswer normalize(const AnswerExpr& answer) { return normalize_answer(answer.raw); }

CanonicalAnswer normalize_answer(std::string_view raw) { return normalize_clean(clean(raw)); }

bool equivalent(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  if (a.is_numeric() && b.is_numeric()) return a.value == b.value;
  if (a.kind == Kind::tuple && b.kind == Kind::tuple) {
    if (a.elements.size() != b.elements.size()) return false;
    for (std::size_t i = 0; i < a.elements.size(); ++i) {
      if (!equivalent(a.elements[i], b.elements[i])) return false;
    }
    return true;
  }
  if (a.kind == Kind::set && b.kind == Kind::set) {
    auto covered = [](const CanonicalAnswer& x, const CanonicalAnswer& y) {
      return std::all_of(x.elements.begin(), x.elements.end(), [&](const CanonicalAnswer& e) {
        return std::any_of(y.elements.begin(), y.elements.end(),
                           [&](const CanonicalAnswer& f) { return equivalent(e, f); });
      });
    };
    return covered(a, b) && covered(b, a);
  }
  if (a.kind == Kind::symbolic && b.kind == Kind::symbolic) {
    return a.normalized_text == b.normalized_text;
  }
  if (a.is_numeric() && b.kind == Kind::symbolic) {
    auto parsed = parse_numeric(b.normalized_text);
    return parsed && parsed->value == a.value;
  }
  if (b.is_numeric() && a.kind == Kind::symbolic) return equivalent(b, a);
  return false;
}

int verify(std::string_view response_text, std::string_view ground_truth) {
  try {
    const CanonicalAnswer predicted = normalize(extract_final_answer(response_text));
    CanonicalAnswer truth;
    if (ground_truth.find("\\boxed{") != std::string_view::npos) {
      truth = normalize(extract_final_answer(ground_truth));
    } else {
      truth = normalize_answer(ground_truth);
    }
    return equivalent(predicted, truth) ? 1 : 0;
  } catch (const Error&) {
    return 0;
  }
}

}  // namespace explang
