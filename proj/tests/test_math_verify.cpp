#include "explang/math_verify.hpp"

#include <random>
#include <string>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "support.hpp"

namespace explang {
namespace {

using Kind = CanonicalAnswer::Kind;

TEST(Extract, LastBoxWins) {
  EXPECT_EQ(extract_final_answer("so \\boxed{12} ... recheck: \\boxed{15}").raw, "15");
}

TEST(Extract, NestedBraces) {
  const std::string text = "Thus \\boxed{\\frac{1}{2}} done";
  const auto a = extract_final_answer(text);
  EXPECT_EQ(a.raw, "\\frac{1}{2}");
  EXPECT_EQ(text.substr(a.begin, a.end - a.begin), a.raw);
}

TEST(Extract, MissingAndMalformed) {
  try {
    extract_final_answer("the answer is 15");
    FAIL();
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.kind(), ExtractionError::Kind::missing);
  }
  try {
    extract_final_answer("\\boxed{1} then \\boxed{\\frac{1}{2}");
    FAIL();
  } catch (const ExtractionError& e) {
    EXPECT_EQ(e.kind(), ExtractionError::Kind::malformed);
  }
}

TEST(Normalize, Reduction) {
  const auto c = normalize_answer("\\frac{3}{6}");
  EXPECT_EQ(c.kind, Kind::rational);
  EXPECT_EQ(c.value, Rational(1, 2));
}

TEST(Normalize, Percent) {
  EXPECT_EQ(normalize_answer("50\\%").value, Rational(1, 2));
  EXPECT_EQ(normalize_answer("12.5%").value, Rational(1, 8));
}

TEST(Normalize, CommutativeSums) {
  EXPECT_EQ(normalize_answer("x+1").normalized_text, "1+x");
  EXPECT_EQ(normalize_answer("1+x").normalized_text, "1+x");
  EXPECT_EQ(normalize_answer("x + 1").kind, Kind::symbolic);
}

TEST(Normalize, StripsDecorations) {
  EXPECT_EQ(normalize_answer("$\\left( 1, 2 \\right)$"), normalize_answer("(1,2)"));
  EXPECT_EQ(normalize_answer("1\\,000").value, Rational(1000, 1));
}

TEST(Normalize, TupleAndSet) {
  const auto t = normalize_answer("(1, 2)");
  EXPECT_EQ(t.kind, Kind::tuple);
  ASSERT_EQ(t.elements.size(), 2u);
  const auto s = normalize_answer("\\{2, 1, 2\\}");
  EXPECT_EQ(s.kind, Kind::set);
  EXPECT_EQ(s.elements.size(), 2u);
}

TEST(Equivalent, Examples) {
  EXPECT_TRUE(equivalent(normalize_answer("1/2"), normalize_answer("0.5")));
  EXPECT_FALSE(equivalent(normalize_answer("(1,2)"), normalize_answer("(2,1)")));
  EXPECT_TRUE(equivalent(normalize_answer("\\{1,2\\}"), normalize_answer("\\{2,1\\}")));
  EXPECT_FALSE(equivalent(normalize_answer("\\sqrt{2}"), normalize_answer("1.41421356")));
}

TEST(Verify, Examples) {
  EXPECT_EQ(verify("... \\boxed{0.5}", "1/2"), 1);
  EXPECT_EQ(verify("the answer is 7", "7"), 0);
  EXPECT_EQ(verify("\\boxed{7}", "\\boxed{7}"), 1);
  EXPECT_EQ(verify("\\boxed{7", "7"), 0);
  EXPECT_EQ(verify("", ""), 0);
}

TEST(Verify, CorpusAgreement) {
  const auto cases = testing::read_jsonl(testing::data_dir() / "fixtures" / "verify_corpus.jsonl");
  ASSERT_EQ(cases.size(), 40u);
  for (const auto& c : cases) {
    EXPECT_EQ(verify(c["response"].get<std::string>(), c["truth"].get<std::string>()),
              c["expected"].get<int>())
        << c["note"].get<std::string>();
  }
}

TEST(Rational, Invariants) {
  const Rational r(-6, -4);
  EXPECT_EQ(r.num(), 3);
  EXPECT_EQ(r.den(), 2);
  EXPECT_THROW(Rational(1, 0), ValidationError);
  EXPECT_FALSE(Rational::try_from_int128(1, 0).has_value());
  EXPECT_LT(Rational(1, 3), Rational(1, 2));
}

TEST(VerifyProperty, RationalReduction) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> val(-1000000, 1000000);
  std::uniform_int_distribution<std::int64_t> mul(-999, 999);
  for (int i = 0; i < 2000; ++i) {
    const auto p = val(rng);
    auto q = val(rng);
    if (q == 0) q = 1;
    auto k = mul(rng);
    if (k == 0) k = 7;
    const auto scaled = normalize_answer(fmt::format("\\frac{{{}}}{{{}}}", k * p, k * q));
    const auto plain = normalize_answer(fmt::format("{}/{}", p, q));
    ASSERT_EQ(scaled, plain) << p << "/" << q << " k=" << k;
    ASSERT_EQ(scaled.value, Rational(p, q));
  }
}

TEST(VerifyProperty, PercentRule) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::int64_t> val(-100000, 100000);
  for (int i = 0; i < 2000; ++i) {
    const auto x = val(rng);
    ASSERT_EQ(normalize_answer(fmt::format("{}\\%", x)).value, Rational(x, 100));
    ASSERT_EQ(verify(fmt::format("\\boxed{{{}%}}", x), fmt::format("\\frac{{{}}}{{100}}", x)), 1);
  }
}

TEST(VerifyProperty, LastBoxRule) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> val(-50, 50);
  std::uniform_int_distribution<int> count(1, 5);
  for (int i = 0; i < 2000; ++i) {
    std::string text = "work";
    int last = 0;
    for (int j = count(rng); j > 0; --j) {
      last = val(rng);
      text += fmt::format(" then \\boxed{{{}}} more", last);
    }
    ASSERT_EQ(extract_final_answer(text).raw, std::to_string(last));
    ASSERT_EQ(verify(text, std::to_string(last)), 1);
  }
}

TEST(VerifyProperty, EquivalenceReflexiveSymmetric) {
  const std::vector<std::string> answers{"1/2", "0.5", "50%", "(1,2)", "\\{2,1\\}", "\\{1,2\\}",
                                         "x+1", "1+x", "\\sqrt{2}", "3", "3.0", "\\frac{6}{2}",
                                         "2\\pi", "(0.5, 1)", "\\{\\}", "-0"};
  std::vector<CanonicalAnswer> canon;
  for (const auto& a : answers) canon.push_back(normalize_answer(a));
  for (std::size_t i = 0; i < canon.size(); ++i) {
    EXPECT_TRUE(equivalent(canon[i], canon[i])) << answers[i];
    for (std::size_t j = 0; j < canon.size(); ++j) {
      EXPECT_EQ(equivalent(canon[i], canon[j]), equivalent(canon[j], canon[i]))
          << answers[i] << " vs " << answers[j];
    }
  }
}

TEST(VerifyProperty, NumericRenderingIdempotent) {
  for (const auto* s : {"\\frac{3}{6}", "0.125", "-12", "1,234", "7%", "-\\frac{4}{10}"}) {
    const auto once = normalize_answer(s);
    ASSERT_TRUE(once.is_numeric()) << s;
    EXPECT_EQ(normalize_answer(once.normalized_text), once) << s;
  }
}

TEST(VerifyProperty, VerifyRangeOnRandomBytes) {
  std::mt19937_64 rng(14);
  const std::string alphabet = "\\boxed{}()[]$%0123456789./,-+ xfrac";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  for (int i = 0; i < 2000; ++i) {
    std::string a;
    std::string b;
    for (int j = 0; j < 24; ++j) a += alphabet[pick(rng)];
    for (int j = 0; j < 8; ++j) b += alphabet[pick(rng)];
    const int v = verify(a, b);
    ASSERT_TRUE(v == 0 || v == 1);
  }
}

}  // namespace
}  // namespace explang
