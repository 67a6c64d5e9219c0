#include "explang/response_schema.hpp"

#include <random>

#include <gtest/gtest.h>

namespace explang {
namespace {

const LanguageCode fr("fr");
const LanguageCode zh("zh");
const LanguageCode en("en");
const LanguageCode ro("ro");

TEST(Parse, WellFormed) {
  const auto r = parse_response(
      "<lang_select>fr</lang_select><think>Donc on calcule.</think>La réponse est \\boxed{3}");
  EXPECT_TRUE(r.format_ok);
  ASSERT_TRUE(r.declared_lang);
  EXPECT_EQ(*r.declared_lang, fr);
  EXPECT_EQ(r.thinking, "Donc on calcule.");
  EXPECT_EQ(r.answer_region, "La réponse est \\boxed{3}");
  EXPECT_EQ(r.token_count, 6u);
}

TEST(Parse, LeadingWhitespaceAllowed) {
  EXPECT_TRUE(parse_response("  \n<lang_select>en</lang_select><think>x</think>y").format_ok);
}

TEST(Parse, MissingTagRecoversThinking) {
  const auto r = parse_response("<think>some reasoning</think>answer");
  EXPECT_FALSE(r.format_ok);
  EXPECT_EQ(r.thinking, "some reasoning");
  EXPECT_FALSE(r.declared_lang);
}

TEST(Parse, PayloadMustBeTwoLetters) {
  const auto r = parse_response("<lang_select>french</lang_select><think>x</think>y");
  EXPECT_FALSE(r.format_ok);
  EXPECT_FALSE(parse_response("<lang_select>FR</lang_select><think>x</think>y").format_ok);
}

TEST(Parse, UnclosedThink) {
  EXPECT_FALSE(parse_response("<lang_select>en</lang_select><think>never closed").format_ok);
}

TEST(Parse, EmptyThinkIsNotWellFormed) {
  EXPECT_FALSE(parse_response("<lang_select>en</lang_select><think></think>y").format_ok);
}

TEST(Parse, WrongOrder) {
  EXPECT_FALSE(parse_response("<think>x</think><lang_select>en</lang_select>y").format_ok);
}

TEST(Parse, PlainMode) {
  const auto r = parse_response("<think>reasoning</think>answer", ParseMode::plain);
  EXPECT_TRUE(r.format_ok);
  EXPECT_FALSE(r.declared_lang);
  // The tag is optional in the grammar; plain mode tolerates it but never
  // reports a declared language.
  const auto tagged =
      parse_response("<lang_select>en</lang_select><think>x</think>y", ParseMode::plain);
  EXPECT_TRUE(tagged.format_ok);
  EXPECT_FALSE(tagged.declared_lang);
  EXPECT_FALSE(parse_response("no think block", ParseMode::plain).format_ok);
}

TEST(Parse, UnknownButValidCodeParses) {
  const auto r = parse_response("<lang_select>qq</lang_select><think>x</think>y");
  EXPECT_TRUE(r.format_ok);
  EXPECT_EQ(compliance_reward(r, en), 0);
}

TEST(FormatReward, Values) {
  EXPECT_EQ(format_reward(parse_response("<lang_select>en</lang_select><think>x</think>y")), 1);
  EXPECT_EQ(format_reward(parse_response("<lang_select>en</lang_select><think>x")), 0);
  EXPECT_EQ(format_reward(parse_response("")), 0);
}

TEST(ComplianceReward, Definition) {
  const auto r_zh = parse_response("<lang_select>zh</lang_select><think>x</think>y");
  EXPECT_EQ(compliance_reward(r_zh, zh), 1);
  EXPECT_EQ(compliance_reward(r_zh, en), 0);
  EXPECT_EQ(compliance_reward(r_zh, std::nullopt), 0);
  const auto r_ro = parse_response("<lang_select>ro</lang_select><think>x</think>y");
  EXPECT_EQ(compliance_reward(r_ro, ro, ro), 1);
  EXPECT_EQ(compliance_reward(r_ro, en, ro), 0);
  EXPECT_EQ(compliance_reward(r_zh, zh, ro), 0);
}

TEST(ComplianceReward, ForcedImpliesUnforced) {
  const std::vector<LanguageCode> codes{en, fr, zh, ro};
  for (const auto& declared : codes) {
    const auto r = parse_response("<lang_select>" + declared.str() + "</lang_select><think>x</think>y");
    for (const auto& detected : codes) {
      for (const auto& forced : codes) {
        if (compliance_reward(r, detected, forced) == 1) {
          EXPECT_EQ(compliance_reward(r, detected), 1);
        }
      }
    }
  }
}

TEST(SchemaProperty, TotalOnRandomInput) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> pieces{"<lang_select>", "</lang_select>", "<think>", "</think>",
                                        "en", "zh", "abc", " ", "\n", "\\boxed{1}", "<", ">"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  for (int i = 0; i < 5000; ++i) {
    std::string text;
    for (int j = 0; j < 8; ++j) text += pieces[pick(rng)];
    const auto r = parse_response(text);
    if (r.format_ok) {
      EXPECT_TRUE(r.declared_lang);
      EXPECT_FALSE(r.thinking.empty());
    }
    const int f = format_reward(r);
    EXPECT_TRUE(f == 0 || f == 1);
  }
}

TEST(SchemaProperty, RenderRoundTrip) {
  const std::vector<std::string> inputs{
      "<lang_select>fr</lang_select><think>Donc.</think>La réponse \\boxed{3}",
      "  <lang_select>zh</lang_select><think>思考</think>",
      "<lang_select>en</lang_select><think> spaced </think>\n tail \n",
  };
  for (const auto& in : inputs) {
    const auto a = parse_response(in);
    ASSERT_TRUE(a.format_ok) << in;
    const auto b = parse_response(render_response(a));
    EXPECT_TRUE(b.format_ok);
    EXPECT_EQ(a.declared_lang, b.declared_lang);
    EXPECT_EQ(a.thinking, b.thinking);
    EXPECT_EQ(a.answer_region, b.answer_region);
  }
}

}  // namespace
}  // namespace explang
