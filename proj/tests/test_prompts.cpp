#include <doctest.h>

#include <random>

#include "error.hpp"
#include "prompts.hpp"
#include "support.hpp"

using namespace thumbtruth;

namespace {

std::string golden(const std::string& name) {
  return tt_test::read(std::filesystem::path(THUMBTRUTH_SOURCE_DIR) / "templates" / name);
}

EvidenceBundle placeholder_bundle() {
  auto r = tt_test::make_record("abc", Label::Misleading);
  return assemble_bundle(r, "{video_subtitles}", "{video_description}", AblationMask::full());
}

ExemplarCard card(const std::string& id, Label l) {
  ExemplarCard c;
  c.video_id = id;
  c.thumbnail_description = "thumb of " + id;
  c.subtitles_excerpt = "subs of " + id;
  c.description_excerpt = "desc of " + id;
  c.categorization = l;
  c.explanation = "why " + id;
  return c;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("zero-shot render matches golden file") {
  auto doc = render_zero_shot(placeholder_bundle());
  CHECK(doc.text() == golden("zero_shot.txt"));
  CHECK(doc.exemplar_ids.empty());
}

TEST_CASE("fixed few-shot render matches golden file") {
  auto doc = render_fixed_few_shot(placeholder_bundle());
  CHECK(doc.text() == golden("fixed_few_shot.txt"));
  auto text = doc.text();
  CHECK(text.find("Example 1:") < text.find("Example 2:"));
  CHECK(text.find("Example 2:") < text.find("Inputs:"));
  CHECK(text.find("Categorization: Misleading") < text.find("Categorization: Not Misleading"));
}

TEST_CASE("instruction steps") {
  auto text = render_zero_shot(placeholder_bundle()).text();
  CHECK(text.find("5. Assess whether the thumbnail uses exaggeration, false promises, or clickbait tactics.") !=
        std::string::npos);
  for (int i = 1; i <= 7; ++i) CHECK(text.find(std::to_string(i) + ". ") != std::string::npos);
  CHECK(text.find("8. ") == std::string::npos);
}

TEST_CASE("thumbnail is the last part") {
  for (auto s : {PromptStrategy::ZeroShot, PromptStrategy::FixedFewShot, PromptStrategy::DynamicFewShot}) {
    std::array<ExemplarCard, 2> cards{card("m", Label::Misleading), card("n", Label::NotMisleading)};
    auto doc = render(s, placeholder_bundle(), &cards);
    REQUIRE(doc.parts.size() == 2);
    CHECK(std::holds_alternative<TextSegment>(doc.parts[0]));
    CHECK(std::get<ImageAttachment>(doc.parts[1]).uri == thumbnail_url("abc"));
    CHECK(doc.strategy == s);
  }
}

TEST_CASE("dynamic cards render misleading first") {
  auto bundle = placeholder_bundle();
  std::array<ExemplarCard, 2> swapped{card("n", Label::NotMisleading), card("m", Label::Misleading)};
  auto doc = render_dynamic_few_shot(bundle, swapped);
  auto text = doc.text();
  CHECK(doc.exemplar_ids == std::vector<std::string>{"m", "n"});
  CHECK(text.find("Example 1:\nThumbnail: thumb of m") != std::string::npos);
  CHECK(text.find("Example 2:\nThumbnail: thumb of n") != std::string::npos);
  CHECK(text.find("Explanation: why n") < text.find("Inputs:"));
  std::array<ExemplarCard, 2> ordered{card("m", Label::Misleading), card("n", Label::NotMisleading)};
  CHECK(render_dynamic_few_shot(bundle, ordered).checksum == doc.checksum);

  std::array<ExemplarCard, 2> same{card("a", Label::Misleading), card("b", Label::Misleading)};
  try {
    render_dynamic_few_shot(bundle, same);
    FAIL("expected MismatchedCards");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MismatchedCards);
  }
  CHECK_THROWS_AS(render(PromptStrategy::DynamicFewShot, bundle, nullptr), Error);
}

TEST_CASE("card excerpts are capped") {
  auto c = card("m", Label::Misleading);
  c.description_excerpt = tt_test::lorem(400, "x");
  auto text = render_card(c, 1);
  CHECK(text.find("x199") != std::string::npos);
  CHECK(text.find("x200") == std::string::npos);
}

TEST_CASE("inputs slots are filled once, ablated fields are empty") {
  auto r = tt_test::make_record("abc", Label::Misleading);
  auto b = assemble_bundle(r, "subs mention {video_description}", "desc", AblationMask::full());
  auto text = render_zero_shot(b).text();
  CHECK(text.find("Video Subtitles: subs mention {video_description}\n") != std::string::npos);
  CHECK(text.find("Video Description: desc\n") != std::string::npos);

  auto nds = assemble_bundle(r, "subs", "desc", AblationMask::thumbnail_only());
  auto t2 = render_zero_shot(nds).text();
  CHECK(t2.find("Video Description: \n") != std::string::npos);
  CHECK(t2.find("Video Subtitles: \n") != std::string::npos);
}

TEST_CASE("checksum is deterministic and covers the text") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto r = tt_test::make_record("v" + std::to_string(trial), Label::Misleading);
    auto subs = tt_test::random_text(rng, 80);
    auto desc = tt_test::random_text(rng, 80);
    auto b = assemble_bundle(r, subs, desc, AblationMask::full());
    auto a1 = render_fixed_few_shot(b);
    auto a2 = render_fixed_few_shot(b);
    REQUIRE(a1.checksum == a2.checksum);
    REQUIRE(a1.checksum == sha256_hex(a1.text()));
    auto b2 = assemble_bundle(r, subs + "!", desc, AblationMask::full());
    REQUIRE(render_fixed_few_shot(b2).checksum != a1.checksum);
  }
  CHECK(template_checksum(PromptStrategy::ZeroShot) != template_checksum(PromptStrategy::FixedFewShot));
  CHECK(count(golden("fixed_few_shot.txt"), "Categorization:") == 2);
}

TEST_CASE("strategy tokens") {
  for (auto s : {PromptStrategy::ZeroShot, PromptStrategy::FixedFewShot, PromptStrategy::DynamicFewShot}) {
    CHECK(parse_strategy(strategy_token(s)) == s);
  }
  CHECK_FALSE(parse_strategy("three-shot").has_value());
}
