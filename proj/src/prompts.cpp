#include "prompts.hpp"

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

std::string_view strategy_token(PromptStrategy s) {
  switch (s) {
    case PromptStrategy::ZeroShot: return "zero-shot";
    case PromptStrategy::FixedFewShot: return "fixed-few-shot";
    case PromptStrategy::DynamicFewShot: return "dynamic-few-shot";
  }
  return "zero-shot";
}

std::string_view strategy_display(PromptStrategy s) {
  switch (s) {
    case PromptStrategy::ZeroShot: return "Zero-shot";
    case PromptStrategy::FixedFewShot: return "Fixed Few-shot";
    case PromptStrategy::DynamicFewShot: return "Dynamic Few-shot";
  }
  return "Zero-shot";
}

std::optional<PromptStrategy> parse_strategy(std::string_view token) {
  auto t = to_lower(token);
  if (t == "zero-shot" || t == "zero" || t == "zeroshot") return PromptStrategy::ZeroShot;
  if (t == "fixed-few-shot" || t == "fixed") return PromptStrategy::FixedFewShot;
  if (t == "dynamic-few-shot" || t == "dynamic") return PromptStrategy::DynamicFewShot;
  return std::nullopt;
}

const std::string_view kInstructionBlock =
    "Task: Analyze the provided information about a YouTube video and determine whether its "
    "thumbnail is misleading or not misleading. You will be given the following information:\n"
    "- The video's thumbnail\n"
    "- The video's subtitles\n"
    "- A text description of the video content\n"
    "\n"
    "Steps to Follow:\n"
    "1. Carefully examine the thumbnail.\n"
    "2. Read through the video subtitles and content description.\n"
    "3. Compare the thumbnail to the actual video content.\n"
    "4. Determine if the thumbnail accurately represents the video's main topic or content.\n"
    "5. Assess whether the thumbnail uses exaggeration, false promises, or clickbait tactics.\n"
    "6. Categorize the thumbnail as either \"Misleading\" or \"Not Misleading\".\n"
    "7. Provide a brief explanation for your decision.\n"
    "\n"
    "Analyze the provided information and categorize the thumbnail as \"Misleading\" or "
    "\"Not Misleading\", followed by a brief explanation for your decision.\n";

const std::string_view kInputsBlock =
    "\n"
    "Inputs:\n"
    "Video Description: {video_description}\n"
    "Video Subtitles: {video_subtitles}\n";

const std::string_view kFixedExamplesBlock =
    "\n"
    "Example 1:\n"
    "Thumbnail: A person holding a stack of $100 bills with the text \"I made $10,000 in one day!\"\n"
    "Subtitles: \"In this video, I'll share my experience of how I earned $500 in a week through "
    "freelancing.\"\n"
    "Video Description: The creator discusses freelancing opportunities and shares how they earned "
    "$500 in their first week.\n"
    "Categorization: Misleading\n"
    "Explanation: The thumbnail exaggerates the earnings (i.e., $10,000 in a day) compared to the "
    "actual content ($500 in a week), using clickbait tactics.\n"
    "\n"
    "Example 2:\n"
    "Thumbnail: A smiling chef holding a plate of pasta with the text \"Easy 15-minute pasta "
    "recipe.\"\n"
    "Subtitles: \"Today, we're making a quick and delicious pasta dish that takes only 15 minutes "
    "to prepare.\"\n"
    "Video Description: The video demonstrates a step-by-step pasta recipe with a 15-minute prep "
    "time.\n"
    "Categorization: Not Misleading\n"
    "Explanation: The thumbnail accurately represents the content and preparation time.\n";

namespace {

std::string fill_inputs(const EvidenceBundle& bundle) {
  // Slots are filled in one pass so slot-like text inside a description is never re-expanded.
  static constexpr std::string_view kDesc = "{video_description}";
  static constexpr std::string_view kSubs = "{video_subtitles}";
  std::string_view tpl = kInputsBlock;
  auto d = tpl.find(kDesc);
  auto s = tpl.find(kSubs);
  std::string out;
  out += tpl.substr(0, d);
  out += bundle.ablation.include_description ? bundle.description : std::string();
  out += tpl.substr(d + kDesc.size(), s - d - kDesc.size());
  out += bundle.ablation.include_subtitles ? bundle.subtitles : std::string();
  out += tpl.substr(s + kSubs.size());
  return out;
}

PromptDocument finish(PromptStrategy strategy, std::string text, const EvidenceBundle& bundle,
                      std::vector<std::string> exemplar_ids) {
  PromptDocument doc;
  doc.strategy = strategy;
  doc.parts.emplace_back(TextSegment{std::move(text)});
  // Query thumbnail goes after every text part, so examples precede the task instance.
  doc.parts.emplace_back(ImageAttachment{bundle.thumbnail});
  doc.exemplar_ids = std::move(exemplar_ids);
  doc.checksum = sha256_hex(doc.text());
  return doc;
}

}  // namespace

std::string render_card(const ExemplarCard& card, int example_number) {
  std::string out;
  out += "Example " + std::to_string(example_number) + ":\n";
  out += "Thumbnail: " + card.thumbnail_description + "\n";
  out += "Subtitles: " + truncate_words(card.subtitles_excerpt, kExcerptWordCap) + "\n";
  out += "Video Description: " + truncate_words(card.description_excerpt, kExcerptWordCap) + "\n";
  out += "Categorization: " + std::string(label_display(card.categorization)) + "\n";
  out += "Explanation: " + card.explanation + "\n";
  return out;
}

PromptDocument render_zero_shot(const EvidenceBundle& bundle) {
  std::string text(kInstructionBlock);
  text += fill_inputs(bundle);
  return finish(PromptStrategy::ZeroShot, std::move(text), bundle, {});
}

PromptDocument render_fixed_few_shot(const EvidenceBundle& bundle) {
  std::string text(kInstructionBlock);
  text += kFixedExamplesBlock;
  text += fill_inputs(bundle);
  return finish(PromptStrategy::FixedFewShot, std::move(text), bundle, {});
}

PromptDocument render_dynamic_few_shot(const EvidenceBundle& bundle,
                                       const std::array<ExemplarCard, 2>& cards) {
  if (cards[0].categorization == cards[1].categorization) {
    throw Error(ErrorCode::MismatchedCards,
                "both cards are " + std::string(label_display(cards[0].categorization)));
  }
  const auto& misleading = cards[0].categorization == Label::Misleading ? cards[0] : cards[1];
  const auto& honest = cards[0].categorization == Label::Misleading ? cards[1] : cards[0];
  std::string text(kInstructionBlock);
  text += "\n" + render_card(misleading, 1);
  text += "\n" + render_card(honest, 2);
  text += fill_inputs(bundle);
  return finish(PromptStrategy::DynamicFewShot, std::move(text), bundle,
                {misleading.video_id, honest.video_id});
}

PromptDocument render(PromptStrategy strategy, const EvidenceBundle& bundle,
                      const std::array<ExemplarCard, 2>* cards) {
  switch (strategy) {
    case PromptStrategy::ZeroShot: return render_zero_shot(bundle);
    case PromptStrategy::FixedFewShot: return render_fixed_few_shot(bundle);
    case PromptStrategy::DynamicFewShot:
      if (!cards) throw Error(ErrorCode::PreparationFailed, "dynamic prompt needs exemplar cards");
      return render_dynamic_few_shot(bundle, *cards);
  }
  return render_zero_shot(bundle);
}

std::string template_checksum(PromptStrategy strategy) {
  std::string all(kInstructionBlock);
  if (strategy == PromptStrategy::FixedFewShot) all += kFixedExamplesBlock;
  all += kInputsBlock;
  return sha256_hex(all);
}

}  // namespace thumbtruth
