#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "evidence.hpp"
#include "parts.hpp"

namespace thumbtruth {

enum class PromptStrategy { ZeroShot, FixedFewShot, DynamicFewShot };

std::string_view strategy_token(PromptStrategy s);  // zero-shot, fixed-few-shot, dynamic-few-shot
std::string_view strategy_display(PromptStrategy s);  // Zero-shot, Fixed Few-shot, Dynamic Few-shot
std::optional<PromptStrategy> parse_strategy(std::string_view token);

struct ExemplarCard {
  std::string video_id;
  std::string thumbnail_description;
  std::string subtitles_excerpt;
  std::string description_excerpt;
  Label categorization = Label::NotMisleading;
  std::string explanation;
};

struct PromptDocument {
  PromptStrategy strategy = PromptStrategy::ZeroShot;
  std::vector<Part> parts;
  std::vector<std::string> exemplar_ids;
  std::string checksum;  // sha256 over the text parts in order

  std::string text() const { return joined_text(parts); }
};

// Instruction block shared by all three strategies, up to and including the
// closing instruction sentence.
extern const std::string_view kInstructionBlock;
// Query inputs; "{video_description}" and "{video_subtitles}" are the slots.
extern const std::string_view kInputsBlock;
extern const std::string_view kFixedExamplesBlock;

inline constexpr std::size_t kExcerptWordCap = 200;

std::string render_card(const ExemplarCard& card, int example_number);

PromptDocument render_zero_shot(const EvidenceBundle& bundle);
PromptDocument render_fixed_few_shot(const EvidenceBundle& bundle);
// Cards may come in either order; the misleading card is always rendered first.
PromptDocument render_dynamic_few_shot(const EvidenceBundle& bundle,
                                       const std::array<ExemplarCard, 2>& cards);

PromptDocument render(PromptStrategy strategy, const EvidenceBundle& bundle,
                      const std::array<ExemplarCard, 2>* cards = nullptr);

// Digest of the template constants; recorded in every run manifest.
std::string template_checksum(PromptStrategy strategy);

}  // namespace thumbtruth
