#pragma once

#include <string>
#include <variant>
#include <vector>

namespace thumbtruth {

struct TextSegment {
  std::string text;
  bool operator==(const TextSegment&) const = default;
};

struct ImageAttachment {
  std::string uri;
  bool operator==(const ImageAttachment&) const = default;
};

// Only description requests carry video; classification prompts never do.
struct VideoAttachment {
  std::string uri;
  bool operator==(const VideoAttachment&) const = default;
};

using Part = std::variant<TextSegment, ImageAttachment, VideoAttachment>;

// Concatenation of the text parts, in order.
inline std::string joined_text(const std::vector<Part>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (const auto* t = std::get_if<TextSegment>(&p)) out += t->text;
  }
  return out;
}

}  // namespace thumbtruth
