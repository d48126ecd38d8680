#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"

namespace thumbtruth {

struct AblationMask {
  bool include_description = true;
  bool include_subtitles = true;

  static constexpr AblationMask full() { return {true, true}; }
  static constexpr AblationMask no_subtitles() { return {true, false}; }
  static constexpr AblationMask no_description() { return {false, true}; }
  static constexpr AblationMask thumbnail_only() { return {false, false}; }

  bool is_full() const { return include_description && include_subtitles; }
  bool operator==(const AblationMask&) const = default;
};

// "full", "abl-ns", "abl-nd", "abl-nds"
std::string ablation_token(AblationMask mask);
// "Full", "ABL-NS", "ABL-ND", "ABL-NDS"
std::string ablation_display(AblationMask mask);
std::optional<AblationMask> parse_ablation(std::string_view token);

struct EvidenceBundle {
  std::string video_id;
  std::string thumbnail;
  std::string subtitles;
  std::string description;
  AblationMask ablation;
};

inline constexpr double kClipThresholdSeconds = 1800.0;  // 30:00
inline constexpr double kClippedDurationSeconds = 1795.0;  // 29:55
inline constexpr std::size_t kFrameCount = 20;

double clip_duration(double duration_seconds);
std::vector<double> frame_timestamps(double duration_seconds);

enum class DescriptionSourceKind { FullVideo, FrameSet };

extern const std::string_view kFullVideoDescriptionPrompt;
extern const std::string_view kFrameSetDescriptionPrompt;

struct DescriptionRequest {
  DescriptionSourceKind source_kind = DescriptionSourceKind::FullVideo;
  std::string video_path;
  std::vector<double> frame_times;  // FrameSet only
  std::string prompt_text;
};

DescriptionRequest build_description_request(const VideoRecord& record, DescriptionSourceKind kind);

struct Transcript {
  std::string text;
  std::string language;  // BCP-47-ish code; empty = unknown
};

class TranscriptSource {
 public:
  virtual ~TranscriptSource() = default;
  // Throws Error(SourceUnavailable) on retryable failures.
  virtual Transcript get_transcript(const VideoRecord& record) = 0;
};

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(const std::string& text, const std::string& from,
                                const std::string& to) = 0;
};

class IdentityTranslator final : public Translator {
 public:
  std::string translate(const std::string& text, const std::string&, const std::string&) override {
    return text;
  }
};

// Reads the record's subtitle_path (relative paths resolve against base_dir);
// language comes from default_audio_language.
class FileTranscriptSource final : public TranscriptSource {
 public:
  explicit FileTranscriptSource(std::filesystem::path base_dir = {}) : base_dir_(std::move(base_dir)) {}
  Transcript get_transcript(const VideoRecord& record) override;

 private:
  std::filesystem::path base_dir_;
};

// Absent subtitles short-circuit to "" without touching the source. Transcripts
// whose language is known and not English pass through the translator.
std::string fetch_subtitles(const VideoRecord& record, TranscriptSource& source,
                            Translator& translator);

EvidenceBundle assemble_bundle(const VideoRecord& record, std::string subtitles,
                               std::string description, AblationMask mask);

// One text file per (video_id, provider, prompt hash). Writes for the same key
// are serialized; distinct keys proceed in parallel.
class DescriptionCache {
 public:
  explicit DescriptionCache(std::filesystem::path dir);

  std::filesystem::path path_for(std::string_view cache_key, std::string_view provider_id,
                                 std::string_view prompt_text) const;
  std::optional<std::string> get(std::string_view cache_key, std::string_view provider_id,
                                 std::string_view prompt_text) const;
  void put(std::string_view cache_key, std::string_view provider_id, std::string_view prompt_text,
           std::string_view description);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::mutex& lock_for(const std::string& key);

  std::filesystem::path dir_;
  std::mutex locks_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

// Generic text cache keyed by an arbitrary string (thumbnail URI, explanation
// inputs); same single-writer-per-key rule as DescriptionCache.
class TextCache {
 public:
  explicit TextCache(std::filesystem::path dir);
  std::optional<std::string> get(std::string_view key) const;
  void put(std::string_view key, std::string_view value);

 private:
  std::filesystem::path file_for(std::string_view key) const;
  std::filesystem::path dir_;
  std::mutex guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace thumbtruth
