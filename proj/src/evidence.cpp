#include "evidence.hpp"

#include <cctype>
#include <fstream>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

std::string ablation_token(AblationMask mask) {
  if (mask.include_description && mask.include_subtitles) return "full";
  if (mask.include_description) return "abl-ns";
  if (mask.include_subtitles) return "abl-nd";
  return "abl-nds";
}

std::string ablation_display(AblationMask mask) {
  if (mask.include_description && mask.include_subtitles) return "Full";
  if (mask.include_description) return "ABL-NS";
  if (mask.include_subtitles) return "ABL-ND";
  return "ABL-NDS";
}

std::optional<AblationMask> parse_ablation(std::string_view token) {
  auto t = to_lower(token);
  if (t == "full" || t == "none") return AblationMask::full();
  if (t == "abl-ns" || t == "ns") return AblationMask::no_subtitles();
  if (t == "abl-nd" || t == "nd") return AblationMask::no_description();
  if (t == "abl-nds" || t == "nds") return AblationMask::thumbnail_only();
  return std::nullopt;
}

double clip_duration(double duration_seconds) {
  if (duration_seconds < 0.0) {
    throw Error(ErrorCode::NegativeDuration, std::to_string(duration_seconds));
  }
  return duration_seconds > kClipThresholdSeconds ? kClippedDurationSeconds : duration_seconds;
}

std::vector<double> frame_timestamps(double duration_seconds) {
  if (!(duration_seconds > 0.0)) {
    throw Error(ErrorCode::NonPositiveDuration, std::to_string(duration_seconds));
  }
  const double clipped = clip_duration(duration_seconds);
  std::vector<double> out;
  out.reserve(kFrameCount);
  for (std::size_t i = 0; i < kFrameCount; ++i) {
    out.push_back((static_cast<double>(i) + 0.5) * clipped / static_cast<double>(kFrameCount));
  }
  return out;
}

const std::string_view kFullVideoDescriptionPrompt =
    "Watch the video and provide a detailed description. Break down the content scene by scene, "
    "focusing on key actions, visuals, and emotions.";

const std::string_view kFrameSetDescriptionPrompt =
    "Consider these frames as continuous scenes from a video. Provide a detailed description of "
    "the video content, breaking it down scene by scene. Focus on key actions, visuals, emotions, "
    "and any notable details. Describe it as if you are watching the full video, ensuring that the "
    "narrative is cohesive and captures the flow of the scenes.";

DescriptionRequest build_description_request(const VideoRecord& record, DescriptionSourceKind kind) {
  DescriptionRequest req;
  req.source_kind = kind;
  req.video_path = record.media.video_path;
  if (kind == DescriptionSourceKind::FullVideo) {
    if (record.media.video_path.empty()) {
      throw Error(ErrorCode::MissingMedia, record.video_id + ": no video_path for full-video request");
    }
    req.prompt_text = std::string(kFullVideoDescriptionPrompt);
  } else {
    if (!(record.duration_seconds > 0.0)) {
      throw Error(ErrorCode::MissingMedia, record.video_id + ": duration unknown for frame request");
    }
    req.frame_times = frame_timestamps(record.duration_seconds);
    req.prompt_text = std::string(kFrameSetDescriptionPrompt);
  }
  return req;
}

Transcript FileTranscriptSource::get_transcript(const VideoRecord& record) {
  if (record.media.subtitle_path.empty()) return {"", record.default_audio_language};
  try {
    std::filesystem::path path(record.media.subtitle_path);
    if (path.is_relative() && !base_dir_.empty()) path = base_dir_ / path;
    return {read_file(path), record.default_audio_language};
  } catch (const Error& e) {
    throw Error(ErrorCode::SourceUnavailable, e.what());
  }
}

std::string fetch_subtitles(const VideoRecord& record, TranscriptSource& source,
                            Translator& translator) {
  if (record.subtitle_status == SubtitleStatus::Absent) return {};
  auto transcript = source.get_transcript(record);
  auto language = normalize_language(transcript.language);
  if (language == "English" || language == kUnknownLanguage) return transcript.text;
  return translator.translate(transcript.text, transcript.language, "en");
}

EvidenceBundle assemble_bundle(const VideoRecord& record, std::string subtitles,
                               std::string description, AblationMask mask) {
  if (record.media.thumbnail_uri.empty()) {
    throw Error(ErrorCode::MissingThumbnail, record.video_id);
  }
  EvidenceBundle b;
  b.video_id = record.video_id;
  b.thumbnail = record.media.thumbnail_uri;
  b.subtitles = mask.include_subtitles ? std::move(subtitles) : std::string();
  b.description = mask.include_description ? std::move(description) : std::string();
  b.ablation = mask;
  return b;
}

namespace {

std::string safe_component(std::string_view s) {
  std::string out;
  for (unsigned char c : s) {
    out.push_back(std::isalnum(c) || c == '-' || c == '_' || c == '.' ? static_cast<char>(c) : '_');
  }
  if (out.size() > 80) out.resize(80);
  return out;
}

std::mutex& keyed_lock(std::mutex& guard, std::map<std::string, std::unique_ptr<std::mutex>>& locks,
                       const std::string& key) {
  std::lock_guard lk(guard);
  auto& slot = locks[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::optional<std::string> read_if_exists(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return read_file(path);
}

}  // namespace

DescriptionCache::DescriptionCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path DescriptionCache::path_for(std::string_view cache_key,
                                                 std::string_view provider_id,
                                                 std::string_view prompt_text) const {
  auto prompt_hash = sha256_hex(prompt_text).substr(0, 16);
  // Sanitizing may collide distinct ids; the full-key hash keeps names unique.
  std::string full_key = std::string(cache_key) + '\x1f' + std::string(provider_id);
  auto key_hash = sha256_hex(full_key).substr(0, 8);
  return dir_ / (safe_component(cache_key) + "__" + safe_component(provider_id) + "__" +
                 prompt_hash + "-" + key_hash + ".txt");
}

std::mutex& DescriptionCache::lock_for(const std::string& key) {
  return keyed_lock(locks_guard_, locks_, key);
}

std::optional<std::string> DescriptionCache::get(std::string_view cache_key,
                                                 std::string_view provider_id,
                                                 std::string_view prompt_text) const {
  return read_if_exists(path_for(cache_key, provider_id, prompt_text));
}

void DescriptionCache::put(std::string_view cache_key, std::string_view provider_id,
                           std::string_view prompt_text, std::string_view description) {
  auto path = path_for(cache_key, provider_id, prompt_text);
  std::lock_guard lk(lock_for(path.string()));
  write_file_atomic(path, description);
}

TextCache::TextCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path TextCache::file_for(std::string_view key) const {
  return dir_ / (sha256_hex(key).substr(0, 32) + ".txt");
}

std::optional<std::string> TextCache::get(std::string_view key) const {
  return read_if_exists(file_for(key));
}

void TextCache::put(std::string_view key, std::string_view value) {
  auto path = file_for(key);
  std::lock_guard lk(keyed_lock(guard_, locks_, path.string()));
  write_file_atomic(path, value);
}

}  // namespace thumbtruth
