#include "describe.hpp"

#include <fmt/format.h>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

std::vector<std::string> TimestampFrameSource::frames(const std::string& video_path,
                                                      const std::vector<double>& timestamps) {
  std::vector<std::string> out;
  out.reserve(timestamps.size());
  for (double t : timestamps) out.push_back(fmt::format("{}#t={:.3f}", video_path, t));
  return out;
}

ChatRequest description_chat_request(const DescriptionRequest& request, const std::string& model_id,
                                     MediaSource& media) {
  ChatRequest chat;
  chat.model_id = model_id;
  chat.parts.emplace_back(TextSegment{request.prompt_text});
  if (request.source_kind == DescriptionSourceKind::FullVideo) {
    chat.parts.emplace_back(VideoAttachment{request.video_path});
  } else {
    if (request.video_path.empty()) {
      throw Error(ErrorCode::MissingMedia, "frame extraction needs a video_path");
    }
    for (auto& ref : media.frames(request.video_path, request.frame_times)) {
      chat.parts.emplace_back(ImageAttachment{std::move(ref)});
    }
  }
  return chat;
}

Describer::Describer(Backend& backend, bool video_input, DescriptionCache& cache, MediaSource& media,
                     SendOptions options)
    : backend_(backend),
      video_input_(video_input),
      cache_(cache),
      media_(media),
      options_(std::move(options)) {}

std::optional<std::string> Describer::cached(const VideoRecord& record) const {
  auto kind = source_kind();
  std::string_view prompt =
      kind == DescriptionSourceKind::FullVideo ? kFullVideoDescriptionPrompt : kFrameSetDescriptionPrompt;
  return cache_.get(record.media.description_cache_key, provider_id(), prompt);
}

std::string Describer::describe(const VideoRecord& record, TokenUsage* usage_out) {
  if (auto hit = cached(record)) return *hit;
  auto request = build_description_request(record, source_kind());
  auto chat = description_chat_request(request, backend_.model_id(), media_);
  auto options = options_;
  options.jitter_seed = derive_seed(options_.jitter_seed, "describe:" + record.video_id);
  auto outcome = send(chat, backend_, options);
  if (request.source_kind == DescriptionSourceKind::FullVideo && outcome.usage.media_seconds == 0.0) {
    outcome.usage.media_seconds = clip_duration(record.duration_seconds);
  }
  if (usage_out) *usage_out += outcome.usage;
  switch (outcome.status) {
    case OutcomeStatus::Ok: break;
    case OutcomeStatus::Blocked:
      throw Error(ErrorCode::ProviderBlocked,
                  record.video_id + ": description blocked (" +
                      std::string(block_reason_token(outcome.block_reason)) + ")");
    case OutcomeStatus::Refused:
      throw Error(ErrorCode::ProviderBlocked, record.video_id + ": description refused");
    case OutcomeStatus::TransportError:
      throw Error(ErrorCode::ProviderUnavailable, record.video_id + ": " + outcome.error);
  }
  cache_.put(record.media.description_cache_key, provider_id(), request.prompt_text, outcome.text);
  return outcome.text;
}

std::string PipelineEvidence::subtitles(const VideoRecord& record) {
  return fetch_subtitles(record, transcripts_, translator_);
}

std::string PipelineEvidence::description(const VideoRecord& record) {
  if (!describer_) return {};
  TokenUsage usage;
  auto text = describer_->describe(record, &usage);
  if (on_usage_ && usage != TokenUsage{}) on_usage_(record, usage);
  return text;
}

void StaticEvidence::set(const std::string& video_id, std::string subtitles, std::string description) {
  std::lock_guard lk(m_);
  texts_[video_id] = {std::move(subtitles), std::move(description)};
}

std::string StaticEvidence::subtitles(const VideoRecord& record) {
  std::lock_guard lk(m_);
  auto it = texts_.find(record.video_id);
  return it == texts_.end() ? std::string() : it->second.first;
}

std::string StaticEvidence::description(const VideoRecord& record) {
  std::lock_guard lk(m_);
  auto it = texts_.find(record.video_id);
  return it == texts_.end() ? std::string() : it->second.second;
}

}  // namespace thumbtruth
