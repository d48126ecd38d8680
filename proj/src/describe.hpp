#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "evidence.hpp"
#include "providers.hpp"

namespace thumbtruth {

// Turns a video path and timestamps into image references. Decoding is out of
// scope; implementations hand references to whatever extracts frames.
class MediaSource {
 public:
  virtual ~MediaSource() = default;
  virtual std::vector<std::string> frames(const std::string& video_path,
                                          const std::vector<double>& timestamps) = 0;
};

// "<video_path>#t=<seconds, 3 decimals>"
class TimestampFrameSource final : public MediaSource {
 public:
  std::vector<std::string> frames(const std::string& video_path,
                                  const std::vector<double>& timestamps) override;
};

ChatRequest description_chat_request(const DescriptionRequest& request, const std::string& model_id,
                                     MediaSource& media);

// Generates video descriptions with one backend and caches them by
// (description_cache_key, backend name, prompt hash).
class Describer {
 public:
  Describer(Backend& backend, bool video_input, DescriptionCache& cache, MediaSource& media,
            SendOptions options);

  const std::string& provider_id() const { return backend_.name(); }
  DescriptionSourceKind source_kind() const {
    return video_input_ ? DescriptionSourceKind::FullVideo : DescriptionSourceKind::FrameSet;
  }

  std::optional<std::string> cached(const VideoRecord& record) const;
  // Throws ProviderBlocked / ProviderUnavailable / MissingMedia.
  std::string describe(const VideoRecord& record, TokenUsage* usage_out = nullptr);

 private:
  Backend& backend_;
  bool video_input_;
  DescriptionCache& cache_;
  MediaSource& media_;
  SendOptions options_;
};

class EvidenceSource {
 public:
  virtual ~EvidenceSource() = default;
  virtual std::string subtitles(const VideoRecord& record) = 0;
  virtual std::string description(const VideoRecord& record) = 0;
};

// Called with the usage of every description generated on a cache miss.
using UsageSink = std::function<void(const VideoRecord&, const TokenUsage&)>;

class PipelineEvidence final : public EvidenceSource {
 public:
  PipelineEvidence(TranscriptSource& transcripts, Translator& translator, Describer* describer,
                   UsageSink on_usage = {})
      : transcripts_(transcripts), translator_(translator), describer_(describer),
        on_usage_(std::move(on_usage)) {}

  std::string subtitles(const VideoRecord& record) override;
  std::string description(const VideoRecord& record) override;

 private:
  TranscriptSource& transcripts_;
  Translator& translator_;
  Describer* describer_;
  UsageSink on_usage_;
};

// In-memory evidence keyed by video_id; unknown ids yield empty text.
class StaticEvidence final : public EvidenceSource {
 public:
  void set(const std::string& video_id, std::string subtitles, std::string description);
  std::string subtitles(const VideoRecord& record) override;
  std::string description(const VideoRecord& record) override;

 private:
  std::mutex m_;
  std::map<std::string, std::pair<std::string, std::string>> texts_;
};

}  // namespace thumbtruth
