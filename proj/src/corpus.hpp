#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace thumbtruth {

enum class Label { Misleading, NotMisleading };

// "misleading" / "not_misleading" in files, "Misleading" / "Not Misleading" in prompts.
std::string_view label_token(Label label);
std::string_view label_display(Label label);
std::optional<Label> parse_label_token(std::string_view token);

enum class SubtitleStatus { Present, Absent };

struct MediaRefs {
  std::string thumbnail_uri;
  std::string subtitle_path;
  std::string video_path;
  std::string description_cache_key;
};

struct VideoRecord {
  std::string video_id;
  std::string country;
  std::string category;
  Label label = Label::NotMisleading;
  double duration_seconds = 0.0;
  std::string default_audio_language;  // empty = Unknown
  SubtitleStatus subtitle_status = SubtitleStatus::Absent;
  std::optional<std::uint64_t> view_count;
  MediaRefs media;
};

struct AnnotationPair {
  std::string video_id;
  Label annotator_a = Label::NotMisleading;
  Label annotator_b = Label::NotMisleading;
};

// Manifest rows are one JSON object per line; blank lines are skipped but
// still counted for error line numbers.
std::vector<VideoRecord> parse_manifest(std::string_view text);
std::vector<VideoRecord> ingest_manifest(const std::filesystem::path& path);

nlohmann::ordered_json record_to_json(const VideoRecord& record);
std::string serialize_manifest(const std::vector<VideoRecord>& records);

std::vector<AnnotationPair> parse_annotations(std::string_view text);
std::vector<AnnotationPair> load_annotations(const std::filesystem::path& path);

std::string thumbnail_url(std::string_view video_id);

// Keeps the first `cap` maximal runs of non-whitespace, joined by single spaces.
std::string truncate_words(std::string_view text, std::size_t cap);
std::size_t count_words(std::string_view text);

struct LanguageFamily {
  std::string name;
  std::vector<std::string> prefixes;
};

// Code -> display name. A code belongs to a family when it equals one of the
// family prefixes or extends it with '-' or '_' (case-insensitive).
class LanguageTable {
 public:
  LanguageTable();  // English, Spanish, zxx
  explicit LanguageTable(std::vector<LanguageFamily> families);

  static LanguageTable from_json(const nlohmann::json& families);

  std::string normalize(std::string_view code) const;
  const std::vector<LanguageFamily>& families() const { return families_; }

 private:
  std::vector<LanguageFamily> families_;
};

inline constexpr std::string_view kUnknownLanguage = "Unknown";

std::string normalize_language(std::string_view code, const LanguageTable& table = LanguageTable());

double cohens_kappa(const std::vector<AnnotationPair>& pairs);

enum class GroupKey { Country, Category, Language };

std::optional<GroupKey> parse_group_key(std::string_view name);
std::string group_name(const VideoRecord& record, GroupKey key,
                       const LanguageTable& table = LanguageTable());

std::map<std::string, std::vector<VideoRecord>> split_groups(
    const std::vector<VideoRecord>& records, GroupKey key,
    const LanguageTable& table = LanguageTable());

}  // namespace thumbtruth
