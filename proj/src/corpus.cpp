#include "corpus.hpp"

#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;

std::string_view label_token(Label label) {
  return label == Label::Misleading ? "misleading" : "not_misleading";
}

std::string_view label_display(Label label) {
  return label == Label::Misleading ? "Misleading" : "Not Misleading";
}

std::optional<Label> parse_label_token(std::string_view token) {
  if (token == "misleading") return Label::Misleading;
  if (token == "not_misleading") return Label::NotMisleading;
  return std::nullopt;
}

namespace {

std::string required_string(const json& row, std::size_t line, const char* field) {
  auto it = row.find(field);
  if (it == row.end() || !it->is_string() || it->get_ref<const std::string&>().empty()) {
    throw SchemaError(line, field, "required non-empty string");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& row, std::size_t line, const char* field) {
  auto it = row.find(field);
  if (it == row.end() || it->is_null()) return {};
  if (!it->is_string()) throw SchemaError(line, field, "expected string");
  return it->get<std::string>();
}

Label required_label(const json& row, std::size_t line, const char* field) {
  auto it = row.find(field);
  if (it == row.end() || !it->is_string()) throw SchemaError(line, field, "required label");
  auto label = parse_label_token(it->get_ref<const std::string&>());
  if (!label) {
    throw SchemaError(line, field,
                      "expected \"misleading\" or \"not_misleading\", got \"" +
                          it->get<std::string>() + "\"");
  }
  return *label;
}

json parse_row(std::string_view text, std::size_t line) {
  json row;
  try {
    row = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(line, "<row>", e.what());
  }
  if (!row.is_object()) throw SchemaError(line, "<row>", "expected a JSON object");
  return row;
}

VideoRecord parse_record(const json& row, std::size_t line) {
  VideoRecord r;
  r.video_id = required_string(row, line, "video_id");
  r.country = required_string(row, line, "country");
  r.category = required_string(row, line, "category");
  r.label = required_label(row, line, "label");

  auto dur = row.find("duration_seconds");
  if (dur == row.end() || !dur->is_number()) {
    throw SchemaError(line, "duration_seconds", "required number");
  }
  r.duration_seconds = dur->get<double>();
  if (!(r.duration_seconds >= 0.0)) {
    throw SchemaError(line, "duration_seconds", "must be >= 0");
  }

  r.default_audio_language = optional_string(row, line, "default_audio_language");

  auto status = required_string(row, line, "subtitle_status");
  if (status == "present") {
    r.subtitle_status = SubtitleStatus::Present;
  } else if (status == "absent") {
    r.subtitle_status = SubtitleStatus::Absent;
  } else {
    throw SchemaError(line, "subtitle_status", "expected \"present\" or \"absent\"");
  }

  if (auto vc = row.find("view_count"); vc != row.end() && !vc->is_null()) {
    if (!vc->is_number_integer() || vc->get<std::int64_t>() < 0) {
      throw SchemaError(line, "view_count", "expected non-negative integer");
    }
    r.view_count = vc->get<std::uint64_t>();
  }

  r.media.thumbnail_uri = optional_string(row, line, "thumbnail_uri");
  if (r.media.thumbnail_uri.empty()) r.media.thumbnail_uri = thumbnail_url(r.video_id);
  r.media.subtitle_path = optional_string(row, line, "subtitle_path");
  r.media.video_path = optional_string(row, line, "video_path");
  r.media.description_cache_key = optional_string(row, line, "description_cache_key");
  if (r.media.description_cache_key.empty()) r.media.description_cache_key = r.video_id;
  return r;
}

}  // namespace

std::vector<VideoRecord> parse_manifest(std::string_view text) {
  std::vector<VideoRecord> records;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto record = parse_record(parse_row(line, line_no), line_no);
    auto [it, inserted] = first_line.emplace(record.video_id, line_no);
    if (!inserted) {
      throw Error(ErrorCode::DuplicateId, record.video_id + " (lines " +
                                              std::to_string(it->second) + " and " +
                                              std::to_string(line_no) + ")");
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<VideoRecord> ingest_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
  return parse_manifest(read_file(path));
}

nlohmann::ordered_json record_to_json(const VideoRecord& r) {
  nlohmann::ordered_json j;
  j["video_id"] = r.video_id;
  j["country"] = r.country;
  j["category"] = r.category;
  j["label"] = label_token(r.label);
  if (std::floor(r.duration_seconds) == r.duration_seconds && r.duration_seconds < 9.0e15) {
    j["duration_seconds"] = static_cast<std::int64_t>(r.duration_seconds);
  } else {
    j["duration_seconds"] = r.duration_seconds;
  }
  if (!r.default_audio_language.empty()) j["default_audio_language"] = r.default_audio_language;
  j["subtitle_status"] = r.subtitle_status == SubtitleStatus::Present ? "present" : "absent";
  if (r.view_count) j["view_count"] = *r.view_count;
  j["thumbnail_uri"] = r.media.thumbnail_uri;
  if (!r.media.subtitle_path.empty()) j["subtitle_path"] = r.media.subtitle_path;
  if (!r.media.video_path.empty()) j["video_path"] = r.media.video_path;
  if (r.media.description_cache_key != r.video_id) {
    j["description_cache_key"] = r.media.description_cache_key;
  }
  return j;
}

std::string serialize_manifest(const std::vector<VideoRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<AnnotationPair> parse_annotations(std::string_view text) {
  std::vector<AnnotationPair> pairs;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto row = parse_row(line, line_no);
    AnnotationPair p;
    p.video_id = required_string(row, line_no, "video_id");
    p.annotator_a = required_label(row, line_no, "annotator_a");
    p.annotator_b = required_label(row, line_no, "annotator_b");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<AnnotationPair> load_annotations(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
  return parse_annotations(read_file(path));
}

std::string thumbnail_url(std::string_view video_id) {
  if (video_id.empty()) throw Error(ErrorCode::EmptyId, "video_id must be non-empty");
  std::string url = "https://img.youtube.com/vi/";
  url += video_id;
  url += "/hqdefault.jpg";
  return url;
}

namespace {

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start && !fn(text.substr(start, i - start))) return;
  }
}

}  // namespace

std::string truncate_words(std::string_view text, std::size_t cap) {
  if (cap == 0) throw Error(ErrorCode::InvalidArgument, "word cap must be >= 1");
  std::string out;
  std::size_t taken = 0;
  for_each_word(text, [&](std::string_view word) {
    if (taken == cap) return false;
    if (taken > 0) out += ' ';
    out += word;
    ++taken;
    return true;
  });
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  for_each_word(text, [&](std::string_view) {
    ++n;
    return true;
  });
  return n;
}

LanguageTable::LanguageTable()
    : families_{{"English", {"en"}}, {"Spanish", {"es"}}, {"zxx (No linguistic content)", {"zxx"}}} {}

LanguageTable::LanguageTable(std::vector<LanguageFamily> families) : families_(std::move(families)) {}

LanguageTable LanguageTable::from_json(const nlohmann::json& families) {
  std::vector<LanguageFamily> out;
  for (const auto& f : families) {
    LanguageFamily fam;
    fam.name = f.at("name").get<std::string>();
    fam.prefixes = f.at("prefixes").get<std::vector<std::string>>();
    out.push_back(std::move(fam));
  }
  return LanguageTable(std::move(out));
}

std::string LanguageTable::normalize(std::string_view code) const {
  auto trimmed = trim(code);
  if (trimmed.empty()) return std::string(kUnknownLanguage);
  for (const auto& family : families_) {
    for (const auto& prefix : family.prefixes) {
      if (!istarts_with(trimmed, prefix)) continue;
      if (trimmed.size() == prefix.size()) return family.name;
      char next = trimmed[prefix.size()];
      if (next == '-' || next == '_') return family.name;
    }
  }
  return trimmed;
}

std::string normalize_language(std::string_view code, const LanguageTable& table) {
  return table.normalize(code);
}

double cohens_kappa(const std::vector<AnnotationPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyInput, "kappa needs at least one pair");
  double n = static_cast<double>(pairs.size());
  double agree = 0, a_mis = 0, b_mis = 0;
  for (const auto& p : pairs) {
    if (p.annotator_a == p.annotator_b) agree += 1;
    if (p.annotator_a == Label::Misleading) a_mis += 1;
    if (p.annotator_b == Label::Misleading) b_mis += 1;
  }
  double p_o = agree / n;
  double p_e = (a_mis / n) * (b_mis / n) + ((n - a_mis) / n) * ((n - b_mis) / n);
  if (p_e == 1.0) return 1.0;  // both annotators constant and identical
  return (p_o - p_e) / (1.0 - p_e);
}

std::optional<GroupKey> parse_group_key(std::string_view name) {
  auto lower = to_lower(name);
  if (lower == "country") return GroupKey::Country;
  if (lower == "category") return GroupKey::Category;
  if (lower == "language") return GroupKey::Language;
  return std::nullopt;
}

std::string group_name(const VideoRecord& record, GroupKey key, const LanguageTable& table) {
  switch (key) {
    case GroupKey::Country: return record.country;
    case GroupKey::Category: return record.category;
    case GroupKey::Language: return table.normalize(record.default_audio_language);
  }
  return {};
}

std::map<std::string, std::vector<VideoRecord>> split_groups(const std::vector<VideoRecord>& records,
                                                             GroupKey key,
                                                             const LanguageTable& table) {
  std::map<std::string, std::vector<VideoRecord>> groups;
  for (const auto& r : records) groups[group_name(r, key, table)].push_back(r);
  return groups;
}

}  // namespace thumbtruth
