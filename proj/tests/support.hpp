#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "classify.hpp"
#include "corpus.hpp"
#include "providers.hpp"
#include "util.hpp"

namespace tt_test {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = fs::temp_directory_path() / fmt::format("thumbtruth-test-{}-{}", stamp, counter++);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read(const fs::path& p) { return thumbtruth::read_file(p); }

inline void write(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  thumbtruth::write_file_atomic(p, text);
}

inline thumbtruth::VideoRecord make_record(const std::string& id, thumbtruth::Label label,
                                           const std::string& country = "US",
                                           const std::string& category = "Sports",
                                           const std::string& language = "en", double duration = 600) {
  thumbtruth::VideoRecord r;
  r.video_id = id;
  r.country = country;
  r.category = category;
  r.label = label;
  r.duration_seconds = duration;
  r.default_audio_language = language;
  r.subtitle_status = thumbtruth::SubtitleStatus::Absent;
  r.media.thumbnail_uri = thumbtruth::thumbnail_url(id);
  r.media.description_cache_key = id;
  return r;
}

// `n` records alternating labels, ids v000, v001, ...
inline std::vector<thumbtruth::VideoRecord> synthetic_records(std::size_t n) {
  std::vector<thumbtruth::VideoRecord> out;
  const char* countries[] = {"US", "UK", "Brazil", "India"};
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(make_record(fmt::format("v{:03d}", i),
                              i % 2 ? thumbtruth::Label::NotMisleading : thumbtruth::Label::Misleading,
                              countries[i % 4]));
  }
  return out;
}

inline std::string categorization(thumbtruth::Label label) {
  return fmt::format("Categorization: {}\nExplanation: scripted", thumbtruth::label_display(label));
}

// Independent whitespace tokenizer.
inline std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// Mock script entries keyed by each record's thumbnail URI; records past the
// end of `outcomes` stay unscripted.
inline std::vector<thumbtruth::ScriptEntry> script_by_thumbnail(
    const std::vector<thumbtruth::VideoRecord>& records,
    const std::vector<thumbtruth::ChatOutcome>& outcomes) {
  std::vector<thumbtruth::ScriptEntry> script;
  for (std::size_t i = 0; i < std::min(records.size(), outcomes.size()); ++i) {
    script.push_back({thumbtruth::ScriptMatcher::substring(records[i].media.thumbnail_uri), {outcomes[i]}});
  }
  return script;
}

inline thumbtruth::ClassificationResult ok_result(const std::string& id, thumbtruth::Verdict v) {
  thumbtruth::ClassificationResult r;
  r.video_id = id;
  r.status = thumbtruth::ResultStatus::Ok;
  r.verdict = v;
  return r;
}

inline thumbtruth::Verdict verdict_of(thumbtruth::Label l) {
  return l == thumbtruth::Label::Misleading ? thumbtruth::Verdict::Misleading : thumbtruth::Verdict::NotMisleading;
}

inline thumbtruth::Label flip(thumbtruth::Label l) {
  return l == thumbtruth::Label::Misleading ? thumbtruth::Label::NotMisleading : thumbtruth::Label::Misleading;
}

// Random printable text with irregular whitespace.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789.,!?  \t\n\r\v\f";
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(alphabet) - 2);
  std::string s(len(rng), ' ');
  for (auto& ch : s) ch = alphabet[pick(rng)];
  return s;
}

inline std::string lorem(std::size_t n_words, const std::string& stem = "word") {
  std::string out;
  for (std::size_t i = 0; i < n_words; ++i) out += (i ? " " : "") + stem + std::to_string(i);
  return out;
}

}  // namespace tt_test
