#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpus.hpp"
#include "evidence.hpp"
#include "prompts.hpp"
#include "providers.hpp"

namespace thumbtruth {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dimension() const = 0;
  // Throws Error(EmbedderUnavailable) when the backing model cannot be reached.
  virtual EmbeddingVector embed(std::string_view text) const = 0;
};

// Offline embedder: lowercased byte trigrams hashed (FNV-1a) into a signed
// bucket, then L2-normalized. Empty text embeds to the zero vector; text
// shorter than three bytes is a single gram.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dimension = 256) : dimension_(dimension) {}
  std::string id() const override { return "hash3-" + std::to_string(dimension_); }
  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed(std::string_view text) const override;

 private:
  std::size_t dimension_;
};

EmbeddingVector embed(std::string_view text, const Embedder& embedder);

// 0 when either norm is 0.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct ExemplarEntry {
  std::string video_id;
  Label label = Label::NotMisleading;
  EmbeddingVector vector;
  std::string description_text;
  std::string subtitles_text;
  std::string thumbnail_description;
  std::string explanation;
  std::string country;
  std::string language;  // normalized
};

// Optional restriction of the retrieval pool; empty fields mean "any".
struct PoolFilter {
  std::string country;
  std::string language;
};

struct RetrievedPair {
  ExemplarEntry misleading;
  ExemplarEntry not_misleading;
  double misleading_similarity = 0.0;
  double not_misleading_similarity = 0.0;
};

// Flat in-memory index; exact scan. Immutable once queries start.
class ExemplarIndex {
 public:
  ExemplarIndex(std::string embedder_id, std::size_t dimension);

  void add(ExemplarEntry entry);
  const ExemplarEntry* find(std::string_view video_id) const;

  const std::vector<ExemplarEntry>& entries() const { return entries_; }
  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dimension() const { return dimension_; }

  // Entries go to `path` (one JSON object per line) and the embedder id,
  // dimension and entry count to the sidecar `<path>.meta.json`.
  void save(const std::filesystem::path& path) const;
  static ExemplarIndex load(const std::filesystem::path& path);

 private:
  std::string embedder_id_;
  std::size_t dimension_;
  std::vector<ExemplarEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
};

std::filesystem::path exemplar_meta_path(const std::filesystem::path& store_path);

// Per class, the entry (other than query_id) with the highest cosine
// similarity; ties go to the lexicographically smallest video_id.
RetrievedPair nearest_per_class(std::string_view query_id, const EmbeddingVector& query_vector,
                                const ExemplarIndex& index, const PoolFilter& filter = {});

// Up to and including the first '.', '!' or '?' followed by whitespace or end.
std::string first_sentence(std::string_view text);

extern const std::string_view kThumbnailDescriptionPrompt;

// Cached by thumbnail URI (per generator backend).
std::string generate_thumbnail_description(const std::string& thumbnail_uri, Backend& generator,
                                           TextCache* cache, const SendOptions& options,
                                           TokenUsage* usage_out = nullptr);

std::string explanation_prompt(std::string_view thumbnail_description, Label label,
                               std::string_view description_excerpt,
                               std::string_view subtitles_excerpt);

std::string generate_explanation(std::string_view thumbnail_description, Label label,
                                 std::string_view description_excerpt,
                                 std::string_view subtitles_excerpt, Backend& generator,
                                 TextCache* cache, const SendOptions& options,
                                 TokenUsage* usage_out = nullptr);

ExemplarCard build_card(const ExemplarEntry& entry);

}  // namespace thumbtruth
