#include "exemplars.hpp"

#include <cmath>
#include <fstream>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;

EmbeddingVector HashEmbedder::embed(std::string_view text) const {
  EmbeddingVector v;
  v.values.assign(dimension_, 0.0);
  if (text.empty()) return v;
  auto lower = to_lower(text);
  auto add_gram = [&](std::string_view gram) {
    auto h = fnv1a64(gram);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v.values[h % dimension_] += sign;
  };
  if (lower.size() < 3) {
    add_gram(lower);
  } else {
    for (std::size_t i = 0; i + 3 <= lower.size(); ++i) add_gram(std::string_view(lower).substr(i, 3));
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

EmbeddingVector embed(std::string_view text, const Embedder& embedder) {
  auto v = embedder.embed(text);
  if (v.dimension() != embedder.dimension()) {
    throw Error(ErrorCode::EmbedderUnavailable, embedder.id() + " returned wrong dimension");
  }
  return v;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
  }
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

ExemplarIndex::ExemplarIndex(std::string embedder_id, std::size_t dimension)
    : embedder_id_(std::move(embedder_id)), dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "index dimension must be positive");
}

void ExemplarIndex::add(ExemplarEntry entry) {
  if (entry.vector.dimension() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, entry.video_id + ": expected " +
                                                  std::to_string(dimension_) + ", got " +
                                                  std::to_string(entry.vector.dimension()));
  }
  for (double x : entry.vector.values) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, entry.video_id + ": non-finite vector");
  }
  if (by_id_.count(entry.video_id)) throw Error(ErrorCode::DuplicateId, entry.video_id);
  by_id_.emplace(entry.video_id, entries_.size());
  entries_.push_back(std::move(entry));
}

const ExemplarEntry* ExemplarIndex::find(std::string_view video_id) const {
  auto it = by_id_.find(video_id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

std::filesystem::path exemplar_meta_path(const std::filesystem::path& store_path) {
  auto p = store_path;
  p += ".meta.json";
  return p;
}

void ExemplarIndex::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& e : entries_) {
    nlohmann::ordered_json j;
    j["video_id"] = e.video_id;
    j["label"] = label_token(e.label);
    j["country"] = e.country;
    j["language"] = e.language;
    j["thumbnail_description"] = e.thumbnail_description;
    j["explanation"] = e.explanation;
    j["description_text"] = e.description_text;
    j["subtitles_text"] = e.subtitles_text;
    j["vector"] = e.vector.values;
    out += j.dump();
    out += '\n';
  }
  nlohmann::ordered_json meta;
  meta["embedder"] = embedder_id_;
  meta["dimension"] = dimension_;
  meta["entries"] = entries_.size();
  meta["entries_sha256"] = sha256_hex(out);
  write_file_atomic(path, out);
  write_file_atomic(exemplar_meta_path(path), meta.dump(2) + "\n");
}

ExemplarIndex ExemplarIndex::load(const std::filesystem::path& path) {
  auto meta_path = exemplar_meta_path(path);
  if (!std::filesystem::exists(path) || !std::filesystem::exists(meta_path)) {
    throw Error(ErrorCode::FileNotFound, "exemplar store " + path.string() + " (and its .meta.json)");
  }
  json meta = json::parse(read_file(meta_path));
  ExemplarIndex index(meta.at("embedder").get<std::string>(), meta.at("dimension").get<std::size_t>());
  std::size_t line_no = 0;
  for (const auto& line : split_lines(read_file(path))) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      ExemplarEntry e;
      e.video_id = j.at("video_id").get<std::string>();
      auto label = parse_label_token(j.at("label").get<std::string>());
      if (!label) throw SchemaError(line_no, "label", "bad label");
      e.label = *label;
      e.country = j.value("country", std::string());
      e.language = j.value("language", std::string());
      e.thumbnail_description = j.value("thumbnail_description", std::string());
      e.explanation = j.value("explanation", std::string());
      e.description_text = j.value("description_text", std::string());
      e.subtitles_text = j.value("subtitles_text", std::string());
      e.vector.values = j.at("vector").get<std::vector<double>>();
      index.add(std::move(e));
    } catch (const json::exception& ex) {
      throw SchemaError(line_no, "<entry>", ex.what());
    }
  }
  if (index.entries().size() != meta.value("entries", index.entries().size())) {
    throw Error(ErrorCode::SchemaViolation, "exemplar store entry count disagrees with metadata");
  }
  return index;
}

RetrievedPair nearest_per_class(std::string_view query_id, const EmbeddingVector& query_vector,
                                const ExemplarIndex& index, const PoolFilter& filter) {
  if (query_vector.dimension() != index.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "query vector does not match index dimension");
  }
  const ExemplarEntry* best[2] = {nullptr, nullptr};
  double best_sim[2] = {0.0, 0.0};
  for (const auto& e : index.entries()) {
    if (e.video_id == query_id) continue;
    if (!filter.country.empty() && e.country != filter.country) continue;
    if (!filter.language.empty() && e.language != filter.language) continue;
    int slot = e.label == Label::Misleading ? 0 : 1;
    double sim = cosine_similarity(query_vector, e.vector);
    if (!best[slot] || sim > best_sim[slot] ||
        (sim == best_sim[slot] && e.video_id < best[slot]->video_id)) {
      best[slot] = &e;
      best_sim[slot] = sim;
    }
  }
  if (!best[0]) throw Error(ErrorCode::ClassExhausted, "Misleading");
  if (!best[1]) throw Error(ErrorCode::ClassExhausted, "NotMisleading");
  return RetrievedPair{*best[0], *best[1], best_sim[0], best_sim[1]};
}

std::string first_sentence(std::string_view text) {
  auto t = trim(text);
  for (std::size_t i = 0; i < t.size(); ++i) {
    char c = t[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == t.size() || std::isspace(static_cast<unsigned char>(t[i + 1])))) {
      return t.substr(0, i + 1);
    }
  }
  return t;
}

const std::string_view kThumbnailDescriptionPrompt =
    "Describe this YouTube video thumbnail in one concise sentence, including any text shown on it.";

namespace {

std::string checked_text(const ChatOutcome& o, const std::string& what) {
  switch (o.status) {
    case OutcomeStatus::Ok: return o.text;
    case OutcomeStatus::Blocked:
      throw Error(ErrorCode::ProviderBlocked,
                  what + ": blocked (" + std::string(block_reason_token(o.block_reason)) + ")");
    case OutcomeStatus::Refused: throw Error(ErrorCode::ProviderBlocked, what + ": refused");
    case OutcomeStatus::TransportError:
      throw Error(ErrorCode::ProviderUnavailable, what + ": " + o.error);
  }
  throw Error(ErrorCode::ProviderUnavailable, what);
}

}  // namespace

std::string generate_thumbnail_description(const std::string& thumbnail_uri, Backend& generator,
                                           TextCache* cache, const SendOptions& options,
                                           TokenUsage* usage_out) {
  const std::string key = "thumbdesc\x1f" + generator.name() + "\x1f" + thumbnail_uri;
  if (cache) {
    if (auto hit = cache->get(key)) return *hit;
  }
  ChatRequest req;
  req.model_id = generator.model_id();
  req.parts = {TextSegment{std::string(kThumbnailDescriptionPrompt)}, ImageAttachment{thumbnail_uri}};
  auto outcome = send(req, generator, options);
  if (usage_out) *usage_out += outcome.usage;
  auto sentence = first_sentence(checked_text(outcome, "thumbnail description"));
  if (sentence.empty()) throw Error(ErrorCode::ProviderBlocked, "thumbnail description: empty");
  if (cache) cache->put(key, sentence);
  return sentence;
}

std::string explanation_prompt(std::string_view thumbnail_description, Label label,
                               std::string_view description_excerpt,
                               std::string_view subtitles_excerpt) {
  std::string p;
  p += "A YouTube video's thumbnail has been categorized as \"";
  p += label_display(label);
  p += "\". Using the information below, write a concise explanation (one or two sentences) of "
       "why the thumbnail is ";
  p += label_display(label);
  p += ".\n\n";
  p += "Thumbnail: " + std::string(thumbnail_description) + "\n";
  p += "Subtitles: " + truncate_words(subtitles_excerpt, kExcerptWordCap) + "\n";
  p += "Video Description: " + truncate_words(description_excerpt, kExcerptWordCap) + "\n";
  p += "Categorization: " + std::string(label_display(label)) + "\n";
  return p;
}

std::string generate_explanation(std::string_view thumbnail_description, Label label,
                                 std::string_view description_excerpt,
                                 std::string_view subtitles_excerpt, Backend& generator,
                                 TextCache* cache, const SendOptions& options,
                                 TokenUsage* usage_out) {
  auto prompt = explanation_prompt(thumbnail_description, label, description_excerpt, subtitles_excerpt);
  const std::string key = "explain\x1f" + generator.name() + "\x1f" + sha256_hex(prompt);
  if (cache) {
    if (auto hit = cache->get(key)) return *hit;
  }
  ChatRequest req;
  req.model_id = generator.model_id();
  req.parts = {TextSegment{prompt}};
  auto outcome = send(req, generator, options);
  if (usage_out) *usage_out += outcome.usage;
  auto text = trim(checked_text(outcome, "explanation"));
  if (text.empty()) throw Error(ErrorCode::ProviderBlocked, "explanation: empty");
  if (cache) cache->put(key, text);
  return text;
}

ExemplarCard build_card(const ExemplarEntry& entry) {
  if (entry.video_id.empty() || entry.thumbnail_description.empty() || entry.explanation.empty()) {
    throw Error(ErrorCode::IncompleteEntry,
                (entry.video_id.empty() ? std::string("<no id>") : entry.video_id) +
                    ": card needs thumbnail description and explanation");
  }
  ExemplarCard card;
  card.video_id = entry.video_id;
  card.thumbnail_description = entry.thumbnail_description;
  card.subtitles_excerpt = truncate_words(entry.subtitles_text, kExcerptWordCap);
  card.description_excerpt = truncate_words(entry.description_text, kExcerptWordCap);
  card.categorization = entry.label;
  card.explanation = entry.explanation;
  return card;
}

}  // namespace thumbtruth
