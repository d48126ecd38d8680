#include "classify.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include "error.hpp"
#include "util.hpp"

#ifndef THUMBTRUTH_VERSION
#define THUMBTRUTH_VERSION "dev"
#endif

namespace thumbtruth {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view verdict_token(Verdict v) {
  switch (v) {
    case Verdict::Misleading: return "misleading";
    case Verdict::NotMisleading: return "not_misleading";
    case Verdict::Unclassifiable: return "unclassifiable";
  }
  return "unclassifiable";
}

std::optional<Verdict> parse_verdict_token(std::string_view token) {
  if (token == "misleading") return Verdict::Misleading;
  if (token == "not_misleading") return Verdict::NotMisleading;
  if (token == "unclassifiable") return Verdict::Unclassifiable;
  return std::nullopt;
}

std::string_view status_token(ResultStatus s) {
  switch (s) {
    case ResultStatus::Ok: return "ok";
    case ResultStatus::Blocked: return "blocked";
    case ResultStatus::Refused: return "refused";
    case ResultStatus::ParseFailed: return "parse_failed";
    case ResultStatus::TransportFailed: return "transport_failed";
  }
  return "transport_failed";
}

std::optional<ResultStatus> parse_status_token(std::string_view token) {
  for (auto s : {ResultStatus::Ok, ResultStatus::Blocked, ResultStatus::Refused,
                 ResultStatus::ParseFailed, ResultStatus::TransportFailed}) {
    if (status_token(s) == token) return s;
  }
  return std::nullopt;
}

namespace {

// Markdown emphasis and list markers models like to put around label lines.
std::string strip_decoration(std::string_view s) {
  auto t = trim(s);
  std::size_t b = 0, e = t.size();
  auto deco = [](char c) { return c == '*' || c == '#' || c == '_' || c == '-' || c == '"' || c == '\'' || c == '`'; };
  while (b < e && (deco(t[b]) || std::isspace(static_cast<unsigned char>(t[b])))) ++b;
  while (e > b && (deco(t[e - 1]) || std::isspace(static_cast<unsigned char>(t[e - 1])) || t[e - 1] == '.')) --e;
  return t.substr(b, e - b);
}

std::optional<Verdict> verdict_from_value(std::string_view value) {
  auto v = to_lower(strip_decoration(value));
  if (v.rfind("not misleading", 0) == 0) return Verdict::NotMisleading;
  if (v.rfind("misleading", 0) == 0) return Verdict::Misleading;
  return std::nullopt;
}

std::string rest_after_line(const std::vector<std::string>& lines, std::size_t i) {
  std::string rest;
  for (std::size_t k = i + 1; k < lines.size(); ++k) {
    rest += lines[k];
    if (k + 1 < lines.size()) rest += '\n';
  }
  return trim(rest);
}

}  // namespace

ParsedVerdict parse_verdict(std::string_view response_text) {
  auto lines = split_lines(response_text);
  static constexpr std::string_view kKey = "categorization:";
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto stripped = strip_decoration(lines[i]);
    auto lower = to_lower(stripped);
    if (lower.rfind(kKey, 0) != 0) continue;
    if (auto v = verdict_from_value(stripped.substr(kKey.size()))) {
      return {*v, rest_after_line(lines, i)};
    }
  }

  auto lower = to_lower(response_text);
  std::optional<Verdict> verdict;
  std::size_t at = std::string::npos;
  if (auto p = lower.find("not misleading"); p != std::string::npos) {
    verdict = Verdict::NotMisleading;
    at = p;
  } else if (auto q = lower.find("misleading"); q != std::string::npos) {
    verdict = Verdict::Misleading;
    at = q;
  }
  if (!verdict) return {Verdict::Unclassifiable, std::string(response_text)};

  std::size_t line_index = 0;
  for (std::size_t consumed = 0; line_index < lines.size(); ++line_index) {
    consumed += lines[line_index].size() + 1;
    if (consumed > at) break;
  }
  auto explanation = rest_after_line(lines, line_index);
  if (explanation.empty()) explanation = trim(response_text);
  return {*verdict, explanation};
}

std::optional<PoolMode> parse_pool_mode(std::string_view token) {
  auto t = to_lower(token);
  if (t == "global") return PoolMode::Global;
  if (t == "country") return PoolMode::Country;
  if (t == "language") return PoolMode::Language;
  return std::nullopt;
}

void validate_run_config(const RunConfig& config) {
  if (config.concurrency_limit < 1) {
    throw Error(ErrorCode::ConfigurationError, "concurrency_limit must be >= 1");
  }
  if (config.strategy != PromptStrategy::ZeroShot && !config.ablation.is_full()) {
    if (!config.allow_few_shot_ablation) {
      throw Error(ErrorCode::ConfigurationError,
                  "ablation " + ablation_display(config.ablation) +
                      " is only run with zero-shot prompts; pass the few-shot ablation override to "
                      "force it");
    }
    std::cerr << "warning: ablating query inputs under " << strategy_token(config.strategy)
              << "; exemplar cards keep both modalities\n";
  }
}

ordered_json result_to_json(const ClassificationResult& r) {
  ordered_json j;
  j["type"] = "result";
  j["video_id"] = r.video_id;
  j["backend"] = r.backend;
  j["model_id"] = r.model_id;
  j["strategy"] = strategy_token(r.strategy);
  j["ablation"] = ablation_token(r.ablation);
  j["verdict"] = verdict_token(r.verdict);
  j["status"] = status_token(r.status);
  if (r.status == ResultStatus::Blocked) j["block_reason"] = block_reason_token(r.block_reason);
  j["explanation"] = r.explanation;
  j["usage"] = usage_to_json(r.usage);
  j["latency_ms"] = r.latency_ms;
  j["exemplar_ids"] = r.exemplar_ids;
  j["prompt_sha256"] = r.prompt_checksum;
  return j;
}

ClassificationResult result_from_json(const json& j) {
  ClassificationResult r;
  r.video_id = j.at("video_id").get<std::string>();
  r.backend = j.value("backend", std::string());
  r.model_id = j.value("model_id", std::string());
  auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  auto ablation = parse_ablation(j.at("ablation").get<std::string>());
  auto verdict = parse_verdict_token(j.at("verdict").get<std::string>());
  auto status = parse_status_token(j.at("status").get<std::string>());
  if (!strategy || !ablation || !verdict || !status) {
    throw Error(ErrorCode::SchemaViolation, "result for " + r.video_id + " has unknown enum value");
  }
  r.strategy = *strategy;
  r.ablation = *ablation;
  r.verdict = *verdict;
  r.status = *status;
  if (j.contains("block_reason")) r.block_reason = parse_block_reason(j.at("block_reason").get<std::string>());
  r.explanation = j.value("explanation", std::string());
  r.usage = usage_from_json(j.value("usage", json::object()));
  r.latency_ms = j.value("latency_ms", 0.0);
  r.exemplar_ids = j.value("exemplar_ids", std::vector<std::string>{});
  r.prompt_checksum = j.value("prompt_sha256", std::string());
  if ((r.status == ResultStatus::Ok) != (r.verdict != Verdict::Unclassifiable)) {
    throw Error(ErrorCode::SchemaViolation, "result for " + r.video_id + " couples status and verdict wrongly");
  }
  return r;
}

namespace {

std::array<ExemplarCard, 2> retrieve_cards(const VideoRecord& record, const RunConfig& config,
                                           ClassifyDependencies& deps) {
  if (!deps.exemplars || !deps.embedder) {
    throw Error(ErrorCode::ConfigurationError, "dynamic few-shot needs an exemplar store and embedder");
  }
  EmbeddingVector query;
  if (const auto* stored = deps.exemplars->find(record.video_id)) {
    query = stored->vector;
  } else {
    EvidenceSource* source = deps.retrieval_evidence ? deps.retrieval_evidence : &deps.evidence;
    query = embed(source->description(record), *deps.embedder);
  }
  PoolFilter filter;
  const LanguageTable default_languages;
  const auto& languages = deps.languages ? *deps.languages : default_languages;
  if (config.pool == PoolMode::Country) filter.country = record.country;
  if (config.pool == PoolMode::Language) filter.language = languages.normalize(record.default_audio_language);
  auto pair = nearest_per_class(record.video_id, query, *deps.exemplars, filter);
  return {build_card(pair.misleading), build_card(pair.not_misleading)};
}

}  // namespace

ClassificationResult classify_one(const VideoRecord& record, const RunConfig& config,
                                  ClassifyDependencies& deps) {
  ClassificationResult result;
  result.video_id = record.video_id;
  result.backend = deps.backend.name();
  result.model_id = deps.backend.model_id();
  result.strategy = config.strategy;
  result.ablation = config.ablation;

  EvidenceBundle bundle;
  std::array<ExemplarCard, 2> cards;
  try {
    std::string subtitles = config.ablation.include_subtitles ? deps.evidence.subtitles(record) : "";
    std::string description = config.ablation.include_description ? deps.evidence.description(record) : "";
    bundle = assemble_bundle(record, std::move(subtitles), std::move(description), config.ablation);
    if (config.strategy == PromptStrategy::DynamicFewShot) cards = retrieve_cards(record, config, deps);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::ConfigurationError: throw;
      case ErrorCode::ProviderBlocked:
        // The provider refused the video itself while describing it.
        result.status = ResultStatus::Blocked;
        result.explanation = e.what();
        return result;
      default: throw Error(ErrorCode::PreparationFailed, record.video_id + ": " + e.what());
    }
  }

  auto doc = render(config.strategy, bundle, &cards);
  result.exemplar_ids = doc.exemplar_ids;
  result.prompt_checksum = doc.checksum;

  ChatRequest request;
  request.model_id = deps.backend.model_id();
  request.parts = doc.parts;
  request.temperature = deps.temperature;
  request.max_output_tokens = deps.max_output_tokens;

  SendOptions options{deps.retry, derive_seed(config.seed, "classify:" + record.video_id), deps.sleeper};
  ChatOutcome outcome;
  try {
    outcome = send(request, deps.backend, options);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigurationError) throw;
    result.status = ResultStatus::TransportFailed;
    result.explanation = e.what();
    return result;
  }
  result.usage = outcome.usage;
  result.latency_ms = outcome.latency_ms;

  switch (outcome.status) {
    case OutcomeStatus::Ok: {
      auto parsed = parse_verdict(outcome.text);
      result.verdict = parsed.verdict;
      result.explanation = parsed.explanation;
      result.status = parsed.verdict == Verdict::Unclassifiable ? ResultStatus::ParseFailed : ResultStatus::Ok;
      break;
    }
    case OutcomeStatus::Blocked:
      result.status = ResultStatus::Blocked;
      result.block_reason = outcome.block_reason;
      break;
    case OutcomeStatus::Refused:
      result.status = ResultStatus::Refused;
      result.explanation = outcome.text;
      break;
    case OutcomeStatus::TransportError:
      result.status = ResultStatus::TransportFailed;
      result.explanation = outcome.error;
      break;
  }
  return result;
}

// ---- persistence -----------------------------------------------------------

std::string results_file_name(const RunHeader& h) {
  std::string backend;
  for (unsigned char c : h.backend) backend.push_back(std::isalnum(c) || c == '-' || c == '.' ? static_cast<char>(c) : '_');
  return backend + "__" + std::string(strategy_token(h.strategy)) + "__" + ablation_token(h.ablation) +
         "__" + h.run_id + ".jsonl";
}

namespace {

ordered_json header_to_json(const RunHeader& h) {
  ordered_json j;
  j["type"] = "run";
  j["run_id"] = h.run_id;
  j["run_manifest_sha256"] = h.run_manifest_sha256;
  j["backend"] = h.backend;
  j["model_id"] = h.model_id;
  j["strategy"] = strategy_token(h.strategy);
  j["ablation"] = ablation_token(h.ablation);
  j["seed"] = h.seed;
  return j;
}

std::optional<RunHeader> header_from_json(const json& j) {
  if (!j.is_object() || j.value("type", std::string()) != "run") return std::nullopt;
  RunHeader h;
  h.run_id = j.at("run_id").get<std::string>();
  h.run_manifest_sha256 = j.value("run_manifest_sha256", std::string());
  h.backend = j.at("backend").get<std::string>();
  h.model_id = j.value("model_id", std::string());
  auto s = parse_strategy(j.at("strategy").get<std::string>());
  auto a = parse_ablation(j.at("ablation").get<std::string>());
  if (!s || !a) throw Error(ErrorCode::SchemaViolation, "run header has unknown strategy/ablation");
  h.strategy = *s;
  h.ablation = *a;
  h.seed = j.value("seed", std::uint64_t{0});
  return h;
}

std::optional<ResultsFile> try_load(const std::filesystem::path& path) {
  auto lines = split_lines(read_file(path));
  if (lines.empty()) return std::nullopt;
  json first;
  try {
    first = json::parse(lines.front());
  } catch (const json::exception&) {
    return std::nullopt;
  }
  auto header = header_from_json(first);
  if (!header) return std::nullopt;
  ResultsFile file;
  file.path = path;
  file.header = *header;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    try {
      file.results.push_back(result_from_json(json::parse(lines[i])));
    } catch (const json::exception& e) {
      throw SchemaError(i + 1, "<result>", e.what());
    }
  }
  return file;
}

}  // namespace

ResultsFile load_results_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::FileNotFound, path.string());
  auto file = try_load(path);
  if (!file) throw Error(ErrorCode::SchemaViolation, path.string() + " has no run header");
  return std::move(*file);
}

std::vector<ResultsFile> load_results_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::FileNotFound, dir.string());
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ResultsFile> out;
  for (const auto& p : paths) {
    if (auto f = try_load(p)) out.push_back(std::move(*f));
  }
  return out;
}

ordered_json make_run_manifest(const RunConfig& config, const Backend& backend,
                               std::string_view manifest_sha256, std::string_view exemplar_store_sha256,
                               const json& extra) {
  ordered_json m;
  m["code_version"] = THUMBTRUTH_VERSION;
  m["backend"] = backend.name();
  m["model_id"] = backend.model_id();
  m["strategy"] = strategy_token(config.strategy);
  m["ablation"] = ablation_token(config.ablation);
  m["seed"] = config.seed;
  m["pool"] = config.pool == PoolMode::Global ? "global" : config.pool == PoolMode::Country ? "country" : "language";
  m["allow_few_shot_ablation"] = config.allow_few_shot_ablation;
  m["manifest_sha256"] = manifest_sha256;
  m["exemplar_store_sha256"] = exemplar_store_sha256;
  m["template_sha256"] = template_checksum(config.strategy);
  m["extra"] = extra;
  return m;
}

RunHeader make_run_header(const ordered_json& run_manifest, const RunConfig& config, const Backend& backend) {
  RunHeader h;
  h.run_manifest_sha256 = sha256_hex(run_manifest.dump());
  h.run_id = h.run_manifest_sha256.substr(0, 12);
  h.backend = backend.name();
  h.model_id = backend.model_id();
  h.strategy = config.strategy;
  h.ablation = config.ablation;
  h.seed = config.seed;
  return h;
}

namespace {

// Single consumer: appends each result once every earlier index is written.
class OrderedResultWriter {
 public:
  OrderedResultWriter(std::filesystem::path partial, const RunHeader& header, std::size_t count)
      : path_(std::move(partial)), pending_(count) {
    out_.open(path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path_.string());
    out_ << header_to_json(header).dump() << '\n';
    out_.flush();
  }

  void submit(std::size_t index, const ClassificationResult& result) {
    std::lock_guard lk(m_);
    pending_[index] = result_to_json(result).dump();
    while (next_ < pending_.size() && pending_[next_]) {
      out_ << *pending_[next_] << '\n';
      pending_[next_].reset();
      ++next_;
    }
    out_.flush();
  }

  void finish(const std::filesystem::path& final_path) {
    out_.close();
    std::filesystem::rename(path_, final_path);
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::mutex m_;
  std::vector<std::optional<std::string>> pending_;
  std::size_t next_ = 0;
};

}  // namespace

BatchOutput classify_batch(const std::vector<VideoRecord>& records, const RunConfig& config,
                           ClassifyDependencies& deps, const std::filesystem::path& out_dir,
                           const ordered_json& run_manifest) {
  validate_run_config(config);
  deps.backend.check_configuration();
  if (config.strategy == PromptStrategy::DynamicFewShot && (!deps.exemplars || !deps.embedder)) {
    throw Error(ErrorCode::ConfigurationError,
                "dynamic few-shot needs an exemplar store; build one with the exemplars subcommand");
  }

  BatchOutput output;
  output.results.resize(records.size());

  std::map<std::string, ClassificationResult> cache;
  std::unique_ptr<OrderedResultWriter> writer;
  if (!out_dir.empty()) {
    auto manifest = run_manifest.is_null() ? make_run_manifest(config, deps.backend, "", "") : run_manifest;
    auto header = make_run_header(manifest, config, deps.backend);
    std::filesystem::create_directories(out_dir);
    output.results_path = out_dir / results_file_name(header);
    auto partial = output.results_path;
    partial += ".partial";
    for (const auto& candidate : {output.results_path, partial}) {
      if (!std::filesystem::exists(candidate)) continue;
      if (auto previous = try_load(candidate)) {
        for (auto& r : previous->results) {
          if (r.status != ResultStatus::TransportFailed) cache.emplace(r.video_id, std::move(r));
        }
      }
    }
    auto run_json = output.results_path;
    run_json.replace_extension(".run.json");
    write_file_atomic(run_json, manifest.dump(2) + "\n");
    writer = std::make_unique<OrderedResultWriter>(partial, header, records.size());
  }

  std::mutex stats;
  parallel_for(records.size(), config.concurrency_limit, [&](std::size_t i) {
    const auto& record = records[i];
    ClassificationResult result;
    bool hit = false;
    if (auto it = cache.find(record.video_id); it != cache.end()) {
      result = it->second;
      hit = true;
    } else {
      try {
        result = classify_one(record, config, deps);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigurationError) throw;
        result = ClassificationResult{};
        result.video_id = record.video_id;
        result.backend = deps.backend.name();
        result.model_id = deps.backend.model_id();
        result.strategy = config.strategy;
        result.ablation = config.ablation;
        result.status = ResultStatus::TransportFailed;
        result.explanation = e.what();
      }
    }
    {
      std::lock_guard lk(stats);
      hit ? ++output.cache_hits : ++output.classified;
    }
    if (writer) writer->submit(i, result);
    output.results[i] = std::move(result);
  });

  if (writer) writer->finish(output.results_path);
  return output;
}

}  // namespace thumbtruth
