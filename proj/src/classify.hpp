#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "describe.hpp"
#include "evidence.hpp"
#include "exemplars.hpp"
#include "prompts.hpp"
#include "providers.hpp"

namespace thumbtruth {

enum class Verdict { Misleading, NotMisleading, Unclassifiable };
enum class ResultStatus { Ok, Blocked, Refused, ParseFailed, TransportFailed };

std::string_view verdict_token(Verdict v);  // misleading, not_misleading, unclassifiable
std::optional<Verdict> parse_verdict_token(std::string_view token);
std::string_view status_token(ResultStatus s);  // ok, blocked, refused, parse_failed, transport_failed
std::optional<ResultStatus> parse_status_token(std::string_view token);

struct ParsedVerdict {
  Verdict verdict = Verdict::Unclassifiable;
  std::string explanation;
};

// A "Categorization:" line wins; otherwise the whole text is searched for
// "not misleading" before "misleading". Never throws.
ParsedVerdict parse_verdict(std::string_view response_text);

enum class PoolMode { Global, Country, Language };
std::optional<PoolMode> parse_pool_mode(std::string_view token);

struct RunConfig {
  std::string backend_name;
  PromptStrategy strategy = PromptStrategy::ZeroShot;
  AblationMask ablation = AblationMask::full();
  std::size_t concurrency_limit = 1;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir;
  PoolMode pool = PoolMode::Global;
  // Ablation is a zero-shot experiment; other strategies need this opt-in.
  bool allow_few_shot_ablation = false;
};

void validate_run_config(const RunConfig& config);

struct ClassificationResult {
  std::string video_id;
  std::string backend;
  std::string model_id;
  PromptStrategy strategy = PromptStrategy::ZeroShot;
  AblationMask ablation;
  Verdict verdict = Verdict::Unclassifiable;
  std::string explanation;
  ResultStatus status = ResultStatus::TransportFailed;
  BlockReason block_reason = BlockReason::Other;  // when status == Blocked
  TokenUsage usage;
  double latency_ms = 0.0;
  std::vector<std::string> exemplar_ids;
  std::string prompt_checksum;
};

nlohmann::ordered_json result_to_json(const ClassificationResult& r);
ClassificationResult result_from_json(const nlohmann::json& j);

struct ClassifyDependencies {
  Backend& backend;
  EvidenceSource& evidence;
  // DynamicFewShot only. Query vectors come from the index entry when the
  // query is stored, else from retrieval_evidence's description.
  const ExemplarIndex* exemplars = nullptr;
  const Embedder* embedder = nullptr;
  EvidenceSource* retrieval_evidence = nullptr;
  const LanguageTable* languages = nullptr;

  std::optional<double> temperature;
  std::optional<std::uint32_t> max_output_tokens;
  RetryPolicy retry;
  Sleeper sleeper = real_sleeper();
};

ClassificationResult classify_one(const VideoRecord& record, const RunConfig& config,
                                  ClassifyDependencies& deps);

struct RunHeader {
  std::string run_id;
  std::string run_manifest_sha256;
  std::string backend;
  std::string model_id;
  PromptStrategy strategy = PromptStrategy::ZeroShot;
  AblationMask ablation;
  std::uint64_t seed = 0;
};

struct ResultsFile {
  std::filesystem::path path;
  RunHeader header;
  std::vector<ClassificationResult> results;
};

// "{backend}__{strategy}__{ablation}__{run_id}.jsonl"
std::string results_file_name(const RunHeader& header);

ResultsFile load_results_file(const std::filesystem::path& path);
// Every *.jsonl in dir whose first line is a run header, ordered by file name.
std::vector<ResultsFile> load_results_dir(const std::filesystem::path& dir);

// Run identity: digest of the run manifest (config, seeds, template checksums,
// code version, input digests). Identical inputs give identical ids.
nlohmann::ordered_json make_run_manifest(const RunConfig& config, const Backend& backend,
                                         std::string_view manifest_sha256,
                                         std::string_view exemplar_store_sha256,
                                         const nlohmann::json& extra = nlohmann::json::object());
RunHeader make_run_header(const nlohmann::ordered_json& run_manifest, const RunConfig& config,
                          const Backend& backend);

struct BatchOutput {
  std::vector<ClassificationResult> results;
  std::filesystem::path results_path;  // empty when not persisted
  std::size_t cache_hits = 0;
  std::size_t classified = 0;
};

// One result per record, in input order. With out_dir set, results already in
// that run's file are reused (transport failures are retried), and the file is
// rewritten in input order; the run manifest lands next to it as .run.json.
BatchOutput classify_batch(const std::vector<VideoRecord>& records, const RunConfig& config,
                           ClassifyDependencies& deps, const std::filesystem::path& out_dir = {},
                           const nlohmann::ordered_json& run_manifest = {});

}  // namespace thumbtruth
