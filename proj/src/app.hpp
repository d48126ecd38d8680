#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "classify.hpp"
#include "config.hpp"

namespace thumbtruth {

struct CommandOutput {
  std::string text;  // human-readable summary for stdout
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

struct IngestOptions {
  std::filesystem::path manifest;
  std::filesystem::path annotations;  // optional
  std::filesystem::path out;          // optional summary directory
};

struct DescribeOptions {
  std::filesystem::path manifest;
  std::string backend;  // classifier; its description source does the work
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path cache_dir;  // empty: from config
};

struct ExemplarsOptions {
  std::filesystem::path manifest;
  std::filesystem::path store;  // exemplar store file
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::filesystem::path cache_dir;
};

struct ClassifyOptions {
  std::filesystem::path manifest;
  std::string backend;
  PromptStrategy strategy = PromptStrategy::ZeroShot;
  AblationMask ablation = AblationMask::full();
  std::size_t concurrency = 4;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path cache_dir;
  std::filesystem::path exemplars;  // required for dynamic few-shot
  PoolMode pool = PoolMode::Global;
  bool allow_few_shot_ablation = false;
  bool no_sleep = false;  // skip retry backoff waits
};

struct EvaluateOptions {
  std::filesystem::path results;
  std::filesystem::path manifest;
  std::optional<GroupKey> group_by;
  bool mcnemar = false;
  std::uint64_t min_support = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out;  // empty: <results>/reports
};

struct CostOptions {
  std::filesystem::path results;
  std::filesystem::path prices;  // empty: from config
  std::filesystem::path usage;   // directory of *.usage.jsonl; empty: results
  std::filesystem::path out;
};

struct ReportOptions {
  std::filesystem::path results;
  std::filesystem::path manifest;
  std::uint64_t min_support = 10;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

CommandOutput cmd_ingest(const IngestOptions& o);
CommandOutput cmd_describe(const ProjectConfig& config, const DescribeOptions& o);
CommandOutput cmd_exemplars(const ProjectConfig& config, const ExemplarsOptions& o);
CommandOutput cmd_classify(const ProjectConfig& config, const ClassifyOptions& o);
// All four masks, always zero-shot, then the ablation table.
CommandOutput cmd_ablate(const ProjectConfig& config, ClassifyOptions o);
CommandOutput cmd_evaluate(const ProjectConfig& config, const EvaluateOptions& o);
CommandOutput cmd_cost(const ProjectConfig& config, const CostOptions& o);
CommandOutput cmd_report(const ProjectConfig& config, const ReportOptions& o);

// Dispatch by subcommand name with options as a JSON object whose keys match
// the CLI flags (dashes replaced by underscores).
CommandOutput run_command(const ProjectConfig& config, std::string_view subcommand, const nlohmann::json& options);

// 0 ok, 2 schema, 3 configuration, 4 truth mismatch, 1 anything else.
int exit_code_for(ErrorCode code);

}  // namespace thumbtruth
