#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "thumbtruth/thumbtruth.h"

namespace {

using nlohmann::json;

struct Flags {
  std::string config;
  json options = json::object();
};

void add_path(CLI::App* cmd, Flags& f, const std::string& flag, const std::string& help, bool required = false) {
  auto key = flag;
  for (auto& ch : key) {
    if (ch == '-') ch = '_';
  }
  auto* opt = cmd->add_option_function<std::string>(
      "--" + flag, [&f, key](const std::string& v) { f.options[key] = v; }, help);
  if (required) opt->required();
}

void add_uint(CLI::App* cmd, Flags& f, const std::string& flag, const std::string& help) {
  auto key = flag;
  for (auto& ch : key) {
    if (ch == '-') ch = '_';
  }
  cmd->add_option_function<std::uint64_t>(
      "--" + flag, [&f, key](const std::uint64_t& v) { f.options[key] = v; }, help);
}

void add_flag(CLI::App* cmd, Flags& f, const std::string& flag, const std::string& help) {
  auto key = flag;
  for (auto& ch : key) {
    if (ch == '-') ch = '_';
  }
  cmd->add_flag_callback("--" + flag, [&f, key] { f.options[key] = true; }, help);
}

void run_flags(CLI::App* cmd, Flags& f) {
  add_path(cmd, f, "manifest", "manifest file (JSONL)", true);
  add_path(cmd, f, "backend", "backend name from the config", true);
  add_uint(cmd, f, "concurrency", "worker count (default 4)");
  add_uint(cmd, f, "seed", "seed for every random choice (default 0)");
  add_path(cmd, f, "out", "output directory", true);
  add_path(cmd, f, "cache-dir", "cache directory (default from config)");
  add_path(cmd, f, "exemplars", "exemplar store for dynamic few-shot");
  add_path(cmd, f, "pool", "retrieval pool: global, country, language");
  add_flag(cmd, f, "no-sleep", "retry without backoff waits");
}

int report_failure(tt_status status) {
  std::cerr << "error: " << tt_last_error() << "\n";
  return tt_exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Misleading-thumbnail classification pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tt_version());
  Flags f;
  const char* env_config = std::getenv("THUMBTRUTH_CONFIG");
  f.config = env_config ? env_config : "";
  app.add_option("--config", f.config, "project config (JSON); default $THUMBTRUTH_CONFIG");

  auto* ingest = app.add_subcommand("ingest", "validate a manifest and summarize it");
  add_path(ingest, f, "manifest", "manifest file (JSONL)", true);
  add_path(ingest, f, "annotations", "annotation pairs (JSONL) for Cohen's kappa");
  add_path(ingest, f, "out", "directory for the summary and normalized manifest");

  auto* describe = app.add_subcommand("describe", "fill the description cache");
  add_path(describe, f, "manifest", "manifest file (JSONL)", true);
  add_path(describe, f, "backend", "classifier whose description source is used", true);
  add_uint(describe, f, "concurrency", "worker count (default 4)");
  add_uint(describe, f, "seed", "retry jitter seed");
  add_path(describe, f, "out", "directory for the usage log");
  add_path(describe, f, "cache-dir", "cache directory (default from config)");

  auto* exemplars = app.add_subcommand("exemplars", "embed a pool and build exemplar cards");
  add_path(exemplars, f, "manifest", "exemplar pool manifest (JSONL)", true);
  add_path(exemplars, f, "store", "exemplar store to write", true);
  add_uint(exemplars, f, "concurrency", "worker count (default 4)");
  add_uint(exemplars, f, "seed", "retry jitter seed");
  add_path(exemplars, f, "cache-dir", "cache directory (default from config)");

  auto* classify = app.add_subcommand("classify", "classify every video in a manifest");
  run_flags(classify, f);
  add_path(classify, f, "strategy", "zero-shot, fixed-few-shot or dynamic-few-shot");
  add_path(classify, f, "ablation", "full, abl-ns, abl-nd or abl-nds");
  add_flag(classify, f, "allow-few-shot-ablation", "permit ablation with few-shot strategies");

  auto* ablate = app.add_subcommand("ablate", "zero-shot runs for all four ablation masks");
  run_flags(ablate, f);

  auto* evaluate = app.add_subcommand("evaluate", "metrics over a results directory");
  add_path(evaluate, f, "results", "results directory", true);
  add_path(evaluate, f, "manifest", "manifest with ground truth", true);
  add_path(evaluate, f, "group-by", "country, category or language");
  add_flag(evaluate, f, "mcnemar", "pairwise McNemar tests");
  add_uint(evaluate, f, "min-support", "balanced group threshold (default 10)");
  add_uint(evaluate, f, "seed", "balanced sampling seed");
  add_path(evaluate, f, "out", "report directory (default RESULTS/reports)");

  auto* cost = app.add_subcommand("cost", "price a results directory");
  add_path(cost, f, "results", "results directory", true);
  add_path(cost, f, "prices", "price table (default from config)");
  add_path(cost, f, "usage", "directory of usage logs (default RESULTS)");
  add_path(cost, f, "out", "report directory (default RESULTS/reports)");

  auto* report = app.add_subcommand("report", "render every table for a results directory");
  add_path(report, f, "results", "results directory", true);
  add_path(report, f, "manifest", "manifest with ground truth", true);
  add_uint(report, f, "min-support", "balanced group threshold (default 10)");
  add_uint(report, f, "seed", "balanced sampling seed");
  add_path(report, f, "out", "report directory (default RESULTS/reports)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  auto* sub = app.get_subcommands().front();
  tt_context* ctx = nullptr;
  if (auto st = tt_context_open(f.config.empty() ? nullptr : f.config.c_str(), &ctx); st != TT_OK) {
    return report_failure(st);
  }
  char* raw = nullptr;
  auto st = tt_run(ctx, sub->get_name().c_str(), f.options.dump().c_str(), &raw);
  tt_context_free(ctx);
  if (st != TT_OK) return report_failure(st);

  auto out = json::parse(raw);
  tt_string_free(raw);
  std::cout << out.at("text").get<std::string>();
  for (const auto& w : out.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << "\n";
  for (const auto& p : out.at("files")) std::cerr << "wrote " << p.get<std::string>() << "\n";
  return 0;
}
