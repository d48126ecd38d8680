#include "app.hpp"

#include <algorithm>
#include <mutex>
#include <set>

#include <fmt/format.h>

#include "costing.hpp"
#include "describe.hpp"
#include "error.hpp"
#include "exemplars.hpp"
#include "metrics.hpp"
#include "reporting.hpp"
#include "util.hpp"

namespace thumbtruth {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Digest of a subcommand's run manifest; the first 12 hex characters tag every
// file the subcommand writes.
struct RunTag {
  ordered_json manifest;
  std::string sha256;
  std::string tag;
};

RunTag make_tag(ordered_json manifest) {
  manifest["code_version"] = THUMBTRUTH_VERSION;
  RunTag t;
  t.sha256 = sha256_hex(manifest.dump());
  t.tag = t.sha256.substr(0, 12);
  t.manifest = std::move(manifest);
  return t;
}

std::string file_digest(const std::filesystem::path& p) {
  if (p.empty() || !std::filesystem::exists(p)) return "";
  return sha256_hex(read_file(p));
}

void write_run_json(const std::filesystem::path& dir, std::string_view command, const RunTag& tag,
                    CommandOutput& out) {
  auto path = dir / fmt::format("{}__{}.run.json", command, tag.tag);
  write_file_atomic(path, tag.manifest.dump(2) + "\n");
  out.files.push_back(path);
}

std::filesystem::path cache_root(const ProjectConfig& config, const std::filesystem::path& override_dir) {
  return override_dir.empty() ? config.cache_dir : override_dir;
}

// Serializes appends from worker threads into one usage log.
class UsageLog {
 public:
  explicit UsageLog(std::filesystem::path path) : path_(std::move(path)) {}
  void add(CostStage stage, const std::string& backend, const std::string& video_id, const TokenUsage& usage) {
    if (usage == TokenUsage{}) return;
    std::lock_guard lk(m_);
    append_usage_log(path_, stage, backend, video_id, usage);
    written_ = true;
  }
  const std::filesystem::path& path() const { return path_; }
  bool written() const { return written_; }

 private:
  std::filesystem::path path_;
  std::mutex m_;
  bool written_ = false;
};

Table count_table(const std::string& title, const std::map<std::string, std::vector<VideoRecord>>& groups) {
  Table t;
  t.title = title;
  t.header = {"Group", "Misleading", "Not Misleading", "Total"};
  for (const auto& [name, rows] : groups) {
    auto m = std::count_if(rows.begin(), rows.end(), [](const VideoRecord& r) { return r.label == Label::Misleading; });
    t.rows.push_back({name, std::to_string(m), std::to_string(rows.size() - m), std::to_string(rows.size())});
  }
  return t;
}

std::vector<std::string> run_digests(const std::vector<ResultsFile>& files) {
  std::vector<std::string> d;
  for (const auto& f : files) d.push_back(f.header.run_manifest_sha256);
  return d;
}

std::filesystem::path reports_dir(const std::filesystem::path& results, const std::filesystem::path& out) {
  return out.empty() ? results / "reports" : out;
}

std::vector<ResultsFile> require_results(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::FileNotFound, dir.string());
  auto files = load_results_dir(dir);
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no results files in " + dir.string());
  return files;
}

void append_bundle(CommandOutput& out, const ReportBundle& bundle) {
  out.files.push_back(bundle.markdown_path);
  for (const auto& p : bundle.csv_paths) out.files.push_back(p);
}

std::string status_counts(const std::vector<ClassificationResult>& results) {
  std::map<ResultStatus, std::size_t> n;
  for (const auto& r : results) ++n[r.status];
  std::string s;
  for (auto st : {ResultStatus::Ok, ResultStatus::Blocked, ResultStatus::Refused, ResultStatus::ParseFailed,
                  ResultStatus::TransportFailed}) {
    s += fmt::format("{}{} {}", s.empty() ? "" : ", ", status_token(st), n[st]);
  }
  return s;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::SchemaViolation:
    case ErrorCode::DuplicateId:
    case ErrorCode::EmptyId:
      return 2;
    case ErrorCode::ConfigurationError:
    case ErrorCode::UnknownBackend:
    case ErrorCode::UnknownMetric:
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmbedderUnavailable:
      return 3;
    case ErrorCode::MissingTruth:
    case ErrorCode::InconsistentTruth:
      return 4;
    default:
      return 1;
  }
}

CommandOutput cmd_ingest(const IngestOptions& o) {
  CommandOutput out;
  auto records = ingest_manifest(o.manifest);
  std::size_t m = std::count_if(records.begin(), records.end(),
                                [](const VideoRecord& r) { return r.label == Label::Misleading; });
  out.text += fmt::format("records {}\nmisleading {}\nnot_misleading {}\n", records.size(), m, records.size() - m);
  std::vector<Table> tables{count_table("By country", split_groups(records, GroupKey::Country)),
                            count_table("By category", split_groups(records, GroupKey::Category))};

  ordered_json manifest;
  manifest["command"] = "ingest";
  manifest["manifest_sha256"] = file_digest(o.manifest);
  if (!o.annotations.empty()) {
    auto pairs = load_annotations(o.annotations);
    auto kappa = cohens_kappa(pairs);
    std::vector<std::string> disagreements;
    for (const auto& p : pairs) {
      if (p.annotator_a != p.annotator_b) disagreements.push_back(p.video_id);
    }
    out.text += fmt::format("kappa {:.4f}\ndisagreements {}\n", kappa, disagreements.size());
    for (const auto& id : disagreements) out.text += "  " + id + "\n";
    manifest["annotations_sha256"] = file_digest(o.annotations);
  }
  for (const auto& t : tables) out.text += "\n" + t.to_markdown();

  if (!o.out.empty()) {
    auto tag = make_tag(manifest);
    std::filesystem::create_directories(o.out);
    write_run_json(o.out, "ingest", tag, out);
    auto normalized = o.out / fmt::format("manifest__{}.jsonl", tag.tag);
    write_file_atomic(normalized, serialize_manifest(records));
    out.files.push_back(normalized);
    append_bundle(out, write_bundle(o.out, "ingest", tables, {tag.sha256}));
  }
  return out;
}

CommandOutput cmd_describe(const ProjectConfig& config, const DescribeOptions& o) {
  CommandOutput out;
  auto records = ingest_manifest(o.manifest);
  const auto& source = config.description_backend(o.backend);
  BackendRegistry registry(config);
  auto& backend = registry.get(source.name);
  backend.check_configuration();

  ordered_json manifest;
  manifest["command"] = "describe";
  manifest["config_sha256"] = config.sha256;
  manifest["manifest_sha256"] = file_digest(o.manifest);
  manifest["classifier"] = o.backend;
  manifest["description_source"] = source.name;
  manifest["video_input"] = source.video_input;
  manifest["seed"] = o.seed;
  auto tag = make_tag(manifest);
  auto dir = o.out.empty() ? std::filesystem::path(".") : o.out;
  std::filesystem::create_directories(dir);
  write_run_json(dir, "describe", tag, out);

  DescriptionCache cache(cache_root(config, o.cache_dir) / "descriptions");
  TimestampFrameSource media;
  Describer describer(backend, source.video_input, cache, media, SendOptions{config.retry, o.seed, real_sleeper()});
  UsageLog usage(dir / fmt::format("describe__{}.usage.jsonl", tag.tag));

  std::vector<std::string> failures(records.size());
  std::vector<char> hit(records.size(), 0);
  parallel_for(records.size(), o.concurrency, [&](std::size_t i) {
    const auto& rec = records[i];
    if (describer.cached(rec)) {
      hit[i] = 1;
      return;
    }
    TokenUsage u;
    try {
      describer.describe(rec, &u);
    } catch (const Error& e) {
      failures[i] = e.what();
    }
    usage.add(CostStage::Describe, source.name, rec.video_id, u);
  });

  std::size_t cached = std::count(hit.begin(), hit.end(), 1);
  std::size_t failed = std::count_if(failures.begin(), failures.end(), [](const auto& f) { return !f.empty(); });
  out.text += fmt::format("description source {}\nvideos {}\ncached {}\ngenerated {}\nfailed {}\n", source.name,
                          records.size(), cached, records.size() - cached - failed, failed);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!failures[i].empty()) out.text += "  " + records[i].video_id + ": " + failures[i] + "\n";
  }
  if (usage.written()) out.files.push_back(usage.path());
  return out;
}

CommandOutput cmd_exemplars(const ProjectConfig& config, const ExemplarsOptions& o) {
  if (config.retrieval_description_source.empty()) {
    throw Error(ErrorCode::ConfigurationError, "retrieval_description_source is not set in the config");
  }
  if (config.exemplar_generator.empty()) {
    throw Error(ErrorCode::ConfigurationError, "exemplar_generator is not set in the config");
  }
  if (o.store.empty()) throw Error(ErrorCode::InvalidArgument, "--store is required");
  CommandOutput out;
  auto records = ingest_manifest(o.manifest);
  BackendRegistry registry(config);
  const auto& source_cfg = config.backend(config.retrieval_description_source);
  auto& source = registry.get(source_cfg.name);
  auto& generator = registry.get(config.exemplar_generator);
  source.check_configuration();
  generator.check_configuration();
  auto embedder = make_embedder(config);

  ordered_json manifest;
  manifest["command"] = "exemplars";
  manifest["config_sha256"] = config.sha256;
  manifest["manifest_sha256"] = file_digest(o.manifest);
  manifest["retrieval_description_source"] = source_cfg.name;
  manifest["exemplar_generator"] = config.exemplar_generator;
  manifest["embedder"] = embedder->id();
  manifest["seed"] = o.seed;
  auto tag = make_tag(manifest);
  auto dir = o.store.parent_path().empty() ? std::filesystem::path(".") : o.store.parent_path();
  std::filesystem::create_directories(dir);
  write_run_json(dir, "exemplars", tag, out);

  auto root = cache_root(config, o.cache_dir);
  DescriptionCache descriptions(root / "descriptions");
  TextCache texts(root / "exemplar-text");
  TimestampFrameSource media;
  SendOptions send_options{config.retry, o.seed, real_sleeper()};
  Describer describer(source, source_cfg.video_input, descriptions, media, send_options);
  FileTranscriptSource transcripts(o.manifest.parent_path());
  IdentityTranslator translator;
  UsageLog usage(dir / fmt::format("exemplars__{}.usage.jsonl", tag.tag));

  std::vector<std::optional<ExemplarEntry>> built(records.size());
  std::vector<std::string> failures(records.size());
  parallel_for(records.size(), o.concurrency, [&](std::size_t i) {
    const auto& rec = records[i];
    try {
      ExemplarEntry e;
      e.video_id = rec.video_id;
      e.label = rec.label;
      e.country = rec.country;
      e.language = config.languages.normalize(rec.default_audio_language);
      TokenUsage du;
      e.description_text = describer.describe(rec, &du);
      usage.add(CostStage::Describe, source.name(), rec.video_id, du);
      e.subtitles_text = fetch_subtitles(rec, transcripts, translator);
      auto opts = send_options;
      opts.jitter_seed = derive_seed(o.seed, "exemplar:" + rec.video_id);
      TokenUsage tu;
      e.thumbnail_description = generate_thumbnail_description(rec.media.thumbnail_uri, generator, &texts, opts, &tu);
      usage.add(CostStage::ThumbDescribe, generator.name(), rec.video_id, tu);
      TokenUsage eu;
      e.explanation = generate_explanation(e.thumbnail_description, rec.label,
                                           truncate_words(e.description_text, kExcerptWordCap),
                                           truncate_words(e.subtitles_text, kExcerptWordCap), generator, &texts,
                                           opts, &eu);
      usage.add(CostStage::Explain, generator.name(), rec.video_id, eu);
      e.vector = embed(e.description_text, *embedder);
      built[i] = std::move(e);
    } catch (const Error& err) {
      if (err.code() == ErrorCode::ConfigurationError) throw;
      failures[i] = err.what();
    }
  });

  ExemplarIndex index(embedder->id(), embedder->dimension());
  std::size_t per_class[2] = {0, 0};
  for (auto& e : built) {
    if (!e) continue;
    ++per_class[e->label == Label::Misleading ? 0 : 1];
    index.add(std::move(*e));
  }
  index.save(o.store);
  out.files.push_back(o.store);
  out.files.push_back(exemplar_meta_path(o.store));
  if (usage.written()) out.files.push_back(usage.path());

  out.text += fmt::format("exemplar store {}\nentries {}\nmisleading {}\nnot_misleading {}\nskipped {}\n",
                          o.store.string(), index.entries().size(), per_class[0], per_class[1],
                          records.size() - index.entries().size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!failures[i].empty()) out.text += "  " + records[i].video_id + ": " + failures[i] + "\n";
  }
  if (per_class[0] == 0 || per_class[1] == 0) {
    out.warnings.push_back("exemplar store lacks one class; dynamic few-shot retrieval will fail");
  }
  return out;
}

CommandOutput cmd_classify(const ProjectConfig& config, const ClassifyOptions& o) {
  CommandOutput out;
  if (o.out.empty()) throw Error(ErrorCode::InvalidArgument, "--out is required");
  auto records = ingest_manifest(o.manifest);

  RunConfig run;
  run.backend_name = o.backend;
  run.strategy = o.strategy;
  run.ablation = o.ablation;
  run.concurrency_limit = o.concurrency;
  run.seed = o.seed;
  run.cache_dir = cache_root(config, o.cache_dir);
  run.pool = o.pool;
  run.allow_few_shot_ablation = o.allow_few_shot_ablation;
  validate_run_config(run);
  if (!o.ablation.is_full() && o.strategy != PromptStrategy::ZeroShot) {
    out.warnings.push_back("ablation outside zero-shot: exemplar cards stay complete while the query is ablated");
  }

  const auto& backend_cfg = config.backend(o.backend);
  BackendRegistry registry(config);
  auto& backend = registry.get(o.backend);
  backend.check_configuration();

  std::optional<ExemplarIndex> index;
  std::unique_ptr<Embedder> embedder;
  std::string store_sha;
  if (o.strategy == PromptStrategy::DynamicFewShot) {
    if (o.exemplars.empty() || !std::filesystem::exists(o.exemplars)) {
      throw Error(ErrorCode::ConfigurationError,
                  "dynamic few-shot needs an exemplar store; build one with `thumbtruth exemplars --manifest "
                  "POOL --store PATH` and pass it with --exemplars PATH");
    }
    index = ExemplarIndex::load(o.exemplars);
    embedder = make_embedder(config);
    if (embedder->id() != index->embedder_id()) {
      throw Error(ErrorCode::ConfigurationError, "exemplar store was built with " + index->embedder_id() +
                                                     " but the config selects " + embedder->id());
    }
    store_sha = file_digest(o.exemplars);
  }

  ordered_json extra;
  extra["config_sha256"] = config.sha256;
  extra["description_source"] = config.description_backend(o.backend).name;
  extra["temperature"] = backend_cfg.temperature ? json(*backend_cfg.temperature) : json();
  extra["max_output_tokens"] = backend_cfg.max_output_tokens ? json(*backend_cfg.max_output_tokens) : json();
  extra["retry"] = {{"max_attempts", config.retry.max_attempts},
                    {"base_delay_ms", config.retry.base_delay_ms},
                    {"max_delay_ms", config.retry.max_delay_ms}};
  auto run_manifest = make_run_manifest(run, backend, file_digest(o.manifest), store_sha, extra);
  auto header = make_run_header(run_manifest, run, backend);

  DescriptionCache descriptions(run.cache_dir / "descriptions");
  TimestampFrameSource media;
  SendOptions send_options{config.retry, o.seed, o.no_sleep ? no_sleep() : real_sleeper()};
  FileTranscriptSource transcripts(o.manifest.parent_path());
  IdentityTranslator translator;
  UsageLog usage(o.out / fmt::format("describe__{}.usage.jsonl", header.run_id));
  auto sink_for = [&usage](std::string name) {
    return [&usage, name](const VideoRecord& r, const TokenUsage& u) {
      usage.add(CostStage::Describe, name, r.video_id, u);
    };
  };

  std::unique_ptr<Describer> describer;
  if (o.ablation.include_description) {
    const auto& dcfg = config.description_backend(o.backend);
    auto& dbackend = registry.get(dcfg.name);
    describer = std::make_unique<Describer>(dbackend, dcfg.video_input, descriptions, media, send_options);
  }
  PipelineEvidence evidence(transcripts, translator, describer.get(),
                            describer ? sink_for(describer->provider_id()) : UsageSink{});

  std::unique_ptr<Describer> retrieval_describer;
  std::unique_ptr<PipelineEvidence> retrieval_evidence;
  if (index) {
    const auto& rcfg = config.retrieval_description_source.empty()
                           ? config.description_backend(o.backend)
                           : config.backend(config.retrieval_description_source);
    auto& rbackend = registry.get(rcfg.name);
    retrieval_describer = std::make_unique<Describer>(rbackend, rcfg.video_input, descriptions, media, send_options);
    retrieval_evidence = std::make_unique<PipelineEvidence>(transcripts, translator, retrieval_describer.get(),
                                                            sink_for(rcfg.name));
  }

  ClassifyDependencies deps{backend, evidence};
  deps.exemplars = index ? &*index : nullptr;
  deps.embedder = embedder.get();
  deps.retrieval_evidence = retrieval_evidence.get();
  deps.languages = &config.languages;
  deps.temperature = backend_cfg.temperature;
  deps.max_output_tokens = backend_cfg.max_output_tokens;
  deps.retry = config.retry;
  deps.sleeper = send_options.sleeper;

  auto batch = classify_batch(records, run, deps, o.out, run_manifest);
  out.files.push_back(batch.results_path);
  if (usage.written()) out.files.push_back(usage.path());
  out.text += fmt::format("results {}\nrun_id {}\nrecords {}\n{}\ncache_hits {}\nclassified {}\n",
                          batch.results_path.string(), header.run_id, batch.results.size(),
                          status_counts(batch.results), batch.cache_hits, batch.classified);
  return out;
}

CommandOutput cmd_ablate(const ProjectConfig& config, ClassifyOptions o) {
  CommandOutput out;
  o.strategy = PromptStrategy::ZeroShot;
  o.allow_few_shot_ablation = false;
  auto records = ingest_manifest(o.manifest);
  auto truth = truth_from(records);
  std::vector<std::pair<AblationMask, MetricReport>> reports;
  std::vector<std::string> digests;
  for (auto mask : {AblationMask::thumbnail_only(), AblationMask::no_description(), AblationMask::no_subtitles(),
                    AblationMask::full()}) {
    o.ablation = mask;
    auto run = cmd_classify(config, o);
    out.text += fmt::format("[{}]\n{}", ablation_display(mask), run.text);
    out.files.insert(out.files.end(), run.files.begin(), run.files.end());
    auto file = load_results_file(run.files.front());
    reports.emplace_back(mask, summarize(confusion(file.results, truth)));
    digests.push_back(file.header.run_manifest_sha256);
  }
  auto table = render_ablation_table(reports);
  table.title = fmt::format("Ablation (zero-shot, {})", o.backend);
  auto bundle = write_bundle(o.out / "reports", "ablation", {table}, digests);
  append_bundle(out, bundle);
  out.text += "\n" + table.to_markdown();
  return out;
}

CommandOutput cmd_evaluate(const ProjectConfig& config, const EvaluateOptions& o) {
  CommandOutput out;
  auto files = require_results(o.results);
  auto records = ingest_manifest(o.manifest);
  auto truth = truth_from(records);
  auto summary = run_summary(files, records, o.mcnemar);

  std::vector<Table> tables{render_run_table(summary)};
  if (o.group_by == GroupKey::Country) {
    tables.push_back(render_country_table(summary));
  } else if (o.group_by) {
    for (const auto& f : files) {
      auto balanced = balanced_group_report(f.results, truth, records, *o.group_by, o.min_support, o.seed,
                                            config.languages);
      tables.push_back(render_balanced_table(balanced, *o.group_by, run_label(f.header)));
    }
  }
  if (o.mcnemar) {
    if (files.size() < 2) {
      out.warnings.push_back("McNemar needs at least two runs");
    } else {
      tables.push_back(render_mcnemar_table(summary));
      tables.push_back(render_mcnemar_matrix(summary));
    }
  }
  for (const auto& f : files) {
    auto parse_failed = std::count_if(f.results.begin(), f.results.end(),
                                      [](const auto& x) { return x.status == ResultStatus::ParseFailed; });
    if (parse_failed) {
      out.warnings.push_back(fmt::format("{}: {} responses without a categorization were excluded",
                                         run_label(f.header), parse_failed));
    }
  }
  auto bundle = write_bundle(reports_dir(o.results, o.out), "evaluate", tables, run_digests(files));
  append_bundle(out, bundle);
  for (const auto& t : tables) out.text += t.to_markdown() + "\n";
  return out;
}

CommandOutput cmd_cost(const ProjectConfig& config, const CostOptions& o) {
  CommandOutput out;
  auto prices_path = o.prices.empty() ? config.price_table : o.prices;
  if (prices_path.empty()) throw Error(ErrorCode::ConfigurationError, "no price table; pass --prices PATH");
  auto table = PriceTable::load(prices_path);
  auto files = require_results(o.results);

  CostLedger ledger;
  for (const auto& f : files) {
    for (const auto& r : f.results) ledger.record(CostStage::Classify, r.backend, r.video_id, r.usage, table);
  }
  std::vector<std::filesystem::path> logs;
  for (const auto& dir : {o.results, o.usage}) {
    if (dir.empty()) continue;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      auto name = e.path().filename().string();
      if (e.is_regular_file() && name.ends_with(".usage.jsonl")) logs.push_back(std::filesystem::canonical(e.path()));
    }
  }
  std::sort(logs.begin(), logs.end());
  logs.erase(std::unique(logs.begin(), logs.end()), logs.end());
  std::vector<std::string> digests = run_digests(files);
  for (const auto& log : logs) {
    digests.push_back(file_digest(log));
    std::size_t line_no = 0;
    for (const auto& line : split_lines(read_file(log))) {
      ++line_no;
      if (trim(line).empty()) continue;
      try {
        auto j = json::parse(line);
        auto stage = parse_stage(j.at("stage").get<std::string>());
        if (!stage) throw SchemaError(line_no, "stage", "unknown stage");
        ledger.record(*stage, j.at("backend").get<std::string>(), j.at("video_id").get<std::string>(),
                      usage_from_json(j.at("usage")), table);
      } catch (const json::exception& e) {
        throw SchemaError(line_no, log.filename().string(), e.what());
      }
    }
  }
  digests.push_back(file_digest(prices_path));

  auto report = cost_report(ledger);
  auto t = render_cost_table(report);
  t.notes.push_back(fmt::format("price table {} effective {}", table.version, table.effective_date));
  auto dir = reports_dir(o.results, o.out);
  auto bundle = write_bundle(dir, "cost", {t}, digests);
  append_bundle(out, bundle);
  auto ledger_path = dir / fmt::format("cost-ledger__{}.csv", bundle_digest(digests));
  write_file_atomic(ledger_path, ledger.to_csv());
  out.files.push_back(ledger_path);
  out.text += t.to_markdown();
  return out;
}

CommandOutput cmd_report(const ProjectConfig& config, const ReportOptions& o) {
  CommandOutput out;
  auto files = require_results(o.results);
  auto records = ingest_manifest(o.manifest);
  auto truth = truth_from(records);
  auto summary = run_summary(files, records, files.size() > 1);

  std::vector<Table> tables{render_run_table(summary)};
  std::map<GridKey, MetricReport> grid;
  std::map<std::string, std::vector<std::pair<AblationMask, MetricReport>>> ablations;
  for (const auto& r : summary.runs) {
    if (r.header.ablation.is_full()) {
      if (!grid.emplace(GridKey{r.header.backend, r.header.strategy}, r.overall).second) {
        out.warnings.push_back("several runs for " + run_label(r.header) + "; the grid shows the first by file name");
      }
    }
    if (r.header.strategy == PromptStrategy::ZeroShot) ablations[r.header.backend].emplace_back(r.header.ablation, r.overall);
  }
  if (!grid.empty()) {
    for (auto metric : {"accuracy", "precision", "recall", "specificity", "f1"}) tables.push_back(render_grid(grid, metric));
  }
  for (const auto& [backend, reports] : ablations) {
    if (reports.size() < 2) continue;
    auto t = render_ablation_table(reports);
    t.title = fmt::format("Ablation (zero-shot, {})", backend);
    tables.push_back(std::move(t));
  }
  tables.push_back(render_country_table(summary));
  for (const auto& f : files) {
    for (auto key : {GroupKey::Category, GroupKey::Language}) {
      auto balanced = balanced_group_report(f.results, truth, records, key, o.min_support, o.seed, config.languages);
      tables.push_back(render_balanced_table(balanced, key, run_label(f.header)));
    }
  }
  if (files.size() > 1) {
    tables.push_back(render_mcnemar_table(summary));
    tables.push_back(render_mcnemar_matrix(summary));
  }
  auto bundle = write_bundle(reports_dir(o.results, o.out), "report", tables, run_digests(files));
  append_bundle(out, bundle);
  out.text += "report " + bundle.markdown_path.string() + "\n";
  return out;
}

namespace {

std::string opt_string(const json& j, const char* key, std::string fallback = {}) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_string()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a string");
  return it->get<std::string>();
}

template <typename T>
T opt_number(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_number()) throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a number");
  if (it->is_number_float() || (std::is_unsigned_v<T> && it->get<double>() < 0)) {
    throw Error(ErrorCode::InvalidArgument, std::string(key) + " must be a non-negative integer");
  }
  return it->get<T>();
}

bool opt_bool(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_boolean() && it->get<bool>();
}

std::string required(const json& j, const char* key) {
  auto v = opt_string(j, key);
  if (v.empty()) throw Error(ErrorCode::InvalidArgument, std::string("--") + key + " is required");
  return v;
}

ClassifyOptions classify_options(const json& j, bool ablate) {
  ClassifyOptions o;
  o.manifest = required(j, "manifest");
  o.backend = required(j, "backend");
  o.out = required(j, "out");
  if (!ablate) {
    auto s = opt_string(j, "strategy", "zero-shot");
    auto strategy = parse_strategy(s);
    if (!strategy) throw Error(ErrorCode::InvalidArgument, "unknown strategy " + s);
    o.strategy = *strategy;
    auto a = opt_string(j, "ablation", "full");
    auto mask = parse_ablation(a);
    if (!mask) throw Error(ErrorCode::InvalidArgument, "unknown ablation " + a);
    o.ablation = *mask;
  }
  o.concurrency = opt_number<std::size_t>(j, "concurrency", 4);
  if (o.concurrency == 0) throw Error(ErrorCode::InvalidArgument, "--concurrency must be at least 1");
  o.seed = opt_number<std::uint64_t>(j, "seed", 0);
  o.cache_dir = opt_string(j, "cache_dir");
  o.exemplars = opt_string(j, "exemplars");
  auto pool = opt_string(j, "pool", "global");
  auto mode = parse_pool_mode(pool);
  if (!mode) throw Error(ErrorCode::InvalidArgument, "unknown pool " + pool);
  o.pool = *mode;
  o.allow_few_shot_ablation = opt_bool(j, "allow_few_shot_ablation");
  o.no_sleep = opt_bool(j, "no_sleep");
  return o;
}

}  // namespace

CommandOutput run_command(const ProjectConfig& config, std::string_view sub, const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "options must be a JSON object");
  if (sub == "ingest") {
    return cmd_ingest({required(j, "manifest"), opt_string(j, "annotations"), opt_string(j, "out")});
  }
  if (sub == "describe") {
    DescribeOptions o;
    o.manifest = required(j, "manifest");
    o.backend = required(j, "backend");
    o.concurrency = std::max<std::size_t>(1, opt_number<std::size_t>(j, "concurrency", 4));
    o.seed = opt_number<std::uint64_t>(j, "seed", 0);
    o.out = opt_string(j, "out");
    o.cache_dir = opt_string(j, "cache_dir");
    return cmd_describe(config, o);
  }
  if (sub == "exemplars") {
    ExemplarsOptions o;
    o.manifest = required(j, "manifest");
    o.store = required(j, "store");
    o.concurrency = std::max<std::size_t>(1, opt_number<std::size_t>(j, "concurrency", 4));
    o.seed = opt_number<std::uint64_t>(j, "seed", 0);
    o.cache_dir = opt_string(j, "cache_dir");
    return cmd_exemplars(config, o);
  }
  if (sub == "classify") return cmd_classify(config, classify_options(j, false));
  if (sub == "ablate") return cmd_ablate(config, classify_options(j, true));
  if (sub == "evaluate") {
    EvaluateOptions o;
    o.results = required(j, "results");
    o.manifest = required(j, "manifest");
    auto g = opt_string(j, "group_by");
    if (!g.empty()) {
      o.group_by = parse_group_key(g);
      if (!o.group_by) throw Error(ErrorCode::InvalidArgument, "unknown --group-by " + g);
    }
    o.mcnemar = opt_bool(j, "mcnemar");
    o.min_support = opt_number<std::uint64_t>(j, "min_support", 10);
    o.seed = opt_number<std::uint64_t>(j, "seed", 0);
    o.out = opt_string(j, "out");
    return cmd_evaluate(config, o);
  }
  if (sub == "cost") {
    return cmd_cost(config, {required(j, "results"), opt_string(j, "prices"), opt_string(j, "usage"), opt_string(j, "out")});
  }
  if (sub == "report") {
    ReportOptions o;
    o.results = required(j, "results");
    o.manifest = required(j, "manifest");
    o.min_support = opt_number<std::uint64_t>(j, "min_support", 10);
    o.seed = opt_number<std::uint64_t>(j, "seed", 0);
    o.out = opt_string(j, "out");
    return cmd_report(config, o);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown subcommand " + std::string(sub));
}

}  // namespace thumbtruth
