#include "thumbtruth/thumbtruth.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "app.hpp"
#include "error.hpp"
#include "evidence.hpp"
#include "exemplars.hpp"
#include "metrics.hpp"

using thumbtruth::Error;
using thumbtruth::ErrorCode;

struct tt_manifest {
  std::vector<thumbtruth::VideoRecord> records;
};

struct tt_context {
  thumbtruth::ProjectConfig config;
};

namespace {

thread_local std::string last_error;
thread_local std::string last_code = "None";

tt_status status_for(ErrorCode code) {
  if (code == ErrorCode::InvalidArgument) return TT_ERR_INVALID_ARGUMENT;
  switch (thumbtruth::exit_code_for(code)) {
    case 2: return TT_ERR_SCHEMA;
    case 3: return TT_ERR_CONFIG;
    case 4: return TT_ERR_TRUTH;
    default: break;
  }
  switch (code) {
    case ErrorCode::FileNotFound: return TT_ERR_NOT_FOUND;
    case ErrorCode::EmptyInput:
    case ErrorCode::EmptyCounts: return TT_ERR_EMPTY_INPUT;
    case ErrorCode::DimensionMismatch: return TT_ERR_DIMENSION;
    case ErrorCode::NegativeDuration:
    case ErrorCode::NonPositiveDuration: return TT_ERR_INVALID_ARGUMENT;
    case ErrorCode::ProviderBlocked:
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::UnmatchedRequest: return TT_ERR_PROVIDER;
    default: return TT_ERR_INTERNAL;
  }
}

template <typename F>
tt_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    last_code = "None";
    return TT_OK;
  } catch (const Error& e) {
    last_error = e.what();
    last_code = std::string(thumbtruth::to_string(e.code()));
    return status_for(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  last_code = "Internal";
  return TT_ERR_INTERNAL;
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* tt_last_error(void) { return last_error.c_str(); }
const char* tt_last_error_code(void) { return last_code.c_str(); }
const char* tt_version(void) { return THUMBTRUTH_VERSION; }

int tt_exit_code(tt_status status) {
  switch (status) {
    case TT_OK: return 0;
    case TT_ERR_SCHEMA: return 2;
    case TT_ERR_CONFIG:
    case TT_ERR_INVALID_ARGUMENT: return 3;
    case TT_ERR_TRUTH: return 4;
    default: return 1;
  }
}

void tt_string_free(char* s) { std::free(s); }

tt_status tt_manifest_load(const char* path, tt_manifest** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = nullptr;
    auto m = std::make_unique<tt_manifest>();
    m->records = thumbtruth::ingest_manifest(path);
    *out = m.release();
  });
}

void tt_manifest_free(tt_manifest* manifest) { delete manifest; }

size_t tt_manifest_size(const tt_manifest* manifest) { return manifest ? manifest->records.size() : 0; }

tt_status tt_manifest_record_json(const tt_manifest* manifest, size_t index, char** out) {
  return guarded([&] {
    need(manifest, "manifest");
    need(out, "out");
    if (index >= manifest->records.size()) throw Error(ErrorCode::InvalidArgument, "record index out of range");
    *out = dup(thumbtruth::record_to_json(manifest->records[index]).dump());
  });
}

tt_status tt_context_open(const char* config_path, tt_context** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto ctx = std::make_unique<tt_context>();
    if (config_path && *config_path) {
      ctx->config = thumbtruth::ProjectConfig::load(config_path);
    } else {
      ctx->config = thumbtruth::ProjectConfig::from_json(nlohmann::json::object(), ".");
    }
    *out = ctx.release();
  });
}

void tt_context_free(tt_context* ctx) { delete ctx; }

tt_status tt_run(tt_context* ctx, const char* subcommand, const char* options_json, char** report_out) {
  return guarded([&] {
    need(ctx, "ctx");
    need(subcommand, "subcommand");
    need(report_out, "report_out");
    *report_out = nullptr;
    nlohmann::json options = nlohmann::json::object();
    if (options_json && *options_json) {
      try {
        options = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("options: ") + e.what());
      }
    }
    auto result = thumbtruth::run_command(ctx->config, subcommand, options);
    nlohmann::ordered_json j;
    j["text"] = result.text;
    j["warnings"] = result.warnings;
    auto files = nlohmann::json::array();
    for (const auto& f : result.files) files.push_back(f.string());
    j["files"] = files;
    *report_out = dup(j.dump());
  });
}

tt_status tt_thumbnail_url(const char* video_id, char** out) {
  return guarded([&] {
    need(video_id, "video_id");
    need(out, "out");
    *out = dup(thumbtruth::thumbnail_url(video_id));
  });
}

tt_status tt_truncate_words(const char* text, size_t cap, char** out) {
  return guarded([&] {
    need(out, "out");
    *out = dup(thumbtruth::truncate_words(text ? text : "", cap));
  });
}

tt_status tt_normalize_language(const tt_context* ctx, const char* code, char** out) {
  return guarded([&] {
    need(out, "out");
    std::string c = code ? code : "";
    *out = dup(ctx ? ctx->config.languages.normalize(c) : thumbtruth::normalize_language(c));
  });
}

tt_status tt_clip_duration(double duration_seconds, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = thumbtruth::clip_duration(duration_seconds);
  });
}

tt_status tt_frame_timestamps(double duration_seconds, double* out) {
  return guarded([&] {
    need(out, "out");
    auto ts = thumbtruth::frame_timestamps(duration_seconds);
    std::copy(ts.begin(), ts.end(), out);
  });
}

tt_status tt_cosine_similarity(const double* a, const double* b, size_t dimension, double* out) {
  return guarded([&] {
    need(out, "out");
    if (dimension) {
      need(a, "a");
      need(b, "b");
    }
    thumbtruth::EmbeddingVector va{std::vector<double>(a, a + dimension)};
    thumbtruth::EmbeddingVector vb{std::vector<double>(b, b + dimension)};
    *out = thumbtruth::cosine_similarity(va, vb);
  });
}

tt_status tt_mcnemar(uint64_t b, uint64_t c, tt_mcnemar_result* out) {
  return guarded([&] {
    need(out, "out");
    auto r = thumbtruth::mcnemar_from_counts(b, c);
    out->statistic = r.statistic;
    out->p_value = r.p_value;
    out->method = r.method == thumbtruth::McNemarMethod::ChiSquaredCC ? TT_MCNEMAR_CHI_SQUARED_CC
                                                                       : TT_MCNEMAR_EXACT_BINOMIAL;
    out->no_discordant_pairs = r.no_discordant_pairs ? 1 : 0;
  });
}

tt_status tt_rates_from_counts(uint64_t tp, uint64_t fp, uint64_t tn, uint64_t fn, tt_rates* out) {
  return guarded([&] {
    need(out, "out");
    thumbtruth::ConfusionCounts counts;
    counts.tp = tp;
    counts.fp = fp;
    counts.tn = tn;
    counts.fn = fn;
    auto m = thumbtruth::rates(counts);
    auto put = [](const thumbtruth::Rate& r, double& v, int& defined) {
      v = r.value_or(0.0);
      defined = r ? 1 : 0;
    };
    put(m.accuracy, out->accuracy, out->accuracy_defined);
    put(m.precision, out->precision, out->precision_defined);
    put(m.recall, out->recall, out->recall_defined);
    put(m.specificity, out->specificity, out->specificity_defined);
    put(m.f1, out->f1, out->f1_defined);
  });
}

tt_status tt_cohens_kappa(const int* annotator_a, const int* annotator_b, size_t n, double* out) {
  return guarded([&] {
    need(out, "out");
    if (n) {
      need(annotator_a, "annotator_a");
      need(annotator_b, "annotator_b");
    }
    std::vector<thumbtruth::AnnotationPair> pairs(n);
    auto label = [](int v) { return v ? thumbtruth::Label::Misleading : thumbtruth::Label::NotMisleading; };
    for (size_t i = 0; i < n; ++i) {
      pairs[i].video_id = std::to_string(i);
      pairs[i].annotator_a = label(annotator_a[i]);
      pairs[i].annotator_b = label(annotator_b[i]);
    }
    *out = thumbtruth::cohens_kappa(pairs);
  });
}

tt_status tt_parse_verdict(const char* response_text, int* verdict, char** explanation) {
  return guarded([&] {
    need(verdict, "verdict");
    auto parsed = thumbtruth::parse_verdict(response_text ? response_text : "");
    *verdict = parsed.verdict == thumbtruth::Verdict::Misleading      ? 1
               : parsed.verdict == thumbtruth::Verdict::NotMisleading ? 0
                                                                      : -1;
    if (explanation) *explanation = dup(parsed.explanation);
  });
}

}  // extern "C"
