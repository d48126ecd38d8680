#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

TruthMap truth_from(const std::vector<VideoRecord>& records) {
  TruthMap truth;
  truth.reserve(records.size());
  for (const auto& r : records) truth.emplace(r.video_id, r.label);
  return truth;
}

ConfusionCounts confusion(const std::vector<ClassificationResult>& results, const TruthMap& truth) {
  ConfusionCounts c;
  for (const auto& r : results) {
    if (r.status != ResultStatus::Ok) {
      ++c.excluded;
      continue;
    }
    auto it = truth.find(r.video_id);
    if (it == truth.end()) throw Error(ErrorCode::MissingTruth, r.video_id);
    bool predicted_positive = r.verdict == Verdict::Misleading;
    bool actual_positive = it->second == Label::Misleading;
    if (predicted_positive && actual_positive) ++c.tp;
    else if (predicted_positive) ++c.fp;
    else if (actual_positive) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

Rate ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricReport summarize(const ConfusionCounts& c) {
  MetricReport m;
  m.support = c.total();
  m.correct = c.tp + c.tn;
  m.excluded = c.excluded;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

MetricReport rates(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw Error(ErrorCode::EmptyCounts, "no Ok results to score");
  return summarize(counts);
}

Rate metric_by_name(const MetricReport& report, std::string_view name) {
  auto n = to_lower(name);
  if (n == "accuracy") return report.accuracy;
  if (n == "precision") return report.precision;
  if (n == "recall") return report.recall;
  if (n == "specificity") return report.specificity;
  if (n == "f1") return report.f1;
  throw Error(ErrorCode::UnknownMetric, std::string(name));
}

BalancedReport balanced_group_report(const std::vector<ClassificationResult>& results,
                                     const TruthMap& truth, const std::vector<VideoRecord>& records,
                                     GroupKey key, std::uint64_t min_support, std::uint64_t seed,
                                     const LanguageTable& languages) {
  if (min_support < 1) throw Error(ErrorCode::InvalidArgument, "min_support must be >= 1");
  std::unordered_map<std::string, const ClassificationResult*> by_id;
  for (const auto& r : results) by_id[r.video_id] = &r;

  std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> pools;
  for (const auto& rec : records) {
    if (!by_id.count(rec.video_id)) continue;
    auto& pool = pools[group_name(rec, key, languages)];
    (rec.label == Label::Misleading ? pool.first : pool.second).push_back(rec.video_id);
  }

  BalancedReport out;
  for (auto& [group, pool] : pools) {
    auto& [mis, honest] = pool;
    std::uint64_t n = std::min(mis.size(), honest.size());
    std::uint64_t balanced = 2 * n;
    bool drop = key == GroupKey::Category ? balanced <= min_support : balanced < min_support;
    if (n == 0 || drop) {
      GroupExclusion ex{group, mis.size(), honest.size(), balanced, ""};
      if (n == 0) {
        ex.reason = mis.empty() ? "no misleading videos" : "no non-misleading videos";
      } else {
        ex.reason = "balanced total " + std::to_string(balanced) +
                    (key == GroupKey::Category ? " <= " : " < ") + std::to_string(min_support);
      }
      out.exclusions.push_back(std::move(ex));
      continue;
    }
    // Sort first so the draw depends only on the id sets, not manifest order.
    std::sort(mis.begin(), mis.end());
    std::sort(honest.begin(), honest.end());
    std::mt19937_64 rng(derive_seed(seed, "balance:" + group));
    stable_shuffle(mis, rng);
    stable_shuffle(honest, rng);

    GroupReport gr;
    gr.per_class = n;
    std::vector<ClassificationResult> sampled;
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto* id : {&mis[i], &honest[i]}) {
        gr.sampled_ids.push_back(*id);
        sampled.push_back(*by_id.at(*id));
      }
    }
    std::sort(gr.sampled_ids.begin(), gr.sampled_ids.end());
    gr.report = summarize(confusion(sampled, truth));
    out.groups.emplace(group, std::move(gr));
  }
  return out;
}

std::map<std::string, MetricReport> group_report(const std::vector<ClassificationResult>& results,
                                                 const TruthMap& truth,
                                                 const std::vector<VideoRecord>& records, GroupKey key,
                                                 const LanguageTable& languages) {
  std::unordered_map<std::string, std::string> group_of;
  for (const auto& rec : records) group_of[rec.video_id] = group_name(rec, key, languages);
  std::map<std::string, std::vector<ClassificationResult>> split;
  for (const auto& r : results) {
    auto it = group_of.find(r.video_id);
    if (it == group_of.end()) throw Error(ErrorCode::MissingTruth, r.video_id);
    split[it->second].push_back(r);
  }
  std::map<std::string, MetricReport> out;
  for (const auto& [g, rs] : split) out.emplace(g, summarize(confusion(rs, truth)));
  return out;
}

double chi_squared_1df_upper_tail(double x) {
  if (x <= 0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

double exact_binomial_two_sided(std::uint64_t b, std::uint64_t c) {
  const std::uint64_t n = b + c;
  if (n == 0) return 1.0;
  const std::uint64_t k = std::min(b, c);
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
  double tail = 0.0;
  for (std::uint64_t i = 0; i <= k; ++i) {
    double log_term = log_n_fact - std::lgamma(static_cast<double>(i) + 1.0) -
                      std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n;
    tail += std::exp(log_term);
  }
  return std::min(1.0, 2.0 * tail);
}

McNemarResult mcnemar_from_counts(std::uint64_t b, std::uint64_t c) {
  McNemarResult r;
  r.a_correct_b_wrong = b;
  r.a_wrong_b_correct = c;
  const std::uint64_t n = b + c;
  if (n == 0) {
    r.no_discordant_pairs = true;
    r.method = McNemarMethod::ExactBinomial;
    r.p_value = 1.0;
    return r;
  }
  if (n >= kMcNemarExactBelow) {
    double diff = std::fabs(static_cast<double>(b) - static_cast<double>(c)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(n);
    r.p_value = chi_squared_1df_upper_tail(r.statistic);
    r.method = McNemarMethod::ChiSquaredCC;
  } else {
    r.statistic = static_cast<double>(std::min(b, c));
    r.p_value = exact_binomial_two_sided(b, c);
    r.method = McNemarMethod::ExactBinomial;
  }
  return r;
}

McNemarResult mcnemar(const std::vector<ClassificationResult>& results_a,
                      const std::vector<ClassificationResult>& results_b, const TruthMap& truth) {
  auto correct = [&](const ClassificationResult& r) {
    auto it = truth.find(r.video_id);
    if (it == truth.end()) throw Error(ErrorCode::MissingTruth, r.video_id);
    return (r.verdict == Verdict::Misleading) == (it->second == Label::Misleading);
  };
  std::unordered_map<std::string, const ClassificationResult*> b_ok;
  for (const auto& r : results_b) {
    if (r.status == ResultStatus::Ok) b_ok[r.video_id] = &r;
  }
  std::uint64_t b = 0, c = 0, paired = 0;
  for (const auto& ra : results_a) {
    if (ra.status != ResultStatus::Ok) continue;
    auto it = b_ok.find(ra.video_id);
    if (it == b_ok.end()) continue;
    ++paired;
    bool a_ok = correct(ra);
    bool b_correct = correct(*it->second);
    if (a_ok && !b_correct) ++b;
    if (!a_ok && b_correct) ++c;
  }
  auto r = mcnemar_from_counts(b, c);
  r.paired = paired;
  return r;
}

RunSummary run_summary(const std::vector<ResultsFile>& files, const std::vector<VideoRecord>& records,
                       bool with_mcnemar) {
  auto truth = truth_from(records);
  RunSummary summary;
  for (const auto& f : files) {
    for (const auto& r : f.results) {
      if (!truth.count(r.video_id)) {
        throw Error(ErrorCode::InconsistentTruth,
                    f.path.filename().string() + " references " + r.video_id + ", absent from the manifest");
      }
    }
    RunReport rr;
    rr.header = f.header;
    rr.path = f.path;
    rr.overall = summarize(confusion(f.results, truth));
    rr.per_country = group_report(f.results, truth, records, GroupKey::Country);
    summary.runs.push_back(std::move(rr));
  }
  if (with_mcnemar) {
    for (std::size_t a = 0; a < files.size(); ++a) {
      for (std::size_t b = 0; b < files.size(); ++b) {
        if (a == b) continue;
        summary.mcnemar.push_back({a, b, mcnemar(files[a].results, files[b].results, truth)});
      }
    }
  }
  return summary;
}

}  // namespace thumbtruth
