#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "classify.hpp"
#include "corpus.hpp"

namespace thumbtruth {

using TruthMap = std::unordered_map<std::string, Label>;
TruthMap truth_from(const std::vector<VideoRecord>& records);

// Misleading is the positive class. `excluded` counts non-Ok results.
struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t excluded = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Undefined (0/0) rates are empty, never 0.
using Rate = std::optional<double>;

struct MetricReport {
  Rate accuracy, precision, recall, specificity, f1;
  std::uint64_t support = 0;
  std::uint64_t correct = 0;  // tp + tn
  std::uint64_t excluded = 0;
};

ConfusionCounts confusion(const std::vector<ClassificationResult>& results, const TruthMap& truth);

// Throws EmptyCounts when total == 0.
MetricReport rates(const ConfusionCounts& counts);
// Like rates(), but an empty count set yields an all-undefined report.
MetricReport summarize(const ConfusionCounts& counts);

Rate metric_by_name(const MetricReport& report, std::string_view name);  // accuracy, precision, ...

struct GroupExclusion {
  std::string group;
  std::uint64_t misleading = 0;
  std::uint64_t not_misleading = 0;
  std::uint64_t balanced_total = 0;
  std::string reason;
};

struct GroupReport {
  MetricReport report;
  std::uint64_t per_class = 0;
  std::vector<std::string> sampled_ids;  // sorted
};

struct BalancedReport {
  std::map<std::string, GroupReport> groups;
  std::vector<GroupExclusion> exclusions;
};

// Per group, n = min(#Misleading, #NotMisleading) records of each class are
// drawn without replacement from the records that have a result in this run.
// Category groups are dropped when 2n <= min_support, other keys when
// 2n < min_support. Metrics use the sampled, Ok-status subset.
BalancedReport balanced_group_report(const std::vector<ClassificationResult>& results,
                                     const TruthMap& truth, const std::vector<VideoRecord>& records,
                                     GroupKey key, std::uint64_t min_support, std::uint64_t seed,
                                     const LanguageTable& languages = LanguageTable());

// Plain (unbalanced) per-group confusion, e.g. per-country tables.
std::map<std::string, MetricReport> group_report(const std::vector<ClassificationResult>& results,
                                                 const TruthMap& truth,
                                                 const std::vector<VideoRecord>& records, GroupKey key,
                                                 const LanguageTable& languages = LanguageTable());

enum class McNemarMethod { ChiSquaredCC, ExactBinomial };

struct McNemarResult {
  std::uint64_t a_correct_b_wrong = 0;  // b
  std::uint64_t a_wrong_b_correct = 0;  // c
  std::uint64_t paired = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  McNemarMethod method = McNemarMethod::ExactBinomial;
  bool no_discordant_pairs = false;
};

inline constexpr std::uint64_t kMcNemarExactBelow = 25;

// Upper tail of chi-squared with one degree of freedom: erfc(sqrt(x/2)).
double chi_squared_1df_upper_tail(double x);
// Two-sided exact binomial test on min(b, c) with p = 1/2, capped at 1.
double exact_binomial_two_sided(std::uint64_t b, std::uint64_t c);

McNemarResult mcnemar_from_counts(std::uint64_t b, std::uint64_t c);
// Pairs only videos Ok in both runs.
McNemarResult mcnemar(const std::vector<ClassificationResult>& results_a,
                      const std::vector<ClassificationResult>& results_b, const TruthMap& truth);

struct RunReport {
  RunHeader header;
  std::filesystem::path path;
  MetricReport overall;
  std::map<std::string, MetricReport> per_country;
};

struct PairwiseMcNemar {
  std::size_t run_a = 0;
  std::size_t run_b = 0;
  McNemarResult result;
};

struct RunSummary {
  std::vector<RunReport> runs;
  std::vector<PairwiseMcNemar> mcnemar;  // every ordered pair a != b
};

// Throws InconsistentTruth when a results file names a video the manifest
// does not contain.
RunSummary run_summary(const std::vector<ResultsFile>& files, const std::vector<VideoRecord>& records,
                       bool with_mcnemar = true);

}  // namespace thumbtruth
