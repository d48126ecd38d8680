#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "costing.hpp"
#include "metrics.hpp"

namespace thumbtruth {

struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;  // printed under the markdown table only

  std::string to_markdown() const;
  std::string to_csv() const;
};

std::string format_rate(const Rate& r);     // 4 decimals or "n/a"
std::string format_percent(const Rate& r);  // 93.8, or "n/a"
// 4 decimals, switching to scientific notation below 1e-4 so tiny p-values
// stay readable.
std::string format_p_value(double p);

using GridKey = std::pair<std::string, PromptStrategy>;  // model, strategy

// Rows are models, columns are the strategies that appear in the map.
// Throws UnknownMetric, EmptyInput.
Table render_grid(const std::map<GridKey, MetricReport>& reports, std::string_view metric);

// Columns ABL-NDS, ABL-ND, ABL-NS, Full; rows Accuracy, Recall, Precision,
// Specificity. Missing masks render "n/a".
Table render_ablation_table(const std::vector<std::pair<AblationMask, MetricReport>>& reports);

Table render_run_table(const RunSummary& summary);
Table render_country_table(const RunSummary& summary);
Table render_mcnemar_table(const RunSummary& summary);
// p-values laid out as a runs x runs matrix.
Table render_mcnemar_matrix(const RunSummary& summary);

// Category: accuracy and F1 at 4 decimals. Language: accuracy in percent
// with correct/total counts. Exclusions become notes.
Table render_balanced_table(const BalancedReport& report, GroupKey key, std::string_view run_label);

Table render_cost_table(const CostReport& report);

std::string run_label(const RunHeader& header);  // backend/strategy/ablation

struct ReportBundle {
  std::filesystem::path markdown_path;
  std::vector<std::filesystem::path> csv_paths;
  std::vector<std::string> provenance;  // run-manifest digests
};

// 12 hex characters identifying a set of run-manifest digests.
std::string bundle_digest(std::vector<std::string> manifest_digests);

// Writes "{name}__{digest}.md" with every table, plus one
// "{name}-{table title slug}__{digest}.csv" per table.
ReportBundle write_bundle(const std::filesystem::path& dir, std::string_view name,
                          const std::vector<Table>& tables, std::vector<std::string> manifest_digests);

}  // namespace thumbtruth
