#include "reporting.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <fmt/format.h>

#include "error.hpp"
#include "util.hpp"

namespace thumbtruth {

namespace {

std::string md_cell(std::string_view s) {
  std::string out;
  for (char ch : s) {
    if (ch == '|') out += "\\|";
    else if (ch == '\n') out += ' ';
    else out += ch;
  }
  return out;
}

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string md_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& c : cells) out += " " + md_cell(c) + " |";
  return out + "\n";
}

std::string csv_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += csv_cell(cells[i]);
  }
  return out + "\n";
}

std::string count(std::uint64_t n) { return std::to_string(n); }

std::string slugify(std::string_view title) {
  std::string out;
  for (char ch : title) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!out.empty() && out.back() != '-') {
      out += '-';
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

}  // namespace

std::string Table::to_markdown() const {
  std::string out;
  if (!title.empty()) out += "### " + title + "\n\n";
  out += md_row(header);
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) out += md_row(r);
  if (!notes.empty()) {
    out += "\n";
    for (const auto& n : notes) out += "- " + n + "\n";
  }
  return out;
}

std::string Table::to_csv() const {
  std::string out = csv_row(header);
  for (const auto& r : rows) out += csv_row(r);
  return out;
}

std::string format_rate(const Rate& r) { return r ? fmt::format("{:.4f}", *r) : "n/a"; }

std::string format_percent(const Rate& r) { return r ? fmt::format("{:.1f}", *r * 100.0) : "n/a"; }

std::string format_p_value(double p) {
  if (p != 0.0 && p < 1e-4) return fmt::format("{:.3e}", p);
  return fmt::format("{:.4f}", p);
}

Table render_grid(const std::map<GridKey, MetricReport>& reports, std::string_view metric) {
  metric_by_name(MetricReport{}, metric);  // validates the name
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports to render");
  std::vector<std::string> models;
  std::set<PromptStrategy> strategies;
  for (const auto& [key, _] : reports) {
    if (models.empty() || models.back() != key.first) models.push_back(key.first);
    strategies.insert(key.second);
  }
  Table t;
  t.title = fmt::format("{} by model and prompt", metric);
  t.header.push_back("Model");
  for (auto s : strategies) t.header.emplace_back(strategy_display(s));
  for (const auto& m : models) {
    std::vector<std::string> row{m};
    for (auto s : strategies) {
      auto it = reports.find({m, s});
      row.push_back(it == reports.end() ? "n/a" : format_rate(metric_by_name(it->second, metric)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table render_ablation_table(const std::vector<std::pair<AblationMask, MetricReport>>& reports) {
  static constexpr AblationMask kColumns[] = {AblationMask::thumbnail_only(), AblationMask::no_description(),
                                              AblationMask::no_subtitles(), AblationMask::full()};
  static constexpr std::pair<const char*, const char*> kRows[] = {
      {"Accuracy", "accuracy"}, {"Recall", "recall"}, {"Precision", "precision"}, {"Specificity", "specificity"}};
  Table t;
  t.title = "Ablation (zero-shot)";
  t.header.push_back("Metric");
  for (auto m : kColumns) t.header.push_back(ablation_display(m));
  for (auto [label, metric] : kRows) {
    std::vector<std::string> row{label};
    for (auto m : kColumns) {
      auto it = std::find_if(reports.begin(), reports.end(), [&](const auto& p) { return p.first == m; });
      row.push_back(it == reports.end() ? "n/a" : format_rate(metric_by_name(it->second, metric)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string run_label(const RunHeader& h) {
  return fmt::format("{}/{}/{}", h.backend, strategy_token(h.strategy), ablation_token(h.ablation));
}

Table render_run_table(const RunSummary& summary) {
  Table t;
  t.title = "Runs";
  t.header = {"Run",       "Model", "Accuracy", "Precision", "Recall", "Specificity",
              "F1",        "Support", "Excluded", "Run id"};
  for (const auto& r : summary.runs) {
    const auto& m = r.overall;
    t.rows.push_back({run_label(r.header), r.header.model_id, format_rate(m.accuracy), format_rate(m.precision),
                      format_rate(m.recall), format_rate(m.specificity), format_rate(m.f1), count(m.support),
                      count(m.excluded), r.header.run_id});
  }
  return t;
}

Table render_country_table(const RunSummary& summary) {
  Table t;
  t.title = "Per country";
  t.header = {"Run", "Country", "Accuracy", "Precision", "Recall", "Specificity", "F1", "Support", "Excluded"};
  for (const auto& r : summary.runs) {
    for (const auto& [country, m] : r.per_country) {
      t.rows.push_back({run_label(r.header), country, format_rate(m.accuracy), format_rate(m.precision),
                        format_rate(m.recall), format_rate(m.specificity), format_rate(m.f1), count(m.support),
                        count(m.excluded)});
    }
  }
  return t;
}

Table render_mcnemar_table(const RunSummary& summary) {
  Table t;
  t.title = "McNemar";
  t.header = {"Run A", "Run B", "b", "c", "Paired", "Statistic", "p-value", "Method"};
  for (const auto& p : summary.mcnemar) {
    if (p.run_a > p.run_b) continue;  // the transposed row carries the same test
    const auto& m = p.result;
    std::string method = m.no_discordant_pairs
                             ? "no discordant pairs"
                             : (m.method == McNemarMethod::ChiSquaredCC ? "chi-squared (cc)" : "exact binomial");
    t.rows.push_back({run_label(summary.runs[p.run_a].header), run_label(summary.runs[p.run_b].header),
                      count(m.a_correct_b_wrong), count(m.a_wrong_b_correct), count(m.paired),
                      fmt::format("{:.4f}", m.statistic), format_p_value(m.p_value), method});
  }
  return t;
}

Table render_mcnemar_matrix(const RunSummary& summary) {
  Table t;
  t.title = "McNemar p-values";
  t.header.push_back("Run");
  for (const auto& r : summary.runs) t.header.push_back(run_label(r.header));
  for (std::size_t a = 0; a < summary.runs.size(); ++a) {
    std::vector<std::string> row{run_label(summary.runs[a].header)};
    for (std::size_t b = 0; b < summary.runs.size(); ++b) {
      if (a == b) {
        row.emplace_back("-");
        continue;
      }
      auto it = std::find_if(summary.mcnemar.begin(), summary.mcnemar.end(),
                             [&](const PairwiseMcNemar& p) { return p.run_a == a && p.run_b == b; });
      row.push_back(it == summary.mcnemar.end() ? "n/a" : format_p_value(it->result.p_value));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table render_balanced_table(const BalancedReport& report, GroupKey key, std::string_view label) {
  Table t;
  bool language = key == GroupKey::Language;
  t.title = fmt::format("Balanced per {} ({})", language ? "language" : (key == GroupKey::Category ? "category" : "country"),
                        label);
  if (language) {
    t.header = {"Language", "Accuracy (%)", "Correct", "Total"};
  } else {
    t.header = {"Group", "Per class", "Accuracy", "F1", "Support", "Excluded"};
  }
  for (const auto& [name, g] : report.groups) {
    const auto& m = g.report;
    if (language) {
      t.rows.push_back({name, format_percent(m.accuracy), count(m.correct), count(m.support)});
    } else {
      t.rows.push_back({name, count(g.per_class), format_rate(m.accuracy), format_rate(m.f1), count(m.support),
                        count(m.excluded)});
    }
  }
  for (const auto& x : report.exclusions) {
    t.notes.push_back(fmt::format("dropped {} (misleading {}, not misleading {}, balanced {}): {}", x.group,
                                  x.misleading, x.not_misleading, x.balanced_total, x.reason));
  }
  return t;
}

Table render_cost_table(const CostReport& report) {
  Table t;
  t.title = "Cost";
  t.header = {"Stage", "Backend", "Entries", "Total ($)", "Average ($)"};
  for (const auto& r : report.stages) {
    t.rows.push_back({std::string(stage_token(r.stage)), "all", count(r.count), format_money(r.total), r.average});
  }
  for (const auto& r : report.by_backend) {
    t.rows.push_back({std::string(stage_token(r.stage)), r.backend, count(r.count), format_money(r.total), r.average});
  }
  t.notes.push_back("grand total $" + format_money(report.grand_total));
  return t;
}

std::string bundle_digest(std::vector<std::string> digests) {
  std::sort(digests.begin(), digests.end());
  digests.erase(std::unique(digests.begin(), digests.end()), digests.end());
  std::string joined;
  for (const auto& d : digests) joined += d + "\n";
  return sha256_hex(joined).substr(0, 12);
}

ReportBundle write_bundle(const std::filesystem::path& dir, std::string_view name, const std::vector<Table>& tables,
                          std::vector<std::string> digests) {
  std::sort(digests.begin(), digests.end());
  digests.erase(std::unique(digests.begin(), digests.end()), digests.end());
  auto tag = bundle_digest(digests);
  std::filesystem::create_directories(dir);
  ReportBundle bundle;
  bundle.provenance = digests;
  std::string md = fmt::format("# {}\n\nbundle {}\n\nrun manifests:\n", name, tag);
  for (const auto& d : digests) md += "- " + d + "\n";
  std::set<std::string> used;
  for (std::size_t i = 0; i < tables.size(); ++i) {
    md += "\n" + tables[i].to_markdown();
    auto slug = slugify(tables[i].title);
    if (slug.empty()) slug = std::to_string(i + 1);
    if (!used.insert(slug).second) slug += "-" + std::to_string(i + 1);
    auto csv_path = dir / fmt::format("{}-{}__{}.csv", name, slug, tag);
    write_file_atomic(csv_path, "# bundle " + tag + "\n" + tables[i].to_csv());
    bundle.csv_paths.push_back(csv_path);
  }
  bundle.markdown_path = dir / fmt::format("{}__{}.md", name, tag);
  write_file_atomic(bundle.markdown_path, md);
  return bundle;
}

}  // namespace thumbtruth
