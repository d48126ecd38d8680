#include <doctest.h>

#include "error.hpp"
#include "reporting.hpp"
#include "support.hpp"

using namespace thumbtruth;

namespace {

MetricReport report_with_accuracy(double acc) {
  MetricReport m;
  m.accuracy = acc;
  m.recall = 1.0;
  m.support = 100;
  return m;
}

}  // namespace

TEST_CASE("formatters") {
  CHECK(format_rate(0.81818181) == "0.8182");
  CHECK(format_rate(std::nullopt) == "n/a");
  CHECK(format_percent(0.938) == "93.8");
  CHECK(format_percent(std::nullopt) == "n/a");
  CHECK(format_p_value(0.4243) == "0.4243");
  CHECK(format_p_value(1.035e-5) == "1.035e-05");
}

TEST_CASE("markdown and csv tables") {
  Table t{"Demo", {"Model", "Accuracy"}, {{"a, b", "0.5000"}, {"q\"x", "n/a"}}, {"dropped: UK"}};
  auto md = t.to_markdown();
  CHECK(md.find("### Demo") != std::string::npos);
  CHECK(md.find("| Model | Accuracy |") != std::string::npos);
  CHECK(md.find("| --- | ---: |") != std::string::npos);
  CHECK(md.find("- dropped: UK") != std::string::npos);
  auto csv = t.to_csv();
  CHECK(csv.find("\"a, b\",0.5000") != std::string::npos);
  CHECK(csv.find("\"q\"\"x\",n/a") != std::string::npos);
  CHECK(csv.find("dropped") == std::string::npos);
}

TEST_CASE("grid layout") {
  std::map<GridKey, MetricReport> reports{
      {{"claude", PromptStrategy::ZeroShot}, report_with_accuracy(0.9)},
      {{"claude", PromptStrategy::DynamicFewShot}, report_with_accuracy(0.938)},
      {{"gemini", PromptStrategy::ZeroShot}, report_with_accuracy(0.8)},
  };
  auto t = render_grid(reports, "accuracy");
  CHECK(t.header == std::vector<std::string>{"Model", "Zero-shot", "Dynamic Few-shot"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"claude", "0.9000", "0.9380"});
  CHECK(t.rows[1] == std::vector<std::string>{"gemini", "0.8000", "n/a"});
  CHECK_THROWS_AS(render_grid(reports, "auroc"), Error);
  CHECK_THROWS_AS(render_grid({}, "accuracy"), Error);
}

TEST_CASE("ablation layout") {
  auto t = render_ablation_table({{AblationMask::full(), report_with_accuracy(0.9)},
                                  {AblationMask::thumbnail_only(), report_with_accuracy(0.7)}});
  CHECK(t.header == std::vector<std::string>{"Metric", "ABL-NDS", "ABL-ND", "ABL-NS", "Full"});
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0] == std::vector<std::string>{"Accuracy", "0.7000", "n/a", "n/a", "0.9000"});
  CHECK(t.rows[1][0] == "Recall");
  CHECK(t.rows[2][0] == "Precision");
  CHECK(t.rows[3][0] == "Specificity");
}

TEST_CASE("balanced language table") {
  BalancedReport rep;
  GroupReport g;
  g.per_class = 10;
  g.report.accuracy = 0.85;
  g.report.correct = 17;
  g.report.support = 20;
  rep.groups["English"] = g;
  rep.exclusions.push_back({"Spanish", 4, 1, 2, "balanced total 2 < 10"});
  auto t = render_balanced_table(rep, GroupKey::Language, "mock/zero-shot/full");
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][0] == "English");
  auto md = t.to_markdown();
  CHECK(md.find("85.0") != std::string::npos);
  CHECK(md.find("17") != std::string::npos);
  CHECK(md.find("Spanish") != std::string::npos);
}

TEST_CASE("cost table") {
  CostLedger ledger;
  ledger.accumulate({CostStage::Classify, "x", "a", {}, Money{41'900}});
  auto t = render_cost_table(cost_report(ledger));
  auto md = t.to_markdown();
  CHECK(md.find("0.041900") != std::string::npos);
  CHECK(md.find("n/a") != std::string::npos);
}

TEST_CASE("mcnemar tables from a run summary") {
  auto records = tt_test::synthetic_records(40);
  ResultsFile a, b;
  a.header.run_id = "aaaa";
  a.header.backend = "m1";
  b.header.run_id = "bbbb";
  b.header.backend = "m2";
  for (const auto& r : records) {
    a.results.push_back(tt_test::ok_result(r.video_id, tt_test::verdict_of(r.label)));
    b.results.push_back(tt_test::ok_result(r.video_id, Verdict::Misleading));
  }
  auto s = run_summary({a, b}, records);
  auto table = render_mcnemar_table(s);
  CHECK(table.rows.size() == 1);
  auto matrix = render_mcnemar_matrix(s);
  CHECK(matrix.rows.size() == 2);
  CHECK(render_run_table(s).rows.size() == 2);
  CHECK(run_label(a.header) == "m1/zero-shot/full");
}

TEST_CASE("bundles are named by their inputs") {
  tt_test::TempDir dir;
  Table t{"Accuracy by model", {"Model", "Accuracy"}, {{"x", "1.0000"}}, {}};
  auto d1 = bundle_digest({"b", "a", "a"});
  CHECK(d1 == bundle_digest({"a", "b"}));
  CHECK(d1.size() == 12);
  CHECK(d1 != bundle_digest({"a"}));
  auto bundle = write_bundle(dir.path(), "report", {t, t}, {"a", "b"});
  CHECK(bundle.markdown_path.filename() == "report__" + d1 + ".md");
  REQUIRE(bundle.csv_paths.size() == 2);
  CHECK(bundle.csv_paths[0] != bundle.csv_paths[1]);
  auto csv = tt_test::read(bundle.csv_paths[0]);
  CHECK(csv.rfind("# bundle " + d1 + "\n", 0) == 0);
  auto md = tt_test::read(bundle.markdown_path);
  CHECK(md.find("### Accuracy by model") != std::string::npos);
  // rewriting is byte-identical
  auto again = write_bundle(dir.path(), "report", {t, t}, {"b", "a"});
  CHECK(tt_test::read(again.markdown_path) == md);
}
