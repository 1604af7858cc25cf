#include <doctest.h>

#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "acrostic/eval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

TrialSet trial(std::vector<double> marked, std::vector<double> raw) {
  TrialSet ts;
  ts.marked_scores = std::move(marked);
  ts.raw_scores = std::move(raw);
  ts.marked_scope.assign(ts.marked_scores.size(), 100);
  ts.raw_scope.assign(ts.raw_scores.size(), 100);
  return ts;
}

SweepArgs toy_args(Scheme scheme, std::size_t n_docs) {
  const auto& setup = testing::ToySetup::get();
  SweepArgs args;
  args.prompts = setup.prompts;
  args.model = &setup.model;
  args.cfg.scheme = scheme;
  args.cfg.key = testing::kTestKey;
  args.cue_list = &setup.cues;
  args.n_docs = n_docs;
  args.options.max_tokens = 120;
  return args;
}

/// Two-sample Kolmogorov-Smirnov p-value, asymptotic form.
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  const double n = static_cast<double>(a.size() * b.size()) / static_cast<double>(a.size() + b.size());
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  if (lambda < 1e-3) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * (k % 2 ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("tpr and fpr") {
  CHECK(tpr(trial({3, 4}, {0}), 2.0) == 1.0);
  CHECK(tpr(trial({0, 1}, {0}), 2.0) == 0.0);
  CHECK(tpr(trial({1, 3, 5}, {0}), 2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(tpr(trial({2, 2}, {0}), 2.0) == 0.0);  // strictly above
  CHECK(fpr(trial({0}, {-1, 0}), 2.0) == 0.0);
  CHECK(fpr(trial({0}, {3, 4}), 2.0) == 1.0);
  CHECK(fpr(trial({0}, {-1, 2.5}), 2.0) == 0.5);
  CHECK_THROWS(tpr(trial({}, {1}), 2.0));
  CHECK_THROWS(fpr(trial({1}, {}), 2.0));
}

TEST_CASE("AUROC examples") {
  CHECK(auroc(trial({5, 6, 7}, {1, 2, 3})) == 1.0);
  CHECK(auroc(trial({1, 2, 2, 3}, {2, 3, 1, 2})) == 0.5);
  CHECK(auroc(trial({2, 3}, {1, 2})) == 0.875);
  CHECK(auroc(trial({0}, {1})) == 0.0);
  CHECK_THROWS(auroc(trial({}, {1})));
  CHECK_THROWS(auroc(trial({1}, {})));
}

TEST_CASE("rank and sweep AUROC agree with pair enumeration on random inputs") {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t nm = 1 + rng() % 60, nr = 1 + rng() % 60;
    const bool coarse = rep % 2 == 0;  // many ties
    std::vector<double> m(nm), r(nr);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& x : m) x = coarse ? static_cast<double>(rng() % 5) : g(rng) + 0.5;
    for (auto& x : r) x = coarse ? static_cast<double>(rng() % 5) : g(rng);
    const double pairs = oracle::auroc_pairs(m, r);
    CHECK(std::abs(auroc_rank(m, r) - pairs) <= 1e-9);
    CHECK(std::abs(auroc_sweep(m, r) - pairs) <= 1e-9);
    const double a = auroc(m, r);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
  }
}

TEST_CASE("filter_min_scope") {
  TrialSet ts = trial({1, 2, 3}, {4, 5});
  ts.marked_scope = {10, 60, 50};
  ts.raw_scope = {49, 50};
  const auto f = filter_min_scope(ts, 50);
  CHECK(f.marked_scores == std::vector<double>{2, 3});
  CHECK(f.raw_scores == std::vector<double>{5});
  CHECK(f.marked_scope == std::vector<std::int64_t>{60, 50});
}

TEST_CASE("histogram") {
  const std::vector<double> v = {-20, -10, -9.75, 0, 0.49, 29.9, 30, 100};
  const auto h = Histogram::of(v);
  CHECK(h.below == 1);
  CHECK(h.above == 2);
  CHECK(h.counts[0] == 2);
  CHECK(h.counts[20] == 2);
  CHECK(h.counts[79] == 1);
}

TEST_CASE("run_condition basics") {
  const auto args = toy_args(Scheme::KGW, 1);
  const auto one = run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 1, 42, args.options);
  CHECK(one.marked_scores.size() == 1);
  CHECK(one.raw_scores.size() == 1);
  CHECK(one.config_snapshot.key.empty());
  CHECK_THROWS(run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 0, 42, args.options));

  auto opts = args.options;
  opts.threads = 1;
  const auto a = run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 12, 42, opts);
  opts.threads = 4;
  const auto b = run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 12, 42, opts);
  CHECK(a == b);
  const auto c = run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 12, 43, opts);
  CHECK_FALSE(a == c);
}

TEST_CASE("parse_condition") {
  CHECK(parse_condition("clean").attack == AttackKind::None);
  CHECK(parse_condition("comment-removed").attack == AttackKind::CommentRemoval);
  CHECK(parse_condition("code-only").code_only_scope);
  CHECK(parse_condition("whitespace").attack == AttackKind::Whitespace);
  CHECK_THROWS(parse_condition("paraphrase"));
}

TEST_CASE("delta 0 leaves marked and raw scores indistinguishable") {
  auto args = toy_args(Scheme::KGW, 500);
  args.cfg.delta = 0.0;
  const auto ts = run_condition(args.prompts, *args.model, args.cfg, nullptr, Condition{}, 500, 42, args.options);
  CHECK(ks_p_value(ts.marked_scores, ts.raw_scores) > 0.01);
  CHECK(std::abs(tpr(ts, 2.0) - fpr(ts, 2.0)) <= 1e-12);
}

TEST_CASE("ablation sweep") {
  const auto args = toy_args(Scheme::KGW, 40);
  const std::vector<double> deltas = {0, 4, 8};
  const auto report = ablation_sweep(deltas, args);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.rows[0].tpr == doctest::Approx(report.rows[0].fpr));
  CHECK(report.rows[1].tpr >= report.rows[0].tpr);
  for (const auto& row : report.rows) {
    CHECK(row.n_docs == 40);
    for (double m : {row.tpr, row.fpr, row.auroc}) {
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }

  // A single-delta sweep is run_condition followed by the metrics.
  const std::vector<double> four = {4};
  const auto single = ablation_sweep(four, args);
  auto cfg = args.cfg;
  cfg.delta = 4;
  const auto ts = run_condition(args.prompts, *args.model, cfg, args.cue_list, args.condition, 40, 42, args.options);
  CHECK(single.rows[0].tpr == tpr(ts, cfg.z_threshold));
  CHECK(single.rows[0].auroc == auroc(ts));
  CHECK(single.rows[0] == report.rows[1]);
  CHECK_THROWS(ablation_sweep(std::vector<double>{}, args));
}

TEST_CASE("reports round trip through JSON and CSV") {
  const auto args = toy_args(Scheme::CodeAcrostic, 10);
  const std::vector<Condition> conditions = {parse_condition("clean"), parse_condition("comment-removed")};
  const std::vector<Scheme> schemes = {Scheme::KGW, Scheme::CodeAcrostic};
  const std::vector<double> deltas = {0, 4, 8};
  const auto report = evaluate_grid(conditions, schemes, deltas, args);
  REQUIRE(report.rows.size() == 12);
  CHECK(report.rows[0].condition == "clean");
  CHECK(report.rows[3].scheme == Scheme::CodeAcrostic);
  CHECK(report.rows[6].condition == "comment-removed");

  const auto dir = std::filesystem::temp_directory_path() / "acrostic_eval_test";
  std::filesystem::create_directories(dir);
  write_report(report, dir / "r.json", ReportFormat::Json);
  CHECK(read_report(dir / "r.json") == report);
  CHECK(eval_report_from_json(to_json(report)) == report);
  CHECK(to_json(report)["report_version"] == 1);

  const std::string csv = to_csv(report);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "condition,scheme,delta,gamma,n_docs,tpr,fpr,auroc,mean_z_marked,mean_z_raw");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 12);
  CHECK(format_report(report, ReportFormat::Csv) == csv);
  CHECK(parse_report_format("csv") == ReportFormat::Csv);
  CHECK_THROWS(parse_report_format("xml"));

  // The stored scores reproduce every metric.
  for (const auto& row : report.rows) {
    const auto ts = trial(row.marked_scores, row.raw_scores);
    CHECK(row.auroc == auroc(ts));
    CHECK(row.tpr == tpr(ts, report.z_threshold));
  }
  CHECK(to_json(report).dump().find(testing::kTestKey) == std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("prompt extraction") {
  const std::vector<std::string> sources = {
      "import os\n\ndef f(x):\n    return x\n\nclass C:\n    pass\n",
      "# header\n# more words here\n# and more\ndef g():\n    # inside\n    return 1\n"};
  const auto prompts = extract_prompts(sources, LanguageProfile::python_like(), 4);
  REQUIRE(prompts.size() == 3);
  CHECK(prompts[0] == Prompt{"def", "f", "(", "x"});
  CHECK(prompts[1] == Prompt{"class", "C", ":", "\n"});
  const auto rich = extract_comment_rich_prompts(sources, LanguageProfile::python_like(), 6, 0.3);
  REQUIRE_FALSE(rich.empty());
  for (const auto& p : rich) {
    std::size_t comments = 0;
    for (const auto& t : p) comments += t.starts_with("#");
    CHECK(static_cast<double>(comments) >= 0.3 * static_cast<double>(p.size()));
  }
}
