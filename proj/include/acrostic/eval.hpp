#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "acrostic/attacks.hpp"
#include "acrostic/cue_list.hpp"
#include "acrostic/lm.hpp"
#include "acrostic/watermark.hpp"

namespace acrostic {

using Prompt = std::vector<std::string>;

/// z scores of paired watermarked / unwatermarked documents under one condition.
struct TrialSet {
  std::string condition;
  WatermarkConfig config_snapshot;  ///< key cleared
  std::vector<double> marked_scores;
  std::vector<double> raw_scores;
  /// In-scope position counts (T) behind each score.
  std::vector<std::int64_t> marked_scope;
  std::vector<std::int64_t> raw_scope;

  bool operator==(const TrialSet&) const;
};

/// How one evaluation condition generates, attacks and scopes its documents.
struct Condition {
  std::string label = "clean";
  AttackKind attack = AttackKind::None;
  bool code_only_scope = false;
};

/// clean, comment-removed, whitespace, code-only.
Condition parse_condition(std::string_view label);

struct RunOptions {
  int max_tokens = 250;
  SamplingOptions sampling;
  const LanguageProfile* profile = &LanguageProfile::python_like();
  /// Model used for SWEET/EWD detection; defaults to the generating model.
  const TokenSource* detection_model = nullptr;
  /// 0 picks the hardware concurrency. Use 1 for sources that are not thread-safe.
  unsigned threads = 0;
};

/// For document d: prompt d mod |prompts|, seed derive_seed(seed, d). The
/// watermarked and the unwatermarked (delta = 0) continuations share that seed.
/// Both are rendered, re-tokenized, attacked and detected identically.
TrialSet run_condition(std::span<const Prompt> prompts, const TokenSource& model, const WatermarkConfig& cfg,
                       const CueList* cue_list, const Condition& condition, std::size_t n_docs,
                       std::uint64_t seed, const RunOptions& opts = {});

/// Fraction of marked scores strictly above the threshold. Throws on an empty list.
double tpr(const TrialSet& ts, double z_threshold);
/// Fraction of raw scores strictly above the threshold. Throws on an empty list.
double fpr(const TrialSet& ts, double z_threshold);

/// P(marked > raw) + 0.5 P(marked == raw), via mid-ranks.
double auroc_rank(std::span<const double> marked, std::span<const double> raw);
/// Trapezoidal area under the (FPR, TPR) curve swept over every distinct score.
double auroc_sweep(std::span<const double> marked, std::span<const double> raw);
/// Rank-based AUROC, cross-checked against the sweep; throws std::logic_error if they disagree by > 1e-9.
double auroc(std::span<const double> marked, std::span<const double> raw);
double auroc(const TrialSet& ts);

/// Keeps only the documents whose scope is at least `min_scope` positions.
TrialSet filter_min_scope(const TrialSet& ts, std::int64_t min_scope);

struct Histogram {
  double lo = -10.0;
  double width = 0.5;
  std::vector<std::uint64_t> counts = std::vector<std::uint64_t>(80);
  std::uint64_t below = 0;
  std::uint64_t above = 0;

  static Histogram of(std::span<const double> values);
  bool operator==(const Histogram&) const = default;
};

struct ConditionResult {
  std::string condition;
  Scheme scheme = Scheme::KGW;
  double delta = 0.0;
  double gamma = 0.5;
  std::size_t n_docs = 0;
  double tpr = 0.0;
  double fpr = 0.0;
  double auroc = 0.0;
  double mean_z_marked = 0.0;
  double mean_z_raw = 0.0;
  Histogram hist_marked;
  Histogram hist_raw;
  std::vector<double> marked_scores;
  std::vector<double> raw_scores;

  bool operator==(const ConditionResult&) const = default;
};

ConditionResult summarize(const TrialSet& ts, double z_threshold);

struct EvalReport {
  static constexpr int kReportVersion = 1;
  int report_version = kReportVersion;
  std::uint64_t master_seed = 42;
  std::uint64_t corpus_fingerprint = 0;
  double z_threshold = 2.0;
  int max_tokens = 0;
  /// Wall-clock stamp; left empty unless the caller asks for one, so reports stay reproducible.
  std::string created;
  std::vector<ConditionResult> rows;

  bool operator==(const EvalReport&) const = default;
};

/// Everything but delta held fixed across a sweep.
struct SweepArgs {
  std::span<const Prompt> prompts;
  const TokenSource* model = nullptr;
  WatermarkConfig cfg;
  const CueList* cue_list = nullptr;
  Condition condition;
  std::size_t n_docs = 200;
  std::uint64_t seed = 42;
  RunOptions options;
};

/// One row per delta: run_condition then summarize at cfg.z_threshold.
EvalReport ablation_sweep(std::span<const double> deltas, const SweepArgs& args);

/// Rows for every (condition, scheme, delta), in that nesting order.
EvalReport evaluate_grid(std::span<const Condition> conditions, std::span<const Scheme> schemes,
                         std::span<const double> deltas, const SweepArgs& base);

enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(std::string_view s);

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
std::string to_csv(const EvalReport& report);
std::string format_report(const EvalReport& report, ReportFormat format);
void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);
EvalReport read_report(const std::filesystem::path& path);

// == Bundled data ==

/// Sorted regular files under `dir` (recursive), read whole.
std::vector<std::string> read_corpus_dir(const std::filesystem::path& dir);

/// Prompt prefixes cut from held-out sources: every line opening a `def`
/// or `class` starts a prompt of up to `prompt_tokens` content tokens.
std::vector<Prompt> extract_prompts(std::span<const std::string> sources, const LanguageProfile& profile,
                                    std::size_t prompt_tokens = 16);

/// Prompts whose content tokens are at least `min_comment_fraction` comments:
/// windows of held-out code that contain comment blocks or docstrings.
std::vector<Prompt> extract_comment_rich_prompts(std::span<const std::string> sources,
                                                 const LanguageProfile& profile, std::size_t prompt_tokens = 16,
                                                 double min_comment_fraction = 0.3);

}  // namespace acrostic
