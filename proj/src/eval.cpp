#include "acrostic/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace acrostic {

bool TrialSet::operator==(const TrialSet& o) const {
  const auto& a = config_snapshot;
  const auto& b = o.config_snapshot;
  return condition == o.condition && a.scheme == b.scheme && a.gamma == b.gamma && a.delta == b.delta &&
         a.context_width == b.context_width && a.sweet_entropy_threshold == b.sweet_entropy_threshold &&
         a.z_threshold == b.z_threshold && marked_scores == o.marked_scores && raw_scores == o.raw_scores &&
         marked_scope == o.marked_scope && raw_scope == o.raw_scope;
}

Condition parse_condition(std::string_view label) {
  if (label == "clean") return {"clean", AttackKind::None, false};
  if (label == "comment-removed") return {"comment-removed", AttackKind::CommentRemoval, false};
  if (label == "whitespace") return {"whitespace", AttackKind::Whitespace, false};
  if (label == "code-only") return {"code-only", AttackKind::None, true};
  throw std::invalid_argument("unknown condition: " + std::string(label));
}

namespace {

struct DocScore {
  double marked = 0.0;
  double raw = 0.0;
  std::int64_t marked_T = 0;
  std::int64_t raw_T = 0;
};

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace

TrialSet run_condition(std::span<const Prompt> prompts, const TokenSource& model, const WatermarkConfig& cfg,
                       const CueList* cue_list, const Condition& condition, std::size_t n_docs,
                       std::uint64_t seed, const RunOptions& opts) {
  if (n_docs < 1) throw std::invalid_argument("n_docs must be >= 1");
  if (prompts.empty()) throw std::invalid_argument("no prompts");
  cfg.validate();
  const LanguageProfile& profile = opts.profile ? *opts.profile : LanguageProfile::python_like();
  const TokenSource* detector_model = opts.detection_model ? opts.detection_model : &model;
  WatermarkConfig raw_cfg = cfg;
  raw_cfg.delta = 0.0;
  const GenerateOptions gen_opts{opts.sampling, &profile};

  std::vector<DocScore> scores(n_docs);
  parallel_for(n_docs, opts.threads, [&](std::size_t d) {
    try {
      const Prompt& prompt = prompts[d % prompts.size()];
      const std::uint64_t doc_seed = derive_seed(seed, d);
      auto score = [&](const WatermarkConfig& gen_cfg, double& z, std::int64_t& T) {
        Rng rng(doc_seed);
        const Generation g = generate_watermarked(model, prompt, gen_cfg, cue_list, rng, opts.max_tokens, gen_opts);
        const auto tokens = tokenize(render(g.tokens, profile), profile);
        const AttackResult attacked = apply_attack(condition.attack, tokens, profile);
        std::vector<bool> mask;
        DetectOptions dopts;
        dopts.profile = opts.profile;
        if (condition.code_only_scope) {
          mask = code_only_mask(attacked.tokens);
          dopts.scope_mask = &mask;
        }
        const DetectionReport r = detect(attacked.tokens, cfg, cue_list, detector_model, dopts);
        z = r.z;
        T = r.T;
      };
      score(cfg, scores[d].marked, scores[d].marked_T);
      score(raw_cfg, scores[d].raw, scores[d].raw_T);
    } catch (const std::exception& e) {
      throw std::runtime_error("document " + std::to_string(d) + ": " + e.what());
    }
  });

  TrialSet ts;
  ts.condition = condition.label;
  ts.config_snapshot = cfg;
  ts.config_snapshot.key.clear();
  for (const auto& s : scores) {
    ts.marked_scores.push_back(s.marked);
    ts.raw_scores.push_back(s.raw);
    ts.marked_scope.push_back(s.marked_T);
    ts.raw_scope.push_back(s.raw_T);
  }
  return ts;
}

namespace {

double fraction_above(std::span<const double> scores, double threshold, const char* what) {
  if (scores.empty()) throw std::invalid_argument(std::string("empty ") + what);
  const auto n = std::count_if(scores.begin(), scores.end(), [&](double z) { return z > threshold; });
  return static_cast<double>(n) / static_cast<double>(scores.size());
}

}  // namespace

double tpr(const TrialSet& ts, double z_threshold) {
  return fraction_above(ts.marked_scores, z_threshold, "marked scores");
}

double fpr(const TrialSet& ts, double z_threshold) {
  return fraction_above(ts.raw_scores, z_threshold, "raw scores");
}

double auroc_rank(std::span<const double> marked, std::span<const double> raw) {
  if (marked.empty() || raw.empty()) throw std::invalid_argument("auroc needs two non-empty score lists");
  struct Item {
    double score;
    bool is_marked;
  };
  std::vector<Item> all;
  all.reserve(marked.size() + raw.size());
  for (double s : marked) all.push_back({s, true});
  for (double s : raw) all.push_back({s, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  // Sum of mid-ranks of the marked scores (Mann-Whitney U).
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t marked_in_tie = 0;
    while (j < all.size() && all[j].score == all[i].score) marked_in_tie += all[j++].is_marked ? 1 : 0;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += mid_rank * static_cast<double>(marked_in_tie);
    i = j;
  }
  const double m = static_cast<double>(marked.size());
  const double n = static_cast<double>(raw.size());
  const double u = rank_sum - m * (m + 1.0) / 2.0;
  return u / (m * n);
}

double auroc_sweep(std::span<const double> marked, std::span<const double> raw) {
  if (marked.empty() || raw.empty()) throw std::invalid_argument("auroc needs two non-empty score lists");
  std::vector<double> thresholds(marked.begin(), marked.end());
  thresholds.insert(thresholds.end(), raw.begin(), raw.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto rate_at_least = [](std::span<const double> scores, double t) {
    const auto k = std::count_if(scores.begin(), scores.end(), [&](double s) { return s >= t; });
    return static_cast<double>(k) / static_cast<double>(scores.size());
  };
  double area = 0.0;
  double prev_fpr = 0.0;
  double prev_tpr = 0.0;
  for (double t : thresholds) {
    const double f = rate_at_least(raw, t);
    const double p = rate_at_least(marked, t);
    area += (f - prev_fpr) * (p + prev_tpr) / 2.0;
    prev_fpr = f;
    prev_tpr = p;
  }
  return area;
}

double auroc(std::span<const double> marked, std::span<const double> raw) {
  const double by_rank = auroc_rank(marked, raw);
  const double by_sweep = auroc_sweep(marked, raw);
  if (std::abs(by_rank - by_sweep) > 1e-9) throw std::logic_error("auroc rank and sweep computations disagree");
  return std::clamp(by_rank, 0.0, 1.0);
}

double auroc(const TrialSet& ts) { return auroc(ts.marked_scores, ts.raw_scores); }

TrialSet filter_min_scope(const TrialSet& ts, std::int64_t min_scope) {
  TrialSet out;
  out.condition = ts.condition;
  out.config_snapshot = ts.config_snapshot;
  for (std::size_t i = 0; i < ts.marked_scores.size(); ++i) {
    if (ts.marked_scope[i] < min_scope) continue;
    out.marked_scores.push_back(ts.marked_scores[i]);
    out.marked_scope.push_back(ts.marked_scope[i]);
  }
  for (std::size_t i = 0; i < ts.raw_scores.size(); ++i) {
    if (ts.raw_scope[i] < min_scope) continue;
    out.raw_scores.push_back(ts.raw_scores[i]);
    out.raw_scope.push_back(ts.raw_scope[i]);
  }
  return out;
}

Histogram Histogram::of(std::span<const double> values) {
  Histogram h;
  for (double v : values) {
    const double pos = (v - h.lo) / h.width;
    if (pos < 0.0) {
      ++h.below;
    } else if (pos >= static_cast<double>(h.counts.size())) {
      ++h.above;
    } else {
      ++h.counts[static_cast<std::size_t>(pos)];
    }
  }
  return h;
}

namespace {

double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

ConditionResult summarize(const TrialSet& ts, double z_threshold) {
  ConditionResult r;
  r.condition = ts.condition;
  r.scheme = ts.config_snapshot.scheme;
  r.delta = ts.config_snapshot.delta;
  r.gamma = ts.config_snapshot.gamma;
  r.n_docs = ts.marked_scores.size();
  r.tpr = tpr(ts, z_threshold);
  r.fpr = fpr(ts, z_threshold);
  r.auroc = auroc(ts);
  r.mean_z_marked = mean(ts.marked_scores);
  r.mean_z_raw = mean(ts.raw_scores);
  r.hist_marked = Histogram::of(ts.marked_scores);
  r.hist_raw = Histogram::of(ts.raw_scores);
  r.marked_scores = ts.marked_scores;
  r.raw_scores = ts.raw_scores;
  return r;
}

EvalReport ablation_sweep(std::span<const double> deltas, const SweepArgs& args) {
  if (deltas.empty()) throw std::invalid_argument("no deltas");
  if (args.model == nullptr) throw std::invalid_argument("no model");
  EvalReport report;
  report.master_seed = args.seed;
  report.z_threshold = args.cfg.z_threshold;
  report.max_tokens = args.options.max_tokens;
  if (args.cue_list) report.corpus_fingerprint = args.cue_list->corpus_fingerprint();
  for (double delta : deltas) {
    WatermarkConfig cfg = args.cfg;
    cfg.delta = delta;
    const TrialSet ts =
        run_condition(args.prompts, *args.model, cfg, args.cue_list, args.condition, args.n_docs, args.seed, args.options);
    report.rows.push_back(summarize(ts, cfg.z_threshold));
  }
  return report;
}

EvalReport evaluate_grid(std::span<const Condition> conditions, std::span<const Scheme> schemes,
                         std::span<const double> deltas, const SweepArgs& base) {
  EvalReport report;
  report.master_seed = base.seed;
  report.z_threshold = base.cfg.z_threshold;
  report.max_tokens = base.options.max_tokens;
  if (base.cue_list) report.corpus_fingerprint = base.cue_list->corpus_fingerprint();
  for (const auto& condition : conditions) {
    for (Scheme scheme : schemes) {
      SweepArgs args = base;
      args.condition = condition;
      args.cfg.scheme = scheme;
      auto part = ablation_sweep(deltas, args);
      report.rows.insert(report.rows.end(), part.rows.begin(), part.rows.end());
    }
  }
  return report;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw std::invalid_argument("unknown report format: " + std::string(s));
}

namespace {

nlohmann::json histogram_json(const Histogram& h) {
  return {{"lo", h.lo}, {"width", h.width}, {"counts", h.counts}, {"below", h.below}, {"above", h.above}};
}

Histogram histogram_from_json(const nlohmann::json& j) {
  Histogram h;
  h.lo = j.at("lo").get<double>();
  h.width = j.at("width").get<double>();
  h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  h.below = j.at("below").get<std::uint64_t>();
  h.above = j.at("above").get<std::uint64_t>();
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

namespace {

// Insertion-ordered so the written field order matches the schema order.
nlohmann::ordered_json to_ordered_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["report_version"] = report.report_version;
  j["metadata"] = {{"master_seed", report.master_seed},
                   {"corpus_fingerprint", hex64(report.corpus_fingerprint)},
                   {"z_threshold", report.z_threshold},
                   {"max_tokens", report.max_tokens},
                   {"created", report.created}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["condition"] = r.condition;
    row["scheme"] = std::string(to_string(r.scheme));
    row["delta"] = r.delta;
    row["gamma"] = r.gamma;
    row["n_docs"] = r.n_docs;
    row["tpr"] = r.tpr;
    row["fpr"] = r.fpr;
    row["auroc"] = r.auroc;
    row["mean_z_marked"] = r.mean_z_marked;
    row["mean_z_raw"] = r.mean_z_raw;
    row["hist_marked"] = histogram_json(r.hist_marked);
    row["hist_raw"] = histogram_json(r.hist_raw);
    row["marked_scores"] = r.marked_scores;
    row["raw_scores"] = r.raw_scores;
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

}  // namespace

nlohmann::json to_json(const EvalReport& report) { return nlohmann::json::parse(to_ordered_json(report).dump()); }

EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport report;
  report.report_version = j.at("report_version").get<int>();
  if (report.report_version != EvalReport::kReportVersion) throw std::runtime_error("unsupported report version");
  const auto& meta = j.at("metadata");
  report.master_seed = meta.at("master_seed").get<std::uint64_t>();
  report.corpus_fingerprint = std::stoull(meta.at("corpus_fingerprint").get<std::string>(), nullptr, 16);
  report.z_threshold = meta.at("z_threshold").get<double>();
  report.max_tokens = meta.at("max_tokens").get<int>();
  report.created = meta.at("created").get<std::string>();
  for (const auto& row : j.at("rows")) {
    ConditionResult r;
    r.condition = row.at("condition").get<std::string>();
    r.scheme = parse_scheme(row.at("scheme").get<std::string>());
    r.delta = row.at("delta").get<double>();
    r.gamma = row.at("gamma").get<double>();
    r.n_docs = row.at("n_docs").get<std::size_t>();
    r.tpr = row.at("tpr").get<double>();
    r.fpr = row.at("fpr").get<double>();
    r.auroc = row.at("auroc").get<double>();
    r.mean_z_marked = row.at("mean_z_marked").get<double>();
    r.mean_z_raw = row.at("mean_z_raw").get<double>();
    r.hist_marked = histogram_from_json(row.at("hist_marked"));
    r.hist_raw = histogram_from_json(row.at("hist_raw"));
    r.marked_scores = row.at("marked_scores").get<std::vector<double>>();
    r.raw_scores = row.at("raw_scores").get<std::vector<double>>();
    report.rows.push_back(std::move(r));
  }
  return report;
}

std::string to_csv(const EvalReport& report) {
  std::string out = "condition,scheme,delta,gamma,n_docs,tpr,fpr,auroc,mean_z_marked,mean_z_raw\n";
  char buf[512];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.condition.c_str(),
                  std::string(to_string(r.scheme)).c_str(), r.delta, r.gamma, r.n_docs, r.tpr, r.fpr, r.auroc,
                  r.mean_z_marked, r.mean_z_raw);
    out += buf;
  }
  return out;
}

std::string format_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Csv) return to_csv(report);
  return to_ordered_json(report).dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_report(report, format);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

EvalReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return eval_report_from_json(nlohmann::json::parse(in));
}

std::vector<std::string> read_corpus_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    if (!in) continue;
    std::ostringstream buf;
    buf << in.rdbuf();
    out.push_back(buf.str());
  }
  return out;
}

namespace {

// Content-token windows starting at each line of `source`.
template <typename Keep>
void line_windows(const std::string& source, const LanguageProfile& profile, std::size_t width, Keep keep,
                  std::vector<Prompt>& out, std::set<Prompt>& seen) {
  const auto tokens = tokenize(source, profile);
  std::vector<const Token*> content;
  std::vector<bool> line_start;
  bool at_line_start = true;
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::Newline) {
      at_line_start = true;
    }
    if (is_blank(t.kind)) continue;
    content.push_back(&t);
    line_start.push_back(at_line_start && t.kind != TokenKind::Newline);
    if (t.kind != TokenKind::Newline) at_line_start = false;
  }
  for (std::size_t i = 0; i + width <= content.size(); ++i) {
    if (!line_start[i]) continue;
    std::span<const Token* const> window(content.data() + i, width);
    if (!keep(window)) continue;
    Prompt p;
    for (const Token* t : window) p.push_back(t->text);
    if (seen.insert(p).second) out.push_back(std::move(p));
  }
}

}  // namespace

std::vector<Prompt> extract_prompts(std::span<const std::string> sources, const LanguageProfile& profile,
                                    std::size_t prompt_tokens) {
  std::vector<Prompt> out;
  std::set<Prompt> seen;
  for (const auto& src : sources) {
    line_windows(src, profile, prompt_tokens,
                 [](std::span<const Token* const> w) { return w[0]->text == "def" || w[0]->text == "class"; },
                 out, seen);
  }
  return out;
}

std::vector<Prompt> extract_comment_rich_prompts(std::span<const std::string> sources,
                                                 const LanguageProfile& profile, std::size_t prompt_tokens,
                                                 double min_comment_fraction) {
  std::vector<Prompt> out;
  std::set<Prompt> seen;
  for (const auto& src : sources) {
    line_windows(src, profile, prompt_tokens,
                 [&](std::span<const Token* const> w) {
                   const auto comments = std::count_if(w.begin(), w.end(), [](const Token* t) {
                     return t->kind == TokenKind::Comment;
                   });
                   return static_cast<double>(comments) >= min_comment_fraction * static_cast<double>(w.size());
                 },
                 out, seen);
  }
  return out;
}

}  // namespace acrostic
