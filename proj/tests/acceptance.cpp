// Acceptance run: one PASS/FAIL line per criterion, followed by INFO lines
// that are reported but not judged. Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "acrostic/cli.hpp"
#include "acrostic/eval.hpp"
#include "acrostic/watermark.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace acrostic;
namespace fs = std::filesystem;

namespace {

const std::string& key() { return testing::kTestKey; }
constexpr const char* kHexKey = "000102030405060708090a0b0c0d0e0f";
constexpr std::uint64_t kSeed = 42;

int failures = 0;

struct Outcome {
  bool ok = false;
  std::string detail;
};

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = limit_seconds <= 0 || secs <= limit_seconds;
  const bool pass = o.ok && in_time;
  failures += !pass;
  char timing[96];
  std::snprintf(timing, sizeof timing, "%.2fs", secs);
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << timing;
  if (limit_seconds > 0) std::cout << " / limit " << limit_seconds << "s" << (in_time ? "" : " EXCEEDED");
  std::cout << "]" << std::endl;
}

void info(const std::string& line) { std::cout << "INFO " << line << std::endl; }

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << std::fixed << v;
  return ss.str();
}

WatermarkConfig cfg_for(Scheme scheme, double delta) {
  WatermarkConfig cfg;
  cfg.scheme = scheme;
  cfg.gamma = 0.5;
  cfg.delta = delta;
  cfg.key = key();
  return cfg;
}

TrialSet trials(Scheme scheme, double delta, const std::vector<Prompt>& prompts, const Condition& cond,
                std::size_t n_docs = 200) {
  const auto& setup = testing::ToySetup::get();
  RunOptions opts;
  opts.max_tokens = 250;
  return run_condition(prompts, setup.model, cfg_for(scheme, delta), &setup.cues, cond, n_docs, kSeed, opts);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

/// KGW z of unwatermarked continuations with at least `min_scope` scored positions.
/// An empty `k` gives every document its own key.
std::vector<double> null_scores(const std::string& k, std::size_t wanted, std::int64_t min_scope) {
  const auto& setup = testing::ToySetup::get();
  auto cfg = cfg_for(Scheme::KGW, 0.0);
  cfg.key = k;
  std::vector<double> z;
  for (std::uint64_t d = 0; z.size() < wanted && d < 20 * wanted; ++d) {
    if (k.empty()) cfg.key = "per-doc-" + std::to_string(d);
    Rng rng(derive_seed(kSeed, d));
    const auto& prompt = setup.prompts[d % setup.prompts.size()];
    const auto g = generate_watermarked(setup.model, prompt, cfg, nullptr, rng, 450);
    // continuation only, as the harness scores it
    const auto r = detect(tokenize(render(g.tokens, LanguageProfile::python_like())), cfg, nullptr, nullptr);
    if (r.T >= min_scope) z.push_back(r.z);
  }
  return z;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const auto& setup = testing::ToySetup::get();
  std::cout << "acceptance: key " << kHexKey << ", seed " << kSeed << ", prompts " << setup.prompts.size()
            << ", comment-rich prompts " << setup.comment_rich_prompts.size() << ", cue list "
            << setup.cues.members().size() << " members" << std::endl;

  criterion("z-formula oracle (1000 triples, 1e-12)", 1.0, [] {
    std::mt19937_64 rng(kSeed);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double T = static_cast<double>(1 + rng() % 10000);
      const double hits = static_cast<double>(rng() % (static_cast<std::uint64_t>(T) + 1));
      const double gamma = 0.01 + 0.98 * std::uniform_real_distribution<double>(0, 1)(rng);
      worst = std::max(worst, std::abs(z_score(hits, T, gamma) - oracle::z(hits, T, gamma)));
    }
    return Outcome{worst <= 1e-12, "max |diff| " + std::to_string(worst)};
  });

  criterion("cue-list oracle (20 corpora, exact sets)", 5.0, [] {
    std::mt19937_64 rng(kSeed);
    int equal = 0;
    std::size_t members = 0;
    for (int c = 0; c < 20; ++c) {
      const auto corpus = oracle::random_corpus(rng, 1000);
      const auto pc = count_cooccurrence(corpus);
      const bool high = c % 2 == 0;
      const double beta = entropy_percentile(pc, static_cast<double>(rng() % 101));
      const auto cl = build_cue_list(pc, beta, high ? CueDirection::HighEntropyCue : CueDirection::LowEntropyCue);
      const auto want = oracle::cue_members(corpus, beta, high);
      equal += cl.members() == want;
      members += want.size();
    }
    return Outcome{equal == 20, std::to_string(equal) + "/20 equal, " + std::to_string(members) + " members total"};
  });

  criterion("hash balance (1e5 draws)", 5.0, [] {
    std::mt19937_64 rng(kSeed);
    auto word = [&] {
      std::string s;
      for (int n = 1 + static_cast<int>(rng() % 8); n > 0; --n) s += static_cast<char>('a' + rng() % 26);
      return s;
    };
    std::string detail;
    bool ok = true;
    for (double gamma : {0.5, 0.25}) {
      int green = 0;
      const int n = 100000;
      for (int i = 0; i < n; ++i) {
        const std::vector<std::string> ctx = {word()};
        green += is_green(key(), ctx, word(), gamma);
      }
      const double frac = green / static_cast<double>(n);
      ok = ok && std::abs(frac - gamma) <= 0.01;
      detail += "gamma " + fmt(gamma, 2) + " -> " + fmt(frac) + "; ";
    }
    return Outcome{ok, detail};
  });

  criterion("null calibration (500 docs, T >= 200, KGW)", 120.0, [] {
    const auto z = null_scores(key(), 500, 200);
    if (z.size() < 500) return Outcome{false, "only " + std::to_string(z.size()) + " documents reached T >= 200"};
    const double m = mean(z), s = stddev(z);
    const double fpr = std::count_if(z.begin(), z.end(), [](double v) { return v > 2.0; }) / 500.0;
    const bool ok = m >= -0.1 && m <= 0.1 && s >= 0.85 && s <= 1.15 && fpr <= 0.05;
    return Outcome{ok, "mean " + fmt(m) + " (need [-0.1,0.1]), std " + fmt(s) + " (need [0.85,1.15]), FPR@2 " +
                           fmt(fpr) + " (need <= 0.05)"};
  });
  {
    // Same statistic under other keys, to show how much the mean depends on the key.
    std::string line = "null calibration under other keys (100 docs each), mean/std:";
    for (int k = 1; k <= 8; ++k) {
      const auto z = null_scores("alt-key-" + std::to_string(k), 100, 200);
      line += " " + fmt(mean(z), 3) + "/" + fmt(stddev(z), 3);
    }
    info(line);
    const auto per_doc = null_scores("", 500, 200);
    info("null calibration with a fresh key per document (500 docs): mean " + fmt(mean(per_doc)) + ", std " +
         fmt(stddev(per_doc)));
  }

  const Condition clean = parse_condition("clean");
  TrialSet kgw4, ca4;
  criterion("detection power (200 pairs, gamma .5, delta 4)", 300.0, [&] {
    kgw4 = trials(Scheme::KGW, 4.0, setup.prompts, clean);
    ca4 = trials(Scheme::CodeAcrostic, 4.0, setup.prompts, clean);
    const auto ca50 = filter_min_scope(ca4, 50);
    const double a_kgw = auroc(kgw4), a_ca = auroc(ca50);
    return Outcome{a_kgw >= 0.95 && a_ca >= 0.90,
                   "KGW AUROC " + fmt(a_kgw) + " (need >= 0.95), CA AUROC " + fmt(a_ca) + " over " +
                       std::to_string(ca50.marked_scores.size()) + "/" + std::to_string(ca50.raw_scores.size()) +
                       " docs with scope >= 50 (need >= 0.90)"};
  });

  criterion("delta monotonicity (TPR at z=2, delta 0,2,4, seed 42)", 0, [&] {
    std::string detail;
    bool ok = true;
    for (Scheme s : {Scheme::KGW, Scheme::CodeAcrostic}) {
      const double t0 = tpr(trials(s, 0.0, setup.prompts, clean), 2.0);
      const double t2 = tpr(trials(s, 2.0, setup.prompts, clean), 2.0);
      const double t4 = tpr(s == Scheme::KGW ? kgw4 : ca4, 2.0);
      ok = ok && t0 <= t2 && t2 <= t4;
      detail += std::string(to_string(s)) + " " + fmt(t0, 3) + " <= " + fmt(t2, 3) + " <= " + fmt(t4, 3) + "; ";
    }
    return Outcome{ok, detail};
  });

  criterion("comment-removal robustness (comment-rich prompts, delta 4)", 0, [&] {
    const auto& rich = setup.comment_rich_prompts;
    const auto removed = parse_condition("comment-removed"), code_only = parse_condition("code-only");
    const auto kc = trials(Scheme::KGW, 4.0, rich, clean), kr = trials(Scheme::KGW, 4.0, rich, removed);
    const auto cc = trials(Scheme::CodeAcrostic, 4.0, rich, clean);
    const auto cr = trials(Scheme::CodeAcrostic, 4.0, rich, removed);
    const auto co = trials(Scheme::CodeAcrostic, 4.0, rich, code_only);
    const double kgw_drop = auroc(kc) - auroc(kr), ca_drop = auroc(cc) - auroc(cr);
    info("robustness mean z (marked): KGW clean " + fmt(mean(kc.marked_scores), 2) + " -> removed " +
         fmt(mean(kr.marked_scores), 2) + "; CA clean " + fmt(mean(cc.marked_scores), 2) + " -> removed " +
         fmt(mean(cr.marked_scores), 2) + "; CA code-only " + fmt(mean(co.marked_scores), 2));
    const bool ok = kgw_drop > ca_drop && auroc(cr) >= auroc(co) - 0.05;
    return Outcome{ok, "KGW clean " + fmt(auroc(kc)) + " -> removed " + fmt(auroc(kr)) + " (drop " + fmt(kgw_drop) +
                           "); CA clean " + fmt(auroc(cc)) + " -> removed " + fmt(auroc(cr)) + " (drop " +
                           fmt(ca_drop) + "); CA clean code-only " + fmt(auroc(co))};
  });

  criterion("AUROC rank = sweep, reference values", 0, [] {
    std::mt19937_64 rng(kSeed);
    std::normal_distribution<double> g;
    double worst = 0.0;
    for (int rep = 0; rep < 500; ++rep) {
      std::vector<double> m(1 + rng() % 80), r(1 + rng() % 80);
      const bool ties = rep % 2 == 0;
      for (auto& x : m) x = ties ? static_cast<double>(rng() % 6) : g(rng) + 0.7;
      for (auto& x : r) x = ties ? static_cast<double>(rng() % 6) : g(rng);
      worst = std::max({worst, std::abs(auroc_rank(m, r) - auroc_sweep(m, r)),
                        std::abs(auroc_rank(m, r) - oracle::auroc_pairs(m, r))});
    }
    const std::vector<double> a = {5, 6}, b = {1, 2}, c = {1, 2, 2}, d = {2, 1, 2}, e = {2, 3};
    const double perfect = auroc(a, b), same = auroc(c, d), mixed = auroc(e, b);
    const bool ok = worst <= 1e-9 && perfect == 1.0 && same == 0.5 && mixed == 0.875;
    return Outcome{ok, "max |rank - sweep| " + std::to_string(worst) + ", perfect " + fmt(perfect) +
                           ", identical " + fmt(same) + ", {2,3} vs {1,2} " + fmt(mixed)};
  });

  criterion("tokenizer losslessness (corpus + 1e4 random UTF-8)", 0, [] {
    std::size_t docs = 0, bad = 0;
    for (const char* shard : {"lm", "cue", "heldout"}) {
      for (const auto& src : read_corpus_dir(testing::data_dir() / "corpus" / shard)) {
        for (const auto* profile : {&LanguageProfile::python_like(), &LanguageProfile::c_like()}) {
          ++docs;
          bad += detokenize(tokenize(src, *profile)) != src;
        }
      }
    }
    std::mt19937_64 rng(kSeed);
    std::size_t random_bad = 0;
    for (int i = 0; i < 10000; ++i) {
      const auto s = oracle::random_utf8(rng, 80);
      random_bad += detokenize(tokenize(s)) != s;
      random_bad += detokenize(tokenize(s, LanguageProfile::c_like())) != s;
    }
    return Outcome{bad == 0 && random_bad == 0, std::to_string(docs - bad) + "/" + std::to_string(docs) +
                                                   " corpus round trips, " + std::to_string(20000 - random_bad) +
                                                   "/20000 random"};
  });

  criterion("evaluate twice gives byte-identical reports", 0, [&] {
    const auto dir = fs::temp_directory_path() / "acrostic_acceptance";
    fs::create_directories(dir);
    setup.model.save(dir / "toy.ngram");
    save(setup.cues, dir / "toy.cues");
    auto run = [&](const std::string& out) {
      std::istringstream in;
      std::ostringstream o, e;
      const std::vector<std::string> args = {
          "evaluate", "--key", kHexKey, "--model", (dir / "toy.ngram").string(), "--cue-list",
          (dir / "toy.cues").string(), "--prompts", (testing::data_dir() / "corpus" / "heldout").string(),
          "--schemes", "kgw,ca", "--deltas", "0,4", "--conditions", "clean,comment-removed", "--n-docs", "30",
          "--out", (dir / out).string()};
      return run_cli(args, in, o, e);
    };
    const int a = run("a.json"), b = run("b.json");
    const auto ja = slurp(dir / "a.json"), jb = slurp(dir / "b.json");
    const bool ok = a == 0 && b == 0 && !ja.empty() && ja == jb;
    fs::remove_all(dir);
    return Outcome{ok, "exit codes " + std::to_string(a) + "/" + std::to_string(b) + ", " +
                           std::to_string(ja.size()) + " bytes, " + (ja == jb ? "identical" : "different")};
  });

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
