#include "acrostic/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "acrostic/adapter.hpp"
#include "acrostic/attacks.hpp"
#include "acrostic/cue_list.hpp"
#include "acrostic/eval.hpp"
#include "acrostic/lm.hpp"
#include "acrostic/tokenizer.hpp"
#include "acrostic/watermark.hpp"

namespace acrostic {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write " + path);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Options {
  // shared watermark flags
  std::string scheme = "kgw";
  double gamma = 0.5;
  double delta = 4.0;
  int context_width = 2;
  std::string key_hex;
  std::string key_env = "ACROSTIC_KEY";
  std::string cue_list;
  double sweet_threshold = 1.0;
  double z_threshold = 2.0;
  std::uint64_t seed = 42;
  std::string model;
  std::string adapter_cmd;
  std::string profile = "python-like";
  std::string manifest;

  // build-cue-list / train-lm
  std::string corpus;
  std::optional<double> beta;
  double beta_percentile = 75.0;
  std::string cue_direction = "high";
  int order = 3;
  double alpha = 0.01;

  // generate / detect / attack
  std::string input;
  std::string out;
  int max_tokens = 250;
  double temperature = 1.0;
  bool greedy = false;
  std::string scope = "full";
  bool trace = false;
  std::string attack_kind = "comment-removal";

  // evaluate
  std::string prompts;
  bool comment_rich = false;
  std::string schemes = "kgw,ca";
  std::string deltas = "0,4,8";
  std::string conditions = "clean,comment-removed";
  std::size_t n_docs = 200;
  std::string format = "json";
  unsigned threads = 0;
};

const LanguageProfile& resolve_profile(const Options& o, std::unique_ptr<LanguageProfile>& storage) {
  if (o.profile == "python-like" || o.profile == "c-like") return LanguageProfile::builtin(o.profile);
  storage = std::make_unique<LanguageProfile>(LanguageProfile::load(o.profile));
  return *storage;
}

std::string resolve_key(const Options& o) {
  if (const char* env = std::getenv(o.key_env.c_str()); env != nullptr && *env != '\0') return parse_hex_key(env);
  if (!o.key_hex.empty()) return parse_hex_key(o.key_hex);
  throw UsageError("a key is required: set $" + o.key_env + " or pass --key");
}

WatermarkConfig make_config(const Options& o, bool need_key) {
  WatermarkConfig cfg;
  cfg.scheme = parse_scheme(o.scheme);
  cfg.gamma = o.gamma;
  cfg.delta = o.delta;
  cfg.context_width = o.context_width;
  cfg.sweet_entropy_threshold = o.sweet_threshold;
  cfg.z_threshold = o.z_threshold;
  cfg.key = need_key ? resolve_key(o) : std::string("unused");
  cfg.validate();
  return cfg;
}

nlohmann::ordered_json config_json(const WatermarkConfig& cfg) {
  nlohmann::ordered_json j;
  j["scheme"] = std::string(to_string(cfg.scheme));
  j["gamma"] = cfg.gamma;
  j["delta"] = cfg.delta;
  j["context_width"] = cfg.context_width;
  j["sweet_threshold"] = cfg.sweet_entropy_threshold;
  j["z_threshold"] = cfg.z_threshold;
  return j;
}

/// Written next to every output. Never carries key material.
void write_manifest(const std::string& path, const std::string& subcommand, nlohmann::ordered_json config,
                    nlohmann::ordered_json inputs, nlohmann::ordered_json outputs, std::uint64_t seed) {
  if (path.empty()) return;
  nlohmann::ordered_json m;
  m["subcommand"] = subcommand;
  m["version"] = kVersion;
  m["seed"] = seed;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  write_file(path, m.dump(2) + "\n");
}

std::string manifest_path(const Options& o) {
  if (!o.manifest.empty()) return o.manifest;
  return o.out.empty() ? std::string{} : o.out + ".manifest.json";
}

std::vector<std::vector<Token>> tokenize_corpus(const std::string& dir, const LanguageProfile& profile,
                                                std::vector<std::string>& docs) {
  docs = read_corpus_dir(dir);
  std::vector<std::vector<Token>> corpus;
  corpus.reserve(docs.size());
  for (const auto& d : docs) corpus.push_back(tokenize(d, profile));
  return corpus;
}

struct Source {
  std::unique_ptr<NGramModel> ngram;
  std::unique_ptr<AdapterClient> adapter;
  const TokenSource* get() const {
    if (ngram) return ngram.get();
    return adapter.get();
  }
};

Source open_source(const Options& o, bool required) {
  Source s;
  if (!o.model.empty()) {
    s.ngram = std::make_unique<NGramModel>(NGramModel::load(o.model));
  } else if (!o.adapter_cmd.empty()) {
    s.adapter = std::make_unique<AdapterClient>(o.adapter_cmd);
  } else if (required) {
    throw UsageError("--model or --adapter-cmd is required");
  }
  return s;
}

std::optional<CueList> open_cue_list(const Options& o, Scheme scheme) {
  if (!o.cue_list.empty()) return load_cue_list(o.cue_list);
  if (scheme == Scheme::CodeAcrostic) throw UsageError("cue list required");
  return std::nullopt;
}

int cmd_build_cue_list(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  std::vector<std::string> docs;
  const auto corpus = tokenize_corpus(o.corpus, profile, docs);
  const PairCounts pc = count_cooccurrence(corpus);
  const double beta = o.beta ? *o.beta : entropy_percentile(pc, o.beta_percentile);
  const CueList cl = build_cue_list(pc, beta, parse_cue_direction(o.cue_direction), corpus_fingerprint(docs));
  save(cl, o.out);

  out << "members: " << cl.members().size() << "\n";
  out << "beta: " << cl.beta() << " (" << (o.beta ? "fixed" : "percentile " + std::to_string(o.beta_percentile))
      << ")\n";
  out << "entropy percentiles:";
  for (double p : {0.0, 25.0, 50.0, 75.0, 90.0, 100.0}) out << " p" << p << "=" << entropy_percentile(pc, p);
  out << "\n";
  if (!cl.warning().empty()) out << "warning: " << cl.warning() << "\n";

  nlohmann::ordered_json cfg{{"beta", cl.beta()},
                             {"cue_direction", o.cue_direction},
                             {"profile", profile.name()}};
  if (!o.beta) cfg["beta_percentile"] = o.beta_percentile;
  write_manifest(manifest_path(o), "build-cue-list", cfg, {{"corpus", o.corpus}}, {{"cue_list", o.out}}, 0);
  return kExitOk;
}

int cmd_train_lm(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  std::vector<std::string> docs;
  const auto corpus = tokenize_corpus(o.corpus, profile, docs);
  const NGramModel model = train_ngram(corpus, o.order, o.alpha);
  model.save(o.out);
  out << "vocab: " << model.vocab().size() << "\ncontexts: " << model.context_count() << "\n";
  write_manifest(manifest_path(o), "train-lm",
                 {{"order", o.order}, {"alpha", o.alpha}, {"profile", profile.name()}}, {{"corpus", o.corpus}},
                 {{"model", o.out}}, 0);
  return kExitOk;
}

int cmd_generate(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  const WatermarkConfig cfg = make_config(o, true);
  const auto cue_list = open_cue_list(o, cfg.scheme);
  const Source source = open_source(o, true);
  const auto prompt = content_texts(tokenize(read_file(o.input), profile));

  Rng rng(o.seed);
  GenerateOptions gopts;
  gopts.profile = &profile;
  gopts.sampling.temperature = o.temperature;
  gopts.sampling.greedy = o.greedy;
  const Generation g = generate_watermarked(*source.get(), prompt, cfg, cue_list ? &*cue_list : nullptr, rng,
                                            o.max_tokens, gopts);
  std::string text = render(g.tokens, profile);
  if (!text.empty() && text.back() != '\n') text += '\n';
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
  auto c = config_json(cfg);
  c["max_tokens"] = o.max_tokens;
  c["temperature"] = o.temperature;
  c["greedy"] = o.greedy;
  c["profile"] = profile.name();
  write_manifest(manifest_path(o), "generate", c,
                 {{"prompt", o.input}, {"model", o.model}, {"adapter_cmd", o.adapter_cmd}, {"cue_list", o.cue_list}},
                 {{"text", o.out.empty() ? "-" : o.out}}, o.seed);
  return kExitOk;
}

int cmd_detect(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  const WatermarkConfig cfg = make_config(o, true);
  if ((cfg.scheme == Scheme::SWEET || cfg.scheme == Scheme::EWD) && o.model.empty() && o.adapter_cmd.empty()) {
    throw UsageError(std::string(to_string(cfg.scheme)) + " detection requires --model");
  }
  const auto cue_list = open_cue_list(o, cfg.scheme);
  const Source source = open_source(o, false);
  const auto tokens = tokenize(read_file(o.input), profile);

  std::vector<bool> mask;
  DetectOptions dopts;
  dopts.profile = &profile;
  dopts.with_trace = o.trace;
  if (o.scope == "code-only") {
    mask = code_only_mask(tokens);
    dopts.scope_mask = &mask;
  } else if (o.scope != "full") {
    throw UsageError("--scope must be full or code-only");
  }
  const DetectionReport r = detect(tokens, cfg, cue_list ? &*cue_list : nullptr, source.get(), dopts);
  out << to_json(r).dump(2) << "\n";

  auto c = config_json(cfg);
  c["scope"] = o.scope;
  write_manifest(o.manifest, "detect", c, {{"input", o.input}, {"cue_list", o.cue_list}, {"model", o.model}},
                 {{"report", "-"}}, 0);
  if (r.insufficient_scope) throw std::runtime_error("insufficient scope");
  return r.verdict ? kExitDetected : kExitNotDetected;
}

int cmd_attack(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  const AttackKind kind = parse_attack_kind(o.attack_kind);
  const auto tokens = tokenize(read_file(o.input), profile);
  const AttackResult r = apply_attack(kind, tokens, profile);
  const std::string text = detokenize(r.tokens);
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
  write_manifest(manifest_path(o), "attack", {{"kind", std::string(to_string(kind))}, {"profile", profile.name()}},
                 {{"input", o.input}},
                 {{"text", o.out.empty() ? "-" : o.out},
                  {"removed_count", r.removed_count},
                  {"removed_byte_fraction", r.removed_byte_fraction}},
                 0);
  return kExitOk;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  std::unique_ptr<LanguageProfile> storage;
  const LanguageProfile& profile = resolve_profile(o, storage);
  std::vector<Scheme> schemes;
  for (const auto& s : split_list(o.schemes)) schemes.push_back(parse_scheme(s));
  std::vector<double> deltas;
  for (const auto& d : split_list(o.deltas)) deltas.push_back(std::stod(d));
  std::vector<Condition> conditions;
  for (const auto& c : split_list(o.conditions)) conditions.push_back(parse_condition(c));
  if (schemes.empty() || deltas.empty() || conditions.empty()) throw UsageError("empty scheme, delta or condition list");

  WatermarkConfig cfg = make_config(o, true);
  const bool needs_cues = std::find(schemes.begin(), schemes.end(), Scheme::CodeAcrostic) != schemes.end();
  std::optional<CueList> cue_list;
  if (!o.cue_list.empty()) cue_list = load_cue_list(o.cue_list);
  if (needs_cues && !cue_list) throw UsageError("cue list required");
  const Source source = open_source(o, true);
  if (o.prompts.empty()) throw UsageError("--prompts is required");

  const auto sources = read_corpus_dir(o.prompts);
  const auto prompts = o.comment_rich ? extract_comment_rich_prompts(sources, profile)
                                      : extract_prompts(sources, profile);
  if (prompts.empty()) throw std::runtime_error("no prompts found under " + o.prompts);

  SweepArgs args;
  args.prompts = prompts;
  args.model = source.get();
  args.cfg = cfg;
  args.cue_list = cue_list ? &*cue_list : nullptr;
  args.n_docs = o.n_docs;
  args.seed = o.seed;
  args.options.max_tokens = o.max_tokens;
  args.options.sampling.temperature = o.temperature;
  args.options.sampling.greedy = o.greedy;
  args.options.profile = &profile;
  args.options.threads = source.adapter ? 1 : o.threads;

  const EvalReport report = evaluate_grid(conditions, schemes, deltas, args);
  const ReportFormat format = parse_report_format(o.format);
  const std::string text = format_report(report, format);
  if (o.out.empty()) {
    out << text;
  } else {
    write_file(o.out, text);
  }
  auto c = config_json(cfg);
  c.erase("scheme");
  c.erase("delta");
  c["schemes"] = o.schemes;
  c["deltas"] = o.deltas;
  c["conditions"] = o.conditions;
  c["n_docs"] = o.n_docs;
  c["max_tokens"] = o.max_tokens;
  c["comment_rich"] = o.comment_rich;
  c["format"] = o.format;
  write_manifest(manifest_path(o), "evaluate", c,
                 {{"model", o.model}, {"adapter_cmd", o.adapter_cmd}, {"cue_list", o.cue_list}, {"prompts", o.prompts}},
                 {{"report", o.out.empty() ? "-" : o.out}}, o.seed);
  return kExitOk;
}

int cmd_serve(const Options& o, std::istream& in, std::ostream& out) {
  if (o.model.empty()) throw UsageError("--model is required");
  const NGramModel model = NGramModel::load(o.model);
  serve_adapter(model, in, out);
  return kExitOk;
}

void add_watermark_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--scheme", o.scheme, "kgw, sweet, ewd or ca")->capture_default_str();
  cmd->add_option("--gamma", o.gamma, "green-list fraction")->capture_default_str();
  cmd->add_option("--delta", o.delta, "green logit bias")->capture_default_str();
  cmd->add_option("--context-width", o.context_width, "hash context width N")->capture_default_str();
  cmd->add_option("--key", o.key_hex, "secret key (hex)");
  cmd->add_option("--key-env", o.key_env, "environment variable holding the key; wins over --key")
      ->capture_default_str();
  cmd->add_option("--cue-list", o.cue_list, "cue list file");
  cmd->add_option("--sweet-threshold", o.sweet_threshold, "entropy gate for sweet")->capture_default_str();
  cmd->add_option("--z-threshold", o.z_threshold)->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
  cmd->add_option("--model", o.model, "n-gram model file");
  cmd->add_option("--adapter-cmd", o.adapter_cmd, "external model process");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Watermarking toolkit for generated code"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--profile", o.profile, "python-like, c-like, or a profile file")->capture_default_str();
  app.add_option("--manifest", o.manifest, "manifest path (default: <out>.manifest.json)");

  auto* build = app.add_subcommand("build-cue-list", "build a cue list from a corpus directory");
  build->add_option("--corpus", o.corpus)->required();
  build->add_option("--beta", o.beta, "fixed entropy threshold (nats)");
  build->add_option("--beta-percentile", o.beta_percentile)->capture_default_str();
  build->add_option("--cue-direction", o.cue_direction, "high or low")->capture_default_str();
  build->add_option("--out", o.out)->required();

  auto* train = app.add_subcommand("train-lm", "train the n-gram model");
  train->add_option("--corpus", o.corpus)->required();
  train->add_option("--order", o.order)->capture_default_str();
  train->add_option("--alpha", o.alpha)->capture_default_str();
  train->add_option("--out", o.out)->required();

  auto* gen = app.add_subcommand("generate", "generate watermarked code");
  add_watermark_flags(gen, o);
  gen->add_option("--prompt-file", o.input)->required();
  gen->add_option("--max-tokens", o.max_tokens)->capture_default_str();
  gen->add_option("--temperature", o.temperature)->capture_default_str();
  gen->add_flag("--greedy", o.greedy);
  gen->add_option("--out", o.out);

  auto* det = app.add_subcommand("detect", "detect a watermark; exit 0 detected, 1 not, 2 error");
  add_watermark_flags(det, o);
  det->add_option("--input", o.input)->required();
  det->add_option("--scope", o.scope, "full or code-only")->capture_default_str();
  det->add_flag("--trace", o.trace);

  auto* atk = app.add_subcommand("attack", "apply a transformation to a source file");
  atk->add_option("--kind", o.attack_kind, "comment-removal or whitespace")->capture_default_str();
  atk->add_option("--input", o.input)->required();
  atk->add_option("--out", o.out);

  auto* ev = app.add_subcommand("evaluate", "TPR/FPR/AUROC over paired generations");
  add_watermark_flags(ev, o);
  ev->add_option("--prompts", o.prompts, "directory of held-out sources");
  ev->add_flag("--comment-rich", o.comment_rich, "use comment-rich prompt windows");
  ev->add_option("--schemes", o.schemes)->capture_default_str();
  ev->add_option("--deltas", o.deltas)->capture_default_str();
  ev->add_option("--conditions", o.conditions, "clean, comment-removed, whitespace, code-only")
      ->capture_default_str();
  ev->add_option("--n-docs", o.n_docs)->capture_default_str();
  ev->add_option("--max-tokens", o.max_tokens)->capture_default_str();
  ev->add_option("--temperature", o.temperature)->capture_default_str();
  ev->add_flag("--greedy", o.greedy);
  ev->add_option("--threads", o.threads)->capture_default_str();
  ev->add_option("--format", o.format, "json or csv")->capture_default_str();
  ev->add_option("--out", o.out);

  auto* srv = app.add_subcommand("serve", "serve model distributions over stdin/stdout (NDJSON)");
  srv->add_option("--model", o.model)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitError;
  }

  try {
    if (build->parsed()) return cmd_build_cue_list(o, out);
    if (train->parsed()) return cmd_train_lm(o, out);
    if (gen->parsed()) return cmd_generate(o, out);
    if (det->parsed()) return cmd_detect(o, out);
    if (atk->parsed()) return cmd_attack(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (srv->parsed()) return cmd_serve(o, in, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace acrostic
