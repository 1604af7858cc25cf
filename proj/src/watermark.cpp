#include "acrostic/watermark.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "acrostic/hash.hpp"

namespace acrostic {

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::KGW: return "kgw";
    case Scheme::SWEET: return "sweet";
    case Scheme::EWD: return "ewd";
    case Scheme::CodeAcrostic: return "ca";
  }
  return "kgw";
}

Scheme parse_scheme(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "kgw") return Scheme::KGW;
  if (lower == "sweet") return Scheme::SWEET;
  if (lower == "ewd") return Scheme::EWD;
  if (lower == "ca" || lower == "codeacrostic" || lower == "code-acrostic") return Scheme::CodeAcrostic;
  throw std::invalid_argument("unknown scheme: " + std::string(s));
}

void WatermarkConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0, 1)");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be >= 0");
  if (context_width < 1) throw std::invalid_argument("context width must be >= 1");
  if (key.empty()) throw std::invalid_argument("key must be non-empty");
  if (!(sweet_entropy_threshold >= 0.0)) throw std::invalid_argument("sweet threshold must be >= 0");
}

std::string parse_hex_key(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty() || hex.size() % 2 != 0) throw std::invalid_argument("key must be an even number of hex digits");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("key must be hex");
  };
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) out += static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1]));
  return out;
}

std::uint64_t context_seed(std::string_view key, std::span<const std::string> context) {
  Fnv1a64 h;
  h.update(key).update(std::uint8_t{0});
  for (const auto& t : context) h.update(t).update(std::uint8_t{0});
  return h.digest();
}

bool is_green_seeded(std::uint64_t seed, std::string_view candidate, double gamma) {
  const std::uint64_t h = Fnv1a64{}.update_be64(seed).update(candidate).digest();
  return static_cast<double>(h & 0xFFFFFFFFULL) / 4294967296.0 < gamma;
}

bool is_green(std::string_view key, std::span<const std::string> context, std::string_view candidate,
              double gamma) {
  return is_green_seeded(context_seed(key, context), candidate, gamma);
}

std::span<const std::string> hash_window(std::span<const std::string> context, int context_width) {
  const auto width = std::min<std::size_t>(context.size(), static_cast<std::size_t>(std::max(context_width - 1, 0)));
  return context.subspan(context.size() - width);
}

namespace {

bool blank_text(std::string_view t) {
  return t.empty() || std::all_of(t.begin(), t.end(), [](char c) {
           return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
         });
}

bool scoreable(std::string_view t) { return t != kEos && !blank_text(t); }

}  // namespace

Eigen::Array<bool, Eigen::Dynamic, 1> green_mask(const Distribution& d, std::string_view key,
                                                std::span<const std::string> window, double gamma) {
  const std::uint64_t seed = context_seed(key, window);
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d.token(i);
    mask[static_cast<Eigen::Index>(i)] = scoreable(t) && is_green_seeded(seed, t, gamma);
  }
  return mask;
}

Distribution bias_distribution(const Distribution& d, const Eigen::Array<bool, Eigen::Dynamic, 1>& green,
                               double delta) {
  if (green.size() != d.probs().size()) throw std::invalid_argument("green mask size mismatch");
  if (delta == 0.0) return d;
  // l' = ln p + delta * green, renormalized by log-sum-exp.
  Eigen::ArrayXd logits = d.probs().array().log() + delta * green.cast<double>();
  const double max_logit = logits.maxCoeff();
  Eigen::ArrayXd shifted = (logits - max_logit).exp();
  const double total = shifted.sum();
  return Distribution::trusted(d.shared_support(), (shifted / total).matrix());
}

Distribution bias_distribution(const Distribution& d, const std::function<bool(std::string_view)>& green,
                               double delta) {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) mask[static_cast<Eigen::Index>(i)] = green(d.token(i));
  return bias_distribution(d, mask, delta);
}

Generation generate_watermarked(const TokenSource& model, std::span<const std::string> prompt,
                                const WatermarkConfig& cfg, const CueList* cue_list, Rng& rng, int max_tokens,
                                const GenerateOptions& opts) {
  if (max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
  cfg.validate();
  if (cfg.scheme == Scheme::CodeAcrostic && cue_list == nullptr) throw std::invalid_argument("cue list required");
  const LanguageProfile& profile = opts.profile ? *opts.profile : LanguageProfile::python_like();

  std::vector<std::string> history(prompt.begin(), prompt.end());
  Generation out;
  for (int step = 0; step < max_tokens; ++step) {
    const std::string* prev = history.empty() ? nullptr : &history.back();
    const TokenKind prev_kind = prev ? classify(*prev, profile) : TokenKind::Other;
    const auto window = hash_window(history, cfg.context_width);

    // A line comment swallows the rest of its line, so the next token must be a line break.
    if (prev && prev_kind == TokenKind::Comment && profile.is_line_comment(*prev)) {
      GenerationStep s{"\n", false, is_green(cfg.key, window, "\n", cfg.gamma), true};
      out.tokens.push_back(s.token);
      out.steps.push_back(std::move(s));
      history.emplace_back("\n");
      continue;
    }

    Distribution d = model.next_distribution(history);
    bool gate = false;
    switch (cfg.scheme) {
      case Scheme::KGW:
      case Scheme::EWD: gate = true; break;
      case Scheme::CodeAcrostic: gate = prev != nullptr && is_cue(*cue_list, *prev, prev_kind); break;
      case Scheme::SWEET: gate = entropy(d) >= cfg.sweet_entropy_threshold; break;
    }
    if (gate && cfg.delta != 0.0) d = bias_distribution(d, green_mask(d, cfg.key, window, cfg.gamma), cfg.delta);

    const std::string& tok = sample(d, rng, opts.sampling);
    if (tok == kEos) {
      out.reached_eos = true;
      break;
    }
    GenerationStep s{tok, gate, scoreable(tok) && is_green(cfg.key, window, tok, cfg.gamma), false};
    out.tokens.push_back(tok);
    out.steps.push_back(std::move(s));
    history.push_back(tok);
  }
  return out;
}

double z_score(double green_hits, double T, double gamma) {
  return (green_hits - gamma * T) / std::sqrt(T * gamma * (1.0 - gamma));
}

double weighted_z_score(double weighted_hits, double weighted_T, double weighted_sq, double gamma) {
  return (weighted_hits - gamma * weighted_T) / std::sqrt(gamma * (1.0 - gamma) * weighted_sq);
}

DetectionReport detect(std::span<const Token> tokens, const WatermarkConfig& cfg, const CueList* cue_list,
                       const TokenSource* model, const DetectOptions& opts) {
  cfg.validate();
  if ((cfg.scheme == Scheme::SWEET || cfg.scheme == Scheme::EWD) && model == nullptr) {
    throw std::invalid_argument(std::string(to_string(cfg.scheme)) + " detection requires a model");
  }
  if (cfg.scheme == Scheme::CodeAcrostic && cue_list == nullptr) throw std::invalid_argument("cue list required");
  if (opts.scope_mask && opts.scope_mask->size() != tokens.size()) {
    throw std::invalid_argument("scope mask size mismatch");
  }

  std::vector<std::size_t> positions;
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_blank(tokens[i].kind)) continue;
    positions.push_back(i);
    texts.push_back(tokens[i].text);
  }

  DetectionReport r;
  r.scheme = cfg.scheme;
  r.gamma = cfg.gamma;
  r.z_threshold = cfg.z_threshold;
  if (opts.with_trace) r.trace.emplace();

  const std::span<const std::string> all(texts);
  for (std::size_t j = 1; j < texts.size(); ++j) {
    const Token& prev = tokens[positions[j - 1]];
    double weight = 1.0;
    bool in_scope = true;
    switch (cfg.scheme) {
      case Scheme::KGW: break;
      case Scheme::CodeAcrostic: in_scope = is_cue(*cue_list, prev); break;
      case Scheme::SWEET: in_scope = entropy(model->next_distribution(all.first(j))) >= cfg.sweet_entropy_threshold; break;
      case Scheme::EWD: weight = entropy(model->next_distribution(all.first(j))); break;
    }
    if (opts.scope_mask && !(*opts.scope_mask)[positions[j]]) in_scope = false;
    if (tokens[positions[j]].kind == TokenKind::Newline && positions[j] == positions[j - 1] + 1 &&
        prev.kind == TokenKind::Comment && opts.profile->is_line_comment(prev.text)) {
      in_scope = false;
    }
    const bool green = in_scope && is_green(cfg.key, hash_window(all.first(j), cfg.context_width), texts[j], cfg.gamma);
    if (in_scope) {
      ++r.T;
      r.green_hits += green ? 1 : 0;
      r.weighted_T += weight;
      r.weighted_hits += green ? weight : 0.0;
      r.weighted_sq += weight * weight;
    }
    if (r.trace) r.trace->push_back(TraceEntry{positions[j], in_scope, green, in_scope ? weight : 0.0});
  }

  const bool weighted = cfg.scheme == Scheme::EWD;
  r.insufficient_scope = r.T == 0 || (weighted && r.weighted_sq <= 0.0);
  if (!r.insufficient_scope) r.z = recompute_z(r);
  r.verdict = !r.insufficient_scope && r.z > r.z_threshold;
  return r;
}

double recompute_z(const DetectionReport& report) {
  if (report.T == 0) throw std::invalid_argument("z is undefined for an empty scope");
  if (report.scheme == Scheme::EWD) {
    return weighted_z_score(report.weighted_hits, report.weighted_T, report.weighted_sq, report.gamma);
  }
  return z_score(static_cast<double>(report.green_hits), static_cast<double>(report.T), report.gamma);
}

bool consistent(const DetectionReport& report) {
  if (report.green_hits < 0 || report.green_hits > report.T) return false;
  if (report.insufficient_scope) return report.z == 0.0 && !report.verdict;
  const double z = recompute_z(report);
  return std::abs(z - report.z) <= 1e-12 && report.verdict == (report.z > report.z_threshold);
}

nlohmann::json to_json(const DetectionReport& r) {
  nlohmann::json j;
  j["scheme"] = std::string(to_string(r.scheme));
  j["gamma"] = r.gamma;
  j["z_threshold"] = r.z_threshold;
  j["T"] = r.T;
  j["green_hits"] = r.green_hits;
  j["weighted_T"] = r.weighted_T;
  j["weighted_hits"] = r.weighted_hits;
  j["weighted_sq"] = r.weighted_sq;
  j["z"] = r.z;
  j["verdict"] = r.verdict;
  j["insufficient_scope"] = r.insufficient_scope;
  if (r.trace) {
    auto& arr = j["trace"] = nlohmann::json::array();
    for (const auto& e : *r.trace) {
      arr.push_back({{"position", e.position}, {"in_scope", e.in_scope}, {"green", e.green}, {"weight", e.weight}});
    }
  }
  return j;
}

DetectionReport report_from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.scheme = parse_scheme(j.at("scheme").get<std::string>());
  r.gamma = j.at("gamma").get<double>();
  r.z_threshold = j.at("z_threshold").get<double>();
  r.T = j.at("T").get<std::int64_t>();
  r.green_hits = j.at("green_hits").get<std::int64_t>();
  r.weighted_T = j.at("weighted_T").get<double>();
  r.weighted_hits = j.at("weighted_hits").get<double>();
  r.weighted_sq = j.at("weighted_sq").get<double>();
  r.z = j.at("z").get<double>();
  r.verdict = j.at("verdict").get<bool>();
  r.insufficient_scope = j.at("insufficient_scope").get<bool>();
  if (j.contains("trace")) {
    r.trace.emplace();
    for (const auto& e : j["trace"]) {
      r.trace->push_back(TraceEntry{e.at("position").get<std::size_t>(), e.at("in_scope").get<bool>(),
                                    e.at("green").get<bool>(), e.at("weight").get<double>()});
    }
  }
  return r;
}

}  // namespace acrostic
