#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "acrostic/cue_list.hpp"
#include "acrostic/lm.hpp"
#include "acrostic/tokenizer.hpp"

namespace acrostic {

enum class Scheme { KGW, SWEET, EWD, CodeAcrostic };

std::string_view to_string(Scheme s);
/// Accepts kgw, sweet, ewd, ca / codeacrostic (case-insensitive).
Scheme parse_scheme(std::string_view s);

struct WatermarkConfig {
  Scheme scheme = Scheme::KGW;
  double gamma = 0.5;
  double delta = 4.0;
  /// Green lists are seeded by the previous context_width - 1 tokens.
  int context_width = 2;
  std::string key;
  double sweet_entropy_threshold = 1.0;
  double z_threshold = 2.0;

  /// Throws std::invalid_argument when gamma is outside (0, 1), delta < 0,
  /// context_width < 1, or the key is empty.
  void validate() const;
};

/// Decodes a hex key ("a1b2..."); throws std::invalid_argument on bad input.
std::string parse_hex_key(std::string_view hex);

// == Green list ==

/// FNV-1a-64 over key || 0x00 || (context token || 0x00)...
std::uint64_t context_seed(std::string_view key, std::span<const std::string> context);
bool is_green_seeded(std::uint64_t seed, std::string_view candidate, double gamma);
bool is_green(std::string_view key, std::span<const std::string> context, std::string_view candidate,
              double gamma);

/// The last min(width - 1, context.size()) entries of `context`.
std::span<const std::string> hash_window(std::span<const std::string> context, int context_width);

/// Green mask over a distribution's support. kEos and blank tokens are never green.
Eigen::Array<bool, Eigen::Dynamic, 1> green_mask(const Distribution& d, std::string_view key,
                                                std::span<const std::string> window, double gamma);

// == Biasing ==

/// Adds `delta` to the log-probability of green entries and renormalizes.
Distribution bias_distribution(const Distribution& d, const Eigen::Array<bool, Eigen::Dynamic, 1>& green,
                               double delta);
Distribution bias_distribution(const Distribution& d, const std::function<bool(std::string_view)>& green,
                               double delta);

// == Generation ==

struct GenerationStep {
  std::string token;
  bool gated = false;   ///< bias was applied at this step
  bool green = false;   ///< token is green under the step's hash context
  bool forced = false;  ///< inserted layout token (line break after a line comment)
};

struct Generation {
  std::vector<std::string> tokens;
  std::vector<GenerationStep> steps;
  bool reached_eos = false;
};

struct GenerateOptions {
  SamplingOptions sampling;
  const LanguageProfile* profile = &LanguageProfile::python_like();
};

/// Autoregressive sampling with the scheme's gate deciding, step by step,
/// whether the green bias applies. Returns only the generated tokens.
///
/// Gates: KGW and EWD always; CodeAcrostic when the previous token is a cue;
/// SWEET when the model's next-token entropy reaches the threshold.
/// Throws std::invalid_argument on max_tokens <= 0, or "cue list required"
/// for CodeAcrostic without a cue list.
Generation generate_watermarked(const TokenSource& model, std::span<const std::string> prompt,
                                const WatermarkConfig& cfg, const CueList* cue_list, Rng& rng, int max_tokens,
                                const GenerateOptions& opts = {});

// == Detection ==

struct TraceEntry {
  std::size_t position = 0;  ///< index into the input token sequence
  bool in_scope = false;
  bool green = false;
  double weight = 0.0;
};

struct DetectionReport {
  Scheme scheme = Scheme::KGW;
  double gamma = 0.5;
  double z_threshold = 2.0;
  std::int64_t T = 0;
  std::int64_t green_hits = 0;
  /// Weighted sums; for unweighted schemes these equal T, green_hits and T.
  double weighted_T = 0.0;
  double weighted_hits = 0.0;
  double weighted_sq = 0.0;
  double z = 0.0;
  bool verdict = false;
  bool insufficient_scope = true;
  std::optional<std::vector<TraceEntry>> trace;
};

struct DetectOptions {
  /// Per input token; positions with `false` are out of scope.
  const std::vector<bool>* scope_mask = nullptr;
  bool with_trace = false;
  /// Identifies line comments; the newline closing one is never scored.
  const LanguageProfile* profile = &LanguageProfile::python_like();
};

double z_score(double green_hits, double T, double gamma);
double weighted_z_score(double weighted_hits, double weighted_T, double weighted_sq, double gamma);

/// Scores every content position i >= 1 in scope for the scheme and returns
/// the z statistic. A newline that closes a line comment is forced by the
/// syntax and is skipped, matching generation. SWEET and EWD need `model`; CodeAcrostic needs `cue_list`.
DetectionReport detect(std::span<const Token> tokens, const WatermarkConfig& cfg, const CueList* cue_list,
                       const TokenSource* model, const DetectOptions& opts = {});

/// z from the stored counts; throws std::invalid_argument when T == 0.
double recompute_z(const DetectionReport& report);
/// True when the stored z and verdict agree with the stored counts.
bool consistent(const DetectionReport& report);

nlohmann::json to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& j);

}  // namespace acrostic
