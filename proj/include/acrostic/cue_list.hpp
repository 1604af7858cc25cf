#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "acrostic/tokenizer.hpp"

namespace acrostic {

/// Adjacent-pair statistics over a tokenized corpus. Whitespace tokens are
/// skipped; pairs never cross sequence boundaries.
struct PairCounts {
  /// predecessor -> successor -> count
  std::unordered_map<std::string, std::unordered_map<std::string, std::uint64_t>> counts;
  /// predecessor -> total successor count
  std::unordered_map<std::string, std::uint64_t> totals;
  /// Number of (non-Whitespace) tokens seen.
  std::uint64_t corpus_size = 0;
  /// Texts that occurred as Comment tokens; they are never cues.
  std::unordered_set<std::string> comment_texts;

  std::uint64_t count(std::string_view predecessor, std::string_view successor) const;
  bool empty() const { return totals.empty(); }

  void add_sequence(std::span<const Token> tokens);
  /// Counting is a commutative monoid: shards can be merged in any order.
  void merge(const PairCounts& other);
};

/// FNV-1a-64 over the documents' bytes, concatenated in order.
std::uint64_t corpus_fingerprint(std::span<const std::string> documents);

/// Throws std::invalid_argument("empty corpus") when no tokens are supplied.
PairCounts count_cooccurrence(std::span<const std::vector<Token>> corpus);

/// Shannon entropy (nats) of the successor distribution of `token`.
/// Throws std::out_of_range("token has no successors") for unseen tokens.
double successor_entropy(const PairCounts& pc, std::string_view token);

/// Entropies of every eligible predecessor (not a Comment text), sorted by token text.
std::vector<std::pair<std::string, double>> successor_entropies(const PairCounts& pc);

/// Linear-interpolated percentile (0..100) of the eligible successor entropies.
double entropy_percentile(const PairCounts& pc, double percentile);

enum class CueDirection {
  HighEntropyCue,  ///< members have entropy >= beta
  LowEntropyCue,   ///< members have entropy < beta
};

std::string_view to_string(CueDirection d);
CueDirection parse_cue_direction(std::string_view s);

/// Confidential set of cue tokens. Treat files holding one like key material.
class CueList {
 public:
  static constexpr int kVersion = 1;

  CueList() = default;
  CueList(std::set<std::string> members, double beta, CueDirection direction,
          std::uint64_t corpus_fingerprint);

  bool contains(std::string_view text) const { return lookup_.contains(std::string(text)); }
  const std::set<std::string>& members() const { return members_; }
  double beta() const { return beta_; }
  CueDirection direction() const { return direction_; }
  std::uint64_t corpus_fingerprint() const { return fingerprint_; }
  int version() const { return kVersion; }
  /// Non-empty when the threshold left no members.
  const std::string& warning() const { return warning_; }

  bool operator==(const CueList& other) const;

 private:
  std::set<std::string> members_;
  std::unordered_set<std::string> lookup_;
  double beta_ = 0.0;
  CueDirection direction_ = CueDirection::HighEntropyCue;
  std::uint64_t fingerprint_ = 0;
  std::string warning_;
};

/// Members are the eligible predecessors on the `direction` side of `beta`.
/// Throws std::invalid_argument on a non-finite beta or empty counts.
CueList build_cue_list(const PairCounts& pc, double beta,
                       CueDirection direction = CueDirection::HighEntropyCue,
                       std::uint64_t corpus_fingerprint = 0);

/// Membership; Comment and Whitespace tokens are never cues.
bool is_cue(const CueList& cl, std::string_view text, TokenKind kind);
bool is_cue(const CueList& cl, const Token& token);

std::string percent_encode(std::string_view raw);
/// Throws std::invalid_argument on a malformed escape.
std::string percent_decode(std::string_view encoded);

std::string serialize(const CueList& cl);
/// Throws std::runtime_error("malformed cue list file") or
/// std::runtime_error("unsupported version").
CueList parse_cue_list(std::string_view text);

void save(const CueList& cl, const std::filesystem::path& path);
CueList load_cue_list(const std::filesystem::path& path);

}  // namespace acrostic
