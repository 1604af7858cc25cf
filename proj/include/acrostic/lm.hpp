#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "acrostic/tokenizer.hpp"

namespace acrostic {

/// Reserved end-of-sequence token. The lexer can never produce it as one token.
inline constexpr std::string_view kEos = "<eos>";

using Vocabulary = std::vector<std::string>;

/// Next-token distribution. The support is shared between distributions
/// drawn from the same model, so copies are cheap.
class Distribution {
 public:
  Distribution() = default;
  /// Validates: no duplicate support entries, probs >= 0, sum within `tolerance` of 1.
  /// Throws std::invalid_argument("invalid distribution"). The result is renormalized.
  Distribution(std::shared_ptr<const Vocabulary> support, Eigen::VectorXd probs, double tolerance = 1e-9);

  /// Skips validation; `probs` must already satisfy the invariants.
  static Distribution trusted(std::shared_ptr<const Vocabulary> support, Eigen::VectorXd probs);

  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
  const Vocabulary& support() const { return *support_; }
  const std::shared_ptr<const Vocabulary>& shared_support() const { return support_; }
  const Eigen::VectorXd& probs() const { return probs_; }
  const std::string& token(std::size_t i) const { return (*support_)[i]; }
  double prob(std::size_t i) const { return probs_[static_cast<Eigen::Index>(i)]; }
  /// Probability of `text`, zero when outside the support. Linear scan.
  double prob_of(std::string_view text) const;

 private:
  std::shared_ptr<const Vocabulary> support_ = std::make_shared<const Vocabulary>();
  Eigen::VectorXd probs_;
};

/// Shannon entropy in nats; 0 * ln 0 is taken as 0.
double entropy(const Distribution& d);

/// Deterministic 64-bit generator with a platform-independent unit draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

/// Mixes a base seed with a stream index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

struct SamplingOptions {
  double temperature = 1.0;
  /// Argmax; ties go to the lexicographically smallest token text.
  bool greedy = false;
};

/// Index of the drawn support entry. Draws from p^(1/temperature), renormalized.
std::size_t sample_index(const Distribution& d, Rng& rng, const SamplingOptions& opts = {});
const std::string& sample(const Distribution& d, Rng& rng, const SamplingOptions& opts = {});

/// Anything that serves next-token distributions over lexical token texts.
class TokenSource {
 public:
  virtual ~TokenSource() = default;
  virtual Distribution next_distribution(std::span<const std::string> context) const = 0;
};

/// Order-n token model with add-alpha smoothing over the vocabulary.
///
/// Counts are kept for every context length 0..order-1, so a context shorter
/// than order-1 (sequence start) is served from its own counts. A context that
/// was never observed yields the uniform distribution over the vocabulary.
class NGramModel final : public TokenSource {
 public:
  struct Successors {
    std::uint64_t total = 0;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> counts;  // sorted by token id
  };

  /// `vocab` must be sorted and unique; `contexts` is keyed by pack_ids() of the context.
  NGramModel(int order, double alpha, Vocabulary vocab,
             std::unordered_map<std::string, Successors> contexts);

  static std::string pack_ids(std::span<const std::uint32_t> ids);

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const Vocabulary& vocab() const { return *vocab_; }
  std::size_t context_count() const { return contexts_.size(); }

  Distribution next_distribution(std::span<const std::string> context) const override;

  /// Text serialization; identical models produce identical bytes.
  std::string serialize() const;
  static NGramModel parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static NGramModel load(const std::filesystem::path& path);

 private:
  std::string context_key(std::span<const std::string> context) const;

  int order_;
  double alpha_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::unordered_map<std::string, std::uint32_t> index_;
  // Key: token ids of the context joined as fixed-width bytes.
  std::unordered_map<std::string, Successors> contexts_;
};

/// Trains on the non-Whitespace tokens of each sequence, each terminated by kEos.
/// Throws std::invalid_argument on order < 1, alpha <= 0, or an empty corpus.
NGramModel train_ngram(std::span<const std::vector<Token>> corpus, int order = 3, double alpha = 0.01);

}  // namespace acrostic
