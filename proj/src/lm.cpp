#include "acrostic/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "acrostic/cue_list.hpp"

namespace acrostic {

Distribution::Distribution(std::shared_ptr<const Vocabulary> support, Eigen::VectorXd probs,
                           double tolerance)
    : support_(std::move(support)), probs_(std::move(probs)) {
  if (!support_ || static_cast<std::size_t>(probs_.size()) != support_->size()) {
    throw std::invalid_argument("invalid distribution");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& t : *support_)
    if (!seen.insert(t).second) throw std::invalid_argument("invalid distribution");
  if (probs_.size() == 0 || !probs_.allFinite() || (probs_.array() < 0.0).any()) {
    throw std::invalid_argument("invalid distribution");
  }
  const double total = probs_.sum();
  if (std::abs(total - 1.0) > tolerance) throw std::invalid_argument("invalid distribution");
  probs_ /= total;
}

Distribution Distribution::trusted(std::shared_ptr<const Vocabulary> support, Eigen::VectorXd probs) {
  Distribution d;
  d.support_ = std::move(support);
  d.probs_ = std::move(probs);
  return d;
}

double Distribution::prob_of(std::string_view text) const {
  for (std::size_t i = 0; i < support_->size(); ++i)
    if ((*support_)[i] == text) return prob(i);
  return 0.0;
}

double entropy(const Distribution& d) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < d.probs().size(); ++i) {
    const double p = d.probs()[i];
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::size_t sample_index(const Distribution& d, Rng& rng, const SamplingOptions& opts) {
  const auto& p = d.probs();
  if (p.size() == 0) throw std::invalid_argument("invalid distribution");
  if (opts.greedy) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i) {
      if (d.prob(i) > d.prob(best) || (d.prob(i) == d.prob(best) && d.token(i) < d.token(best))) best = i;
    }
    return best;
  }
  if (!(opts.temperature > 0.0)) throw std::invalid_argument("temperature must be positive");

  Eigen::VectorXd weights;
  const Eigen::VectorXd* w = &p;
  if (opts.temperature != 1.0) {
    const double max_log = p.maxCoeff() > 0.0 ? std::log(p.maxCoeff()) : 0.0;
    weights = ((p.array().log() - max_log) / opts.temperature).exp().matrix();
    w = &weights;
  }
  const double target = rng.uniform() * w->sum();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (Eigen::Index i = 0; i < w->size(); ++i) {
    if ((*w)[i] <= 0.0) continue;
    last_positive = static_cast<std::size_t>(i);
    acc += (*w)[i];
    if (target < acc) return static_cast<std::size_t>(i);
  }
  return last_positive;
}

const std::string& sample(const Distribution& d, Rng& rng, const SamplingOptions& opts) {
  return d.token(sample_index(d, rng, opts));
}

std::string NGramModel::pack_ids(std::span<const std::uint32_t> ids) {
  std::string key;
  key.reserve(ids.size() * 4);
  for (auto id : ids) {
    for (int b = 0; b < 4; ++b) key += static_cast<char>((id >> (8 * b)) & 0xFF);
  }
  return key;
}

NGramModel::NGramModel(int order, double alpha, Vocabulary vocab,
                       std::unordered_map<std::string, Successors> contexts)
    : order_(order),
      alpha_(alpha),
      vocab_(std::make_shared<const Vocabulary>(std::move(vocab))),
      contexts_(std::move(contexts)) {
  if (order_ < 1) throw std::invalid_argument("order must be >= 1");
  if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) throw std::invalid_argument("alpha must be > 0");
  if (vocab_->empty()) throw std::invalid_argument("empty vocabulary");
  for (std::uint32_t i = 0; i < vocab_->size(); ++i) {
    if (i > 0 && !((*vocab_)[i - 1] < (*vocab_)[i])) {
      throw std::invalid_argument("vocabulary must be sorted and unique");
    }
    index_.emplace((*vocab_)[i], i);
  }
}

std::string NGramModel::context_key(std::span<const std::string> context) const {
  const std::size_t width = std::min<std::size_t>(context.size(), static_cast<std::size_t>(order_ - 1));
  std::vector<std::uint32_t> ids;
  ids.reserve(width);
  for (const auto& text : context.subspan(context.size() - width)) {
    const auto it = index_.find(text);
    if (it == index_.end()) return {"\xff", 1};  // never a valid key: keys are multiples of 4 bytes
    ids.push_back(it->second);
  }
  return pack_ids(ids);
}

Distribution NGramModel::next_distribution(std::span<const std::string> context) const {
  const auto vocab_size = static_cast<Eigen::Index>(vocab_->size());
  const auto it = contexts_.find(context_key(context));
  if (it == contexts_.end()) {
    return Distribution::trusted(vocab_, Eigen::VectorXd::Constant(vocab_size, 1.0 / static_cast<double>(vocab_size)));
  }
  const Successors& s = it->second;
  const double denom = static_cast<double>(s.total) + alpha_ * static_cast<double>(vocab_size);
  Eigen::VectorXd probs = Eigen::VectorXd::Constant(vocab_size, alpha_ / denom);
  for (const auto& [id, count] : s.counts) probs[id] = (static_cast<double>(count) + alpha_) / denom;
  return Distribution::trusted(vocab_, std::move(probs));
}

namespace {

constexpr std::string_view kModelMagic = "NGRAM v1";

std::vector<std::uint32_t> unpack_ids(std::string_view key) {
  std::vector<std::uint32_t> ids(key.size() / 4);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(key[i * 4 + b])) << (8 * b);
    ids[i] = v;
  }
  return ids;
}

[[noreturn]] void bad_model() { throw std::runtime_error("malformed model file"); }

}  // namespace

std::string NGramModel::serialize() const {
  std::ostringstream out;
  char header[128];
  std::snprintf(header, sizeof header, "order=%d alpha=%.17g vocab=%zu contexts=%zu\n", order_, alpha_,
                vocab_->size(), contexts_.size());
  out << kModelMagic << '\n' << header;
  for (const auto& t : *vocab_) out << percent_encode(t) << '\n';

  std::map<std::vector<std::uint32_t>, const Successors*> ordered;
  for (const auto& [key, succ] : contexts_) ordered.emplace(unpack_ids(key), &succ);
  for (const auto& [ids, succ] : ordered) {
    out << ids.size();
    for (auto id : ids) out << ' ' << id;
    out << '\t';
    bool first = true;
    for (const auto& [id, count] : succ->counts) {
      out << (first ? "" : " ") << id << ':' << count;
      first = false;
    }
    out << '\n';
  }
  return out.str();
}

NGramModel NGramModel::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kModelMagic) bad_model();
  if (!std::getline(in, line)) bad_model();
  int order = 0;
  double alpha = 0.0;
  std::size_t vocab_size = 0, context_count = 0;
  if (std::sscanf(line.c_str(), "order=%d alpha=%lf vocab=%zu contexts=%zu", &order, &alpha, &vocab_size,
                  &context_count) != 4) {
    bad_model();
  }
  Vocabulary vocab;
  vocab.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    if (!std::getline(in, line)) bad_model();
    try {
      vocab.push_back(percent_decode(line));
    } catch (const std::invalid_argument&) {
      bad_model();
    }
  }
  std::unordered_map<std::string, Successors> contexts;
  for (std::size_t c = 0; c < context_count; ++c) {
    if (!std::getline(in, line)) bad_model();
    const auto tab = line.find('\t');
    if (tab == std::string::npos) bad_model();
    std::istringstream ctx(line.substr(0, tab));
    std::size_t width = 0;
    if (!(ctx >> width)) bad_model();
    std::vector<std::uint32_t> ids(width);
    for (auto& id : ids)
      if (!(ctx >> id) || id >= vocab_size) bad_model();
    Successors s;
    std::istringstream succ(line.substr(tab + 1));
    std::string cell;
    while (succ >> cell) {
      std::uint32_t id = 0;
      unsigned long long count = 0;
      if (std::sscanf(cell.c_str(), "%u:%llu", &id, &count) != 2 || id >= vocab_size) bad_model();
      s.counts.emplace_back(id, count);
      s.total += count;
    }
    contexts.emplace(pack_ids(ids), std::move(s));
  }
  return NGramModel(order, alpha, std::move(vocab), std::move(contexts));
}

void NGramModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize();
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

NGramModel train_ngram(std::span<const std::vector<Token>> corpus, int order, double alpha) {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");

  std::vector<std::vector<std::string>> sequences;
  std::set<std::string> vocab_set{std::string(kEos)};
  for (const auto& seq : corpus) {
    auto texts = content_texts(seq);
    if (texts.empty()) continue;
    vocab_set.insert(texts.begin(), texts.end());
    texts.emplace_back(kEos);
    sequences.push_back(std::move(texts));
  }
  if (sequences.empty()) throw std::invalid_argument("empty corpus");

  Vocabulary vocab(vocab_set.begin(), vocab_set.end());
  std::unordered_map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < vocab.size(); ++i) index.emplace(vocab[i], i);

  std::unordered_map<std::string, std::unordered_map<std::uint32_t, std::uint64_t>> raw;
  std::vector<std::uint32_t> ids;
  for (const auto& seq : sequences) {
    ids.clear();
    for (const auto& t : seq) ids.push_back(index.at(t));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::size_t max_width = std::min<std::size_t>(i, static_cast<std::size_t>(order - 1));
      for (std::size_t w = 0; w <= max_width; ++w) {
        ++raw[NGramModel::pack_ids(std::span(ids).subspan(i - w, w))][ids[i]];
      }
    }
  }

  std::unordered_map<std::string, NGramModel::Successors> contexts;
  contexts.reserve(raw.size());
  for (auto& [key, row] : raw) {
    NGramModel::Successors s;
    s.counts.assign(row.begin(), row.end());
    std::sort(s.counts.begin(), s.counts.end());
    for (const auto& [id, n] : s.counts) s.total += n;
    contexts.emplace(key, std::move(s));
  }
  return NGramModel(order, alpha, std::move(vocab), std::move(contexts));
}

}  // namespace acrostic
