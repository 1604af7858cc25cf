#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "acrostic/tokenizer.hpp"

namespace acrostic::oracle {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

inline bool green(const std::string& key, const std::vector<std::string>& ctx, const std::string& cand,
                  double gamma) {
  std::vector<unsigned char> a(key.begin(), key.end());
  a.push_back(0);
  for (const auto& c : ctx) {
    a.insert(a.end(), c.begin(), c.end());
    a.push_back(0);
  }
  const std::uint64_t seed = fnv(a);
  std::vector<unsigned char> b;
  for (int shift = 56; shift >= 0; shift -= 8) b.push_back(static_cast<unsigned char>(seed >> shift));
  b.insert(b.end(), cand.begin(), cand.end());
  const std::uint64_t h = fnv(b);
  return static_cast<double>(h % (1ULL << 32)) / 4294967296.0 < gamma;
}

/// The z statistic written out directly.
inline double z(double hits, double T, double gamma) {
  return (hits - gamma * T) / std::sqrt(T * gamma * (1.0 - gamma));
}

/// Brute-force cue list: recount adjacent non-blank pairs, recompute
/// entropies, threshold. Comment texts never qualify.
inline std::set<std::string> cue_members(const std::vector<std::vector<Token>>& corpus, double beta, bool high) {
  std::map<std::string, std::map<std::string, std::uint64_t>> pairs;
  std::set<std::string> comments;
  for (const auto& seq : corpus) {
    std::vector<const Token*> content;
    for (const auto& t : seq) {
      if (t.kind == TokenKind::Whitespace) continue;
      if (t.kind == TokenKind::Comment) comments.insert(t.text);
      content.push_back(&t);
    }
    for (std::size_t i = 0; i + 1 < content.size(); ++i) ++pairs[content[i]->text][content[i + 1]->text];
  }
  std::set<std::string> out;
  for (const auto& [pred, row] : pairs) {
    if (comments.contains(pred)) continue;
    std::vector<std::uint64_t> ks;
    std::uint64_t total = 0;
    for (const auto& [succ, k] : row) {
      ks.push_back(k);
      total += k;
    }
    std::sort(ks.begin(), ks.end());
    double h = 0.0;
    for (auto k : ks) {
      const double p = static_cast<double>(k) / static_cast<double>(total);
      h -= p * std::log(p);
    }
    if (ks.size() == 1) h = 0.0;
    if (high ? h >= beta : h < beta) out.insert(pred);
  }
  return out;
}

/// Random token corpus over a small vocabulary, with occasional comments and whitespace.
inline std::vector<std::vector<Token>> random_corpus(std::mt19937_64& rng, std::size_t max_tokens) {
  static const std::vector<std::string> words = {"a", "b", "c", "d", "e", "(", ")", "=", "1", "if", "x", "y"};
  std::uniform_int_distribution<std::size_t> n_docs(1, 4), word(0, words.size() - 1);
  std::uniform_int_distribution<int> kind(0, 19);
  std::vector<std::vector<Token>> corpus;
  const std::size_t docs = n_docs(rng);
  std::uniform_int_distribution<std::size_t> len(1, max_tokens / docs);
  for (std::size_t d = 0; d < docs; ++d) {
    std::vector<Token> seq;
    for (std::size_t i = len(rng); i > 0; --i) {
      const int k = kind(rng);
      if (k == 0) {
        seq.push_back(Token{"# c" + std::to_string(rng() % 3), TokenKind::Comment});
      } else if (k == 1) {
        seq.push_back(Token{" ", TokenKind::Whitespace});
      } else {
        seq.push_back(Token{words[word(rng)], TokenKind::Identifier});
      }
    }
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

/// Random valid UTF-8 mixing code-like fragments with arbitrary scalar values.
inline std::string random_utf8(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> pieces = {
      "a", "Z", "_", "7", ".", " ", "\t", "\n", "\r\n", "\r", "#", "\"", "'", "\"\"\"", "\\", "(", ")", "=", "+",
      "/*", "*/", "//", "{", "}", ":", ",", "\x01", "\xc3\xa9", "\xe2\x82\xac", "\xf0\x9f\x98\x80", "\xe6\x97\xa5"};
  std::uniform_int_distribution<std::size_t> len(0, max_len), pick(0, pieces.size() - 1);
  std::uniform_int_distribution<std::uint32_t> cp(0x20, 0x10FFFF);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng() % 5 == 0) {
      std::uint32_t c = cp(rng);
      if (c >= 0xD800 && c <= 0xDFFF) c = 0x41;
      if (c < 0x80) {
        s += static_cast<char>(c);
      } else if (c < 0x800) {
        s += static_cast<char>(0xC0 | (c >> 6));
        s += static_cast<char>(0x80 | (c & 0x3F));
      } else if (c < 0x10000) {
        s += static_cast<char>(0xE0 | (c >> 12));
        s += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (c & 0x3F));
      } else {
        s += static_cast<char>(0xF0 | (c >> 18));
        s += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
        s += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
        s += static_cast<char>(0x80 | (c & 0x3F));
      }
    } else {
      s += pieces[pick(rng)];
    }
  }
  return s;
}

/// P(marked > raw) + 0.5 P(tie), by exhaustive pair enumeration.
inline double auroc_pairs(const std::vector<double>& marked, const std::vector<double>& raw) {
  double s = 0.0;
  for (double m : marked)
    for (double r : raw) s += m > r ? 1.0 : (m == r ? 0.5 : 0.0);
  return s / static_cast<double>(marked.size() * raw.size());
}

}  // namespace acrostic::oracle
