#include "acrostic/cue_list.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "acrostic/hash.hpp"

namespace acrostic {

std::uint64_t PairCounts::count(std::string_view predecessor, std::string_view successor) const {
  const auto row = counts.find(std::string(predecessor));
  if (row == counts.end()) return 0;
  const auto cell = row->second.find(std::string(successor));
  return cell == row->second.end() ? 0 : cell->second;
}

void PairCounts::add_sequence(std::span<const Token> tokens) {
  const Token* prev = nullptr;
  for (const auto& tok : tokens) {
    if (is_blank(tok.kind)) continue;
    ++corpus_size;
    if (tok.kind == TokenKind::Comment) comment_texts.insert(tok.text);
    if (prev != nullptr) {
      ++counts[prev->text][tok.text];
      ++totals[prev->text];
    }
    prev = &tok;
  }
}

void PairCounts::merge(const PairCounts& other) {
  for (const auto& [pred, row] : other.counts) {
    auto& mine = counts[pred];
    for (const auto& [succ, n] : row) mine[succ] += n;
  }
  for (const auto& [pred, n] : other.totals) totals[pred] += n;
  corpus_size += other.corpus_size;
  comment_texts.insert(other.comment_texts.begin(), other.comment_texts.end());
}

std::uint64_t corpus_fingerprint(std::span<const std::string> documents) {
  Fnv1a64 h;
  for (const auto& doc : documents) h.update(doc);
  return h.digest();
}

PairCounts count_cooccurrence(std::span<const std::vector<Token>> corpus) {
  PairCounts pc;
  for (const auto& seq : corpus) pc.add_sequence(seq);
  if (pc.corpus_size == 0) throw std::invalid_argument("empty corpus");
  return pc;
}

double successor_entropy(const PairCounts& pc, std::string_view token) {
  const auto total = pc.totals.find(std::string(token));
  if (total == pc.totals.end() || total->second == 0) {
    throw std::out_of_range("token has no successors");
  }
  // Sum in ascending count order so the result does not depend on hash-map layout.
  std::vector<std::uint64_t> ks;
  for (const auto& [succ, k] : pc.counts.at(total->first))
    if (k > 0) ks.push_back(k);
  std::sort(ks.begin(), ks.end());
  const double n = static_cast<double>(total->second);
  double h = 0.0;
  for (auto k : ks) {
    const double p = static_cast<double>(k) / n;
    h -= p * std::log(p);
  }
  return ks.size() == 1 ? 0.0 : h;
}

std::vector<std::pair<std::string, double>> successor_entropies(const PairCounts& pc) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(pc.totals.size());
  for (const auto& [tok, n] : pc.totals) {
    if (n == 0 || pc.comment_texts.contains(tok)) continue;
    out.emplace_back(tok, successor_entropy(pc, tok));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double entropy_percentile(const PairCounts& pc, double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0)) {
    throw std::invalid_argument("percentile must be within [0, 100]");
  }
  std::vector<double> values;
  for (const auto& [tok, h] : successor_entropies(pc)) values.push_back(h);
  if (values.empty()) throw std::invalid_argument("empty corpus");
  std::sort(values.begin(), values.end());
  const double rank = percentile / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
}

std::string_view to_string(CueDirection d) {
  return d == CueDirection::HighEntropyCue ? "high" : "low";
}

CueDirection parse_cue_direction(std::string_view s) {
  if (s == "high") return CueDirection::HighEntropyCue;
  if (s == "low") return CueDirection::LowEntropyCue;
  throw std::invalid_argument("cue direction must be high or low");
}

CueList::CueList(std::set<std::string> members, double beta, CueDirection direction,
                 std::uint64_t corpus_fingerprint)
    : members_(std::move(members)),
      lookup_(members_.begin(), members_.end()),
      beta_(beta),
      direction_(direction),
      fingerprint_(corpus_fingerprint) {
  if (members_.empty()) warning_ = "cue list is empty at this threshold";
}

bool CueList::operator==(const CueList& other) const {
  return members_ == other.members_ && beta_ == other.beta_ && direction_ == other.direction_ &&
         fingerprint_ == other.fingerprint_;
}

CueList build_cue_list(const PairCounts& pc, double beta, CueDirection direction,
                       std::uint64_t corpus_fingerprint) {
  if (!std::isfinite(beta)) throw std::invalid_argument("beta must be finite");
  if (pc.empty()) throw std::invalid_argument("empty corpus");
  std::set<std::string> members;
  for (const auto& [tok, h] : successor_entropies(pc)) {
    const bool take = direction == CueDirection::HighEntropyCue ? h >= beta : h < beta;
    if (take) members.insert(tok);
  }
  return CueList(std::move(members), beta, direction, corpus_fingerprint);
}

bool is_cue(const CueList& cl, std::string_view text, TokenKind kind) {
  if (kind == TokenKind::Comment || kind == TokenKind::Whitespace) return false;
  return cl.contains(text);
}

bool is_cue(const CueList& cl, const Token& token) { return is_cue(cl, token.text, token.kind); }

namespace {

bool unreserved(unsigned char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' ||
         c == '.' || c == '_' || c == '~';
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

[[noreturn]] void malformed() { throw std::runtime_error("malformed cue list file"); }

}  // namespace

std::string percent_encode(std::string_view raw) {
  static constexpr char digits[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(raw.size());
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (unreserved(c)) {
      out += ch;
    } else {
      out += '%';
      out += digits[c >> 4];
      out += digits[c & 0xF];
    }
  }
  return out;
}

std::string percent_decode(std::string_view encoded) {
  std::string out;
  out.reserve(encoded.size());
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (encoded[i] != '%') {
      out += encoded[i];
      continue;
    }
    if (i + 2 >= encoded.size()) {
      throw std::invalid_argument("truncated percent escape");
    }
    const int hi = hex_value(encoded[i + 1]);
    const int lo = hex_value(encoded[i + 2]);
    if (hi < 0 || lo < 0) throw std::invalid_argument("bad percent escape");
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::string serialize(const CueList& cl) {
  std::vector<std::string> lines;
  lines.reserve(cl.members().size());
  for (const auto& m : cl.members()) lines.push_back(percent_encode(m));
  std::sort(lines.begin(), lines.end());

  char header[160];
  std::snprintf(header, sizeof header, "beta=%.17g direction=%s fingerprint=%016llx count=%zu\n",
                cl.beta(), std::string(to_string(cl.direction())).c_str(),
                static_cast<unsigned long long>(cl.corpus_fingerprint()), lines.size());
  std::string out = "CUELIST v" + std::to_string(CueList::kVersion) + "\n" + header;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

CueList parse_cue_list(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) malformed();  // every line is newline-terminated
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.size() < 2 || !lines[0].starts_with("CUELIST v")) malformed();
  const std::string_view ver = lines[0].substr(9);
  if (ver.empty() || !std::all_of(ver.begin(), ver.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    malformed();
  }
  if (ver != std::to_string(CueList::kVersion)) throw std::runtime_error("unsupported version");

  double beta = 0.0;
  char dir[8] = {};
  unsigned long long fp = 0;
  std::size_t count = 0;
  int consumed = 0;
  const std::string header(lines[1]);
  if (std::sscanf(header.c_str(), "beta=%lf direction=%7s fingerprint=%16llx count=%zu%n", &beta, dir, &fp,
                  &count, &consumed) != 4 ||
      static_cast<std::size_t>(consumed) != header.size() || !std::isfinite(beta)) {
    malformed();
  }
  CueDirection direction;
  try {
    direction = parse_cue_direction(dir);
  } catch (const std::invalid_argument&) {
    malformed();
  }
  if (lines.size() != count + 2) malformed();

  std::set<std::string> members;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    try {
      members.insert(percent_decode(lines[i]));
    } catch (const std::invalid_argument&) {
      malformed();
    }
  }
  if (members.size() != count) malformed();
  return CueList(std::move(members), beta, direction, fp);
}

void save(const CueList& cl, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize(cl);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

CueList load_cue_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cue_list(buf.str());
}

}  // namespace acrostic
