#include "acrostic/attacks.hpp"

#include <stdexcept>
#include <string>

namespace acrostic {

namespace {

std::size_t total_bytes(std::span<const Token> tokens) {
  std::size_t n = 0;
  for (const auto& t : tokens) n += t.text.size();
  return n;
}

double fraction(std::size_t removed, std::size_t total) {
  return total == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(total);
}

/// True when `a` directly followed by `b` would not lex back into the same two tokens.
bool would_merge(const Token& a, const Token& b, const LanguageProfile& profile) {
  const auto relexed = tokenize(a.text + b.text, profile);
  return relexed.size() != 2 || relexed[0].text != a.text;
}

}  // namespace

AttackResult remove_comments(std::span<const Token> tokens, const LanguageProfile& profile) {
  AttackResult out;
  std::size_t removed_bytes = 0;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind == TokenKind::Comment) {
      ++out.removed_count;
      removed_bytes += tokens[i].text.size();
    } else {
      kept.push_back(i);
    }
  }
  auto ends_line = [&](std::size_t next) {
    return next == tokens.size() || tokens[next].kind == TokenKind::Newline;
  };
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t i = kept[k];
    if (tokens[i].kind == TokenKind::Whitespace) {
      std::size_t next = k + 1;
      while (next < kept.size() && tokens[kept[next]].kind == TokenKind::Whitespace) ++next;
      const bool trailing_now = ends_line(next < kept.size() ? kept[next] : tokens.size());
      // Whitespace runs are maximal, so the original successor is never Whitespace.
      if (trailing_now && !ends_line(i + 1)) {
        removed_bytes += tokens[i].text.size();
        continue;
      }
    }
    // A removed comment may have been all that kept two tokens apart.
    if (!out.tokens.empty() && i > 0 && tokens[i - 1].kind == TokenKind::Comment &&
        out.tokens.back().kind != TokenKind::Whitespace && tokens[i].kind != TokenKind::Whitespace &&
        would_merge(out.tokens.back(), tokens[i], profile)) {
      out.tokens.push_back(Token{" ", TokenKind::Whitespace, tokens[i - 1].begin, tokens[i - 1].begin});
      --removed_bytes;
    }
    out.tokens.push_back(tokens[i]);
  }
  out.removed_byte_fraction = fraction(removed_bytes, total_bytes(tokens));
  return out;
}

AttackResult normalize_whitespace(std::span<const Token> tokens) {
  AttackResult out;
  std::size_t removed_bytes = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    Token t = tokens[i];
    const bool line_start = i == 0 || tokens[i - 1].kind == TokenKind::Newline;
    if (t.kind == TokenKind::Whitespace && !line_start && t.text != " ") {
      removed_bytes += t.text.size() - 1;
      t.text = " ";
      ++out.removed_count;
    }
    out.tokens.push_back(std::move(t));
  }
  out.removed_byte_fraction = fraction(removed_bytes, total_bytes(tokens));
  return out;
}

std::vector<bool> code_only_mask(std::span<const Token> tokens) {
  std::vector<bool> mask(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    mask[i] = tokens[i].kind != TokenKind::Comment && tokens[i].kind != TokenKind::Whitespace;
  }
  return mask;
}

AttackKind parse_attack_kind(std::string_view s) {
  if (s == "none" || s == "clean") return AttackKind::None;
  if (s == "comment-removal" || s == "comment-removed") return AttackKind::CommentRemoval;
  if (s == "whitespace") return AttackKind::Whitespace;
  throw std::invalid_argument("unknown attack kind: " + std::string(s));
}

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::None: return "none";
    case AttackKind::CommentRemoval: return "comment-removal";
    case AttackKind::Whitespace: return "whitespace";
  }
  return "none";
}

AttackResult apply_attack(AttackKind kind, std::span<const Token> tokens, const LanguageProfile& profile) {
  switch (kind) {
    case AttackKind::CommentRemoval: return remove_comments(tokens, profile);
    case AttackKind::Whitespace: return normalize_whitespace(tokens);
    case AttackKind::None: break;
  }
  return AttackResult{std::vector<Token>(tokens.begin(), tokens.end()), 0, 0.0};
}

}  // namespace acrostic
