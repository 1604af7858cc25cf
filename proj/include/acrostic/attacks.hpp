#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "acrostic/tokenizer.hpp"

namespace acrostic {

/// Surviving tokens keep their original spans, so they are no longer contiguous.
struct AttackResult {
  std::vector<Token> tokens;
  std::size_t removed_count = 0;
  double removed_byte_fraction = 0.0;
};

/// Drops every Comment token, then any Whitespace left trailing on its line.
/// Where a dropped comment was the only thing between two tokens that would
/// lex as one, a single space (empty span) is left in its place.
/// removed_count counts comments only.
AttackResult remove_comments(std::span<const Token> tokens, const LanguageProfile& profile);

/// Collapses each run of whitespace between tokens on a line to one space.
/// Leading indentation is left alone. removed_count counts rewritten runs.
AttackResult normalize_whitespace(std::span<const Token> tokens);

/// True at non-Comment, non-Whitespace positions.
std::vector<bool> code_only_mask(std::span<const Token> tokens);

enum class AttackKind { None, CommentRemoval, Whitespace };

AttackKind parse_attack_kind(std::string_view s);
std::string_view to_string(AttackKind kind);

/// Dispatches on `kind`; None returns the input unchanged.
AttackResult apply_attack(AttackKind kind, std::span<const Token> tokens, const LanguageProfile& profile);

}  // namespace acrostic
