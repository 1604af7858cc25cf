#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace acrostic {

enum class TokenKind {
  Identifier,
  Number,
  StringLiteral,
  Comment,
  Operator,
  Newline,
  Whitespace,
  Other,
};

std::string_view to_string(TokenKind kind);

/// A lexical unit. `text` is the exact source substring at [begin, end).
struct Token {
  std::string text;
  TokenKind kind = TokenKind::Other;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Token&) const = default;
};

/// Comment and string syntax for one language family.
///
/// Block comments are tried before line comments, and both before string
/// delimiters; within each group the longest opener wins. Instances are
/// immutable once built.
class LanguageProfile {
 public:
  using Delimiters = std::pair<std::string, std::string>;

  /// Throws std::invalid_argument on an empty block-comment opener or closer.
  LanguageProfile(std::string name, std::vector<std::string> line_comment_markers,
                  std::vector<Delimiters> block_comment_delimiters,
                  std::vector<std::string> string_delimiters);

  /// `#` line comments, triple-quoted blocks as comments, ' and " strings.
  static const LanguageProfile& python_like();
  /// `//` line comments, `/* */` blocks, ' and " strings.
  static const LanguageProfile& c_like();
  /// Looks up a bundled profile by name; throws std::invalid_argument if unknown.
  static const LanguageProfile& builtin(std::string_view name);

  /// Parses the key-value profile format:
  ///
  ///     ; comment
  ///     name = python-like
  ///     line_comment = #
  ///     block_comment = """ """
  ///     string_delimiter = "
  ///
  /// Keys other than `name` may repeat.
  static LanguageProfile parse(std::string_view config_text);
  static LanguageProfile load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& line_comment_markers() const { return line_markers_; }
  const std::vector<Delimiters>& block_comment_delimiters() const { return block_delims_; }
  const std::vector<std::string>& string_delimiters() const { return string_delims_; }

  bool is_line_comment(std::string_view comment_text) const;

 private:
  std::string name_;
  std::vector<std::string> line_markers_;
  std::vector<Delimiters> block_delims_;
  std::vector<std::string> string_delims_;
};

/// Lossless lexer: concatenating the token texts reproduces `source`.
std::vector<Token> tokenize(std::string_view source,
                            const LanguageProfile& profile = LanguageProfile::python_like());

std::string detokenize(std::span<const Token> tokens);

/// Kind of a single token text, or Other if the text does not lex as exactly one token.
TokenKind classify(std::string_view text, const LanguageProfile& profile);

/// True for tokens that carry no content for scoring purposes.
inline bool is_blank(TokenKind kind) { return kind == TokenKind::Whitespace; }

/// Token texts with Whitespace tokens dropped.
std::vector<std::string> content_texts(std::span<const Token> tokens);

/// Lays generated token texts out as source text that re-lexes to the same
/// content tokens: a single space between tokens, nothing around newlines.
std::string render(std::span<const std::string> texts, const LanguageProfile& profile);

}  // namespace acrostic
