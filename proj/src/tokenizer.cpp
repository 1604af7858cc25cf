#include "acrostic/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace acrostic {

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::Number: return "Number";
    case TokenKind::StringLiteral: return "StringLiteral";
    case TokenKind::Comment: return "Comment";
    case TokenKind::Operator: return "Operator";
    case TokenKind::Newline: return "Newline";
    case TokenKind::Whitespace: return "Whitespace";
    case TokenKind::Other: return "Other";
  }
  return "Other";
}

namespace {

template <typename T, typename Key>
void sort_longest_first(std::vector<T>& items, Key key) {
  std::stable_sort(items.begin(), items.end(),
                   [&](const T& a, const T& b) { return key(a).size() > key(b).size(); });
}

}  // namespace

LanguageProfile::LanguageProfile(std::string name, std::vector<std::string> line_comment_markers,
                                 std::vector<Delimiters> block_comment_delimiters,
                                 std::vector<std::string> string_delimiters)
    : name_(std::move(name)),
      line_markers_(std::move(line_comment_markers)),
      block_delims_(std::move(block_comment_delimiters)),
      string_delims_(std::move(string_delimiters)) {
  for (const auto& [open, close] : block_delims_) {
    if (open.empty() || close.empty()) {
      throw std::invalid_argument("block comment delimiters must be non-empty");
    }
  }
  auto drop_empty = [](std::vector<std::string>& v) {
    std::erase_if(v, [](const std::string& s) { return s.empty(); });
  };
  drop_empty(line_markers_);
  drop_empty(string_delims_);
  sort_longest_first(line_markers_, [](const std::string& s) -> const std::string& { return s; });
  sort_longest_first(string_delims_, [](const std::string& s) -> const std::string& { return s; });
  sort_longest_first(block_delims_, [](const Delimiters& d) -> const std::string& { return d.first; });
}

const LanguageProfile& LanguageProfile::python_like() {
  static const LanguageProfile profile("python-like", {"#"},
                                       {{"\"\"\"", "\"\"\""}, {"'''", "'''"}}, {"\"", "'"});
  return profile;
}

const LanguageProfile& LanguageProfile::c_like() {
  static const LanguageProfile profile("c-like", {"//"}, {{"/*", "*/"}}, {"\"", "'"});
  return profile;
}

const LanguageProfile& LanguageProfile::builtin(std::string_view name) {
  if (name == python_like().name()) return python_like();
  if (name == c_like().name()) return c_like();
  throw std::invalid_argument("unknown language profile: " + std::string(name));
}

LanguageProfile LanguageProfile::parse(std::string_view config_text) {
  std::string name;
  std::vector<std::string> line_markers;
  std::vector<Delimiters> blocks;
  std::vector<std::string> strings;

  std::istringstream in{std::string(config_text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("profile line " + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "name") {
      name = value;
    } else if (key == "line_comment") {
      line_markers.push_back(value);
    } else if (key == "string_delimiter") {
      strings.push_back(value);
    } else if (key == "block_comment") {
      std::istringstream fields(value);
      std::string open, close, extra;
      if (!(fields >> open >> close) || (fields >> extra)) {
        throw std::invalid_argument("profile line " + std::to_string(line_no) +
                                    ": block_comment takes an opener and a closer");
      }
      blocks.emplace_back(open, close);
    } else {
      throw std::invalid_argument("profile line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }
  if (name.empty()) throw std::invalid_argument("profile has no name");
  return LanguageProfile(std::move(name), std::move(line_markers), std::move(blocks), std::move(strings));
}

LanguageProfile LanguageProfile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open profile " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool LanguageProfile::is_line_comment(std::string_view comment_text) const {
  return std::any_of(line_markers_.begin(), line_markers_.end(),
                     [&](const std::string& m) { return comment_text.starts_with(m); });
}

namespace {

bool is_ident_start(unsigned char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool is_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(unsigned char c) { return is_ident_start(c) || is_digit(c); }
bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

bool is_punct(unsigned char c) {
  static constexpr std::string_view table = "!\"#$%&'()*+,-./:;<=>?@[\\]^`{|}~";
  return table.find(static_cast<char>(c)) != std::string_view::npos;
}

class Lexer {
 public:
  Lexer(std::string_view src, const LanguageProfile& profile) : src_(src), profile_(profile) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      const std::size_t begin = pos_;
      const TokenKind kind = lex_one();
      out.push_back(Token{std::string(src_.substr(begin, pos_ - begin)), kind, begin, pos_});
    }
    return out;
  }

 private:
  bool at(std::string_view s, std::size_t p) const { return src_.substr(p).starts_with(s); }

  // Opener of a comment or string starting at p, if any.
  bool opens_special(std::size_t p) const {
    for (const auto& [open, close] : profile_.block_comment_delimiters())
      if (at(open, p)) return true;
    for (const auto& m : profile_.line_comment_markers())
      if (at(m, p)) return true;
    for (const auto& d : profile_.string_delimiters())
      if (at(d, p)) return true;
    return false;
  }

  TokenKind lex_one() {
    for (const auto& [open, close] : profile_.block_comment_delimiters()) {
      if (at(open, pos_)) {
        const auto stop = src_.find(close, pos_ + open.size());
        pos_ = stop == std::string_view::npos ? src_.size() : stop + close.size();
        return TokenKind::Comment;
      }
    }
    for (const auto& m : profile_.line_comment_markers()) {
      if (at(m, pos_)) {
        auto stop = src_.find('\n', pos_ + m.size());
        if (stop == std::string_view::npos) {
          stop = src_.size();
        } else if (stop > pos_ + m.size() && src_[stop - 1] == '\r') {
          --stop;
        }
        pos_ = stop;
        return TokenKind::Comment;
      }
    }
    for (const auto& d : profile_.string_delimiters()) {
      if (at(d, pos_)) {
        std::size_t p = pos_ + d.size();
        while (p < src_.size() && !at(d, p)) p += (src_[p] == '\\' && p + 1 < src_.size()) ? 2 : 1;
        pos_ = p < src_.size() ? p + d.size() : src_.size();
        return TokenKind::StringLiteral;
      }
    }

    const auto c = static_cast<unsigned char>(src_[pos_]);
    if (c == '\n') {
      ++pos_;
      return TokenKind::Newline;
    }
    if (c == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') {
      pos_ += 2;
      return TokenKind::Newline;
    }
    if (is_space(c)) {
      while (pos_ < src_.size() && is_space(static_cast<unsigned char>(src_[pos_])) &&
             !at("\r\n", pos_))
        ++pos_;
      return TokenKind::Whitespace;
    }
    if (is_ident_start(c)) {
      while (pos_ < src_.size() && is_ident_char(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return TokenKind::Identifier;
    }
    if (is_digit(c)) {
      while (pos_ < src_.size() && is_digit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' && is_digit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        ++pos_;
        while (pos_ < src_.size() && is_digit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      }
      return TokenKind::Number;
    }
    if (is_punct(c)) {
      ++pos_;
      while (pos_ < src_.size() && is_punct(static_cast<unsigned char>(src_[pos_])) && !opens_special(pos_))
        ++pos_;
      return TokenKind::Operator;
    }
    // One UTF-8 sequence (or one stray byte).
    ++pos_;
    if (c >= 0xC0) {
      while (pos_ < src_.size() && (static_cast<unsigned char>(src_[pos_]) & 0xC0) == 0x80) ++pos_;
    }
    return TokenKind::Other;
  }

  std::string_view src_;
  const LanguageProfile& profile_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source, const LanguageProfile& profile) {
  return Lexer(source, profile).run();
}

std::string detokenize(std::span<const Token> tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

TokenKind classify(std::string_view text, const LanguageProfile& profile) {
  const auto toks = tokenize(text, profile);
  return toks.size() == 1 ? toks.front().kind : TokenKind::Other;
}

std::vector<std::string> content_texts(std::span<const Token> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens)
    if (!is_blank(t.kind)) out.push_back(t.text);
  return out;
}

std::string render(std::span<const std::string> texts, const LanguageProfile& profile) {
  std::string out;
  bool line_start = true;
  bool open_line_comment = false;
  for (const auto& text : texts) {
    const bool newline = text == "\n" || text == "\r\n";
    if (open_line_comment && !newline) {
      out += '\n';
      line_start = true;
    }
    if (!line_start && !newline) out += ' ';
    out += text;
    line_start = newline;
    open_line_comment = !newline && profile.is_line_comment(text);
  }
  return out;
}

}  // namespace acrostic
