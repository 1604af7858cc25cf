#include <doctest.h>

#include <random>

#include "acrostic/tokenizer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

// Independent lexer for an alphabet without comments or strings:
// runs of one character class, with identifiers allowed to absorb digits.
std::vector<std::pair<std::string, TokenKind>> oracle_lex(const std::string& s) {
  auto cls = [](char c) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return 'a';
    if (std::isdigit(static_cast<unsigned char>(c))) return '0';
    if (c == ' ' || c == '\t') return ' ';
    if (c == '\n') return 'n';
    return '+';
  };
  std::vector<std::pair<std::string, TokenKind>> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char k = cls(s[i]);
    std::size_t j = i + 1;
    if (k == 'n') {
      out.emplace_back(s.substr(i, 1), TokenKind::Newline);
      i = j;
      continue;
    }
    while (j < s.size() && (cls(s[j]) == k || (k == 'a' && cls(s[j]) == '0'))) ++j;
    const TokenKind kind = k == 'a'   ? TokenKind::Identifier
                           : k == '0' ? TokenKind::Number
                           : k == ' ' ? TokenKind::Whitespace
                                      : TokenKind::Operator;
    out.emplace_back(s.substr(i, j - i), kind);
    i = j;
  }
  return out;
}

void check_partition(const std::string& s, const std::vector<Token>& toks) {
  std::size_t pos = 0;
  for (const auto& t : toks) {
    REQUIRE(t.begin == pos);
    REQUIRE(t.end > t.begin);
    REQUIRE(t.text == s.substr(t.begin, t.end - t.begin));
    pos = t.end;
  }
  REQUIRE(pos == s.size());
}

}  // namespace

TEST_CASE("empty input gives no tokens") {
  CHECK(tokenize("").empty());
  CHECK(detokenize({}).empty());
}

TEST_CASE("hand-lexed example") {
  const auto toks = tokenize("x = 1  # hi");
  const std::vector<std::pair<std::string, TokenKind>> want = {
      {"x", TokenKind::Identifier}, {" ", TokenKind::Whitespace}, {"=", TokenKind::Operator},
      {" ", TokenKind::Whitespace}, {"1", TokenKind::Number},     {"  ", TokenKind::Whitespace},
      {"# hi", TokenKind::Comment}};
  REQUIRE(toks.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(toks[i].text == want[i].first);
    CHECK(toks[i].kind == want[i].second);
  }
}

TEST_CASE("character-class oracle on random comment-free strings") {
  std::mt19937_64 rng(7);
  const std::string alphabet = "ab_Z019 \t\n+=()<>-*";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 40);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
    const auto toks = tokenize(s);
    const auto want = oracle_lex(s);
    REQUIRE(toks.size() == want.size());
    for (std::size_t i = 0; i < toks.size(); ++i) {
      CHECK(toks[i].text == want[i].first);
      CHECK(toks[i].kind == want[i].second);
    }
  }
}

TEST_CASE("numbers take at most one decimal point") {
  const auto toks = tokenize("1.5.2 3. 4");
  REQUIRE(toks.size() >= 3);
  CHECK(toks[0].text == "1.5");
  CHECK(toks[0].kind == TokenKind::Number);
  CHECK(toks[1].text == ".");
  CHECK(toks[2].text == "2");
  const auto t2 = tokenize("3.");
  REQUIRE(t2.size() == 2);
  CHECK(t2[0].text == "3");
  CHECK(t2[1].kind == TokenKind::Operator);
}

TEST_CASE("comments and strings are single tokens") {
  const std::string src = "a = \"x # y\" # tail\r\nb '''q'''\n\"\"\"doc\nstring\"\"\" c";
  const auto toks = tokenize(src);
  check_partition(src, toks);
  std::vector<std::string> comments, strings;
  for (const auto& t : toks) {
    if (t.kind == TokenKind::Comment) comments.push_back(t.text);
    if (t.kind == TokenKind::StringLiteral) strings.push_back(t.text);
  }
  CHECK(comments == std::vector<std::string>{"# tail", "'''q'''", "\"\"\"doc\nstring\"\"\""});
  CHECK(strings == std::vector<std::string>{"\"x # y\""});
}

TEST_CASE("escaped delimiters stay inside the string") {
  const auto toks = tokenize(R"(s = "a\"b" + 'c\'d')");
  std::vector<std::string> strings;
  for (const auto& t : toks)
    if (t.kind == TokenKind::StringLiteral) strings.push_back(t.text);
  CHECK(strings == std::vector<std::string>{R"("a\"b")", R"('c\'d')"});
}

TEST_CASE("unterminated comments and strings run to end of input") {
  auto last = [](std::string_view s, const LanguageProfile& p) { return tokenize(s, p).back(); };
  CHECK(last("x = \"abc", LanguageProfile::python_like()).text == "\"abc");
  CHECK(last("x \"\"\"never closed\n more", LanguageProfile::python_like()).kind == TokenKind::Comment);
  const Token t = last("int a; /* open\n still", LanguageProfile::c_like());
  CHECK(t.kind == TokenKind::Comment);
  CHECK(t.text == "/* open\n still");
}

TEST_CASE("c-like profile") {
  const std::string src = "int x = 1; // one\n/* two */ y /= 2;";
  const auto toks = tokenize(src, LanguageProfile::c_like());
  check_partition(src, toks);
  std::vector<std::string> comments, ops;
  for (const auto& t : toks) {
    if (t.kind == TokenKind::Comment) comments.push_back(t.text);
    if (t.kind == TokenKind::Operator) ops.push_back(t.text);
  }
  CHECK(comments == std::vector<std::string>{"// one", "/* two */"});
  CHECK(ops == std::vector<std::string>{"=", ";", "/=", ";"});
}

TEST_CASE("operators stop where a comment opens") {
  const auto toks = tokenize("a=//c", LanguageProfile::c_like());
  REQUIRE(toks.size() == 3);
  CHECK(toks[1].text == "=");
  CHECK(toks[2].text == "//c");
  const auto py = tokenize("f(x)#c");
  CHECK(py.back().text == "#c");
  CHECK(py[py.size() - 2].text == ")");
}

TEST_CASE("comment closure: every comment byte lies in one Comment token") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string s = oracle::random_utf8(rng, 30);
    const auto toks = tokenize(s, LanguageProfile::c_like());
    for (const auto& t : toks) {
      if (t.kind != TokenKind::Comment) continue;
      if (t.text.starts_with("//")) {
        CHECK(t.text.find('\n') == std::string::npos);
        CHECK((t.end == s.size() || s[t.end] == '\n' || s.compare(t.end, 2, "\r\n") == 0));
      } else {
        CHECK(t.text.starts_with("/*"));
        CHECK((t.end == s.size() || t.text.ends_with("*/")));
        CHECK(t.text.find("*/", 2) == (t.text.size() >= 4 && t.text.ends_with("*/") ? t.text.size() - 2
                                                                                     : std::string::npos));
      }
    }
  }
}

TEST_CASE("round trip over the bundled corpus") {
  const auto docs = read_corpus_dir(testing::data_dir() / "corpus");
  CHECK(docs.size() > 20);
  for (const auto& doc : docs) {
    for (const auto* p : {&LanguageProfile::python_like(), &LanguageProfile::c_like()}) {
      const auto toks = tokenize(doc, *p);
      check_partition(doc, toks);
      CHECK(detokenize(toks) == doc);
    }
  }
}

TEST_CASE("round trip over random UTF-8") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 2000; ++i) {
    const std::string s = oracle::random_utf8(rng, 60);
    const auto toks = tokenize(s);
    check_partition(s, toks);
    CHECK(toks == tokenize(s));
  }
}

TEST_CASE("multi-byte characters are single Other tokens") {
  const auto toks = tokenize("\xc3\xa9\xe2\x82\xac");
  REQUIRE(toks.size() == 2);
  CHECK(toks[0].kind == TokenKind::Other);
  CHECK(toks[0].text == "\xc3\xa9");
  CHECK(toks[1].text == "\xe2\x82\xac");
}

TEST_CASE("removing a comment token subtracts exactly its bytes") {
  const std::string src = "def f(x):  # note\n    return x  # done\n";
  auto toks = tokenize(src);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (toks[i].kind != TokenKind::Comment) continue;
    auto kept = toks;
    kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(i));
    std::string want = src;
    want.erase(toks[i].begin, toks[i].end - toks[i].begin);
    CHECK(detokenize(kept) == want);
  }
}

TEST_CASE("profiles parse from config text") {
  const auto p = LanguageProfile::parse(
      "; shell-ish\n"
      "name = sh\n"
      "line_comment = #\n"
      "block_comment = <# #>\n"
      "string_delimiter = \"\n");
  CHECK(p.name() == "sh");
  const auto toks = tokenize("echo <# x #> \"y\" # z", p);
  std::vector<TokenKind> kinds;
  for (const auto& t : toks)
    if (!is_blank(t.kind)) kinds.push_back(t.kind);
  CHECK(kinds == std::vector<TokenKind>{TokenKind::Identifier, TokenKind::Comment, TokenKind::StringLiteral,
                                        TokenKind::Comment});
  CHECK_THROWS(LanguageProfile::parse("line_comment = #\n"));
  CHECK_THROWS(LanguageProfile::parse("name = x\nblock_comment = /*\n"));
  CHECK_THROWS(LanguageProfile::parse("name = x\nbogus = 1\n"));
  CHECK_THROWS(LanguageProfile("x", {}, {{"", "*/"}}, {}));
  CHECK_THROWS(LanguageProfile::builtin("cobol"));
}

TEST_CASE("render separates tokens and closes line comments") {
  const std::vector<std::string> texts = {"x", "=", "1", "# c", "y", "\n", "z"};
  CHECK(render(texts, LanguageProfile::python_like()) == "x = 1 # c\ny\nz");
  const std::string text = "a = b\n# c\nd";
  CHECK(content_texts(tokenize(render(content_texts(tokenize(text)), LanguageProfile::python_like()))) ==
        content_texts(tokenize(text)));
}
