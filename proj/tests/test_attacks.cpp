#include <doctest.h>

#include <random>

#include "acrostic/attacks.hpp"
#include "acrostic/eval.hpp"
#include "acrostic/watermark.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

const LanguageProfile& py() { return LanguageProfile::python_like(); }

std::vector<std::string> code_texts(std::span<const Token> tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens)
    if (t.kind != TokenKind::Comment && t.kind != TokenKind::Whitespace) out.push_back(t.text);
  return out;
}

WatermarkConfig kgw() {
  WatermarkConfig cfg;
  cfg.key = testing::kTestKey;
  return cfg;
}

/// Held-out sources, tokenized.
const std::vector<std::vector<Token>>& heldout() {
  static const auto docs = testing::tokenized(testing::data_dir() / "corpus" / "heldout");
  return docs;
}

}  // namespace

TEST_CASE("comment-free input is untouched") {
  const auto toks = tokenize("def f(x):\n    return x  +  1\n");
  const auto r = remove_comments(toks, py());
  CHECK(r.tokens == toks);
  CHECK(r.removed_count == 0);
  CHECK(r.removed_byte_fraction == 0.0);
}

TEST_CASE("trailing comment removal matches re-lexing the stripped source") {
  const auto r = remove_comments(tokenize("x = 1  # hi"), py());
  CHECK(r.removed_count == 1);
  CHECK(detokenize(r.tokens) == "x = 1");
  const auto relexed = tokenize("x = 1");
  REQUIRE(r.tokens.size() == relexed.size());
  for (std::size_t i = 0; i < relexed.size(); ++i) {
    CHECK(r.tokens[i].text == relexed[i].text);
    CHECK(r.tokens[i].kind == relexed[i].kind);
  }
  CHECK(r.removed_byte_fraction == doctest::Approx(6.0 / 11.0));
}

TEST_CASE("all-comment input") {
  const auto r = remove_comments(tokenize("# one"), py());
  CHECK(r.tokens.empty());
  CHECK(r.removed_byte_fraction == 1.0);
  const auto two = remove_comments(tokenize("# one\n# two\n"), py());
  CHECK(detokenize(two.tokens) == "\n\n");
  CHECK(two.removed_count == 2);
  CHECK(two.removed_byte_fraction == doctest::Approx(10.0 / 12.0));
}

TEST_CASE("leading indentation before a removed comment goes too; other whitespace stays") {
  CHECK(detokenize(remove_comments(tokenize("if x:\n    # note\n    y = 2\n"), py()).tokens) ==
        "if x:\n\n    y = 2\n");
  CHECK(detokenize(remove_comments(tokenize("a = 1 \n"), py()).tokens) == "a = 1 \n");
  CHECK(detokenize(remove_comments(tokenize("a /* c */ = 1;\n", LanguageProfile::c_like()), LanguageProfile::c_like()).tokens) == "a  = 1;\n");
  CHECK(detokenize(remove_comments(tokenize("def f():\n    \"\"\"doc\"\"\"\n    pass\n"), py()).tokens) ==
        "def f():\n\n    pass\n");
}

TEST_CASE("remove_comments is idempotent and keeps the code sequence on held-out files") {
  REQUIRE(!heldout().empty());
  for (const auto& toks : heldout()) {
    const auto once = remove_comments(toks, py());
    const auto twice = remove_comments(once.tokens, py());
    CHECK(twice.tokens == once.tokens);
    CHECK(twice.removed_count == 0);
    CHECK(once.removed_byte_fraction >= 0.0);
    CHECK(once.removed_byte_fraction <= 1.0);
    // Functionality proxy: the attacked source re-lexes to the same code tokens.
    CHECK(code_texts(tokenize(detokenize(once.tokens), py())) == code_texts(toks));
  }
}

TEST_CASE("code_only_mask") {
  const auto pure = tokenize("a = b(c)\n");
  for (std::size_t i = 0; i < pure.size(); ++i) CHECK(code_only_mask(pure)[i] == (pure[i].kind != TokenKind::Whitespace));

  const auto comments = tokenize("# a\n# b");
  const auto cm = code_only_mask(comments);
  CHECK(cm[0] == false);
  CHECK(cm[2] == false);

  const auto mixed = tokenize("x = 1  # one\n'''two'''\ny = 2 # three\n");
  const auto mask = code_only_mask(mixed);
  std::size_t falses_on_comments = 0;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    const bool want = mixed[i].kind != TokenKind::Comment && mixed[i].kind != TokenKind::Whitespace;
    CHECK(mask[i] == want);
    falses_on_comments += mixed[i].kind == TokenKind::Comment && !mask[i];
  }
  CHECK(falses_on_comments == 3);
}

TEST_CASE("normalize_whitespace") {
  const auto single = tokenize("a = b\n  c = d\n");
  CHECK(normalize_whitespace(single).tokens == single);
  CHECK(normalize_whitespace(single).removed_count == 0);
  const auto r = normalize_whitespace(tokenize("a   b"));
  CHECK(detokenize(r.tokens) == "a b");
  CHECK(r.removed_count == 1);
  CHECK(r.removed_byte_fraction == doctest::Approx(2.0 / 5.0));
  CHECK(detokenize(normalize_whitespace(tokenize("    x  =\t1\n")).tokens) == "    x = 1\n");
}

TEST_CASE("whitespace normalization leaves KGW scores unchanged") {
  DetectOptions opts;
  opts.with_trace = true;
  for (const auto& toks : heldout()) {
    const auto before = detect(toks, kgw(), nullptr, nullptr, opts);
    const auto after = detect(normalize_whitespace(toks).tokens, kgw(), nullptr, nullptr, opts);
    CHECK(after.z == before.z);
    CHECK(after.T == before.T);
    REQUIRE(after.trace->size() == before.trace->size());
    for (std::size_t i = 0; i < before.trace->size(); ++i) {
      CHECK((*after.trace)[i].green == (*before.trace)[i].green);
      CHECK((*after.trace)[i].in_scope == (*before.trace)[i].in_scope);
    }
  }
}

TEST_CASE("code-only scope on the original agrees with detection after comment removal") {
  const auto& cues = testing::ToySetup::get().cues;
  for (Scheme scheme : {Scheme::KGW, Scheme::CodeAcrostic}) {
    auto cfg = kgw();
    cfg.scheme = scheme;
    for (const auto& toks : heldout()) {
      const auto mask = code_only_mask(toks);
      DetectOptions scoped;
      scoped.scope_mask = &mask;
      const auto masked = detect(toks, cfg, &cues, nullptr, scoped);
      const auto attacked = remove_comments(toks, py());
      const auto stripped = detect(attacked.tokens, cfg, &cues, nullptr);
      const auto bound = static_cast<std::int64_t>(attacked.removed_count);
      CHECK(std::abs(masked.T - stripped.T) <= bound);
      CHECK(std::abs(masked.green_hits - stripped.green_hits) <= bound);
      if (attacked.removed_count == 0) CHECK(masked.z == stripped.z);
    }
  }
}

TEST_CASE("attack dispatch") {
  CHECK(parse_attack_kind("comment-removal") == AttackKind::CommentRemoval);
  CHECK(parse_attack_kind("whitespace") == AttackKind::Whitespace);
  CHECK(parse_attack_kind("none") == AttackKind::None);
  CHECK_THROWS(parse_attack_kind("rename"));
  const auto toks = tokenize("a  = 1 # c\n");
  CHECK(apply_attack(AttackKind::None, toks, py()).tokens == toks);
  CHECK(detokenize(apply_attack(AttackKind::CommentRemoval, toks, py()).tokens) == "a  = 1\n");
  CHECK(detokenize(apply_attack(AttackKind::Whitespace, toks, py()).tokens) == "a = 1 # c\n");
  CHECK(to_string(AttackKind::CommentRemoval) == "comment-removal");
}

TEST_CASE("a removed comment leaves a space where its neighbours would otherwise merge") {
  const auto r = remove_comments(tokenize("print('''usage'''%sys.argv)"), py());
  CHECK(detokenize(r.tokens) == "print( %sys.argv)");
  CHECK(r.removed_byte_fraction == doctest::Approx(10.0 / 27.0));
  CHECK(detokenize(remove_comments(tokenize("a/*x*/b", LanguageProfile::c_like()), LanguageProfile::c_like()).tokens) ==
        "a b");
  CHECK(detokenize(remove_comments(tokenize("f(/*x*/1)", LanguageProfile::c_like()), LanguageProfile::c_like()).tokens) ==
        "f(1)");
}
