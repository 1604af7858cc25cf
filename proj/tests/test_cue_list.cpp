#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "acrostic/cue_list.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

std::vector<Token> seq(std::initializer_list<const char*> texts) {
  std::vector<Token> out;
  for (const char* t : texts) out.push_back(Token{t, TokenKind::Identifier});
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("pair counts by brute-force enumeration") {
  const std::vector<std::vector<Token>> corpus = {seq({"a", "b", "a", "b", "a"})};
  const PairCounts pc = count_cooccurrence(corpus);
  CHECK(pc.count("a", "b") == 2);
  CHECK(pc.count("b", "a") == 2);
  CHECK(pc.totals.at("a") == 2);
  CHECK(pc.totals.at("b") == 2);
  CHECK(pc.corpus_size == 5);
}

TEST_CASE("single token gives no pairs, and pairs never cross sequences") {
  const std::vector<std::vector<Token>> one = {seq({"x"})};
  CHECK(count_cooccurrence(one).counts.empty());
  const std::vector<std::vector<Token>> two = {seq({"a", "b"}), seq({"b", "a"})};
  const PairCounts pc = count_cooccurrence(two);
  CHECK(pc.count("a", "b") == 1);
  CHECK(pc.count("b", "a") == 1);
  CHECK(pc.count("b", "b") == 0);
}

TEST_CASE("whitespace is skipped when pairing") {
  const std::vector<std::vector<Token>> corpus = {tokenize("a  b\tc")};
  const PairCounts pc = count_cooccurrence(corpus);
  CHECK(pc.count("a", "b") == 1);
  CHECK(pc.count("b", "c") == 1);
  CHECK(pc.corpus_size == 3);
}

TEST_CASE("empty corpus is an error") {
  const std::vector<std::vector<Token>> none;
  CHECK_THROWS_WITH(count_cooccurrence(none), "empty corpus");
  const std::vector<std::vector<Token>> blank = {tokenize("   ")};
  CHECK_THROWS_WITH(count_cooccurrence(blank), "empty corpus");
}

TEST_CASE("successor entropy") {
  const std::vector<std::vector<Token>> corpus = {seq({"s", "x", "t", "x", "t", "y", "t", "z", "t", "x", "u", "v"})};
  const PairCounts pc = count_cooccurrence(corpus);
  CHECK(successor_entropy(pc, "s") == 0.0);
  CHECK(successor_entropy(pc, "u") == 0.0);
  // t -> x, y, z, x: counts {2,1,1}
  CHECK(successor_entropy(pc, "t") ==
        doctest::Approx(-(0.5 * std::log(0.5) + 2 * 0.25 * std::log(0.25))).epsilon(1e-15));
  // x -> t, t, u: counts {2,1}
  CHECK(successor_entropy(pc, "x") == doctest::Approx(-(2.0 / 3 * std::log(2.0 / 3) + 1.0 / 3 * std::log(1.0 / 3))));
  CHECK_THROWS_WITH(successor_entropy(pc, "v"), "token has no successors");
  CHECK_THROWS_WITH(successor_entropy(pc, "never"), "token has no successors");

  const std::vector<std::vector<Token>> two = {seq({"a", "b", "a", "c"})};
  CHECK(successor_entropy(count_cooccurrence(two), "a") == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<std::vector<Token>> skew = {seq({"a", "p", "a", "p", "a", "p", "a", "q"})};
  CHECK(successor_entropy(count_cooccurrence(skew), "a") ==
        doctest::Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))).epsilon(1e-15));
}

TEST_CASE("entropy bounds: 0 <= H(t) <= ln(distinct successors)") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const PairCounts pc = count_cooccurrence(oracle::random_corpus(rng, 400));
    for (const auto& [tok, h] : successor_entropies(pc)) {
      CHECK(h >= 0.0);
      CHECK(h <= std::log(static_cast<double>(pc.counts.at(tok).size())) + 1e-12);
    }
  }
}

TEST_CASE("build_cue_list examples") {
  const std::vector<std::vector<Token>> abab = {seq({"a", "b", "a", "b"})};
  const PairCounts pc = count_cooccurrence(abab);
  const CueList none = build_cue_list(pc, 0.1);
  CHECK(none.members().empty());
  CHECK_FALSE(none.warning().empty());

  std::mt19937_64 rng(5);
  const PairCounts rich = count_cooccurrence(oracle::random_corpus(rng, 600));
  std::set<std::string> with_successors;
  for (const auto& [tok, h] : successor_entropies(rich)) with_successors.insert(tok);
  CHECK(build_cue_list(rich, 0.0).members() == with_successors);
  CHECK(build_cue_list(rich, 1e9, CueDirection::LowEntropyCue).members() == with_successors);
  CHECK(build_cue_list(rich, 0.0).warning().empty());
  CHECK_THROWS(build_cue_list(rich, std::nan("")));
}

TEST_CASE("monotonicity in beta") {
  std::mt19937_64 rng(9);
  const PairCounts pc = count_cooccurrence(oracle::random_corpus(rng, 800));
  std::size_t prev_high = SIZE_MAX, prev_low = 0;
  for (double beta = 0.0; beta <= 3.0; beta += 0.05) {
    const auto high = build_cue_list(pc, beta).members().size();
    const auto low = build_cue_list(pc, beta, CueDirection::LowEntropyCue).members().size();
    CHECK(high <= prev_high);
    CHECK(low >= prev_low);
    prev_high = high;
    prev_low = low;
  }
}

TEST_CASE("brute-force oracle agreement on random corpora") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const auto corpus = oracle::random_corpus(rng, 1000);
    const PairCounts pc = count_cooccurrence(corpus);
    const auto ents = successor_entropies(pc);
    for (double beta : {0.0, 0.5, 1.0, entropy_percentile(pc, 75.0), ents[rng() % ents.size()].second}) {
      CHECK(build_cue_list(pc, beta).members() == oracle::cue_members(corpus, beta, true));
      CHECK(build_cue_list(pc, beta, CueDirection::LowEntropyCue).members() ==
            oracle::cue_members(corpus, beta, false));
    }
  }
}

TEST_CASE("sharded counting merges to the same counts") {
  std::mt19937_64 rng(21);
  const auto corpus = oracle::random_corpus(rng, 800);
  const PairCounts whole = count_cooccurrence(corpus);
  PairCounts merged;
  for (const auto& s : corpus) {
    PairCounts shard;
    shard.add_sequence(s);
    merged.merge(shard);
  }
  CHECK(merged.counts == whole.counts);
  CHECK(merged.totals == whole.totals);
  CHECK(merged.corpus_size == whole.corpus_size);
}

TEST_CASE("percentile interpolates linearly") {
  // entropies: p -> 0 (one successor), q -> ln 2, r -> ln 3
  const std::vector<std::vector<Token>> corpus = {seq({"p", "a"}), seq({"q", "a", "q", "b"}),
                                                  seq({"r", "a", "r", "b", "r", "c"})};
  PairCounts pc = count_cooccurrence(corpus);
  // a and b also have successors: a -> q, a -> r, a -> r => {1,2}; b -> r => 0
  const auto ents = successor_entropies(pc);
  std::vector<double> v;
  for (const auto& [t, h] : ents) v.push_back(h);
  std::sort(v.begin(), v.end());
  REQUIRE(v.size() == 5);
  CHECK(entropy_percentile(pc, 0.0) == v[0]);
  CHECK(entropy_percentile(pc, 100.0) == v[4]);
  CHECK(entropy_percentile(pc, 50.0) == v[2]);
  CHECK(entropy_percentile(pc, 75.0) == doctest::Approx(v[3]));
  CHECK(entropy_percentile(pc, 87.5) == doctest::Approx(0.5 * (v[3] + v[4])));
  CHECK_THROWS(entropy_percentile(pc, 101.0));
}

TEST_CASE("is_cue filters by kind") {
  const CueList cl({"if", "# note", " "}, 0.5, CueDirection::HighEntropyCue, 0);
  CHECK(is_cue(cl, "if", TokenKind::Identifier));
  CHECK_FALSE(is_cue(cl, "else", TokenKind::Identifier));
  CHECK_FALSE(is_cue(cl, "# note", TokenKind::Comment));
  CHECK_FALSE(is_cue(cl, " ", TokenKind::Whitespace));
}

TEST_CASE("comment texts never become cues") {
  const std::vector<std::vector<Token>> corpus = {tokenize("# c\nx\n# c\ny\n# c\nz\n")};
  const PairCounts pc = count_cooccurrence(corpus);
  CHECK_FALSE(build_cue_list(pc, 0.0).contains("# c"));
  CHECK(build_cue_list(pc, 0.0).contains("\n"));
}

TEST_CASE("percent encoding") {
  CHECK(percent_encode("abc-._~XYZ09") == "abc-._~XYZ09");
  CHECK(percent_encode(" \n%") == "%20%0A%25");
  CHECK(percent_encode("\xc3\xa9") == "%C3%A9");
  CHECK(percent_decode("%20%0a%25") == " \n%");
  CHECK_THROWS(percent_decode("%2"));
  CHECK_THROWS(percent_decode("%zz"));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    std::string s;
    for (int n = static_cast<int>(rng() % 20); n > 0; --n) s += static_cast<char>(rng() % 256);
    CHECK(percent_decode(percent_encode(s)) == s);
  }
}

TEST_CASE("serialization round trip and golden file") {
  const std::vector<std::string> docs = {"a b a c\n"};
  const std::vector<std::vector<Token>> corpus = {tokenize(docs[0])};
  const CueList cl = build_cue_list(count_cooccurrence(corpus), 0.5, CueDirection::HighEntropyCue,
                                    corpus_fingerprint(docs));
  CHECK(cl.members() == std::set<std::string>{"a"});
  CHECK(serialize(cl) == slurp(testing::fixture_dir() / "golden_cues.txt"));
  CHECK(load_cue_list(testing::fixture_dir() / "golden_cues.txt") == cl);

  const CueList odd({"\n", " x", "%", "if", "\xc3\xa9"}, 0.1 + 0.2, CueDirection::LowEntropyCue, 0xdeadbeefULL);
  const CueList back = parse_cue_list(serialize(odd));
  CHECK(back == odd);
  CHECK(back.beta() == odd.beta());
  const auto path = std::filesystem::temp_directory_path() / "acrostic_cues_roundtrip.txt";
  save(odd, path);
  CHECK(load_cue_list(path) == odd);
  std::filesystem::remove(path);
}

TEST_CASE("corrupted cue list files") {
  const CueList cl({"a", "b"}, 0.5, CueDirection::HighEntropyCue, 1);
  const std::string good = serialize(cl);
  CHECK_THROWS_WITH(parse_cue_list(good.substr(0, good.size() - 2)), "malformed cue list file");
  CHECK_THROWS_WITH(parse_cue_list(good.substr(0, 12)), "malformed cue list file");
  CHECK_THROWS_WITH(parse_cue_list(""), "malformed cue list file");
  CHECK_THROWS_WITH(parse_cue_list("CUELIST v1\nbeta=x direction=high fingerprint=0 count=0\n"),
                    "malformed cue list file");
  std::string bumped = good;
  bumped.replace(0, 10, "CUELIST v2");
  CHECK_THROWS_WITH(parse_cue_list(bumped), "unsupported version");
}

TEST_CASE("fingerprint changes when one byte changes") {
  std::mt19937_64 rng(8);
  int changed = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string doc(64, ' ');
    for (auto& c : doc) c = static_cast<char>('a' + rng() % 26);
    std::string other = doc;
    const std::size_t at = rng() % other.size();
    other[at] = static_cast<char>(other[at] == 'z' ? 'a' : other[at] + 1);
    const std::vector<std::string> a = {doc}, b = {other};
    changed += corpus_fingerprint(a) != corpus_fingerprint(b);
  }
  CHECK(changed == 1000);
}
