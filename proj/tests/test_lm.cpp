#include <doctest.h>

#include <random>

#include "acrostic/lm.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

std::vector<std::vector<Token>> corpus_of(std::initializer_list<std::string_view> docs) {
  std::vector<std::vector<Token>> out;
  for (auto d : docs) out.push_back(tokenize(d));
  return out;
}

Distribution make(std::vector<std::string> support, std::vector<double> probs) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) p[static_cast<Eigen::Index>(i)] = probs[i];
  return Distribution(std::make_shared<const Vocabulary>(std::move(support)), p);
}

}  // namespace

TEST_CASE("add-one bigram example") {
  const auto model = train_ngram(corpus_of({"a b"}), 2, 1.0);
  CHECK(model.vocab() == Vocabulary{"<eos>", "a", "b"});
  const std::vector<std::string> ctx = {"a"};
  const auto d = model.next_distribution(ctx);
  CHECK(d.prob_of("b") == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(d.prob_of("a") == doctest::Approx(0.25).epsilon(1e-15));
  const std::vector<std::string> ctx_b = {"b"};
  CHECK(model.next_distribution(ctx_b).prob_of("<eos>") == doctest::Approx(0.5));
}

TEST_CASE("unseen contexts are uniform") {
  const auto model = train_ngram(corpus_of({"a b c"}), 3, 0.5);
  for (const std::vector<std::string>& ctx : {std::vector<std::string>{"c", "a"}, std::vector<std::string>{"zz", "b"}}) {
    const auto d = model.next_distribution(ctx);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d.prob(i) == doctest::Approx(1.0 / d.size()));
  }
}

TEST_CASE("order 1 ignores context") {
  const auto model = train_ngram(corpus_of({"a a b"}), 1, 1.0);
  const std::vector<std::string> c1 = {"a"}, c2 = {"b", "a"};
  CHECK((model.next_distribution(c1).probs() - model.next_distribution(c2).probs()).norm() == 0.0);
  CHECK(model.next_distribution({}).prob_of("a") == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("short contexts use their own counts") {
  const auto model = train_ngram(corpus_of({"x y z"}), 3, 1.0);
  const std::vector<std::string> ctx = {"x"};
  // Length-1 context "x": one successor "y" out of vocab {<eos>, x, y, z}.
  CHECK(model.next_distribution(ctx).prob_of("y") == doctest::Approx(2.0 / 5.0));
  const std::vector<std::string> longer = {"q", "x", "y"};
  CHECK(model.next_distribution(longer).prob_of("z") == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("distributions are normalized, positive, deterministic") {
  const auto& model = testing::ToySetup::get().model;
  std::mt19937_64 rng(4);
  const auto& vocab = model.vocab();
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> ctx;
    for (int k = static_cast<int>(rng() % 4); k > 0; --k) ctx.push_back(vocab[rng() % vocab.size()]);
    const auto d = model.next_distribution(ctx);
    CHECK(std::abs(d.probs().sum() - 1.0) <= 1e-9);
    CHECK(d.probs().minCoeff() > 0.0);
    CHECK(d.probs() == model.next_distribution(ctx).probs());
  }
}

TEST_CASE("large alpha approaches uniform") {
  const auto model = train_ngram(corpus_of({"a b a c a b", "c c b a"}), 3, 1e6);
  const std::vector<std::string> ctx = {"a", "b"};
  const auto d = model.next_distribution(ctx);
  const double u = 1.0 / static_cast<double>(d.size());
  CHECK((d.probs().array() - u).abs().maxCoeff() <= 1e-3);
}

TEST_CASE("training errors") {
  CHECK_THROWS(train_ngram(corpus_of({}), 3, 0.1));
  CHECK_THROWS(train_ngram(corpus_of({"   "}), 3, 0.1));
  CHECK_THROWS(train_ngram(corpus_of({"a"}), 0, 0.1));
  CHECK_THROWS(train_ngram(corpus_of({"a"}), 2, 0.0));
}

TEST_CASE("entropy") {
  CHECK(entropy(make({"a", "b", "c", "d"}, {0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)));
  CHECK(entropy(make({"a", "b"}, {1.0, 0.0})) == 0.0);
  CHECK(entropy(make({"a", "b"}, {0.75, 0.25})) == doctest::Approx(0.5623).epsilon(1e-4));
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_WITH(make({"a", "b"}, {0.5, 0.4}), "invalid distribution");
  CHECK_THROWS_WITH(make({"a", "b"}, {1.5, -0.5}), "invalid distribution");
  CHECK_THROWS_WITH(make({"a", "a"}, {0.5, 0.5}), "invalid distribution");
  CHECK_THROWS_WITH(make({"a"}, {std::nan("")}), "invalid distribution");
  CHECK_THROWS_WITH(make({"a", "b"}, {1.0}), "invalid distribution");
  CHECK_NOTHROW(make({"a", "b"}, {0.5, 0.5 + 1e-10}));
}

TEST_CASE("sampling") {
  Rng rng(1);
  const auto point = make({"a", "b", "c"}, {0.0, 1.0, 0.0});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    CHECK(sample(point, r) == "b");
  }

  const auto d = make({"x", "y"}, {0.7, 0.3});
  int xs = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) xs += sample(d, rng) == "x";
  CHECK(std::abs(xs / static_cast<double>(n) - 0.7) <= 0.01);

  // temperature 0.5 squares the probabilities: 0.49 / (0.49 + 0.09)
  SamplingOptions cold{.temperature = 0.5};
  xs = 0;
  for (int i = 0; i < n; ++i) xs += sample(d, rng, cold) == "x";
  CHECK(std::abs(xs / static_cast<double>(n) - 0.49 / 0.58) <= 0.01);

  SamplingOptions greedy{.greedy = true};
  CHECK(sample(d, rng, greedy) == "x");
  CHECK(sample(make({"q", "b", "z"}, {0.4, 0.4, 0.2}), rng, greedy) == "b");

  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) CHECK(sample_index(d, a) == sample_index(d, b));
}

TEST_CASE("model serialization round trip") {
  const auto model = train_ngram(corpus_of({"def f ( x ) :\n  return x", "# c\ny = 'a b'"}), 3, 0.25);
  const auto back = NGramModel::parse(model.serialize());
  CHECK(back.serialize() == model.serialize());
  CHECK(back.order() == 3);
  CHECK(back.alpha() == 0.25);
  const std::vector<std::string> ctx = {"(", "x"};
  CHECK(back.next_distribution(ctx).probs() == model.next_distribution(ctx).probs());
  CHECK_THROWS(NGramModel::parse("NGRAM v9\n"));
  const std::string s = model.serialize();
  CHECK_THROWS(NGramModel::parse(s.substr(0, s.size() / 2)));
}

TEST_CASE("derive_seed separates streams") {
  CHECK(derive_seed(42, 0) != derive_seed(42, 1));
  CHECK(derive_seed(42, 0) != derive_seed(43, 0));
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
}
