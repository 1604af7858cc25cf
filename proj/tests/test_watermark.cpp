#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "acrostic/hash.hpp"
#include "acrostic/watermark.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace acrostic;

namespace {

using Ctx = std::vector<std::string>;

WatermarkConfig config(Scheme scheme, double delta = 4.0) {
  WatermarkConfig cfg;
  cfg.scheme = scheme;
  cfg.delta = delta;
  cfg.key = testing::kTestKey;
  return cfg;
}

Distribution make(std::vector<std::string> support, std::vector<double> probs) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(probs.size()));
  for (std::size_t i = 0; i < probs.size(); ++i) p[static_cast<Eigen::Index>(i)] = probs[i];
  return Distribution(std::make_shared<const Vocabulary>(std::move(support)), p);
}

std::string random_text(std::mt19937_64& rng) {
  std::string s;
  for (int n = 1 + static_cast<int>(rng() % 8); n > 0; --n) s += static_cast<char>(0x21 + rng() % 94);
  return s;
}

}  // namespace

TEST_CASE("FNV-1a-64 reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("golden green-list vectors") {
  // Computed once with an independent Python FNV-1a implementation.
  CHECK(context_seed("k", Ctx{"a"}) == 0xeb0829d56b56faf7ULL);
  CHECK(context_seed("k", Ctx{}) == 0x08bdde07b561d17eULL);
  CHECK(context_seed("k", Ctx{"x", "y"}) == 0x2d1c5b39dafc66e7ULL);
  CHECK(context_seed("secret", Ctx{"def"}) == 0x9fdffcc330c3b296ULL);

  CHECK(is_green("k", Ctx{"a"}, "b", 0.5));         // u = 0.4717...
  CHECK_FALSE(is_green("k", Ctx{"a"}, "b", 0.25));
  CHECK(is_green("k", Ctx{}, "b", 0.25));           // u = 0.0910...
  CHECK_FALSE(is_green("k", Ctx{}, "b", 0.09));
  CHECK(is_green("k", Ctx{"x", "y"}, "z", 0.12));   // u = 0.1140...
  CHECK_FALSE(is_green("k", Ctx{"x", "y"}, "z", 0.11));
  CHECK(is_green("secret", Ctx{"def"}, "foo", 0.5)); // u = 0.49838...
  CHECK_FALSE(is_green("secret", Ctx{"def"}, "foo", 0.498));
  CHECK(is_green("k", Ctx{"a"}, "\xc3\xa9", 0.21)); // u = 0.2034...
  CHECK_FALSE(is_green("k", Ctx{"a"}, "\xc3\xa9", 0.2));
}

TEST_CASE("is_green matches the independent implementation") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 20000; ++i) {
    const std::string key = random_text(rng);
    Ctx ctx;
    for (int k = static_cast<int>(rng() % 3); k > 0; --k) ctx.push_back(random_text(rng));
    const std::string cand = random_text(rng);
    const double gamma = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    REQUIRE(is_green(key, ctx, cand, gamma) == oracle::green(key, ctx, cand, gamma));
  }
}

TEST_CASE("hash balance") {
  std::mt19937_64 rng(99);
  for (double gamma : {0.5, 0.25}) {
    int green = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Ctx ctx = {random_text(rng)};
      green += is_green(random_text(rng), ctx, random_text(rng), gamma);
    }
    CHECK(std::abs(green / static_cast<double>(n) - gamma) <= 0.01);
  }
}

TEST_CASE("hash window") {
  const Ctx h = {"a", "b", "c"};
  CHECK(hash_window(h, 1).empty());
  CHECK(std::vector<std::string>(hash_window(h, 2).begin(), hash_window(h, 2).end()) == Ctx{"c"});
  CHECK(hash_window(h, 3).size() == 2);
  CHECK(hash_window(h, 9).size() == 3);
  CHECK(hash_window(Ctx{}, 2).empty());
}

TEST_CASE("config validation and keys") {
  WatermarkConfig cfg = config(Scheme::KGW);
  CHECK_NOTHROW(cfg.validate());
  for (double g : {0.0, 1.0, -0.1, 1.5}) {
    WatermarkConfig c = cfg;
    c.gamma = g;
    CHECK_THROWS(c.validate());
  }
  WatermarkConfig c = cfg;
  c.context_width = 0;
  CHECK_THROWS(c.validate());
  c = cfg;
  c.key.clear();
  CHECK_THROWS(c.validate());
  c = cfg;
  c.delta = -1;
  CHECK_THROWS(c.validate());
  CHECK(parse_hex_key("00ff10") == std::string("\x00\xff\x10", 3));
  CHECK_THROWS(parse_hex_key("abc"));
  CHECK_THROWS(parse_hex_key("zz"));
  CHECK_THROWS(parse_hex_key(""));
  CHECK(parse_scheme("ca") == Scheme::CodeAcrostic);
  CHECK(parse_scheme("code-acrostic") == Scheme::CodeAcrostic);
  CHECK(parse_scheme("ewd") == Scheme::EWD);
  CHECK_THROWS(parse_scheme("unigram"));
}

TEST_CASE("bias_distribution") {
  const auto d = make({"g", "r"}, {0.5, 0.5});
  Eigen::Array<bool, Eigen::Dynamic, 1> first(2);
  first << true, false;
  const auto b = bias_distribution(d, first, std::log(3.0));
  CHECK(b.prob(0) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(b.prob(1) == doctest::Approx(0.25).epsilon(1e-14));

  const auto& model = testing::ToySetup::get().model;
  const auto nd = model.next_distribution(Ctx{"self", "."});
  const auto mask = green_mask(nd, testing::kTestKey, Ctx{"."}, 0.5);
  CHECK((bias_distribution(nd, mask, 0.0).probs() - nd.probs()).cwiseAbs().maxCoeff() <= 1e-12);
  Eigen::Array<bool, Eigen::Dynamic, 1> all = Eigen::Array<bool, Eigen::Dynamic, 1>::Constant(nd.probs().size(), true);
  CHECK((bias_distribution(nd, all, 5.0).probs() - nd.probs()).cwiseAbs().maxCoeff() <= 1e-12);

  // Same-colour pairs keep their order.
  const auto biased = bias_distribution(nd, mask, 4.0);
  CHECK(std::abs(biased.probs().sum() - 1.0) <= 1e-9);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const auto a = static_cast<Eigen::Index>(rng() % nd.size());
    const auto c = static_cast<Eigen::Index>(rng() % nd.size());
    if (mask[a] != mask[c]) continue;
    if (nd.probs()[a] > nd.probs()[c]) CHECK(biased.probs()[a] > biased.probs()[c]);
  }

  const auto pred = bias_distribution(d, [](std::string_view t) { return t == "g"; }, std::log(3.0));
  CHECK(pred.prob(0) == doctest::Approx(0.75));
}

TEST_CASE("eos and blank entries are never green") {
  const auto d = make({"<eos>", " ", "x"}, {0.3, 0.3, 0.4});
  for (int k = 0; k < 50; ++k) {
    const auto mask = green_mask(d, "key" + std::to_string(k), Ctx{"a"}, 0.99);
    CHECK_FALSE(mask[0]);
    CHECK_FALSE(mask[1]);
  }
}

TEST_CASE("z-score examples") {
  CHECK(z_score(50, 100, 0.5) == 0.0);
  CHECK(z_score(60, 100, 0.5) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(z_score(30, 40, 0.25) == doctest::Approx((30 - 10) / std::sqrt(7.5)));
  CHECK(weighted_z_score(3.0, 4.0, 4.0, 0.5) == doctest::Approx((3.0 - 2.0) / std::sqrt(1.0)));
}

TEST_CASE("detection scope per scheme") {
  const auto& setup = testing::ToySetup::get();
  const std::string text = "def f ( x ) :\n    return x + 1  # add\n";
  const auto toks = tokenize(text);
  const auto texts = content_texts(toks);

  DetectOptions trace;
  trace.with_trace = true;
  const auto kgw = detect(toks, config(Scheme::KGW), nullptr, nullptr, trace);
  // Every content position after the first, except the newline closing "# add".
  CHECK(kgw.T == static_cast<std::int64_t>(texts.size()) - 2);
  CHECK(consistent(kgw));

  std::int64_t want_ca = 0;
  for (std::size_t i = 1; i < texts.size(); ++i) {
    const bool comment_prev = texts[i - 1].starts_with("#");
    if (!comment_prev && setup.cues.contains(texts[i - 1])) ++want_ca;
  }
  const auto ca = detect(toks, config(Scheme::CodeAcrostic), &setup.cues, nullptr, trace);
  CHECK(ca.T == want_ca);

  CHECK_THROWS(detect(toks, config(Scheme::SWEET), nullptr, nullptr));
  CHECK_THROWS(detect(toks, config(Scheme::EWD), nullptr, nullptr));
  CHECK_THROWS_WITH(detect(toks, config(Scheme::CodeAcrostic), nullptr, nullptr), "cue list required");

  auto sweet_cfg = config(Scheme::SWEET);
  sweet_cfg.sweet_entropy_threshold = 0.0;
  CHECK(detect(toks, sweet_cfg, nullptr, &setup.model).T == kgw.T);
  sweet_cfg.sweet_entropy_threshold = 1e9;
  CHECK(detect(toks, sweet_cfg, nullptr, &setup.model).insufficient_scope);

  const auto ewd = detect(toks, config(Scheme::EWD), nullptr, &setup.model, trace);
  CHECK(consistent(ewd));
  CHECK(ewd.T == kgw.T);
  CHECK(ewd.green_hits == kgw.green_hits);
  // Independent recomputation of the weighted statistic from the trace.
  double sw = 0, swg = 0, sw2 = 0;
  for (const auto& e : *ewd.trace) {
    if (!e.in_scope) continue;
    sw += e.weight;
    swg += e.green ? e.weight : 0.0;
    sw2 += e.weight * e.weight;
  }
  CHECK(ewd.z == doctest::Approx((swg - 0.5 * sw) / std::sqrt(0.25 * sw2)).epsilon(1e-12));
}

TEST_CASE("EWD weights are the model's entropy at each position") {
  const auto& model = testing::ToySetup::get().model;
  const auto toks = tokenize("x = y");
  DetectOptions opts;
  opts.with_trace = true;
  const auto r = detect(toks, config(Scheme::EWD), nullptr, &model, opts);
  REQUIRE(r.trace->size() == 2);
  CHECK((*r.trace)[0].weight == doctest::Approx(entropy(model.next_distribution(Ctx{"x"}))));
  CHECK((*r.trace)[1].weight == doctest::Approx(entropy(model.next_distribution(Ctx{"x", "="}))));
}

TEST_CASE("empty scope") {
  const auto r = detect({}, config(Scheme::KGW), nullptr, nullptr);
  CHECK(r.T == 0);
  CHECK(r.z == 0.0);
  CHECK_FALSE(r.verdict);
  CHECK(r.insufficient_scope);
  CHECK(consistent(r));
  CHECK_THROWS(recompute_z(r));
  CHECK(detect(tokenize("x"), config(Scheme::KGW), nullptr, nullptr).insufficient_scope);
}

TEST_CASE("recompute_z detects tampering") {
  const auto toks = tokenize("a = b + c * d - e / f\nreturn a\n");
  auto r = detect(toks, config(Scheme::KGW), nullptr, nullptr);
  CHECK(recompute_z(r) == r.z);
  CHECK(consistent(r));
  r.green_hits += 1;
  CHECK_FALSE(consistent(r));
  r.green_hits -= 1;
  r.verdict = !r.verdict;
  CHECK_FALSE(consistent(r));
}

TEST_CASE("report JSON round trip without the key") {
  const auto toks = tokenize("a = b + c\n");
  DetectOptions opts;
  opts.with_trace = true;
  const auto r = detect(toks, config(Scheme::KGW), nullptr, nullptr, opts);
  const auto j = to_json(r);
  CHECK(j.dump().find(testing::kTestKey) == std::string::npos);
  CHECK_FALSE(j.contains("key"));
  const auto back = report_from_json(j);
  CHECK(back.T == r.T);
  CHECK(back.green_hits == r.green_hits);
  CHECK(back.z == r.z);
  CHECK(back.trace->size() == r.trace->size());
  CHECK(consistent(back));
}

TEST_CASE("generation at delta 0 and with an empty cue list equals plain sampling") {
  const auto& model = testing::ToySetup::get().model;
  const Ctx prompt = {"def", "f", "(", "x", ")", ":"};
  std::vector<std::string> plain;
  {
    Rng rng(5);
    Ctx history = prompt;
    for (int i = 0; i < 120; ++i) {
      if (!history.empty() && history.back().starts_with("#")) {
        plain.emplace_back("\n");
        history.emplace_back("\n");
        continue;
      }
      const auto& t = sample(model.next_distribution(history), rng);
      if (t == kEos) break;
      plain.push_back(t);
      history.push_back(t);
    }
  }
  Rng a(5);
  CHECK(generate_watermarked(model, prompt, config(Scheme::KGW, 0.0), nullptr, a, 120).tokens == plain);
  const CueList empty;
  Rng b(5);
  CHECK(generate_watermarked(model, prompt, config(Scheme::CodeAcrostic, 8.0), &empty, b, 120).tokens == plain);

  Rng c(5);
  CHECK_THROWS(generate_watermarked(model, prompt, config(Scheme::KGW), nullptr, c, 0));
  CHECK_THROWS_WITH(generate_watermarked(model, prompt, config(Scheme::CodeAcrostic), nullptr, c, 10),
                    "cue list required");
}

TEST_CASE("KGW at delta 8 emits mostly green tokens") {
  const auto& setup = testing::ToySetup::get();
  int green = 0, total = 0;
  for (std::uint64_t doc = 0; total < 10000; ++doc) {
    Rng rng(derive_seed(8, doc));
    const auto g = generate_watermarked(setup.model, setup.prompts[doc % setup.prompts.size()],
                                        config(Scheme::KGW, 8.0), nullptr, rng, 250);
    for (const auto& s : g.steps) {
      if (s.forced) continue;
      ++total;
      green += s.green;
    }
  }
  MESSAGE("green fraction at delta 8: " << green / static_cast<double>(total));
  CHECK(green / static_cast<double>(total) > 0.75);
}

TEST_CASE("injection and detection agree at every gated position") {
  const auto& setup = testing::ToySetup::get();
  for (Scheme scheme : {Scheme::KGW, Scheme::CodeAcrostic, Scheme::SWEET, Scheme::EWD}) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto& prompt = setup.prompts[seed * 7 % setup.prompts.size()];
      Rng rng(derive_seed(1234, seed));
      const auto cfg = config(scheme);
      const auto g = generate_watermarked(setup.model, prompt, cfg, &setup.cues, rng, 150);
      Ctx all = prompt;
      all.insert(all.end(), g.tokens.begin(), g.tokens.end());
      const auto toks = tokenize(render(all, LanguageProfile::python_like()));
      REQUIRE(content_texts(toks) == all);

      DetectOptions opts;
      opts.with_trace = true;
      const auto r = detect(toks, cfg, &setup.cues, &setup.model, opts);
      // trace entry k describes content position k + 1
      for (std::size_t step = 0; step < g.steps.size(); ++step) {
        const auto& e = (*r.trace)[prompt.size() + step - 1];
        if (g.steps[step].gated) {
          CHECK(e.in_scope);
          CHECK(e.green == g.steps[step].green);
        }
        if (g.steps[step].forced) CHECK_FALSE(e.in_scope);
      }
    }
  }
}

TEST_CASE("Code Acrostic with every token as a cue reduces to KGW on comment-free code") {
  const auto& model = testing::ToySetup::get().model;
  std::set<std::string> everything(model.vocab().begin(), model.vocab().end());
  const CueList all(std::move(everything), 0.0, CueDirection::HighEntropyCue, 0);
  const auto toks = tokenize("def f(x):\n    y = x * 2\n    return y + x\n");
  const auto kgw = detect(toks, config(Scheme::KGW), nullptr, nullptr);
  const auto ca = detect(toks, config(Scheme::CodeAcrostic), &all, nullptr);
  CHECK(ca.T == kgw.T);
  CHECK(ca.green_hits == kgw.green_hits);
  CHECK(ca.z == kgw.z);
}

TEST_CASE("watermarked Code Acrostic text is detected; plain text is not") {
  const auto& setup = testing::ToySetup::get();
  int checked = 0;
  for (std::uint64_t doc = 0; checked < 5 && doc < 100; ++doc) {
    const auto& prompt = setup.prompts[doc % setup.prompts.size()];
    Rng a(derive_seed(77, doc)), b(derive_seed(77, doc));
    const auto marked = generate_watermarked(setup.model, prompt, config(Scheme::CodeAcrostic, 8.0), &setup.cues,
                                             a, 800);
    const auto raw = generate_watermarked(setup.model, prompt, config(Scheme::CodeAcrostic, 0.0), &setup.cues,
                                          b, 800);
    const auto mr = detect(tokenize(render(marked.tokens, LanguageProfile::python_like())),
                           config(Scheme::CodeAcrostic), &setup.cues, nullptr);
    const auto rr = detect(tokenize(render(raw.tokens, LanguageProfile::python_like())),
                           config(Scheme::CodeAcrostic), &setup.cues, nullptr);
    if (mr.T < 200) continue;
    ++checked;
    CHECK(mr.z > 3.0);
    CHECK(rr.z < 3.0);  // one-sided: only large positive z is a detection
  }
  CHECK(checked == 5);
}
