#include <doctest.h>

#include <chrono>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "acrostic/adapter.hpp"
#include "support.hpp"

using namespace acrostic;
using nlohmann::json;

namespace {

std::filesystem::path saved_toy_model() {
  static const std::filesystem::path path = [] {
    auto p = std::filesystem::temp_directory_path() / "acrostic_adapter_model.txt";
    testing::ToySetup::get().model.save(p);
    return p;
  }();
  return path;
}

std::string python_fixture(const char* name) {
  return "python3 '" + (testing::fixture_dir() / name).string() + "'";
}

std::vector<std::vector<std::string>> fixture_contexts(std::size_t n) {
  const auto& vocab = testing::ToySetup::get().model.vocab();
  std::mt19937_64 rng(50);
  std::vector<std::vector<std::string>> out = {{}, {"def"}, {"self", "."}, {"never-seen", "tokens"}};
  while (out.size() < n) {
    std::vector<std::string> ctx;
    for (int k = 1 + static_cast<int>(rng() % 3); k > 0; --k) ctx.push_back(vocab[rng() % vocab.size()]);
    out.push_back(ctx);
  }
  return out;
}

}  // namespace

TEST_CASE("request encoding") {
  const std::vector<std::string> ctx = {"a", "\"q\"", "\n"};
  const json j = json::parse(encode_request(ctx, 5));
  CHECK(j["v"] == 1);
  CHECK(j["op"] == "dist");
  CHECK(j["context"] == json(ctx));
  CHECK(j["top_k"] == 5);
  CHECK(encode_request(ctx, 0).find('\n') == std::string::npos);
}

TEST_CASE("in-process serve and decode") {
  const auto& model = testing::ToySetup::get().model;
  for (const auto& ctx : fixture_contexts(10)) {
    const auto want = model.next_distribution(ctx);
    const auto got = decode_response(handle_request(model, encode_request(ctx, 0)));
    REQUIRE(got.size() == want.size());
    CHECK(got.support() == want.support());
    CHECK((got.probs() - want.probs()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("top_k keeps the most likely tokens, renormalized") {
  const auto& model = testing::ToySetup::get().model;
  const std::vector<std::string> ctx = {"self", "."};
  const auto full = model.next_distribution(ctx);
  const auto top = decode_response(handle_request(model, encode_request(ctx, 3)));
  REQUIRE(top.size() == 3);
  std::vector<double> sorted(full.probs().data(), full.probs().data() + full.size());
  std::sort(sorted.rbegin(), sorted.rend());
  const double kept = sorted[0] + sorted[1] + sorted[2];
  CHECK(top.prob(0) == doctest::Approx(sorted[0] / kept));
  CHECK(top.probs().sum() == doctest::Approx(1.0));
}

TEST_CASE("serve_adapter answers in order and reports bad requests") {
  const auto& model = testing::ToySetup::get().model;
  std::istringstream in(encode_request(std::vector<std::string>{"def"}, 2) + "\nnot json\n" +
                        R"({"v":2,"op":"dist","context":[]})" + "\n" + R"({"v":1,"op":"other","context":[]})" +
                        "\n");
  std::ostringstream out;
  CHECK(serve_adapter(model, in, out) == 4);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<json> replies;
  while (std::getline(lines, line)) replies.push_back(json::parse(line));
  REQUIRE(replies.size() == 4);
  CHECK(replies[0]["tokens"].size() == 2);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(replies[i]["v"] == 1);
    CHECK(replies[i].contains("error"));
  }
  CHECK_THROWS_WITH(decode_response(replies[1].dump()), "adapter error: malformed request");
}

TEST_CASE("decode_response rejects bad responses") {
  CHECK_THROWS_WITH(decode_response("nonsense"), "protocol violation");
  CHECK_THROWS_WITH(decode_response(R"({"tokens":["a"],"probs":[1.0]})"), "protocol violation");
  CHECK_THROWS_WITH(decode_response(R"({"v":1,"tokens":["a","b"],"probs":[1.0]})"), "protocol violation");
  CHECK_THROWS_WITH(decode_response(R"({"v":1,"tokens":[1],"probs":[1.0]})"), "protocol violation");
  CHECK_THROWS_WITH(decode_response(R"({"v":1,"tokens":["a","b"],"probs":[0.6,0.3]})"), "invalid distribution");
  CHECK_THROWS_WITH(decode_response(R"({"v":1,"tokens":["a","b"],"probs":[1.2,-0.2]})"), "invalid distribution");
  CHECK_NOTHROW(decode_response(R"({"v":1,"tokens":["a","b"],"probs":[0.5,0.5000005]})"));
}

TEST_CASE("loopback through a child process matches the in-process model") {
  const auto& model = testing::ToySetup::get().model;
  const AdapterClient client("'" + testing::cli_path() + "' serve --model '" + saved_toy_model().string() + "'");
  for (const auto& ctx : fixture_contexts(50)) {
    const auto want = model.next_distribution(ctx);
    const auto got = query_adapter(client, ctx);
    REQUIRE(got.support() == want.support());
    CHECK((got.probs() - want.probs()).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("a child process can drive generation") {
  const auto& model = testing::ToySetup::get().model;
  const AdapterClient client("'" + testing::cli_path() + "' serve --model '" + saved_toy_model().string() + "'");
  Rng a(3), b(3);
  const std::vector<std::string> prompt = {"def", "f", "(", "x", ")", ":"};
  std::vector<std::string> via_child, in_process;
  for (int i = 0; i < 20; ++i) {
    std::vector<std::string> ctx = prompt;
    ctx.insert(ctx.end(), via_child.begin(), via_child.end());
    via_child.push_back(sample(client.next_distribution(ctx), a));
    ctx = prompt;
    ctx.insert(ctx.end(), in_process.begin(), in_process.end());
    in_process.push_back(sample(model.next_distribution(ctx), b));
  }
  CHECK(via_child == in_process);
}

TEST_CASE("misbehaving adapters") {
  const std::vector<std::string> ctx = {"x"};
  const AdapterClient malformed(python_fixture("adapter_malformed.py"));
  CHECK_THROWS_WITH(query_adapter(malformed, ctx), "protocol violation");
  const AdapterClient short_sum(python_fixture("adapter_short.py"));
  CHECK_THROWS_WITH(query_adapter(short_sum, ctx), "invalid distribution");

  const auto start = std::chrono::steady_clock::now();
  const AdapterClient silent(python_fixture("adapter_silent.py"), std::chrono::milliseconds(300));
  CHECK_THROWS_WITH(query_adapter(silent, ctx), "adapter timeout");
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));

  const AdapterClient gone("exit 0");
  CHECK_THROWS_AS(query_adapter(gone, ctx), AdapterError);
}
