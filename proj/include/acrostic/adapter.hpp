#pragma once

#include <chrono>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "acrostic/lm.hpp"

// Newline-delimited JSON bridge between this toolkit and an external model
// process. One request line yields exactly one response line, in order.
//
//   request:  {"v":1,"op":"dist","context":[...],"top_k":0}
//   response: {"v":1,"tokens":[...],"probs":[...]}
//   error:    {"v":1,"error":"..."}

namespace acrostic {

inline constexpr int kAdapterProtocolVersion = 1;

class AdapterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_request(std::span<const std::string> context, int top_k);

/// Answers one request line. Malformed requests produce an error object, never a throw.
std::string handle_request(const TokenSource& model, std::string_view request_line);

/// Serves requests from `in` until end of stream. Returns the number of requests answered.
std::size_t serve_adapter(const TokenSource& model, std::istream& in, std::ostream& out);

/// Parses a response line. Throws AdapterError("protocol violation") on
/// malformed JSON or shape, AdapterError("invalid distribution") when the
/// probabilities are not a distribution within 1e-6.
Distribution decode_response(std::string_view response_line);

/// Client side: a model process launched through `/bin/sh -c`, spoken to over
/// its standard input and output. One request in flight at a time.
class AdapterClient final : public TokenSource {
 public:
  explicit AdapterClient(const std::string& command,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30), int top_k = 0);
  ~AdapterClient() override;
  AdapterClient(const AdapterClient&) = delete;
  AdapterClient& operator=(const AdapterClient&) = delete;

  Distribution next_distribution(std::span<const std::string> context) const override;
  /// Raw exchange, for callers that want to see the response line.
  std::string exchange(std::string_view request_line) const;

 private:
  std::string read_line() const;

  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::chrono::milliseconds timeout_;
  int top_k_;
  mutable std::string buffer_;
};

/// Convenience wrapper over AdapterClient::next_distribution.
Distribution query_adapter(const AdapterClient& client, std::span<const std::string> context);

}  // namespace acrostic
