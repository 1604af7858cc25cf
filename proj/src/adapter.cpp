#include "acrostic/adapter.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

extern char** environ;

namespace acrostic {

using nlohmann::json;

std::string encode_request(std::span<const std::string> context, int top_k) {
  json req;
  req["v"] = kAdapterProtocolVersion;
  req["op"] = "dist";
  req["context"] = std::vector<std::string>(context.begin(), context.end());
  req["top_k"] = top_k;
  return req.dump();
}

namespace {

std::string error_line(std::string_view message) {
  json err;
  err["v"] = kAdapterProtocolVersion;
  err["error"] = std::string(message);
  return err.dump();
}

}  // namespace

std::string handle_request(const TokenSource& model, std::string_view request_line) {
  json req;
  try {
    req = json::parse(request_line);
  } catch (const json::parse_error&) {
    return error_line("malformed request");
  }
  if (!req.is_object() || req.value("v", 0) != kAdapterProtocolVersion) return error_line("unsupported version");
  if (req.value("op", std::string{}) != "dist") return error_line("unknown op");
  if (!req.contains("context") || !req["context"].is_array()) return error_line("missing context");

  std::vector<std::string> context;
  for (const auto& t : req["context"]) {
    if (!t.is_string()) return error_line("context entries must be strings");
    context.push_back(t.get<std::string>());
  }
  const int top_k = req.contains("top_k") && req["top_k"].is_number_integer() ? req["top_k"].get<int>() : 0;

  Distribution d;
  try {
    d = model.next_distribution(context);
  } catch (const std::exception& e) {
    return error_line(e.what());
  }

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::string> tokens;
  std::vector<double> probs;
  if (top_k > 0 && static_cast<std::size_t>(top_k) < d.size()) {
    std::partial_sort(order.begin(), order.begin() + top_k, order.end(), [&](std::size_t a, std::size_t b) {
      return d.prob(a) != d.prob(b) ? d.prob(a) > d.prob(b) : d.token(a) < d.token(b);
    });
    order.resize(static_cast<std::size_t>(top_k));
    double kept = 0.0;
    for (auto i : order) kept += d.prob(i);
    for (auto i : order) {
      tokens.push_back(d.token(i));
      probs.push_back(d.prob(i) / kept);
    }
  } else {
    tokens = d.support();
    probs.assign(d.probs().data(), d.probs().data() + d.probs().size());
  }

  json resp;
  resp["v"] = kAdapterProtocolVersion;
  resp["tokens"] = std::move(tokens);
  resp["probs"] = std::move(probs);
  return resp.dump();
}

std::size_t serve_adapter(const TokenSource& model, std::istream& in, std::ostream& out) {
  std::size_t served = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << handle_request(model, line) << '\n';
    out.flush();
    ++served;
  }
  return served;
}

Distribution decode_response(std::string_view response_line) {
  json resp;
  try {
    resp = json::parse(response_line);
  } catch (const json::parse_error&) {
    throw AdapterError("protocol violation");
  }
  if (!resp.is_object() || !resp.contains("v") || resp["v"] != kAdapterProtocolVersion) {
    throw AdapterError("protocol violation");
  }
  if (resp.contains("error")) {
    throw AdapterError("adapter error: " + (resp["error"].is_string() ? resp["error"].get<std::string>()
                                                                        : resp["error"].dump()));
  }
  if (!resp.contains("tokens") || !resp.contains("probs") || !resp["tokens"].is_array() ||
      !resp["probs"].is_array() || resp["tokens"].size() != resp["probs"].size()) {
    throw AdapterError("protocol violation");
  }
  auto support = std::make_shared<Vocabulary>();
  Eigen::VectorXd probs(static_cast<Eigen::Index>(resp["probs"].size()));
  for (std::size_t i = 0; i < resp["tokens"].size(); ++i) {
    const auto& t = resp["tokens"][i];
    const auto& p = resp["probs"][i];
    if (!t.is_string() || !p.is_number()) throw AdapterError("protocol violation");
    support->push_back(t.get<std::string>());
    probs[static_cast<Eigen::Index>(i)] = p.get<double>();
  }
  try {
    return Distribution(std::move(support), std::move(probs), 1e-6);
  } catch (const std::invalid_argument&) {
    throw AdapterError("invalid distribution");
  }
}

AdapterClient::AdapterClient(const std::string& command, std::chrono::milliseconds timeout, int top_k)
    : timeout_(timeout), top_k_(top_k) {
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw AdapterError(std::string("pipe: ") + std::strerror(errno));
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw AdapterError(std::string("pipe: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, in_pipe[1]);
  posix_spawn_file_actions_addclose(&actions, out_pipe[0]);

  std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
  char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
  pid_t pid = -1;
  // Own process group, so the whole pipeline can be killed on shutdown.
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, &attr, argv, environ);
  posix_spawnattr_destroy(&attr);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  if (rc != 0) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    throw AdapterError(std::string("cannot launch adapter: ") + std::strerror(rc));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  std::signal(SIGPIPE, SIG_IGN);
}

AdapterClient::~AdapterClient() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    // Closing stdin asks the child to exit; give it a moment before forcing it.
    for (int i = 0; i < 50; ++i) {
      if (waitpid(pid_, &status, WNOHANG) == pid_) {
        kill(-pid_, SIGKILL);  // stragglers the shell left behind
        return;
      }
      usleep(10000);
    }
    kill(-pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  }
}

std::string AdapterClient::read_line() const {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw AdapterError("adapter timeout");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) throw AdapterError("adapter timeout");
    char chunk[65536];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw AdapterError("protocol violation");  // closed before a full line
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string AdapterClient::exchange(std::string_view request_line) const {
  std::string msg(request_line);
  msg += '\n';
  std::size_t off = 0;
  while (off < msg.size()) {
    const ssize_t n = write(to_child_, msg.data() + off, msg.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw AdapterError("adapter transport closed");
    off += static_cast<std::size_t>(n);
  }
  return read_line();
}

Distribution AdapterClient::next_distribution(std::span<const std::string> context) const {
  return decode_response(exchange(encode_request(context, top_k_)));
}

Distribution query_adapter(const AdapterClient& client, std::span<const std::string> context) {
  return client.next_distribution(context);
}

}  // namespace acrostic
