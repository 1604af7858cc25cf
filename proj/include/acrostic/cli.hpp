#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace acrostic {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes shared by all subcommands. `detect` uses Detected/NotDetected.
enum ExitCode : int {
  kExitOk = 0,
  kExitDetected = 0,
  kExitNotDetected = 1,
  kExitError = 2,
};

/// Runs the command line `args` (without the program name).
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace acrostic
