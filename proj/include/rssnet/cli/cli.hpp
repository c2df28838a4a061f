// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <exception>
#include <ostream>
#include <string>
#include <vector>

namespace rssnet::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInput = 2,          // bad flags, config, or unreadable input
  kNumerical = 3,      // non-finite loss, diverged solver
  kCompatibility = 4,  // checkpoint/config mismatch
  kShape = 5,          // length or shape contract violation
};

int exit_code_for(const std::exception& e);

// Entry point shared by the binary and the tests. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rssnet::cli
