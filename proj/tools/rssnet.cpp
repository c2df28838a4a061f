// Copyright 2026 The rssnet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>
#include <string>
#include <vector>

#include "rssnet/cli/cli.hpp"

int main(int argc, char** argv) {
  return rssnet::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
