// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "rff/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rff::cli::run(args, std::cout, std::cerr);
}
