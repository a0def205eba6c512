// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "coordtok/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return coordtok::run_cli(args, std::cout, std::cerr);
}
