// Copyright 2026 The avsr Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "avsr/cli.hpp"

int main(int argc, char** argv) {
  return avsr::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
