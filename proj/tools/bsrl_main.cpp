// Copyright 2026 The bsrl Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "bsrl/cli.hpp"

int main(int argc, char** argv) { return bsrl::cli::run_cli(argc, argv, std::cout, std::cerr); }
