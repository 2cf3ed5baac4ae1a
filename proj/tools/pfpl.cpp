// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "pfpl/cli.hpp"

int main(int argc, char** argv) { return pfpl::run_cli(argc, argv, std::cout, std::cerr); }
