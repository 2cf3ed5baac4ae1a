// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace pfpl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point for `pfpl validate|run|sweep|report`. Config keys double as
/// flags (`--lambda=2`, `--partition.clients 4`) and override the config file.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pfpl
