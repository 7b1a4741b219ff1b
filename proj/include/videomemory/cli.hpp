// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace videomemory {

/// Exit codes: 0 success, 1 operational failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `videomemory` tool; argv[0] is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace videomemory
