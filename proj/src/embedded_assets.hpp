// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>

namespace videomemory {

/// Text assets compiled into the library, keyed by path relative to assets/.
const std::map<std::string, std::string_view, std::less<>>& embedded_assets();

}  // namespace videomemory
