// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace videomemory {

inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// 64-bit FNV-1a. `seed` allows incremental hashing over several buffers.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffsetBasis) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

/// Lowercase hex of the low 32 bits, zero-padded to 8 digits.
std::string low32_hex(std::uint64_t value);

std::string sha256_hex(std::string_view bytes);
/// Throws IoError if the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
/// Throws DecodeError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a sibling temporary file and rename, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace videomemory
