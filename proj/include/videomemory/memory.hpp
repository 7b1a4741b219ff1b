// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "videomemory/domain.hpp"

namespace videomemory {

/// One entity frame: identifier, attribute state and reference image.
struct MemoryEntry {
    std::string key;  // canonical_entity_key(entity.name, entity.state)
    EntitySpec entity;
    AssetRef reference;
    int created_at_shot = 0;
    std::uint64_t sequence = 0;

    friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

/// Three category stores of entity frames. A plain value: callers that share a
/// bank across threads must serialize mutations themselves.
class MemoryBank {
public:
    /// Entries of one store in insertion (= sequence) order.
    const std::vector<MemoryEntry>& entries(EntityCategory category) const;
    const MemoryEntry* find(EntityCategory category, std::string_view key) const;
    std::size_t size() const;
    std::uint64_t next_sequence() const { return next_sequence_; }

    /// Appends a new entry with the next sequence number. The reference must
    /// be an image that exists on disk. Throws DuplicateKey or MissingAsset.
    const MemoryEntry& insert(const EntitySpec& spec, const AssetRef& reference, int shot_index);

    /// Every entry of `category` whose name matches case-insensitively,
    /// ascending by sequence.
    std::vector<MemoryEntry> history(std::string_view name, EntityCategory category) const;

    /// Used by load_bank; restores an entry verbatim including its sequence.
    void restore(MemoryEntry entry);

    friend bool operator==(const MemoryBank&, const MemoryBank&) = default;

private:
    static std::size_t slot(EntityCategory category) { return static_cast<std::size_t>(category); }

    std::array<std::vector<MemoryEntry>, 3> stores_;
    std::uint64_t next_sequence_ = 1;
};

struct MatchDecision {
    bool matched = false;
    std::optional<std::string> key;
    std::string rationale;
};

/// Decides whether a queried entity state is the same visual state as a
/// stored candidate of the same lineage. Throws MatcherError on failure.
class SemanticMatcher {
public:
    virtual ~SemanticMatcher() = default;
    virtual MatchDecision match(const EntitySpec& query, const MemoryEntry& candidate) = 0;
};

/// Accepts iff the canonical keys are equal.
class ExactMatcher final : public SemanticMatcher {
public:
    MatchDecision match(const EntitySpec& query, const MemoryEntry& candidate) override;
};

/// Realizes G(e, a, H_e): renders a reference image for `spec` into `output`,
/// conditioned on the entity's earlier reference images.
class ReferenceGenerator {
public:
    virtual ~ReferenceGenerator() = default;
    virtual AssetRef generate(const EntitySpec& spec, std::span<const MemoryEntry> history,
                              const std::filesystem::path& output) = 0;
};

/// Exact-key lookup first; on a miss the matcher is consulted over the
/// same-name lineage from most to least recent and the first acceptance wins.
/// `matcher_calls`, when given, receives the number of matcher invocations.
std::optional<MemoryEntry> retrieve(const MemoryBank& bank, const EntitySpec& spec,
                                    SemanticMatcher& matcher, int* matcher_calls = nullptr);

inline constexpr int kGeneratorAttempts = 4;  // first try + 3 retries

struct ResolveOutcome {
    AssetRef reference;
    Provenance provenance = Provenance::generated;
    std::string key;               // key of the reused or inserted entry
    std::size_t history_size = 0;  // history handed to the generator
    int attempts = 0;              // generator attempts (0 when reused)
};

/// Path a generated reference for `key` is written to under a bank root.
std::filesystem::path reference_image_path(const std::filesystem::path& bank_root,
                                           EntityCategory category, std::string_view key);

/// Retrieval hit: the stored reference, bank unchanged. Miss: the generator
/// receives the entity's full ordered history, the image lands under
/// `bank_root`, and the new entry is inserted. Generator failures are retried
/// with identical inputs; after the last attempt GenerationError is raised and
/// the bank is left untouched.
ResolveOutcome retrieve_or_generate(MemoryBank& bank, const EntitySpec& spec, int shot_index,
                                    SemanticMatcher& matcher, ReferenceGenerator& generator,
                                    const std::filesystem::path& bank_root,
                                    int max_attempts = kGeneratorAttempts);

// -- persistence ---------------------------------------------------------------
//
// <root>/<store>/index.json lists the store's entries; images live in
// <root>/<store>/images/<key>.png.

/// Writes every store's index and copies any reference image not already in place.
void save_bank(const MemoryBank& bank, const std::filesystem::path& root);
/// Absent root -> empty bank. Throws CorruptIndex naming every entry whose
/// image is missing or whose digest or key does not match.
MemoryBank load_bank(const std::filesystem::path& root);

/// sha256 of each store's index file ("absent" when missing), keyed by store name.
std::map<std::string, std::string> bank_snapshot(const std::filesystem::path& root);

/// Re-checks every persisted entry without building a bank; empty when clean.
std::vector<std::string> verify_bank(const std::filesystem::path& root);

}  // namespace videomemory
