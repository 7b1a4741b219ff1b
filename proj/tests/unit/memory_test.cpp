// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/memory.hpp"

using namespace videomemory;
namespace fs = std::filesystem;

namespace {

EntitySpec spec(const std::string& name, EntityCategory category, std::map<std::string, std::string> attrs,
                const std::string& summary = "as seen") {
    return EntitySpec{name, category, make_attribute_state(attrs, summary)};
}

/// Writes a solid image whose color depends on the call count; can be told to fail.
class FakeGenerator final : public ReferenceGenerator {
public:
    int calls = 0;
    int failures_left = 0;
    bool retryable = true;
    std::vector<std::size_t> history_sizes;
    std::vector<std::vector<std::string>> history_keys;

    AssetRef generate(const EntitySpec&, std::span<const MemoryEntry> history, const fs::path& output) override {
        ++calls;
        history_sizes.push_back(history.size());
        std::vector<std::string> keys;
        for (const auto& e : history) keys.push_back(e.key);
        history_keys.push_back(keys);
        vmtest::write_solid_png(output, Rgb{static_cast<std::uint8_t>(calls), 10, 20});
        if (failures_left > 0) {
            --failures_left;
            throw BackendError("Fake", "generation failed", retryable);
        }
        return image_asset(output);
    }
};

/// Accepts every candidate whose name matches and records the order it was asked in.
class AcceptingMatcher final : public SemanticMatcher {
public:
    std::vector<std::string> asked;
    std::optional<std::string> accept_key;

    MatchDecision match(const EntitySpec&, const MemoryEntry& candidate) override {
        asked.push_back(candidate.key);
        MatchDecision d;
        d.matched = !accept_key || *accept_key == candidate.key;
        if (d.matched) d.key = candidate.key;
        return d;
    }
};

MemoryBank populated_bank(const fs::path& root) {
    MemoryBank bank;
    ExactMatcher matcher;
    FakeGenerator generator;
    retrieve_or_generate(bank, spec("Anna", EntityCategory::character, {{"age", "20"}}), 1, matcher, generator, root);
    retrieve_or_generate(bank, spec("Anna", EntityCategory::character, {{"age", "60"}}), 2, matcher, generator, root);
    retrieve_or_generate(bank, spec("compass", EntityCategory::prop, {{"color", "brass"}}), 1, matcher, generator,
                         root);
    retrieve_or_generate(bank, spec("harbor", EntityCategory::background, {{"location", "harbor"}}), 1, matcher,
                         generator, root);
    return bank;
}

}  // namespace

TEST(MemoryBank, InsertAssignsSequenceAndRejectsDuplicates) {
    vmtest::TempDir dir;
    MemoryBank bank;
    const AssetRef ref = image_asset(vmtest::write_solid_png(dir / "a.png", Rgb{1, 2, 3}));
    const auto anna = spec("Anna", EntityCategory::character, {{"age", "20"}});
    const MemoryEntry& entry = bank.insert(anna, ref, 3);
    EXPECT_EQ(entry.key, canonical_entity_key("Anna", anna.state));
    EXPECT_EQ(entry.sequence, 1u);
    EXPECT_EQ(entry.created_at_shot, 3);
    EXPECT_THROW(bank.insert(anna, ref, 4), DuplicateKey);
    EXPECT_EQ(bank.size(), 1u);
    // The same key in another store is a different entity.
    EXPECT_NO_THROW(bank.insert(spec("Anna", EntityCategory::prop, {{"age", "20"}}), ref, 4));
    EXPECT_EQ(bank.next_sequence(), 3u);
}

TEST(MemoryBank, InsertRequiresExistingImage) {
    MemoryBank bank;
    AssetRef missing{"/nonexistent/ref.png", AssetKind::image, "00"};
    EXPECT_THROW(bank.insert(spec("Anna", EntityCategory::character, {}), missing, 1), MissingAsset);
}

TEST(Retrieve, ExactKeyHitSkipsMatcher) {
    vmtest::TempDir dir;
    MemoryBank bank;
    const auto anna = spec("Anna", EntityCategory::character, {{"age", "20"}});
    bank.insert(anna, image_asset(vmtest::write_solid_png(dir / "a.png", Rgb{1, 2, 3})), 1);
    AcceptingMatcher matcher;
    int calls = -1;
    const auto hit = retrieve(bank, spec("  anna ", EntityCategory::character, {{"Age", "20"}}, "other words"),
                              matcher, &calls);
    ASSERT_TRUE(hit);
    EXPECT_EQ(calls, 0);
    EXPECT_TRUE(matcher.asked.empty());
}

TEST(Retrieve, MatcherWalksLineageMostRecentFirst) {
    vmtest::TempDir dir;
    MemoryBank bank;
    const AssetRef ref = image_asset(vmtest::write_solid_png(dir / "a.png", Rgb{1, 2, 3}));
    const auto& first = bank.insert(spec("Anna", EntityCategory::character, {{"age", "20"}}), ref, 1);
    const std::string first_key = first.key;
    const std::string second_key = bank.insert(spec("Anna", EntityCategory::character, {{"age", "60"}}), ref, 2).key;
    bank.insert(spec("Bob", EntityCategory::character, {}), ref, 2);

    AcceptingMatcher matcher;
    matcher.accept_key = first_key;
    int calls = 0;
    const auto hit = retrieve(bank, spec("Anna", EntityCategory::character, {{"age", "twenty"}}), matcher, &calls);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->key, first_key);
    EXPECT_EQ(calls, 2);
    EXPECT_EQ(matcher.asked, (std::vector<std::string>{second_key, first_key}));
}

TEST(Retrieve, ExactMatcherMissesRephrasedState) {
    vmtest::TempDir dir;
    MemoryBank bank;
    bank.insert(spec("Anna", EntityCategory::character, {{"age", "20"}}),
                image_asset(vmtest::write_solid_png(dir / "a.png", Rgb{1, 2, 3})), 1);
    ExactMatcher matcher;
    EXPECT_FALSE(retrieve(bank, spec("Anna", EntityCategory::character, {{"age", "21"}}), matcher));
}

TEST(RetrieveOrGenerate, ReusesOnHitAndGeneratesWithHistoryOnMiss) {
    vmtest::TempDir dir;
    MemoryBank bank;
    ExactMatcher matcher;
    FakeGenerator generator;
    const auto young = spec("Anna", EntityCategory::character, {{"age", "20"}});
    const auto old = spec("Anna", EntityCategory::character, {{"age", "60"}});

    const auto first = retrieve_or_generate(bank, young, 1, matcher, generator, dir.path());
    EXPECT_EQ(first.provenance, Provenance::generated);
    EXPECT_EQ(first.history_size, 0u);
    EXPECT_EQ(first.attempts, 1);
    EXPECT_EQ(first.reference.path, reference_image_path(dir.path(), EntityCategory::character, first.key));

    const auto again = retrieve_or_generate(bank, young, 2, matcher, generator, dir.path());
    EXPECT_EQ(again.provenance, Provenance::reused);
    EXPECT_EQ(again.reference, first.reference);
    EXPECT_EQ(generator.calls, 1);

    const auto aged = retrieve_or_generate(bank, old, 3, matcher, generator, dir.path());
    EXPECT_EQ(aged.provenance, Provenance::generated);
    EXPECT_EQ(aged.history_size, 1u);
    EXPECT_EQ(generator.history_keys.back(), std::vector<std::string>{first.key});
    EXPECT_EQ(bank.entries(EntityCategory::character).size(), 2u);
}

TEST(RetrieveOrGenerate, RetriesTransientFailures) {
    vmtest::TempDir dir;
    MemoryBank bank;
    ExactMatcher matcher;
    FakeGenerator generator;
    generator.failures_left = 3;
    const auto outcome =
        retrieve_or_generate(bank, spec("Anna", EntityCategory::character, {}), 1, matcher, generator, dir.path());
    EXPECT_EQ(outcome.attempts, 4);
    EXPECT_EQ(generator.calls, 4);
    EXPECT_EQ(bank.size(), 1u);
}

TEST(RetrieveOrGenerate, ExhaustedRetriesLeaveBankUntouched) {
    vmtest::TempDir dir;
    MemoryBank bank;
    ExactMatcher matcher;
    FakeGenerator generator;
    generator.failures_left = 4;
    const auto anna = spec("Anna", EntityCategory::character, {});
    EXPECT_THROW(retrieve_or_generate(bank, anna, 1, matcher, generator, dir.path()), GenerationError);
    EXPECT_EQ(generator.calls, kGeneratorAttempts);
    EXPECT_EQ(bank.size(), 0u);
    EXPECT_FALSE(fs::exists(reference_image_path(dir.path(), EntityCategory::character,
                                                 canonical_entity_key("Anna", anna.state))));
}

TEST(RetrieveOrGenerate, NonRetryableFailureStopsImmediately) {
    vmtest::TempDir dir;
    MemoryBank bank;
    ExactMatcher matcher;
    FakeGenerator generator;
    generator.failures_left = 1;
    generator.retryable = false;
    EXPECT_THROW(retrieve_or_generate(bank, spec("Anna", EntityCategory::character, {}), 1, matcher, generator,
                                      dir.path()),
                 GenerationError);
    EXPECT_EQ(generator.calls, 1);
}

TEST(Persistence, SaveLoadRoundTripIsEqual) {
    vmtest::TempDir dir;
    const MemoryBank bank = populated_bank(dir / "bank");
    save_bank(bank, dir / "bank");
    const MemoryBank loaded = load_bank(dir / "bank");
    EXPECT_EQ(loaded, bank);
    EXPECT_EQ(loaded.size(), 4u);
    EXPECT_EQ(loaded.next_sequence(), bank.next_sequence());
    EXPECT_TRUE(verify_bank(dir / "bank").empty());
}

TEST(Persistence, SaveCopiesForeignImagesIntoTheBank) {
    vmtest::TempDir dir;
    MemoryBank bank;
    bank.insert(spec("Anna", EntityCategory::character, {}),
                image_asset(vmtest::write_solid_png(dir / "elsewhere.png", Rgb{5, 5, 5})), 1);
    save_bank(bank, dir / "bank");
    const MemoryBank loaded = load_bank(dir / "bank");
    const auto& entry = loaded.entries(EntityCategory::character).at(0);
    EXPECT_EQ(entry.reference.path.parent_path(), dir / "bank" / "characters" / "images");
    EXPECT_EQ(entry.reference.digest, bank.entries(EntityCategory::character).at(0).reference.digest);
}

TEST(Persistence, AbsentRootLoadsEmptyBank) {
    vmtest::TempDir dir;
    EXPECT_EQ(load_bank(dir / "none").size(), 0u);
    const auto snapshot = bank_snapshot(dir / "none");
    EXPECT_EQ(snapshot.at("characters"), "absent");
}

TEST(Persistence, TamperedImageRaisesCorruptIndexNamingKey) {
    vmtest::TempDir dir;
    const MemoryBank bank = populated_bank(dir / "bank");
    save_bank(bank, dir / "bank");
    const auto& victim = bank.entries(EntityCategory::prop).at(0);
    vmtest::write_solid_png(victim.reference.path, Rgb{255, 255, 255});
    try {
        load_bank(dir / "bank");
        FAIL() << "expected CorruptIndex";
    } catch (const CorruptIndex& e) {
        EXPECT_EQ(e.bad_keys(), std::vector<std::string>{victim.key});
    }
    EXPECT_EQ(verify_bank(dir / "bank").size(), 1u);
}

TEST(Persistence, EditedIndexKeyIsDetected) {
    vmtest::TempDir dir;
    const MemoryBank bank = populated_bank(dir / "bank");
    save_bank(bank, dir / "bank");
    const fs::path index = dir / "bank" / "characters" / "index.json";
    Json doc = Json::parse(read_file(index));
    doc["entries"][0]["attributes"]["age"] = "35";
    write_file_atomic(index, doc.dump(2));
    EXPECT_THROW(load_bank(dir / "bank"), CorruptIndex);
    write_file_atomic(index, "{not json");
    EXPECT_THROW(load_bank(dir / "bank"), CorruptIndex);
}

TEST(Persistence, SnapshotTracksIndexChanges) {
    vmtest::TempDir dir;
    MemoryBank bank = populated_bank(dir / "bank");
    save_bank(bank, dir / "bank");
    const auto before = bank_snapshot(dir / "bank");
    save_bank(bank, dir / "bank");
    EXPECT_EQ(bank_snapshot(dir / "bank"), before);
    ExactMatcher matcher;
    FakeGenerator generator;
    retrieve_or_generate(bank, spec("lamp", EntityCategory::prop, {}), 5, matcher, generator, dir / "bank");
    save_bank(bank, dir / "bank");
    const auto after = bank_snapshot(dir / "bank");
    EXPECT_NE(after.at("props"), before.at("props"));
    EXPECT_EQ(after.at("characters"), before.at("characters"));
}
