// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/memory.hpp"

#include <algorithm>
#include <set>

#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"

namespace videomemory {

namespace fs = std::filesystem;

const std::vector<MemoryEntry>& MemoryBank::entries(EntityCategory category) const {
    return stores_[slot(category)];
}

const MemoryEntry* MemoryBank::find(EntityCategory category, std::string_view key) const {
    const auto& store = stores_[slot(category)];
    auto it = std::find_if(store.begin(), store.end(), [&](const MemoryEntry& e) { return e.key == key; });
    return it == store.end() ? nullptr : &*it;
}

std::size_t MemoryBank::size() const {
    std::size_t n = 0;
    for (const auto& store : stores_) n += store.size();
    return n;
}

const MemoryEntry& MemoryBank::insert(const EntitySpec& spec, const AssetRef& reference, int shot_index) {
    if (reference.kind != AssetKind::image) throw MissingAsset("reference must be an image asset");
    std::error_code ec;
    if (!fs::is_regular_file(reference.path, ec)) {
        throw MissingAsset("reference image not found: " + reference.path.string());
    }
    std::string key = canonical_entity_key(spec.name, spec.state);
    if (find(spec.category, key)) {
        throw DuplicateKey("key '" + key + "' already exists in the " +
                           std::string(store_name(spec.category)) + " store");
    }
    auto& store = stores_[slot(spec.category)];
    store.push_back(MemoryEntry{std::move(key), spec, reference, shot_index, next_sequence_++});
    return store.back();
}

std::vector<MemoryEntry> MemoryBank::history(std::string_view name, EntityCategory category) const {
    std::vector<MemoryEntry> out;
    for (const auto& entry : stores_[slot(category)]) {
        if (same_lineage(entry.entity.name, name)) out.push_back(entry);
    }
    std::sort(out.begin(), out.end(),
              [](const MemoryEntry& a, const MemoryEntry& b) { return a.sequence < b.sequence; });
    return out;
}

void MemoryBank::restore(MemoryEntry entry) {
    if (find(entry.entity.category, entry.key)) throw DuplicateKey("duplicate key '" + entry.key + "'");
    next_sequence_ = std::max(next_sequence_, entry.sequence + 1);
    auto& store = stores_[slot(entry.entity.category)];
    store.push_back(std::move(entry));
    std::sort(store.begin(), store.end(),
              [](const MemoryEntry& a, const MemoryEntry& b) { return a.sequence < b.sequence; });
}

MatchDecision ExactMatcher::match(const EntitySpec& query, const MemoryEntry& candidate) {
    const bool equal = canonical_entity_key(query.name, query.state) == candidate.key;
    MatchDecision decision;
    decision.matched = equal;
    if (equal) decision.key = candidate.key;
    decision.rationale = equal ? "canonical keys are equal" : "canonical keys differ";
    return decision;
}

std::optional<MemoryEntry> retrieve(const MemoryBank& bank, const EntitySpec& spec,
                                    SemanticMatcher& matcher, int* matcher_calls) {
    if (matcher_calls) *matcher_calls = 0;
    const std::string key = canonical_entity_key(spec.name, spec.state);
    if (const MemoryEntry* hit = bank.find(spec.category, key)) return *hit;

    auto lineage = bank.history(spec.name, spec.category);
    for (auto it = lineage.rbegin(); it != lineage.rend(); ++it) {
        if (matcher_calls) ++*matcher_calls;
        const MatchDecision decision = matcher.match(spec, *it);
        if (!decision.matched) continue;
        if (decision.key && *decision.key != it->key) {
            throw MatcherError("matcher accepted candidate '" + it->key + "' but reported key '" +
                               *decision.key + "'");
        }
        return *it;
    }
    return std::nullopt;
}

namespace {

std::string image_file_name(std::string_view key) {
    std::string name(key);
    for (auto& c : name) {
        if (c == '/' || c == '\\' || c == ':' || static_cast<unsigned char>(c) < 0x20) c = '_';
    }
    if (name.empty() || name == "." || name == "..") name = "_" + name;
    return name + ".png";
}

}  // namespace

fs::path reference_image_path(const fs::path& bank_root, EntityCategory category, std::string_view key) {
    return bank_root / store_name(category) / "images" / image_file_name(key);
}

ResolveOutcome retrieve_or_generate(MemoryBank& bank, const EntitySpec& spec, int shot_index,
                                    SemanticMatcher& matcher, ReferenceGenerator& generator,
                                    const fs::path& bank_root, int max_attempts) {
    if (auto hit = retrieve(bank, spec, matcher)) {
        return ResolveOutcome{hit->reference, Provenance::reused, hit->key, 0, 0};
    }

    const std::string key = canonical_entity_key(spec.name, spec.state);
    const auto history = bank.history(spec.name, spec.category);
    const fs::path output = reference_image_path(bank_root, spec.category, key);

    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, max_attempts); ++attempt) {
        try {
            AssetRef reference = generator.generate(spec, history, output);
            bank.insert(spec, reference, shot_index);
            return ResolveOutcome{reference, Provenance::generated, key, history.size(), attempt};
        } catch (const BackendError& e) {
            last_error = e.what();
            if (!e.retryable()) break;
        } catch (const DuplicateKey&) {
            throw;
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    std::error_code ec;
    fs::remove(output, ec);
    throw GenerationError("reference generation for '" + key + "' failed: " + last_error);
}

// -- persistence -----------------------------------------------------------------

namespace {

constexpr const char* kIndexFormat = "videomemory.bank/1";

fs::path index_path(const fs::path& root, EntityCategory category) {
    return root / store_name(category) / "index.json";
}

Json entry_to_json(const MemoryEntry& entry, const std::string& image_name) {
    return Json{{"key", entry.key},
                {"name", entry.entity.name},
                {"category", to_string(entry.entity.category)},
                {"attributes", entry.entity.state.attributes},
                {"summary", entry.entity.state.summary},
                {"image", image_name},
                {"digest", entry.reference.digest},
                {"created_at_shot", entry.created_at_shot},
                {"sequence", entry.sequence}};
}

struct LoadedStore {
    std::vector<MemoryEntry> entries;
    std::vector<std::string> problems;
    std::vector<std::string> bad_keys;
};

LoadedStore load_store(const fs::path& root, EntityCategory category) {
    LoadedStore out;
    const fs::path index = index_path(root, category);
    std::error_code ec;
    if (!fs::exists(index, ec)) return out;

    const std::string store(store_name(category));
    Json doc;
    try {
        doc = Json::parse(read_file(index));
    } catch (const Json::exception& e) {
        out.problems.push_back(store + ": unreadable index: " + e.what());
        out.bad_keys.push_back(store + "/index.json");
        return out;
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc.at("entries").is_array()) {
        out.problems.push_back(store + ": index has no 'entries' list");
        out.bad_keys.push_back(store + "/index.json");
        return out;
    }

    std::set<std::string> keys;
    for (const auto& item : doc.at("entries")) {
        const std::string key = item.value("key", std::string("<unnamed>"));
        try {
            MemoryEntry entry;
            entry.key = item.at("key").get<std::string>();
            entry.entity.name = item.at("name").get<std::string>();
            entry.entity.category = category;
            std::map<std::string, std::string> attributes = item.at("attributes");
            entry.entity.state = make_attribute_state(attributes, item.at("summary").get<std::string>());
            entry.created_at_shot = item.at("created_at_shot").get<int>();
            entry.sequence = item.at("sequence").get<std::uint64_t>();
            const fs::path image = root / store / "images" / item.at("image").get<std::string>();
            entry.reference = AssetRef{image, AssetKind::image, item.at("digest").get<std::string>()};

            if (canonical_entity_key(entry.entity.name, entry.entity.state) != entry.key) {
                out.problems.push_back(store + "/" + key + ": key does not match name and attributes");
                out.bad_keys.push_back(key);
                continue;
            }
            if (!keys.insert(entry.key).second) {
                out.problems.push_back(store + "/" + key + ": duplicate key");
                out.bad_keys.push_back(key);
                continue;
            }
            if (!fs::is_regular_file(image, ec)) {
                out.problems.push_back(store + "/" + key + ": image file missing (" + image.string() + ")");
                out.bad_keys.push_back(key);
                continue;
            }
            if (sha256_file(image) != entry.reference.digest) {
                out.problems.push_back(store + "/" + key + ": image digest mismatch");
                out.bad_keys.push_back(key);
                continue;
            }
            out.entries.push_back(std::move(entry));
        } catch (const Json::exception& e) {
            out.problems.push_back(store + "/" + key + ": malformed entry: " + e.what());
            out.bad_keys.push_back(key);
        } catch (const ValidationError& e) {
            out.problems.push_back(store + "/" + key + ": " + e.what());
            out.bad_keys.push_back(key);
        }
    }
    return out;
}

}  // namespace

void save_bank(const MemoryBank& bank, const fs::path& root) {
    for (EntityCategory category : kAllCategories) {
        const fs::path images = root / store_name(category) / "images";
        fs::create_directories(images);
        Json entries = Json::array();
        for (const auto& entry : bank.entries(category)) {
            const fs::path target = reference_image_path(root, category, entry.key);
            std::error_code ec;
            if (!fs::equivalent(entry.reference.path, target, ec)) {
                fs::copy_file(entry.reference.path, target, fs::copy_options::overwrite_existing, ec);
                if (ec) throw IoError("cannot copy reference image for '" + entry.key + "': " + ec.message());
            }
            entries.push_back(entry_to_json(entry, target.filename().string()));
        }
        Json doc = {{"format", kIndexFormat}, {"store", store_name(category)}, {"entries", std::move(entries)}};
        write_file_atomic(index_path(root, category), doc.dump(2) + "\n");
    }
}

MemoryBank load_bank(const fs::path& root) {
    MemoryBank bank;
    std::error_code ec;
    if (!fs::exists(root, ec)) return bank;

    std::vector<std::string> problems;
    std::vector<std::string> bad_keys;
    std::set<std::uint64_t> sequences;
    for (EntityCategory category : kAllCategories) {
        auto loaded = load_store(root, category);
        problems.insert(problems.end(), loaded.problems.begin(), loaded.problems.end());
        bad_keys.insert(bad_keys.end(), loaded.bad_keys.begin(), loaded.bad_keys.end());
        for (auto& entry : loaded.entries) {
            if (!sequences.insert(entry.sequence).second) {
                problems.push_back(entry.key + ": sequence " + std::to_string(entry.sequence) + " reused");
                bad_keys.push_back(entry.key);
                continue;
            }
            bank.restore(std::move(entry));
        }
    }
    if (!problems.empty()) {
        std::string message = "memory bank index is corrupt:";
        for (const auto& p : problems) message += "\n  " + p;
        throw CorruptIndex(message, bad_keys);
    }
    return bank;
}

std::map<std::string, std::string> bank_snapshot(const fs::path& root) {
    std::map<std::string, std::string> snapshot;
    for (EntityCategory category : kAllCategories) {
        const fs::path index = index_path(root, category);
        std::error_code ec;
        snapshot[std::string(store_name(category))] =
            fs::exists(index, ec) ? sha256_file(index) : std::string("absent");
    }
    return snapshot;
}

std::vector<std::string> verify_bank(const fs::path& root) {
    std::vector<std::string> problems;
    for (EntityCategory category : kAllCategories) {
        auto loaded = load_store(root, category);
        problems.insert(problems.end(), loaded.problems.begin(), loaded.problems.end());
    }
    return problems;
}

}  // namespace videomemory
