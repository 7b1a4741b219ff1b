// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace videomemory {

using Json = nlohmann::json;

struct Synopsis {
    std::string text;
    std::optional<std::string> title;

    friend bool operator==(const Synopsis&, const Synopsis&) = default;
};

/// Throws ValidationError when the text is blank.
Synopsis make_synopsis(std::string text, std::optional<std::string> title = std::nullopt);

/// One planned shot. Entity mentions are bare names; attribute states are
/// produced later by the memory agent.
struct ShotDescription {
    int index = 0;  // 1-based
    std::string scene;
    std::string scene_description;
    std::string plot;
    std::vector<std::string> characters;
    std::vector<std::string> key_props;
    std::string environment_info;
    Json extra = Json::object();  // unknown planner fields, preserved verbatim

    friend bool operator==(const ShotDescription&, const ShotDescription&) = default;
};

struct Storyboard {
    Synopsis synopsis;
    std::vector<ShotDescription> shots;
    Json extra = Json::object();

    friend bool operator==(const Storyboard&, const Storyboard&) = default;
};

enum class EntityCategory { character, prop, background };

inline constexpr EntityCategory kAllCategories[] = {
    EntityCategory::character, EntityCategory::prop, EntityCategory::background};

std::string_view to_string(EntityCategory category);
/// Accepts "character"/"char", "prop", "background"/"bg"/"scene" (any case).
std::optional<EntityCategory> parse_category(std::string_view text);
/// Directory / store name: "characters", "props", "backgrounds".
std::string_view store_name(EntityCategory category);

struct AttributeState {
    std::map<std::string, std::string> attributes;
    std::string summary;

    friend bool operator==(const AttributeState&, const AttributeState&) = default;
};

/// Lowercases and trims attribute names, then checks the invariants
/// (non-empty unique names, non-empty summary). Throws ValidationError.
AttributeState make_attribute_state(const std::map<std::string, std::string>& attributes,
                                    std::string summary);

struct EntitySpec {
    std::string name;
    EntityCategory category = EntityCategory::character;
    AttributeState state;

    friend bool operator==(const EntitySpec&, const EntitySpec&) = default;
};

enum class AssetKind { image, frame_sequence };

std::string_view to_string(AssetKind kind);

struct AssetRef {
    std::filesystem::path path;
    AssetKind kind = AssetKind::image;
    std::string digest;  // sha256 hex

    friend bool operator==(const AssetRef&, const AssetRef&) = default;
};

/// Hashes an existing image file. Throws MissingAsset if absent.
AssetRef image_asset(const std::filesystem::path& path);
/// Hashes a directory of `frame_*.png` files: sha256 over "name digest\n" lines
/// in name order. Throws MissingAsset if the directory has no frames.
AssetRef frame_sequence_asset(const std::filesystem::path& dir);
/// Sorted `frame_*.png` paths of a frame-sequence directory.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);
/// True when the asset exists and its digest matches the bytes on disk.
bool verify_asset(const AssetRef& asset);

enum class Provenance { reused, generated };

std::string_view to_string(Provenance provenance);

struct ResolvedEntity {
    EntitySpec entity;
    AssetRef reference;
    Provenance provenance = Provenance::generated;

    friend bool operator==(const ResolvedEntity&, const ResolvedEntity&) = default;
};

inline constexpr std::size_t kMaxVideoPromptChars = 500;

struct ShotRecord {
    ShotDescription shot;
    std::vector<ResolvedEntity> resolved_entities;
    std::string keyframe_prompt;
    AssetRef keyframe;
    std::string video_prompt;
    AssetRef video;
    std::vector<std::string> warnings;

    friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

/// Checks the video-prompt limit and that every mentioned character and prop
/// was resolved. Throws ValidationError.
void validate_shot_record(const ShotRecord& record);

// -- storyboard documents ----------------------------------------------------

/// Parses a storyboard document: either a JSON array of shots or an object
/// with a "shots" array and optional "synopsis"/"title". Shot indices come from
/// "index" (or "shot") when present, else from position; the result is sorted
/// by index. `fallback_synopsis` is used when the document carries none.
Storyboard parse_storyboard(std::string_view raw,
                            const std::optional<Synopsis>& fallback_synopsis = std::nullopt);

Json to_json(const ShotDescription& shot);
Json to_json(const Storyboard& storyboard);
ShotDescription shot_from_json(const Json& doc, int position);
std::string serialize_storyboard(const Storyboard& storyboard);

Json to_json(const Synopsis& synopsis);
Synopsis synopsis_from_json(const Json& doc);
Json to_json(const AttributeState& state);
AttributeState attribute_state_from_json(const Json& doc);
Json to_json(const EntitySpec& spec);
EntitySpec entity_spec_from_json(const Json& doc);

/// Asset paths are written relative to `base` when they live under it.
Json to_json(const AssetRef& asset, const std::filesystem::path& base);
AssetRef asset_from_json(const Json& doc, const std::filesystem::path& base);
Json to_json(const ShotRecord& record, const std::filesystem::path& base);
ShotRecord shot_record_from_json(const Json& doc, const std::filesystem::path& base);

// -- entity keys ---------------------------------------------------------------

/// Lowercase (ASCII), trimmed, internal whitespace runs collapsed to '_'.
std::string canonical_name(std::string_view name);
/// Case- and whitespace-insensitive name equality (same entity lineage).
bool same_lineage(std::string_view a, std::string_view b);
/// Attribute names sorted, entries "name=value" joined by '\n'.
std::string canonical_attributes(const AttributeState& state);
/// canonical_name(name) + "_" + 8 hex digits (low 32 bits of FNV-1a 64 over
/// canonical_attributes(state)), e.g. "anna_1b2c3d4e".
std::string canonical_entity_key(std::string_view name, const AttributeState& state);

// -- text helpers --------------------------------------------------------------

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);
/// Number of UTF-8 code points (invalid bytes count as one each).
std::size_t utf8_length(std::string_view text);

}  // namespace videomemory
