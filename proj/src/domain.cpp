// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/domain.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"

namespace videomemory {

namespace fs = std::filesystem;

std::string trim(std::string_view text) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0;
    std::size_t e = text.size();
    while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::size_t utf8_length(std::string_view text) {
    std::size_t n = 0;
    for (unsigned char c : text) {
        if ((c & 0xC0) != 0x80) ++n;
    }
    return n;
}

Synopsis make_synopsis(std::string text, std::optional<std::string> title) {
    if (trim(text).empty()) throw ValidationError("synopsis text is empty", "synopsis.text");
    return Synopsis{std::move(text), std::move(title)};
}

std::string_view to_string(EntityCategory category) {
    switch (category) {
        case EntityCategory::character: return "character";
        case EntityCategory::prop: return "prop";
        case EntityCategory::background: return "background";
    }
    return "unknown";
}

std::optional<EntityCategory> parse_category(std::string_view text) {
    const std::string t = to_lower_ascii(trim(text));
    if (t == "character" || t == "char") return EntityCategory::character;
    if (t == "prop") return EntityCategory::prop;
    if (t == "background" || t == "bg" || t == "scene") return EntityCategory::background;
    return std::nullopt;
}

std::string_view store_name(EntityCategory category) {
    switch (category) {
        case EntityCategory::character: return "characters";
        case EntityCategory::prop: return "props";
        case EntityCategory::background: return "backgrounds";
    }
    return "unknown";
}

AttributeState make_attribute_state(const std::map<std::string, std::string>& attributes,
                                    std::string summary) {
    AttributeState state;
    for (const auto& [raw_name, value] : attributes) {
        std::string name = to_lower_ascii(trim(raw_name));
        if (name.empty()) throw ValidationError("attribute name is empty", "attributes");
        if (!state.attributes.emplace(name, value).second) {
            throw ValidationError("duplicate attribute name '" + name + "'", "attributes." + name);
        }
    }
    state.summary = trim(summary);
    if (state.summary.empty()) throw ValidationError("attribute summary is empty", "summary");
    return state;
}

std::string_view to_string(AssetKind kind) {
    return kind == AssetKind::image ? "image" : "frame-sequence";
}

std::string_view to_string(Provenance provenance) {
    return provenance == Provenance::reused ? "reused" : "generated";
}

AssetRef image_asset(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) throw MissingAsset("image asset not found: " + path.string());
    return AssetRef{path, AssetKind::image, sha256_file(path)};
}

std::vector<fs::path> list_frames(const fs::path& dir) {
    std::vector<fs::path> frames;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) return frames;
    for (const auto& item : fs::directory_iterator(dir)) {
        const auto name = item.path().filename().string();
        if (item.is_regular_file() && name.starts_with("frame_") && name.ends_with(".png")) {
            frames.push_back(item.path());
        }
    }
    std::sort(frames.begin(), frames.end());
    return frames;
}

AssetRef frame_sequence_asset(const fs::path& dir) {
    const auto frames = list_frames(dir);
    if (frames.empty()) throw MissingAsset("frame sequence has no frames: " + dir.string());
    std::string lines;
    for (const auto& frame : frames) {
        lines += frame.filename().string() + " " + sha256_file(frame) + "\n";
    }
    return AssetRef{dir, AssetKind::frame_sequence, sha256_hex(lines)};
}

bool verify_asset(const AssetRef& asset) {
    try {
        const AssetRef fresh =
            asset.kind == AssetKind::image ? image_asset(asset.path) : frame_sequence_asset(asset.path);
        return fresh.digest == asset.digest;
    } catch (const Error&) {
        return false;
    }
}

void validate_shot_record(const ShotRecord& record) {
    if (utf8_length(record.video_prompt) > kMaxVideoPromptChars) {
        throw ValidationError("video prompt exceeds 500 characters", "video_prompt",
                              record.shot.index);
    }
    auto resolved = [&](const std::string& name, EntityCategory category) {
        return std::any_of(record.resolved_entities.begin(), record.resolved_entities.end(),
                           [&](const ResolvedEntity& r) {
                               return r.entity.category == category &&
                                      same_lineage(r.entity.name, name);
                           });
    };
    for (const auto& name : record.shot.characters) {
        if (!resolved(name, EntityCategory::character)) {
            throw ValidationError("character '" + name + "' has no resolved reference",
                                  "resolved_entities", record.shot.index);
        }
    }
    for (const auto& name : record.shot.key_props) {
        if (!resolved(name, EntityCategory::prop)) {
            throw ValidationError("prop '" + name + "' has no resolved reference",
                                  "resolved_entities", record.shot.index);
        }
    }
}

// -- storyboard documents ------------------------------------------------------

namespace {

const char* const kShotFields[] = {"scene",    "scene_description", "plot",
                                   "characters", "key_props",       "environment_info"};

bool is_known_shot_field(const std::string& key) {
    if (key == "index" || key == "shot") return true;
    return std::any_of(std::begin(kShotFields), std::end(kShotFields),
                       [&](const char* f) { return key == f; });
}

std::string shot_path(int position, std::string_view field) {
    return "shots[" + std::to_string(position) + "]" + (field.empty() ? "" : ".") +
           std::string(field);
}

std::string require_string(const Json& shot, const char* field, int position, int index,
                           bool allow_null) {
    if (!shot.contains(field)) {
        throw ValidationError(std::string("missing field '") + field + "'",
                              shot_path(position, field), index);
    }
    const Json& v = shot.at(field);
    if (v.is_null() && allow_null) return {};
    if (!v.is_string()) {
        throw ValidationError(std::string("field '") + field + "' must be a string",
                              shot_path(position, field), index);
    }
    return v.get<std::string>();
}

std::vector<std::string> require_names(const Json& shot, const char* field, int position,
                                       int index) {
    if (!shot.contains(field)) {
        throw ValidationError(std::string("missing field '") + field + "'",
                              shot_path(position, field), index);
    }
    const Json& v = shot.at(field);
    if (v.is_null()) return {};
    if (!v.is_array()) {
        throw ValidationError(std::string("field '") + field + "' must be a list of names",
                              shot_path(position, field), index);
    }
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto item_path = shot_path(position, field) + "[" + std::to_string(i) + "]";
        if (!v[i].is_string()) throw ValidationError("entity mention must be a string", item_path, index);
        std::string name = trim(v[i].get<std::string>());
        if (name.empty()) throw ValidationError("entity mention is empty", item_path, index);
        if (!seen.insert(canonical_name(name)).second) {
            throw ValidationError("duplicate mention '" + name + "'", item_path, index);
        }
        names.push_back(std::move(name));
    }
    return names;
}

std::optional<int> explicit_index(const Json& shot, int position) {
    for (const char* key : {"index", "shot"}) {
        if (!shot.contains(key)) continue;
        const Json& v = shot.at(key);
        if (v.is_number_integer()) return v.get<int>();
        throw ValidationError(std::string("field '") + key + "' must be an integer",
                              shot_path(position, key));
    }
    return std::nullopt;
}

}  // namespace

ShotDescription shot_from_json(const Json& doc, int position) {
    if (!doc.is_object()) throw ValidationError("shot must be an object", shot_path(position, ""));
    ShotDescription shot;
    shot.index = explicit_index(doc, position).value_or(position + 1);
    shot.scene = trim(require_string(doc, "scene", position, shot.index, false));
    if (shot.scene.empty()) {
        throw ValidationError("scene label is empty", shot_path(position, "scene"), shot.index);
    }
    shot.scene_description = require_string(doc, "scene_description", position, shot.index, true);
    shot.plot = require_string(doc, "plot", position, shot.index, false);
    shot.characters = require_names(doc, "characters", position, shot.index);
    shot.key_props = require_names(doc, "key_props", position, shot.index);
    shot.environment_info = require_string(doc, "environment_info", position, shot.index, true);
    for (const auto& [key, value] : doc.items()) {
        if (!is_known_shot_field(key)) shot.extra[key] = value;
    }
    return shot;
}

Storyboard parse_storyboard(std::string_view raw, const std::optional<Synopsis>& fallback_synopsis) {
    Json doc;
    try {
        doc = Json::parse(raw);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed storyboard document: ") + e.what());
    }

    Storyboard board;
    const Json* shots = nullptr;
    if (doc.is_array()) {
        shots = &doc;
    } else if (doc.is_object()) {
        if (!doc.contains("shots")) throw ValidationError("missing field 'shots'", "shots");
        shots = &doc.at("shots");
        if (!shots->is_array()) throw ValidationError("'shots' must be a list", "shots");
        for (const auto& [key, value] : doc.items()) {
            if (key != "shots" && key != "synopsis" && key != "title") board.extra[key] = value;
        }
    } else {
        throw ParseError("storyboard document must be an object or a list of shots");
    }

    std::optional<Synopsis> synopsis;
    if (doc.is_object() && doc.contains("synopsis")) {
        const Json& s = doc.at("synopsis");
        if (s.is_string()) {
            std::optional<std::string> title;
            if (doc.contains("title") && doc.at("title").is_string()) title = doc.at("title").get<std::string>();
            synopsis = make_synopsis(s.get<std::string>(), title);
        } else if (s.is_object()) {
            synopsis = synopsis_from_json(s);
        } else {
            throw ValidationError("'synopsis' must be a string or object", "synopsis");
        }
    } else {
        synopsis = fallback_synopsis;
    }
    if (!synopsis) throw ValidationError("storyboard carries no synopsis", "synopsis");
    board.synopsis = *synopsis;

    if (shots->empty()) throw ValidationError("storyboard has no shots", "shots");
    for (std::size_t i = 0; i < shots->size(); ++i) {
        board.shots.push_back(shot_from_json((*shots)[i], static_cast<int>(i)));
    }

    // Indices must be exactly 1..N.
    const int n = static_cast<int>(board.shots.size());
    std::map<int, int> positions;
    for (int i = 0; i < n; ++i) {
        const int index = board.shots[static_cast<std::size_t>(i)].index;
        if (index < 1) throw ValidationError("shot index must be >= 1", shot_path(i, "index"), index);
        if (!positions.emplace(index, i).second) {
            throw ValidationError("duplicate shot index", shot_path(i, "index"), index);
        }
    }
    for (int expected = 1; expected <= n; ++expected) {
        if (!positions.contains(expected)) {
            throw ValidationError("shot indices are not contiguous: shot " + std::to_string(expected) +
                                      " is missing",
                                  "shots", expected);
        }
    }
    std::stable_sort(board.shots.begin(), board.shots.end(),
                     [](const ShotDescription& a, const ShotDescription& b) { return a.index < b.index; });
    return board;
}

Json to_json(const ShotDescription& shot) {
    Json doc = shot.extra.is_object() ? shot.extra : Json::object();
    doc["index"] = shot.index;
    doc["scene"] = shot.scene;
    doc["scene_description"] = shot.scene_description;
    doc["plot"] = shot.plot;
    doc["characters"] = shot.characters;
    doc["key_props"] = shot.key_props;
    doc["environment_info"] = shot.environment_info;
    return doc;
}

Json to_json(const Synopsis& synopsis) {
    Json doc = {{"text", synopsis.text}};
    if (synopsis.title) doc["title"] = *synopsis.title;
    return doc;
}

Synopsis synopsis_from_json(const Json& doc) {
    if (!doc.is_object() || !doc.contains("text") || !doc.at("text").is_string()) {
        throw ValidationError("synopsis must carry a 'text' string", "synopsis.text");
    }
    std::optional<std::string> title;
    if (doc.contains("title") && doc.at("title").is_string()) title = doc.at("title").get<std::string>();
    return make_synopsis(doc.at("text").get<std::string>(), title);
}

Json to_json(const Storyboard& storyboard) {
    Json doc = storyboard.extra.is_object() ? storyboard.extra : Json::object();
    doc["synopsis"] = to_json(storyboard.synopsis);
    Json shots = Json::array();
    for (const auto& shot : storyboard.shots) shots.push_back(to_json(shot));
    doc["shots"] = std::move(shots);
    return doc;
}

std::string serialize_storyboard(const Storyboard& storyboard) {
    return to_json(storyboard).dump(2) + "\n";
}

Json to_json(const AttributeState& state) {
    return Json{{"attributes", state.attributes}, {"summary", state.summary}};
}

AttributeState attribute_state_from_json(const Json& doc) {
    std::map<std::string, std::string> attributes;
    if (doc.contains("attributes")) {
        if (!doc.at("attributes").is_object()) throw ValidationError("'attributes' must be an object", "attributes");
        for (const auto& [k, v] : doc.at("attributes").items()) {
            attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }
    if (!doc.contains("summary") || !doc.at("summary").is_string()) {
        throw ValidationError("missing 'summary'", "summary");
    }
    return make_attribute_state(attributes, doc.at("summary").get<std::string>());
}

Json to_json(const EntitySpec& spec) {
    return Json{{"name", spec.name}, {"category", to_string(spec.category)}, {"state", to_json(spec.state)}};
}

EntitySpec entity_spec_from_json(const Json& doc) {
    EntitySpec spec;
    spec.name = doc.at("name").get<std::string>();
    auto category = parse_category(doc.at("category").get<std::string>());
    if (!category) throw ValidationError("unknown entity category", "category");
    spec.category = *category;
    spec.state = attribute_state_from_json(doc.at("state"));
    return spec;
}

Json to_json(const AssetRef& asset, const fs::path& base) {
    fs::path path = asset.path;
    if (!base.empty()) {
        const auto rel = path.lexically_normal().lexically_relative(base.lexically_normal());
        if (!rel.empty() && *rel.begin() != "..") path = rel;
    }
    return Json{{"path", path.generic_string()}, {"kind", to_string(asset.kind)}, {"digest", asset.digest}};
}

AssetRef asset_from_json(const Json& doc, const fs::path& base) {
    AssetRef asset;
    fs::path path = doc.at("path").get<std::string>();
    asset.path = path.empty() || path.is_absolute() || base.empty() ? path : base / path;
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "image") asset.kind = AssetKind::image;
    else if (kind == "frame-sequence") asset.kind = AssetKind::frame_sequence;
    else throw ValidationError("unknown asset kind '" + kind + "'", "kind");
    asset.digest = doc.at("digest").get<std::string>();
    return asset;
}

Json to_json(const ShotRecord& record, const fs::path& base) {
    Json resolved = Json::array();
    for (const auto& r : record.resolved_entities) {
        resolved.push_back(Json{{"entity", to_json(r.entity)},
                                {"key", canonical_entity_key(r.entity.name, r.entity.state)},
                                {"reference", to_json(r.reference, base)},
                                {"provenance", to_string(r.provenance)}});
    }
    return Json{{"shot", to_json(record.shot)},
                {"resolved_entities", std::move(resolved)},
                {"keyframe_prompt", record.keyframe_prompt},
                {"keyframe", to_json(record.keyframe, base)},
                {"video_prompt", record.video_prompt},
                {"video", to_json(record.video, base)},
                {"warnings", record.warnings}};
}

ShotRecord shot_record_from_json(const Json& doc, const fs::path& base) {
    ShotRecord record;
    record.shot = shot_from_json(doc.at("shot"), doc.at("shot").value("index", 1) - 1);
    for (const auto& r : doc.at("resolved_entities")) {
        ResolvedEntity entity;
        entity.entity = entity_spec_from_json(r.at("entity"));
        entity.reference = asset_from_json(r.at("reference"), base);
        entity.provenance =
            r.at("provenance").get<std::string>() == "reused" ? Provenance::reused : Provenance::generated;
        record.resolved_entities.push_back(std::move(entity));
    }
    record.keyframe_prompt = doc.at("keyframe_prompt").get<std::string>();
    record.keyframe = asset_from_json(doc.at("keyframe"), base);
    record.video_prompt = doc.at("video_prompt").get<std::string>();
    record.video = asset_from_json(doc.at("video"), base);
    record.warnings = doc.value("warnings", std::vector<std::string>{});
    return record;
}

// -- entity keys ---------------------------------------------------------------

std::string canonical_name(std::string_view name) {
    const std::string trimmed = trim(name);
    std::string out;
    out.reserve(trimmed.size());
    bool in_space = false;
    for (unsigned char c : trimmed) {
        if (std::isspace(c)) {
            in_space = true;
            continue;
        }
        if (in_space) out.push_back('_');
        in_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool same_lineage(std::string_view a, std::string_view b) { return canonical_name(a) == canonical_name(b); }

std::string canonical_attributes(const AttributeState& state) {
    std::string out;
    bool first = true;
    for (const auto& [name, value] : state.attributes) {  // std::map: sorted by name
        if (!first) out.push_back('\n');
        first = false;
        out += name;
        out.push_back('=');
        out += value;
    }
    return out;
}

std::string canonical_entity_key(std::string_view name, const AttributeState& state) {
    return canonical_name(name) + "_" + low32_hex(fnv1a64(canonical_attributes(state)));
}

}  // namespace videomemory
