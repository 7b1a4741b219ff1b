// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/pipeline.hpp"

#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"

namespace videomemory {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "videomemory.run/1";

std::string relative_to(const fs::path& path, const fs::path& base) {
    const auto rel = path.lexically_normal().lexically_relative(base.lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return path.generic_string();
}

fs::path resolve_from(const std::string& stored, const fs::path& base) {
    const fs::path path(stored);
    return path.is_absolute() ? path : base / path;
}

Json snapshot_json(const std::map<std::string, std::string>& snapshot) { return Json(snapshot); }

std::map<std::string, std::string> snapshot_from(const Json& doc) {
    return doc.get<std::map<std::string, std::string>>();
}

ShotStatus parse_status(const std::string& text) {
    if (text == "done") return ShotStatus::done;
    if (text == "failed") return ShotStatus::failed;
    if (text == "pending") return ShotStatus::pending;
    throw ValidationError("unknown shot status '" + text + "'", "status");
}

std::string describe_error(const std::exception& e) {
    if (const auto* error = dynamic_cast<const Error*>(&e)) return error->kind() + ": " + e.what();
    return std::string("Error: ") + e.what();
}

std::string shot_dir_name(int index) { return std::to_string(index); }

}  // namespace

// -- config ----------------------------------------------------------------------

bool RunConfig::bank_enabled(EntityCategory category) const {
    if (ablation_no_memory) return false;
    switch (category) {
        case EntityCategory::character: return enable_character_bank;
        case EntityCategory::prop: return enable_prop_bank;
        case EntityCategory::background: return enable_background_bank;
    }
    return true;
}

Json to_json(const RunConfig& config) {
    return Json{{"enable_character_bank", config.enable_character_bank},
                {"enable_prop_bank", config.enable_prop_bank},
                {"enable_background_bank", config.enable_background_bank},
                {"ablation_no_memory", config.ablation_no_memory},
                {"warm_start", config.memory_root.has_value()},
                {"profile", config.profile},
                {"frames", config.frames},
                {"backends", config.profile_echo}};
}

std::string_view to_string(ShotStatus status) {
    switch (status) {
        case ShotStatus::pending: return "pending";
        case ShotStatus::done: return "done";
        case ShotStatus::failed: return "failed";
    }
    return "pending";
}

std::string derive_run_id(const Storyboard& storyboard, const RunConfig& config) {
    std::uint64_t h = fnv1a64(storyboard.synopsis.text);
    h = fnv1a64(storyboard.synopsis.title.value_or(""), h);
    h = fnv1a64(serialize_storyboard(storyboard), h);
    for (EntityCategory category : kAllCategories) h = fnv1a64(config.bank_enabled(category) ? "1" : "0", h);
    return "run-" + low32_hex(h);
}

// -- manifest --------------------------------------------------------------------

bool RunManifest::complete() const { return !first_open_shot().has_value(); }

std::optional<std::size_t> RunManifest::first_open_shot() const {
    for (std::size_t i = 0; i < shots.size(); ++i) {
        if (shots[i].status != ShotStatus::done) return i;
    }
    return std::nullopt;
}

std::vector<AssetRef> RunManifest::videos() const {
    std::vector<AssetRef> out;
    for (const auto& shot : shots) {
        if (shot.status == ShotStatus::done && shot.record) out.push_back(shot.record->video);
    }
    return out;
}

Json to_json(const RunManifest& manifest) {
    Json shots = Json::array();
    for (const auto& shot : manifest.shots) {
        Json resolutions = Json::array();
        for (const auto& r : shot.resolutions) {
            resolutions.push_back(Json{{"name", r.name},
                                       {"category", to_string(r.category)},
                                       {"key", r.key},
                                       {"provenance", to_string(r.provenance)},
                                       {"stored", r.stored},
                                       {"history_size", r.history_size},
                                       {"attempts", r.attempts}});
        }
        Json entry{{"index", shot.index}, {"status", to_string(shot.status)}, {"resolutions", resolutions}};
        if (shot.record) entry["record"] = to_json(*shot.record, manifest.run_dir);
        if (!shot.bank_snapshot.empty()) entry["bank_snapshot"] = snapshot_json(shot.bank_snapshot);
        if (shot.error) entry["error"] = *shot.error;
        shots.push_back(std::move(entry));
    }
    Json videos = Json::array();
    for (const auto& video : manifest.videos()) videos.push_back(relative_to(video.path, manifest.run_dir));

    std::string status = "complete";
    for (const auto& shot : manifest.shots) {
        if (shot.status == ShotStatus::failed) status = "halted";
        else if (shot.status == ShotStatus::pending && status == "complete") status = "incomplete";
    }
    return Json{{"format", kManifestFormat},
                {"run_id", manifest.run_id},
                {"status", status},
                {"synopsis", to_json(manifest.synopsis)},
                {"storyboard", to_json(manifest.storyboard)},
                {"plan_attempts", manifest.plan_attempts},
                {"config", manifest.config},
                {"memory_root", relative_to(manifest.memory_root, manifest.run_dir)},
                {"initial_bank_snapshot", snapshot_json(manifest.initial_bank_snapshot)},
                {"shots", shots},
                {"videos", videos},
                {"requests", manifest.requests}};
}

RunManifest manifest_from_json(const Json& doc, const fs::path& run_dir) {
    try {
        if (doc.value("format", std::string()) != kManifestFormat) {
            throw ValidationError("not a run manifest (format mismatch)", "format");
        }
        RunManifest manifest;
        manifest.run_dir = fs::absolute(run_dir);
        manifest.run_id = doc.at("run_id").get<std::string>();
        manifest.synopsis = synopsis_from_json(doc.at("synopsis"));
        manifest.storyboard = parse_storyboard(doc.at("storyboard").dump(), manifest.synopsis);
        manifest.plan_attempts = doc.value("plan_attempts", 0);
        manifest.config = doc.at("config");
        manifest.memory_root = resolve_from(doc.at("memory_root").get<std::string>(), manifest.run_dir);
        manifest.initial_bank_snapshot = snapshot_from(doc.at("initial_bank_snapshot"));
        for (const auto& item : doc.at("shots")) {
            ShotEntry shot;
            shot.index = item.at("index").get<int>();
            shot.status = parse_status(item.at("status").get<std::string>());
            if (item.contains("record")) shot.record = shot_record_from_json(item.at("record"), manifest.run_dir);
            for (const auto& r : item.value("resolutions", Json::array())) {
                EntityResolution resolution;
                resolution.name = r.at("name").get<std::string>();
                const auto category = parse_category(r.at("category").get<std::string>());
                if (!category) throw ValidationError("unknown category in resolution", "resolutions");
                resolution.category = *category;
                resolution.key = r.at("key").get<std::string>();
                resolution.provenance =
                    r.at("provenance").get<std::string>() == "reused" ? Provenance::reused : Provenance::generated;
                resolution.stored = r.value("stored", true);
                resolution.history_size = r.value("history_size", std::size_t{0});
                resolution.attempts = r.value("attempts", 0);
                shot.resolutions.push_back(std::move(resolution));
            }
            if (item.contains("bank_snapshot")) shot.bank_snapshot = snapshot_from(item.at("bank_snapshot"));
            if (item.contains("error")) shot.error = item.at("error").get<std::string>();
            manifest.shots.push_back(std::move(shot));
        }
        for (const auto& request : doc.value("requests", Json::array())) manifest.requests.push_back(request);
        return manifest;
    } catch (const Json::exception& e) {
        throw ParseError(std::string("malformed run manifest: ") + e.what());
    }
}

void save_manifest(const RunManifest& manifest) {
    fs::create_directories(manifest.run_dir);
    write_file_atomic(manifest.manifest_path(), to_json(manifest).dump(2) + "\n");
}

RunManifest load_manifest(const fs::path& manifest_path) {
    Json doc;
    try {
        doc = Json::parse(read_file(manifest_path));
    } catch (const Json::parse_error& e) {
        throw ParseError("run manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
    }
    return manifest_from_json(doc, fs::absolute(manifest_path).parent_path());
}

// -- backends --------------------------------------------------------------------

OwnedBackends make_backends(const Profile& profile, const std::optional<Json>& mock_fixture) {
    OwnedBackends out;
    out.log = std::make_shared<RequestLog>();
    if (profile.text.kind == "http") {
        out.text = std::make_unique<HttpTextBackend>(profile.text, out.log);
    } else {
        out.text = std::make_unique<MockTextBackend>(
            MockTextBackend::from_fixture(mock_fixture.value_or(Json::object()), derived_analysis_responder()));
    }
    if (profile.image.kind == "http") out.image = std::make_unique<HttpImageBackend>(profile.image, out.log);
    else out.image = std::make_unique<MockImageBackend>();
    if (profile.video.kind == "http") out.video = std::make_unique<HttpVideoBackend>(profile.video, out.log);
    else out.video = std::make_unique<MockVideoBackend>(profile.frames);
    return out;
}

std::string reference_prompt(const EntitySpec& spec, const AgentAssets& assets) {
    std::string prompt = "Reference image of " + spec.name + " (" + std::string(to_string(spec.category)) +
                         "), isolated and fully visible. " + trim(spec.state.summary);
    for (const auto& [name, value] : spec.state.attributes) prompt += "; " + name + ": " + value;
    return assets.banned.filter(prompt).text;
}

AssetRef ImageReferenceGenerator::generate(const EntitySpec& spec, std::span<const MemoryEntry> history,
                                           const fs::path& output) {
    ImageRequest request;
    request.prompt = reference_prompt(spec);
    for (const auto& entry : history) {
        request.references.push_back(ReferenceImage{entry.reference, entry.entity.name, entry.entity.category});
    }
    request.output = output;
    request.purpose = ImagePurpose::reference;
    request.salt = salt_;
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    return image_.generate(request);
}

// -- execution -------------------------------------------------------------------

namespace {

struct RunState {
    RunManifest manifest;
    MemoryBank bank;
    RunConfig toggles;
};

RunConfig toggles_from(const Json& config) {
    RunConfig toggles;
    toggles.enable_character_bank = config.value("enable_character_bank", true);
    toggles.enable_prop_bank = config.value("enable_prop_bank", true);
    toggles.enable_background_bank = config.value("enable_background_bank", true);
    toggles.ablation_no_memory = config.value("ablation_no_memory", false);
    return toggles;
}

/// Regenerates a reference outside the bank (disabled store), salted by shot.
ResolveOutcome generate_unstored(const EntitySpec& spec, int shot_index, ImageBackend& image,
                                 const fs::path& run_dir) {
    const std::string key = canonical_entity_key(spec.name, spec.state);
    const fs::path output = run_dir / "shots" / shot_dir_name(shot_index) / "refs" /
                            std::string(store_name(spec.category)) / (key + ".png");
    ImageReferenceGenerator generator(image, "shot-" + std::to_string(shot_index));
    std::string last_error;
    for (int attempt = 1; attempt <= kGeneratorAttempts; ++attempt) {
        try {
            AssetRef reference = generator.generate(spec, {}, output);
            return ResolveOutcome{reference, Provenance::generated, key, 0, attempt};
        } catch (const BackendError& e) {
            last_error = e.what();
            if (!e.retryable()) break;
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    std::error_code ec;
    fs::remove(output, ec);
    throw GenerationError("reference generation for '" + key + "' failed: " + last_error);
}

void execute_shot(RunState& state, std::size_t position, Backends backends, SemanticMatcher& matcher) {
    RunManifest& manifest = state.manifest;
    const ShotDescription& shot = manifest.storyboard.shots[position];
    ShotEntry& entry = manifest.shots[position];
    entry.resolutions.clear();
    entry.record.reset();
    entry.error.reset();

    const EntityAnalysis analysis = memory_analyze_shot(shot, backends.text, describe_bank(state.bank));

    ShotRecord record;
    record.shot = shot;
    record.warnings = analysis.warnings;
    std::vector<EntityReference> refs;
    ImageReferenceGenerator generator(backends.image);
    for (const auto& spec : analysis.entities) {
        const bool stored = state.toggles.bank_enabled(spec.category);
        const ResolveOutcome outcome =
            stored ? retrieve_or_generate(state.bank, spec, shot.index, matcher, generator, manifest.memory_root)
                   : generate_unstored(spec, shot.index, backends.image, manifest.run_dir);
        entry.resolutions.push_back(EntityResolution{spec.name, spec.category, outcome.key, outcome.provenance,
                                                     stored, outcome.history_size, outcome.attempts});
        record.resolved_entities.push_back(ResolvedEntity{spec, outcome.reference, outcome.provenance});
        refs.push_back(EntityReference{spec, outcome.reference});
    }

    const fs::path shot_dir = manifest.run_dir / "shots" / shot_dir_name(shot.index);
    fs::create_directories(shot_dir);
    KeyframeRequest keyframe = build_keyframe_request(shot, refs);
    record.warnings.insert(record.warnings.end(), keyframe.warnings.begin(), keyframe.warnings.end());
    ImageRequest image_request;
    image_request.prompt = keyframe.prompt;
    image_request.references = keyframe.references;
    image_request.output = shot_dir / "keyframe.png";
    image_request.purpose = ImagePurpose::keyframe;
    record.keyframe_prompt = keyframe.prompt;
    record.keyframe = backends.image.generate(image_request);

    VideoPrompt video_prompt = build_video_prompt(shot, &backends.text);
    record.warnings.insert(record.warnings.end(), video_prompt.warnings.begin(), video_prompt.warnings.end());
    record.video_prompt = video_prompt.text;
    record.video = backends.video.animate(VideoRequest{record.keyframe, record.video_prompt, shot_dir / "video"});

    validate_shot_record(record);
    save_bank(state.bank, manifest.memory_root);
    entry.bank_snapshot = bank_snapshot(manifest.memory_root);
    entry.record = std::move(record);
    entry.status = ShotStatus::done;
}

void persist(RunState& state, const Backends& backends) {
    if (backends.log) state.manifest.requests = backends.log->entries();
    save_manifest(state.manifest);
}

RunManifest execute(RunState state, Backends backends, SemanticMatcher& matcher, const ShotCallback& on_shot) {
    auto open = state.manifest.first_open_shot();
    if (!open) return state.manifest;
    for (std::size_t i = *open; i < state.manifest.shots.size(); ++i) {
        ShotEntry& entry = state.manifest.shots[i];
        try {
            execute_shot(state, i, backends, matcher);
        } catch (const std::exception& e) {
            entry.status = ShotStatus::failed;
            entry.error = describe_error(e);
            if (const auto* retry = dynamic_cast<const AgentRetryError*>(&e)) {
                *entry.error += "\nlast response:\n" + retry->last_response();
            }
            for (std::size_t j = i + 1; j < state.manifest.shots.size(); ++j) {
                ShotEntry reset;
                reset.index = state.manifest.shots[j].index;
                state.manifest.shots[j] = std::move(reset);
            }
            persist(state, backends);
            if (on_shot) on_shot(entry);
            return state.manifest;
        }
        persist(state, backends);
        if (on_shot) on_shot(entry);
    }
    return state.manifest;
}

RunManifest start(const Storyboard& storyboard, int plan_attempts, const RunConfig& config, Backends backends,
                  SemanticMatcher& matcher, const ShotCallback& on_shot) {
    if (storyboard.shots.empty()) throw ValidationError("storyboard has no shots", "shots");
    RunState state;
    state.toggles = config;
    RunManifest& manifest = state.manifest;
    manifest.run_id = config.run_id.value_or(derive_run_id(storyboard, config));
    manifest.run_dir = fs::absolute(config.output_root / manifest.run_id).lexically_normal();
    if (fs::exists(manifest.manifest_path())) {
        throw RunError("run directory " + manifest.run_dir.string() +
                       " already holds a manifest; resume it or choose another run id");
    }
    manifest.memory_root = config.memory_root ? fs::absolute(*config.memory_root).lexically_normal()
                                              : manifest.run_dir / "memory";
    manifest.synopsis = storyboard.synopsis;
    manifest.storyboard = storyboard;
    manifest.plan_attempts = plan_attempts;
    manifest.config = to_json(config);
    state.bank = load_bank(manifest.memory_root);
    manifest.initial_bank_snapshot = bank_snapshot(manifest.memory_root);
    for (const auto& shot : storyboard.shots) {
        ShotEntry entry;
        entry.index = shot.index;
        manifest.shots.push_back(std::move(entry));
    }
    persist(state, backends);
    return execute(std::move(state), backends, matcher, on_shot);
}

}  // namespace

RunManifest run(const Synopsis& synopsis, const RunConfig& config, Backends backends, SemanticMatcher& matcher,
                const ShotCallback& on_shot) {
    PlanResult plan = storyboard_plan(synopsis, backends.text);
    return start(plan.storyboard, plan.attempts, config, backends, matcher, on_shot);
}

RunManifest run_storyboard(const Storyboard& storyboard, const RunConfig& config, Backends backends,
                           SemanticMatcher& matcher, const ShotCallback& on_shot) {
    return start(storyboard, 0, config, backends, matcher, on_shot);
}

RunManifest resume(const fs::path& manifest_path, Backends backends, SemanticMatcher& matcher,
                   const ShotCallback& on_shot) {
    RunState state;
    state.manifest = load_manifest(manifest_path);
    const auto open = state.manifest.first_open_shot();
    if (!open) return state.manifest;

    const auto& expected =
        *open == 0 ? state.manifest.initial_bank_snapshot : state.manifest.shots[*open - 1].bank_snapshot;
    const auto actual = bank_snapshot(state.manifest.memory_root);
    if (actual != expected) {
        std::string detail;
        for (const auto& [store, digest] : expected) {
            auto it = actual.find(store);
            if (it == actual.end() || it->second != digest) detail += " " + store;
        }
        throw SnapshotMismatch("memory bank at " + state.manifest.memory_root.string() +
                               " differs from the recorded snapshot (stores:" + detail + ")");
    }
    state.bank = load_bank(state.manifest.memory_root);
    state.toggles = toggles_from(state.manifest.config);
    return execute(std::move(state), backends, matcher, on_shot);
}

}  // namespace videomemory
