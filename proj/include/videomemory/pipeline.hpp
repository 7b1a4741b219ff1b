// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "videomemory/agents.hpp"
#include "videomemory/backends.hpp"
#include "videomemory/domain.hpp"
#include "videomemory/http_backends.hpp"
#include "videomemory/memory.hpp"

namespace videomemory {

struct RunConfig {
    std::filesystem::path output_root = "runs";
    /// Unset: a fresh bank under <run>/memory. Set: that bank is loaded
    /// (warm start) and updated in place.
    std::optional<std::filesystem::path> memory_root;
    bool enable_character_bank = true;
    bool enable_prop_bank = true;
    bool enable_background_bank = true;
    /// Every bank disabled: each shot regenerates its references with a
    /// shot-salted request and nothing is stored.
    bool ablation_no_memory = false;
    std::string profile = "mock";
    int frames = 5;
    std::optional<std::string> run_id;
    Json profile_echo = Json::object();  // effective backend profile, recorded verbatim

    bool bank_enabled(EntityCategory category) const;
};

/// Configuration fields recorded in the manifest (no absolute paths).
Json to_json(const RunConfig& config);

enum class ShotStatus { pending, done, failed };
std::string_view to_string(ShotStatus status);

/// How one entity reference was obtained for one shot.
struct EntityResolution {
    std::string name;
    EntityCategory category = EntityCategory::character;
    std::string key;
    Provenance provenance = Provenance::generated;
    bool stored = true;  // false when the category's bank is disabled
    std::size_t history_size = 0;
    int attempts = 0;
};

struct ShotEntry {
    int index = 0;
    ShotStatus status = ShotStatus::pending;
    std::optional<ShotRecord> record;
    std::vector<EntityResolution> resolutions;
    std::map<std::string, std::string> bank_snapshot;  // after the shot completed
    std::optional<std::string> error;
};

struct RunManifest {
    std::string run_id;
    std::filesystem::path run_dir;
    std::filesystem::path memory_root;
    Synopsis synopsis;
    Storyboard storyboard;
    int plan_attempts = 0;
    Json config = Json::object();
    std::map<std::string, std::string> initial_bank_snapshot;
    std::vector<ShotEntry> shots;
    std::vector<Json> requests;  // HTTP exchanges, secrets redacted

    bool complete() const;
    /// Index of the first shot that is not done, if any.
    std::optional<std::size_t> first_open_shot() const;
    /// The run's video: per-shot frame sequences in shot order (done shots).
    std::vector<AssetRef> videos() const;
    std::filesystem::path manifest_path() const { return run_dir / "manifest.json"; }
};

/// Paths inside the run directory are stored relative to it.
Json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const Json& doc, const std::filesystem::path& run_dir);
void save_manifest(const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& manifest_path);

struct Backends {
    TextBackend& text;
    ImageBackend& image;
    VideoBackend& video;
    std::shared_ptr<RequestLog> log;  // may be null
};

/// Backends built from a profile. Mock text answers from `mock_fixture`
/// (see MockTextBackend::from_fixture) and derives memory-agent responses
/// for any analysis call the fixture does not cover.
struct OwnedBackends {
    std::unique_ptr<TextBackend> text;
    std::unique_ptr<ImageBackend> image;
    std::unique_ptr<VideoBackend> video;
    std::shared_ptr<RequestLog> log;

    Backends view() { return Backends{*text, *image, *video, log}; }
};

OwnedBackends make_backends(const Profile& profile, const std::optional<Json>& mock_fixture = std::nullopt);

/// Text-prompt for a reference image of one entity state.
std::string reference_prompt(const EntitySpec& spec, const AgentAssets& assets = AgentAssets::builtin());

/// Reference generator over an ImageBackend: the prompt is derived from the
/// entity state and the entity's earlier reference images are passed along as
/// conditioning, oldest first.
class ImageReferenceGenerator final : public ReferenceGenerator {
public:
    explicit ImageReferenceGenerator(ImageBackend& image, std::string salt = {})
        : image_(image), salt_(std::move(salt)) {}

    AssetRef generate(const EntitySpec& spec, std::span<const MemoryEntry> history,
                      const std::filesystem::path& output) override;

private:
    ImageBackend& image_;
    std::string salt_;
};

using ShotCallback = std::function<void(const ShotEntry&)>;

/// Plans the storyboard, then runs every shot. Throws PlanningError when
/// planning fails and RunError when the run directory already holds a
/// manifest. Any later failure marks that shot failed, persists the manifest
/// and stops; the manifest is returned either way.
RunManifest run(const Synopsis& synopsis, const RunConfig& config, Backends backends,
                SemanticMatcher& matcher, const ShotCallback& on_shot = {});

/// Same as run() for an already planned storyboard.
RunManifest run_storyboard(const Storyboard& storyboard, const RunConfig& config, Backends backends,
                           SemanticMatcher& matcher, const ShotCallback& on_shot = {});

/// Continues a halted run from its first open shot with the persisted bank.
/// Bank toggles come from the manifest. Throws SnapshotMismatch when the bank
/// on disk differs from the snapshot recorded after the last done shot.
RunManifest resume(const std::filesystem::path& manifest_path, Backends backends, SemanticMatcher& matcher,
                   const ShotCallback& on_shot = {});

/// Deterministic run id: "run-" + 8 hex digits over the synopsis and toggles.
std::string derive_run_id(const Storyboard& storyboard, const RunConfig& config);

}  // namespace videomemory
