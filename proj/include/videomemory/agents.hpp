// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "videomemory/backends.hpp"
#include "videomemory/domain.hpp"
#include "videomemory/memory.hpp"
#include "videomemory/prompts.hpp"

// The three agents are stateless: one call consumes one synopsis or one shot,
// and all cross-shot state lives in the MemoryBank.

namespace videomemory {

inline constexpr int kAgentAttempts = 3;

// -- storyboard agent ----------------------------------------------------------

struct PlanResult {
    Storyboard storyboard;
    int attempts = 0;
};

/// Renders the storyboard template, parses the fenced response and re-prompts
/// with the parse error appended on failure. Throws PlanningError (carrying
/// the last raw response) after kAgentAttempts.
PlanResult storyboard_plan(const Synopsis& synopsis, TextBackend& llm,
                           const AgentAssets& assets = AgentAssets::builtin());

// -- memory agent ----------------------------------------------------------------

struct EntityAnalysis {
    int shot_index = 0;
    std::vector<EntitySpec> entities;  // characters, props, then one background
    std::vector<std::string> warnings;
    int attempts = 0;
};

/// Name of the background entity for a shot: its trimmed scene label.
std::string background_name(const ShotDescription& shot);

/// Compact listing of the bank for the memory-agent prompt.
std::string describe_bank(const MemoryBank& bank);

/// Extracts the shot's entities with categories and attribute states.
/// Unparseable responses are re-prompted (AnalysisError after kAgentAttempts);
/// a response that omits or mis-categorizes a listed character or prop raises
/// ConsistencyError. Entities the shot does not list are dropped with a
/// warning; a missing background is derived from the scene fields.
EntityAnalysis memory_analyze_shot(const ShotDescription& shot, TextBackend& llm,
                                   const std::string& bank_description = "(empty)",
                                   const AgentAssets& assets = AgentAssets::builtin());

/// Validates and normalizes one memory-agent payload (already unfenced).
/// Throws ParseError for schema problems and ConsistencyError for coverage.
EntityAnalysis parse_entity_analysis(const ShotDescription& shot, const std::string& payload);

/// Deterministic stand-in for the memory agent, used by the mock text backend:
/// every listed entity with a single identity attribute and the scene as the
/// background. Returns a fenced response.
std::string derived_analysis_response(const ShotDescription& shot);
/// Responder that answers memory-analysis requests with derived_analysis_response.
MockTextBackend::Responder derived_analysis_responder();

/// Semantic matcher backed by the text backend: one same-state question per
/// candidate. Backend and parse failures (after kAgentAttempts) raise MatcherError.
class LlmMatcher final : public SemanticMatcher {
public:
    explicit LlmMatcher(TextBackend& llm, const AgentAssets& assets = AgentAssets::builtin())
        : llm_(llm), assets_(assets) {}

    MatchDecision match(const EntitySpec& query, const MemoryEntry& candidate) override;

private:
    TextBackend& llm_;
    const AgentAssets& assets_;
};

// -- visualization agent ---------------------------------------------------------

struct EntityReference {
    EntitySpec entity;
    AssetRef asset;
};

struct KeyframeRequest {
    std::string prompt;
    std::vector<ReferenceImage> references;  // characters, props, background
    std::vector<std::string> warnings;
};

/// Composes a factual keyframe prompt from the shot fields and the entity
/// references, with banned terms stripped. Throws MissingReference when refs
/// is empty, an asset is missing on disk, or a listed entity has no reference.
KeyframeRequest build_keyframe_request(const ShotDescription& shot,
                                       const std::vector<EntityReference>& refs,
                                       const AgentAssets& assets = AgentAssets::builtin());

struct VideoPrompt {
    std::string text;
    bool summarized = false;
    bool truncated = false;
    std::vector<std::string> warnings;
};

/// Video prompt from the plot, at most 500 characters. Longer text gets one
/// summarization request through `summarizer` (when given), then is cut at
/// the last word boundary within the limit.
VideoPrompt build_video_prompt(const ShotDescription& shot, TextBackend* summarizer = nullptr,
                               const AgentAssets& assets = AgentAssets::builtin());

/// Cuts `text` to at most `limit` code points, ending on a whole word when
/// the text has a space inside the limit.
std::string truncate_at_word(std::string_view text, std::size_t limit);

struct VisualizationResponse {
    std::string keyframe_generation_prompt;
    std::string keyframe_image_path;
    std::string video_generation_prompt;
    std::string video_save_path;
    std::string negative_prompt;
};

/// Parses a visualization-agent payload (already unfenced). Throws ParseError.
VisualizationResponse parse_visualization_response(const std::string& payload);

}  // namespace videomemory
