// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/agents.hpp"

#include <algorithm>
#include <cctype>

#include "videomemory/error.hpp"

namespace videomemory {

namespace {

std::string retry_suffix(const std::string& error, std::string_view what) {
    return "\n\nYour previous response could not be used: " + error + "\nReturn the corrected " +
           std::string(what) + " as a single fenced JSON document.";
}

Json parse_payload(const std::string& payload) {
    try {
        return Json::parse(payload);
    } catch (const Json::parse_error& e) {
        throw ParseError(std::string("malformed JSON payload: ") + e.what());
    }
}

std::string string_field(const Json& doc, const char* field, const std::string& path) {
    if (!doc.contains(field) || !doc.at(field).is_string()) {
        throw ParseError(std::string("missing string field '") + field + "'", path + "." + field);
    }
    return doc.at(field).get<std::string>();
}

std::string state_text(const AttributeState& state) {
    std::string out = state.summary;
    for (const auto& [name, value] : state.attributes) out += "\n- " + name + ": " + value;
    return out;
}

}  // namespace

// -- storyboard agent ----------------------------------------------------------

PlanResult storyboard_plan(const Synopsis& synopsis, TextBackend& llm, const AgentAssets& assets) {
    std::string synopsis_text = synopsis.text;
    if (synopsis.title) synopsis_text = "Title: " + *synopsis.title + "\n\n" + synopsis_text;
    const std::string base = assets.get(templates::kStoryboard).render({{"synopsis", synopsis_text}});

    std::string prompt = base;
    std::string last_response;
    std::string last_error;
    for (int attempt = 1; attempt <= kAgentAttempts; ++attempt) {
        TextRequest request;
        request.prompt = prompt;
        request.template_name = std::string(templates::kStoryboard);
        request.attempt = attempt;
        request.context = Json{{"synopsis", to_json(synopsis)}};
        last_response = llm.complete(request);
        try {
            Storyboard board = parse_storyboard(extract_fenced(last_response), synopsis);
            board.synopsis = synopsis;
            return PlanResult{std::move(board), attempt};
        } catch (const DocumentError& e) {
            last_error = e.what();
            prompt = base + retry_suffix(last_error, "storyboard");
        }
    }
    throw PlanningError("storyboard planning failed after " + std::to_string(kAgentAttempts) +
                            " attempts: " + last_error,
                        last_response, kAgentAttempts);
}

// -- memory agent ----------------------------------------------------------------

std::string background_name(const ShotDescription& shot) { return trim(shot.scene); }

std::string describe_bank(const MemoryBank& bank) {
    if (bank.size() == 0) return "(empty)";
    std::string out;
    for (EntityCategory category : kAllCategories) {
        const auto& entries = bank.entries(category);
        out += std::string(to_string(category)) + "_memory:";
        if (entries.empty()) out += " (empty)";
        for (const auto& entry : entries) {
            out += "\n- " + entry.key + " (" + entry.entity.name + ", first used in shot " +
                   std::to_string(entry.created_at_shot) + "): " + entry.entity.state.summary;
            for (const auto& [name, value] : entry.entity.state.attributes) {
                out += "\n    " + name + ": " + value;
            }
        }
        out += "\n";
    }
    return out;
}

EntityAnalysis parse_entity_analysis(const ShotDescription& shot, const std::string& payload) {
    const Json doc = parse_payload(payload);
    const Json* list = nullptr;
    if (doc.is_array()) list = &doc;
    else if (doc.is_object() && doc.contains("entities") && doc.at("entities").is_array()) list = &doc.at("entities");
    else throw ParseError("memory agent payload has no 'entities' list", "entities");

    EntityAnalysis analysis;
    analysis.shot_index = shot.index;
    std::vector<EntitySpec> parsed;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const Json& item = (*list)[i];
        const std::string path = "entities[" + std::to_string(i) + "]";
        if (!item.is_object()) throw ParseError("entity must be an object", path);
        EntitySpec spec;
        spec.name = trim(string_field(item, "entity_name", path));
        if (spec.name.empty()) throw ParseError("entity_name is empty", path + ".entity_name");
        const auto category = parse_category(string_field(item, "entity_type", path));
        if (!category) throw ParseError("unknown entity_type", path + ".entity_type");
        spec.category = *category;
        std::map<std::string, std::string> attributes;
        if (item.contains("attributes") && !item.at("attributes").is_null()) {
            if (!item.at("attributes").is_object()) throw ParseError("attributes must be an object", path + ".attributes");
            for (const auto& [k, v] : item.at("attributes").items()) {
                attributes[k] = v.is_string() ? v.get<std::string>() : v.dump();
            }
        }
        std::string summary = item.contains("state_description") && item.at("state_description").is_string()
                                  ? item.at("state_description").get<std::string>()
                                  : std::string();
        try {
            spec.state = make_attribute_state(attributes, summary);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), path);
        }
        parsed.push_back(std::move(spec));
    }

    std::vector<bool> used(parsed.size(), false);
    auto take_listed = [&](const std::string& name, EntityCategory category) {
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            if (used[i] || !same_lineage(parsed[i].name, name)) continue;
            if (parsed[i].category != category) {
                throw ConsistencyError("shot " + std::to_string(shot.index) + " lists '" + name + "' as a " +
                                       std::string(to_string(category)) + " but the memory agent returned a " +
                                       std::string(to_string(parsed[i].category)));
            }
            used[i] = true;
            EntitySpec spec = parsed[i];
            spec.name = name;  // storyboard spelling is canonical
            analysis.entities.push_back(std::move(spec));
            return;
        }
        throw ConsistencyError("memory agent response for shot " + std::to_string(shot.index) + " omits " +
                               std::string(to_string(category)) + " '" + name + "'");
    };
    for (const auto& name : shot.characters) take_listed(name, EntityCategory::character);
    for (const auto& name : shot.key_props) take_listed(name, EntityCategory::prop);

    std::optional<EntitySpec> background;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        if (used[i]) continue;
        if (parsed[i].category == EntityCategory::background && !background) {
            background = parsed[i];
            if (!same_lineage(background->name, background_name(shot))) {
                analysis.warnings.push_back("background '" + background->name + "' renamed to scene label '" +
                                            background_name(shot) + "'");
            }
            background->name = background_name(shot);
            continue;
        }
        analysis.warnings.push_back("dropped " + std::string(to_string(parsed[i].category)) + " '" +
                                    parsed[i].name + "' not listed for shot " + std::to_string(shot.index));
    }
    if (!background) {
        analysis.warnings.push_back("no background returned; derived from the scene label");
        const std::string summary = trim(shot.scene_description).empty() ? shot.scene : shot.scene_description;
        background = EntitySpec{background_name(shot), EntityCategory::background,
                                make_attribute_state({{"location", background_name(shot)}}, summary)};
    }
    analysis.entities.push_back(std::move(*background));
    return analysis;
}

EntityAnalysis memory_analyze_shot(const ShotDescription& shot, TextBackend& llm,
                                   const std::string& bank_description, const AgentAssets& assets) {
    const Json shot_json = to_json(shot);
    const std::string base = assets.get(templates::kMemoryAnalyze)
                                 .render({{"shot_json", shot_json.dump(2)}, {"memory_bank", bank_description}});
    std::string prompt = base;
    std::string last_response;
    std::string last_error;
    for (int attempt = 1; attempt <= kAgentAttempts; ++attempt) {
        TextRequest request;
        request.prompt = prompt;
        request.template_name = std::string(templates::kMemoryAnalyze);
        request.shot_index = shot.index;
        request.attempt = attempt;
        request.context = Json{{"shot", shot_json}};
        last_response = llm.complete(request);
        try {
            EntityAnalysis analysis = parse_entity_analysis(shot, extract_fenced(last_response));
            analysis.attempts = attempt;
            return analysis;
        } catch (const DocumentError& e) {
            last_error = e.what();
            prompt = base + retry_suffix(last_error, "entity list");
        }
    }
    throw AnalysisError("entity analysis for shot " + std::to_string(shot.index) + " failed after " +
                            std::to_string(kAgentAttempts) + " attempts: " + last_error,
                        last_response, kAgentAttempts);
}

std::string derived_analysis_response(const ShotDescription& shot) {
    Json entities = Json::array();
    auto add = [&](const std::string& name, std::string_view type) {
        entities.push_back(Json{{"entity_name", name},
                                {"entity_type", type},
                                {"attributes", {{"appearance", "as introduced"}}},
                                {"state_description", name + " as first introduced in the story"}});
    };
    for (const auto& name : shot.characters) add(name, "character");
    for (const auto& name : shot.key_props) add(name, "prop");
    const std::string summary = trim(shot.scene_description).empty() ? shot.scene : shot.scene_description;
    entities.push_back(Json{{"entity_name", background_name(shot)},
                            {"entity_type", "background"},
                            {"attributes", {{"location", background_name(shot)}}},
                            {"state_description", summary}});
    return "```json\n" + Json{{"entities", entities}}.dump(2) + "\n```\n";
}

MockTextBackend::Responder derived_analysis_responder() {
    return [](const TextRequest& request) -> std::optional<std::string> {
        if (request.template_name != templates::kMemoryAnalyze || !request.context.contains("shot")) {
            return std::nullopt;
        }
        const Json& shot = request.context.at("shot");
        return derived_analysis_response(shot_from_json(shot, shot.value("index", 1) - 1));
    };
}

MatchDecision LlmMatcher::match(const EntitySpec& query, const MemoryEntry& candidate) {
    const std::string base = assets_.get(templates::kMemoryMatch)
                                 .render({{"entity_name", query.name},
                                          {"category", std::string(to_string(query.category))},
                                          {"candidate_state", state_text(candidate.entity.state)},
                                          {"query_state", state_text(query.state)}});
    std::string prompt = base;
    std::string last_error;
    for (int attempt = 1; attempt <= kAgentAttempts; ++attempt) {
        TextRequest request;
        request.prompt = prompt;
        request.template_name = std::string(templates::kMemoryMatch);
        request.attempt = attempt;
        request.context = Json{{"query", to_json(query)}, {"candidate_key", candidate.key}};
        std::string response;
        try {
            response = llm_.complete(request);
        } catch (const Error& e) {
            throw MatcherError(std::string("matcher backend failed: ") + e.what());
        }
        try {
            const Json doc = parse_payload(extract_fenced(response));
            if (!doc.is_object() || !doc.contains("same_state") || !doc.at("same_state").is_boolean()) {
                throw ParseError("missing boolean 'same_state'", "same_state");
            }
            MatchDecision decision;
            decision.matched = doc.at("same_state").get<bool>();
            if (decision.matched) decision.key = candidate.key;
            decision.rationale = doc.value("rationale", std::string());
            return decision;
        } catch (const DocumentError& e) {
            last_error = e.what();
            prompt = base + retry_suffix(last_error, "answer");
        }
    }
    throw MatcherError("matcher response unusable after " + std::to_string(kAgentAttempts) +
                       " attempts: " + last_error);
}

// -- visualization agent ---------------------------------------------------------

KeyframeRequest build_keyframe_request(const ShotDescription& shot, const std::vector<EntityReference>& refs,
                                       const AgentAssets& assets) {
    if (refs.empty()) throw MissingReference("shot " + std::to_string(shot.index) + " has no entity references");
    for (const auto& ref : refs) {
        std::error_code ec;
        if (ref.asset.path.empty() || !std::filesystem::is_regular_file(ref.asset.path, ec)) {
            throw MissingReference("entity '" + ref.entity.name + "' has no reference image on disk");
        }
    }
    auto has_ref = [&](const std::string& name, EntityCategory category) {
        return std::any_of(refs.begin(), refs.end(), [&](const EntityReference& r) {
            return r.entity.category == category && same_lineage(r.entity.name, name);
        });
    };
    for (const auto& name : shot.characters) {
        if (!has_ref(name, EntityCategory::character)) throw MissingReference("character '" + name + "' has no reference");
    }
    for (const auto& name : shot.key_props) {
        if (!has_ref(name, EntityCategory::prop)) throw MissingReference("prop '" + name + "' has no reference");
    }

    KeyframeRequest request;
    std::vector<const EntityReference*> ordered;
    for (EntityCategory category : kAllCategories) {
        for (const auto& ref : refs) {
            if (ref.entity.category == category) ordered.push_back(&ref);
        }
    }

    std::string prompt = trim(shot.scene) + ".";
    for (const std::string& part : {shot.scene_description, shot.plot}) {
        const std::string t = trim(part);
        if (!t.empty()) prompt += " " + t;
    }
    if (!trim(shot.environment_info).empty()) prompt += " Time: " + trim(shot.environment_info) + ".";
    prompt += " Keep every entity identical to its reference image:";
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        const auto& ref = *ordered[i];
        prompt += " image " + std::to_string(i + 1) + " shows " + ref.entity.name + " (" +
                  std::string(to_string(ref.entity.category)) + "): " + trim(ref.entity.state.summary);
        prompt += i + 1 == ordered.size() ? "." : ";";
        request.references.push_back(ReferenceImage{ref.asset, ref.entity.name, ref.entity.category});
    }

    auto filtered = assets.banned.filter(prompt);
    for (const auto& term : filtered.removed) {
        request.warnings.push_back("removed banned term '" + term + "' from keyframe prompt");
    }
    request.prompt = std::move(filtered.text);
    return request;
}

std::string truncate_at_word(std::string_view text, std::size_t limit) {
    if (utf8_length(text) <= limit) return std::string(text);
    std::size_t count = 0;
    std::size_t cut = text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) == 0x80) continue;
        if (count == limit) {
            cut = i;
            break;
        }
        ++count;
    }
    const std::string_view prefix = text.substr(0, cut);
    if (std::isspace(static_cast<unsigned char>(text[cut]))) return trim(prefix);
    const std::size_t space = prefix.find_last_of(" \t\n\r");
    if (space == std::string_view::npos || trim(prefix.substr(0, space)).empty()) return std::string(prefix);
    return trim(prefix.substr(0, space));
}

VisualizationResponse parse_visualization_response(const std::string& payload) {
    const Json doc = parse_payload(payload);
    if (!doc.is_object()) throw ParseError("visualization payload must be an object");
    VisualizationResponse out;
    out.video_generation_prompt = string_field(doc, "video_generation_prompt", "$");
    out.keyframe_generation_prompt = doc.value("keyframe_generation_prompt", std::string());
    out.keyframe_image_path = doc.value("keyframe_image_path", std::string());
    out.video_save_path = doc.value("video_save_path", std::string());
    out.negative_prompt = doc.value("negative_prompt", std::string());
    return out;
}

VideoPrompt build_video_prompt(const ShotDescription& shot, TextBackend* summarizer, const AgentAssets& assets) {
    VideoPrompt out;
    std::string source = trim(shot.plot);
    if (source.empty()) source = trim(shot.scene_description);
    if (source.empty()) source = trim(shot.scene);

    auto filtered = assets.banned.filter(source);
    for (const auto& term : filtered.removed) out.warnings.push_back("removed banned term '" + term + "' from video prompt");
    out.text = std::move(filtered.text);

    if (utf8_length(out.text) > kMaxVideoPromptChars && summarizer) {
        try {
            const std::string prompt = assets.get(templates::kVisualization)
                                           .render({{"shot_json", to_json(shot).dump(2)},
                                                    {"references", "(not needed for this request)"},
                                                    {"keyframe_path", "keyframe.png"},
                                                    {"video_path", "video"},
                                                    {"limit", std::to_string(kMaxVideoPromptChars)}});
            TextRequest request;
            request.prompt = prompt +
                             "\n\nThe plot above is too long for the video model. Rewrite the essential action "
                             "as the video_generation_prompt within the character limit.";
            request.template_name = std::string(templates::kVisualization);
            request.shot_index = shot.index;
            request.context = Json{{"shot", to_json(shot)}, {"task", "summarize_video_prompt"}};
            const auto response = parse_visualization_response(extract_fenced(summarizer->complete(request)));
            auto summary = assets.banned.filter(response.video_generation_prompt);
            if (summary.text.empty()) {
                out.warnings.push_back("summarizer returned an empty video prompt");
            } else {
                out.text = std::move(summary.text);
                out.summarized = true;
                if (utf8_length(out.text) > kMaxVideoPromptChars) {
                    out.warnings.push_back("summarized video prompt still exceeds the limit");
                }
            }
        } catch (const Error& e) {
            out.warnings.push_back(std::string("video prompt summarization failed: ") + e.what());
        }
    }

    // Cutting can expose a banned term at the new end; filter until stable.
    while (utf8_length(out.text) > kMaxVideoPromptChars || assets.banned.find(out.text)) {
        if (utf8_length(out.text) > kMaxVideoPromptChars) {
            out.text = truncate_at_word(out.text, kMaxVideoPromptChars);
            if (!out.truncated) out.warnings.push_back("video prompt truncated to 500 characters");
            out.truncated = true;
        }
        out.text = assets.banned.filter(out.text).text;
    }
    return out;
}

}  // namespace videomemory
