// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace videomemory {

namespace templates {
inline constexpr std::string_view kStoryboard = "storyboard";
inline constexpr std::string_view kMemoryAnalyze = "memory_analyze";
inline constexpr std::string_view kVisualization = "visualization";
inline constexpr std::string_view kMemoryMatch = "memory_match";
}  // namespace templates

/// Agent instructions with `{{name}}` placeholders. Every placeholder that
/// occurs in the body is required.
class PromptTemplate {
public:
    PromptTemplate(std::string name, int version, std::string body);

    const std::string& name() const { return name_; }
    int version() const { return version_; }
    const std::string& body() const { return body_; }
    const std::set<std::string>& required_placeholders() const { return required_; }

    /// Single-pass substitution; bound values are inserted verbatim. Throws
    /// TemplateError naming every unbound placeholder.
    std::string render(const std::map<std::string, std::string>& bindings) const;

private:
    std::string name_;
    int version_;
    std::string body_;
    std::set<std::string> required_;
};

/// Removes camera, framing and style vocabulary from prompt text.
class BannedTerms {
public:
    explicit BannedTerms(std::vector<std::string> terms);
    /// One term per line; blank lines and '#' comments ignored.
    static BannedTerms parse(std::string_view text);

    struct Filtered {
        std::string text;
        std::vector<std::string> removed;  // terms removed, in order of removal
    };

    /// Collapses whitespace, strips every banned term (longest first, repeated
    /// until none remain) and tidies the spacing left behind.
    Filtered filter(std::string_view text) const;
    /// First banned term occurring in `text`, if any.
    std::optional<std::string> find(std::string_view text) const;

    const std::vector<std::string>& terms() const { return terms_; }

private:
    std::vector<std::string> terms_;  // lowercase, longest first
};

/// Templates plus banned terms used by the agents. Built-in assets can be
/// overridden file-by-file from a directory holding `<template>.txt` and
/// `banned_terms.txt`.
struct AgentAssets {
    std::map<std::string, PromptTemplate, std::less<>> templates;
    BannedTerms banned{{}};

    const PromptTemplate& get(std::string_view name) const;

    static const AgentAssets& builtin();
    static AgentAssets load(const std::optional<std::filesystem::path>& override_dir);
};

inline constexpr int kTemplateVersion = 1;

/// Verbatim benchmark story-generation prompt.
std::string_view benchmark_generation_prompt();

/// Returns the body of the single fenced block (``` or ```json) in an agent
/// response. Throws ParseError when there is no fence, it is unterminated, or
/// more than one fenced block is present.
std::string extract_fenced(std::string_view response);

}  // namespace videomemory
