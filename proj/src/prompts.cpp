// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/prompts.hpp"

#include <algorithm>
#include <cctype>

#include "embedded_assets.hpp"
#include "videomemory/domain.hpp"
#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"

namespace videomemory {

namespace {

bool is_placeholder_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// Calls `on(begin, end, name)` for each well-formed {{name}} in `body`.
template <typename Fn>
void scan_placeholders(std::string_view body, Fn on) {
    std::size_t pos = 0;
    while ((pos = body.find("{{", pos)) != std::string_view::npos) {
        const std::size_t close = body.find("}}", pos + 2);
        if (close == std::string_view::npos) return;
        const std::string_view name = body.substr(pos + 2, close - pos - 2);
        if (!name.empty() && std::all_of(name.begin(), name.end(), is_placeholder_char)) {
            on(pos, close + 2, std::string(name));
            pos = close + 2;
        } else {
            pos += 2;
        }
    }
}

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '\'';
}

std::string collapse_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool space = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

std::string tidy(std::string text) {
    text = collapse_whitespace(text);
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        const bool punct = c == ',' || c == '.' || c == ';' || c == ':' || c == '!' || c == '?';
        if (punct && !out.empty() && out.back() == ' ') out.pop_back();
        if (c == ',' && !out.empty() && (out.back() == ',' || out.back() == '.')) continue;
        out.push_back(c);
    }
    std::size_t start = 0;
    while (start < out.size() && (out[start] == ',' || out[start] == ';' || out[start] == ':' || out[start] == ' ')) {
        ++start;
    }
    return trim(std::string_view(out).substr(start));
}

/// Position of the first bounded occurrence of `term` in the lowercase text.
std::optional<std::size_t> find_term(const std::string& lower, const std::string& term) {
    std::size_t pos = 0;
    while ((pos = lower.find(term, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
        const std::size_t end = pos + term.size();
        const bool right_ok = end >= lower.size() || !is_word_char(lower[end]);
        if (left_ok && right_ok) return pos;
        ++pos;
    }
    return std::nullopt;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, int version, std::string body)
    : name_(std::move(name)), version_(version), body_(std::move(body)) {
    scan_placeholders(body_, [&](std::size_t, std::size_t, std::string placeholder) {
        required_.insert(std::move(placeholder));
    });
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    std::vector<std::string> unbound;
    for (const auto& name : required_) {
        if (!bindings.contains(name)) unbound.push_back(name);
    }
    if (!unbound.empty()) {
        std::string message = "template '" + name_ + "' has unbound placeholders:";
        for (const auto& name : unbound) message += " {{" + name + "}}";
        throw TemplateError(message);
    }
    std::string out;
    out.reserve(body_.size());
    std::size_t last = 0;
    scan_placeholders(body_, [&](std::size_t begin, std::size_t end, const std::string& name) {
        out.append(body_, last, begin - last);
        out += bindings.at(name);
        last = end;
    });
    out.append(body_, last, std::string::npos);
    return out;
}

BannedTerms::BannedTerms(std::vector<std::string> terms) {
    for (auto& term : terms) {
        std::string t = to_lower_ascii(collapse_whitespace(term));
        if (!t.empty()) terms_.push_back(std::move(t));
    }
    std::sort(terms_.begin(), terms_.end(), [](const std::string& a, const std::string& b) {
        return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    terms_.erase(std::unique(terms_.begin(), terms_.end()), terms_.end());
}

BannedTerms BannedTerms::parse(std::string_view text) {
    std::vector<std::string> terms;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string line = trim(text.substr(start, end - start));
        if (!line.empty() && line.front() != '#') terms.push_back(std::move(line));
        start = end + 1;
    }
    return BannedTerms(std::move(terms));
}

BannedTerms::Filtered BannedTerms::filter(std::string_view text) const {
    Filtered result;
    result.text = collapse_whitespace(text);
    bool changed = true;
    while (changed) {
        changed = false;
        const std::string lower = to_lower_ascii(result.text);
        for (const auto& term : terms_) {
            if (auto pos = find_term(lower, term)) {
                result.text.erase(*pos, term.size());
                result.removed.push_back(term);
                changed = true;
                break;
            }
        }
    }
    if (!result.removed.empty()) result.text = tidy(result.text);
    else result.text = trim(result.text);
    return result;
}

std::optional<std::string> BannedTerms::find(std::string_view text) const {
    const std::string lower = to_lower_ascii(collapse_whitespace(text));
    for (const auto& term : terms_) {
        if (find_term(lower, term)) return term;
    }
    return std::nullopt;
}

const PromptTemplate& AgentAssets::get(std::string_view name) const {
    auto it = templates.find(name);
    if (it == templates.end()) throw TemplateError("unknown prompt template '" + std::string(name) + "'");
    return it->second;
}

AgentAssets AgentAssets::load(const std::optional<std::filesystem::path>& override_dir) {
    namespace fs = std::filesystem;
    const auto& embedded = embedded_assets();
    auto source = [&](const std::string& relative) -> std::string {
        if (override_dir) {
            const fs::path candidate = *override_dir / fs::path(relative).filename();
            std::error_code ec;
            if (fs::is_regular_file(candidate, ec)) return read_file(candidate);
        }
        auto it = embedded.find(relative);
        if (it == embedded.end()) throw TemplateError("missing built-in asset " + relative);
        return std::string(it->second);
    };

    AgentAssets assets;
    for (std::string_view name : {templates::kStoryboard, templates::kMemoryAnalyze,
                                  templates::kVisualization, templates::kMemoryMatch}) {
        const std::string key(name);
        assets.templates.emplace(key, PromptTemplate(key, kTemplateVersion, source("prompts/" + key + ".txt")));
    }
    assets.banned = BannedTerms::parse(source("banned_terms.txt"));
    return assets;
}

const AgentAssets& AgentAssets::builtin() {
    static const AgentAssets assets = load(std::nullopt);
    return assets;
}

std::string_view benchmark_generation_prompt() {
    return embedded_assets().at("benchmark_generation_prompt.txt");
}

std::string extract_fenced(std::string_view response) {
    const std::size_t open = response.find("```");
    if (open == std::string_view::npos) throw ParseError("response has no fenced block");
    const std::size_t close = response.find("```", open + 3);
    if (close == std::string_view::npos) throw ParseError("fenced block is unterminated");
    if (response.find("```", close + 3) != std::string_view::npos) {
        throw ParseError("response contains more than one fenced block");
    }
    const std::string_view inner = response.substr(open + 3, close - open - 3);
    const std::size_t newline = inner.find('\n');
    if (newline == std::string_view::npos) return trim(inner);  // ```{...}```
    // The first line is an optional info string such as "json".
    const std::string info = trim(inner.substr(0, newline));
    const bool is_tag = std::all_of(info.begin(), info.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_';
    });
    return trim(is_tag ? inner.substr(newline + 1) : inner);
}

}  // namespace videomemory
