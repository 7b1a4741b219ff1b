// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>

#include "videomemory/backends.hpp"
#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/mock_layout.hpp"

namespace videomemory {

namespace fs = std::filesystem;

// -- text ------------------------------------------------------------------------

MockTextBackend MockTextBackend::from_queue(std::vector<std::string> responses) {
    MockTextBackend mock;
    mock.queue_mode_ = true;
    mock.queue_ = std::move(responses);
    return mock;
}

MockTextBackend MockTextBackend::from_rules(std::vector<Rule> rules, Responder fallback) {
    MockTextBackend mock;
    for (const auto& rule : rules) {
        if (rule.responses.empty()) {
            throw ConfigError("mock rule for template '" + rule.template_name + "' has no responses");
        }
    }
    mock.rules_ = std::move(rules);
    mock.rule_cursor_.assign(mock.rules_.size(), 0);
    mock.fallback_ = std::move(fallback);
    return mock;
}

MockTextBackend MockTextBackend::from_fixture(const Json& fixture, Responder fallback) {
    if (!fixture.is_object()) throw ConfigError("mock text fixture must be an object");
    if (fixture.contains("queue")) {
        return from_queue(fixture.at("queue").get<std::vector<std::string>>());
    }
    std::vector<Rule> rules;
    if (fixture.contains("rules")) {
        for (const auto& item : fixture.at("rules")) {
            Rule rule;
            rule.template_name = item.at("template").get<std::string>();
            if (item.contains("shot") && !item.at("shot").is_null()) rule.shot_index = item.at("shot").get<int>();
            if (item.contains("responses")) {
                rule.responses = item.at("responses").get<std::vector<std::string>>();
            } else {
                rule.responses.push_back(item.at("response").get<std::string>());
            }
            rules.push_back(std::move(rule));
        }
    }
    return from_rules(std::move(rules), std::move(fallback));
}

MockTextBackend::MockTextBackend(const MockTextBackend& other) {
    std::lock_guard lock(other.mutex_);
    queue_mode_ = other.queue_mode_;
    queue_ = other.queue_;
    next_ = other.next_;
    rules_ = other.rules_;
    rule_cursor_ = other.rule_cursor_;
    fallback_ = other.fallback_;
    log_ = other.log_;
}

std::string MockTextBackend::complete(const TextRequest& request) {
    std::unique_lock lock(mutex_);
    log_.push_back(request);
    if (queue_mode_) {
        if (next_ >= queue_.size()) {
            throw QueueExhausted("mock text queue exhausted after " + std::to_string(queue_.size()) +
                                 " responses");
        }
        return queue_[next_++];
    }

    std::optional<std::size_t> chosen;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& rule = rules_[i];
        if (rule.template_name != request.template_name) continue;
        if (rule.shot_index) {
            if (request.shot_index && *rule.shot_index == *request.shot_index) {
                chosen = i;
                break;
            }
        } else if (!chosen) {
            chosen = i;
        }
    }
    if (chosen) {
        auto& cursor = rule_cursor_[*chosen];
        const auto& responses = rules_[*chosen].responses;
        const std::string& response = responses[std::min(cursor, responses.size() - 1)];
        ++cursor;
        return response;
    }
    if (fallback_) {
        auto responder = fallback_;
        lock.unlock();
        if (auto response = responder(request)) return *response;
    }
    throw QueueExhausted("no mock response for template '" + request.template_name + "'" +
                         (request.shot_index ? " shot " + std::to_string(*request.shot_index) : ""));
}

int MockTextBackend::calls() const {
    std::lock_guard lock(mutex_);
    return static_cast<int>(log_.size());
}

std::vector<TextRequest> MockTextBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

// -- image -----------------------------------------------------------------------

namespace {

Rgb color_from_hash(std::uint64_t h) {
    return Rgb{static_cast<std::uint8_t>((h >> 16) & 0xff), static_cast<std::uint8_t>((h >> 8) & 0xff),
               static_cast<std::uint8_t>(h & 0xff)};
}

Rgb mean_color(const fs::path& path) {
    const RgbImage image = read_png(path);
    const auto mean = mean_rgb(image, [](int, int) { return true; });
    auto channel = [](double v) { return static_cast<std::uint8_t>(std::lround(v)); };
    return Rgb{channel(mean[0]), channel(mean[1]), channel(mean[2])};
}

}  // namespace

Rgb MockImageBackend::hash_color(const ImageRequest& request) {
    std::uint64_t h = fnv1a64(request.prompt);
    for (const auto& ref : request.references) h = fnv1a64(ref.asset.digest, h);
    h = fnv1a64(request.salt, h);
    return color_from_hash(h);
}

AssetRef MockImageBackend::generate(const ImageRequest& request) {
    {
        std::lock_guard lock(mutex_);
        log_.push_back(request);
    }
    const Rgb hashed = hash_color(request);
    constexpr int size = mock_layout::kMockImageSize;

    RgbImage image(size, size, hashed);
    if (request.purpose == ImagePurpose::keyframe) {
        ++keyframe_calls_;
        std::vector<Rgb> characters;
        std::vector<Rgb> props;
        std::optional<Rgb> background;
        for (const auto& ref : request.references) {
            const Rgb color = mean_color(ref.asset.path);
            switch (ref.category) {
                case EntityCategory::character: characters.push_back(color); break;
                case EntityCategory::prop: props.push_back(color); break;
                case EntityCategory::background:
                    if (!background) background = color;
                    break;
            }
        }
        if (background) image.fill({0, 0, size, size}, *background);
        image.fill(mock_layout::caption_strip(size, size), hashed);
        const auto paint = [&](const Rect& slot, const std::vector<Rgb>& colors) {
            const int n = static_cast<int>(colors.size());
            for (int i = 0; i < n; ++i) image.fill(mock_layout::band(slot, i, n), colors[static_cast<std::size_t>(i)]);
        };
        paint(mock_layout::character_slot(size, size), characters);
        paint(mock_layout::prop_slot(size, size), props);
    } else {
        ++reference_calls_;
    }
    write_png(request.output, image);
    return image_asset(request.output);
}

std::vector<ImageRequest> MockImageBackend::requests() const {
    std::lock_guard lock(mutex_);
    return log_;
}

// -- video -----------------------------------------------------------------------

MockVideoBackend::MockVideoBackend(int frames) : frames_(frames) {
    if (frames < 1) throw ConfigError("mock video needs at least one frame per shot");
}

AssetRef MockVideoBackend::animate(const VideoRequest& request) {
    ++calls_;
    std::error_code ec;
    if (!fs::is_regular_file(request.keyframe.path, ec)) {
        throw IoError("keyframe not found: " + request.keyframe.path.string());
    }
    const std::string bytes = read_file(request.keyframe.path);
    fs::create_directories(request.output_dir);
    for (const auto& stale : list_frames(request.output_dir)) fs::remove(stale, ec);
    for (int i = 0; i < frames_; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04d.png", i);
        write_file_atomic(request.output_dir / name, bytes);
    }
    return frame_sequence_asset(request.output_dir);
}

}  // namespace videomemory
