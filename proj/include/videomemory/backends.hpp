// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "videomemory/domain.hpp"
#include "videomemory/image.hpp"

namespace videomemory {

// -- contracts -----------------------------------------------------------------

struct TextRequest {
    std::string prompt;
    std::string template_name;        // which agent template produced the prompt
    std::optional<int> shot_index;
    int attempt = 1;
    Json context = Json::object();    // structured inputs the prompt was rendered from
    std::vector<std::filesystem::path> attachments;
};

/// (prompt, attachments) -> non-empty response text, or an exception.
class TextBackend {
public:
    virtual ~TextBackend() = default;
    virtual std::string complete(const TextRequest& request) = 0;
};

enum class ImagePurpose { reference, keyframe };

struct ReferenceImage {
    AssetRef asset;
    std::string name;
    EntityCategory category = EntityCategory::character;
};

struct ImageRequest {
    std::string prompt;
    std::vector<ReferenceImage> references;  // order is significant
    std::filesystem::path output;
    ImagePurpose purpose = ImagePurpose::reference;
    std::string salt;  // mixed into mock generation; ignored by real services
};

/// Writes the output file iff generation succeeds.
class ImageBackend {
public:
    virtual ~ImageBackend() = default;
    virtual AssetRef generate(const ImageRequest& request) = 0;
};

struct VideoRequest {
    AssetRef keyframe;
    std::string prompt;  // <= 500 characters
    std::filesystem::path output_dir;
};

/// Animates a keyframe into a frame sequence whose first frame is the keyframe.
class VideoBackend {
public:
    virtual ~VideoBackend() = default;
    virtual AssetRef animate(const VideoRequest& request) = 0;
};

// -- mocks ---------------------------------------------------------------------

/// Scripted text backend. Queue mode hands out responses in order and throws
/// QueueExhausted once empty. Rule mode maps (template, shot) to a response
/// list: an exact shot rule beats a template-wide rule, successive calls walk
/// the list and the last response repeats. Calls no rule covers go to the
/// fallback responder, then fail with QueueExhausted.
class MockTextBackend final : public TextBackend {
public:
    struct Rule {
        std::string template_name;
        std::optional<int> shot_index;
        std::vector<std::string> responses;
    };
    using Responder = std::function<std::optional<std::string>(const TextRequest&)>;

    static MockTextBackend from_queue(std::vector<std::string> responses);
    static MockTextBackend from_rules(std::vector<Rule> rules, Responder fallback = {});
    /// Fixture document: {"queue": [...]} or {"rules": [{"template", "shot"?,
    /// "response" | "responses"}]}.
    static MockTextBackend from_fixture(const Json& fixture, Responder fallback = {});

    MockTextBackend(const MockTextBackend& other);
    MockTextBackend& operator=(const MockTextBackend&) = delete;

    std::string complete(const TextRequest& request) override;

    int calls() const;
    std::vector<TextRequest> requests() const;

private:
    MockTextBackend() = default;

    mutable std::mutex mutex_;
    bool queue_mode_ = false;
    std::vector<std::string> queue_;
    std::size_t next_ = 0;
    std::vector<Rule> rules_;
    std::vector<std::size_t> rule_cursor_;
    Responder fallback_;
    std::vector<TextRequest> log_;
};

/// Deterministic image generator. Reference requests produce a 64x64 PNG of a
/// solid color taken from the low 24 bits of FNV-1a 64 over prompt ++ the
/// reference digests ++ salt. Keyframe requests paint the reference colors into
/// the fixed mock frame layout (background fill, character and prop slots)
/// with a caption strip in the hash color.
class MockImageBackend final : public ImageBackend {
public:
    AssetRef generate(const ImageRequest& request) override;

    int calls() const { return reference_calls_ + keyframe_calls_; }
    int reference_calls() const { return reference_calls_; }
    int keyframe_calls() const { return keyframe_calls_; }
    std::vector<ImageRequest> requests() const;

    /// The color a request hashes to.
    static Rgb hash_color(const ImageRequest& request);

private:
    std::atomic<int> reference_calls_{0};
    std::atomic<int> keyframe_calls_{0};
    mutable std::mutex mutex_;
    std::vector<ImageRequest> log_;
};

/// Writes `frames` byte-copies of the keyframe as frame_0000.png, ...
class MockVideoBackend final : public VideoBackend {
public:
    explicit MockVideoBackend(int frames = 5);

    AssetRef animate(const VideoRequest& request) override;

    int calls() const { return calls_; }
    int frames() const { return frames_; }

private:
    int frames_;
    std::atomic<int> calls_{0};
};

}  // namespace videomemory
