// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace videomemory {

/// Base of every error raised by the library. `kind()` is a stable short
/// identifier ("ParseError", "DuplicateKey", ...) used by the CLI and tests.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define VIDEOMEMORY_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                          \
    public:                                                              \
        explicit Name(const std::string& message) : Error(#Name, message) {} \
    }

// Storyboard document errors carry the offending field path and shot.
class DocumentError : public Error {
public:
    DocumentError(std::string kind, const std::string& message, std::string field_path,
                  std::optional<int> shot_index)
        : Error(std::move(kind), format(message, field_path, shot_index)),
          field_path_(std::move(field_path)),
          shot_index_(shot_index) {}

    const std::string& field_path() const noexcept { return field_path_; }
    std::optional<int> shot_index() const noexcept { return shot_index_; }

private:
    static std::string format(const std::string& message, const std::string& field_path,
                              std::optional<int> shot_index) {
        std::string out = message;
        if (!field_path.empty()) out += " [at " + field_path + "]";
        if (shot_index) out += " [shot " + std::to_string(*shot_index) + "]";
        return out;
    }

    std::string field_path_;
    std::optional<int> shot_index_;
};

class ParseError : public DocumentError {
public:
    ParseError(const std::string& message, std::string field_path = {},
               std::optional<int> shot_index = std::nullopt)
        : DocumentError("ParseError", message, std::move(field_path), shot_index) {}
};

class ValidationError : public DocumentError {
public:
    ValidationError(const std::string& message, std::string field_path = {},
                    std::optional<int> shot_index = std::nullopt)
        : DocumentError("ValidationError", message, std::move(field_path), shot_index) {}
};

VIDEOMEMORY_DEFINE_ERROR(IoError);

// memory
VIDEOMEMORY_DEFINE_ERROR(DuplicateKey);
VIDEOMEMORY_DEFINE_ERROR(MissingAsset);
VIDEOMEMORY_DEFINE_ERROR(MatcherError);
VIDEOMEMORY_DEFINE_ERROR(GenerationError);

class CorruptIndex : public Error {
public:
    CorruptIndex(const std::string& message, std::vector<std::string> bad_keys)
        : Error("CorruptIndex", message), bad_keys_(std::move(bad_keys)) {}

    const std::vector<std::string>& bad_keys() const noexcept { return bad_keys_; }

private:
    std::vector<std::string> bad_keys_;
};

// agents
VIDEOMEMORY_DEFINE_ERROR(TemplateError);
VIDEOMEMORY_DEFINE_ERROR(ConsistencyError);
VIDEOMEMORY_DEFINE_ERROR(MissingReference);

class AgentRetryError : public Error {
public:
    AgentRetryError(std::string kind, const std::string& message, std::string last_response,
                    int attempts)
        : Error(std::move(kind), message),
          last_response_(std::move(last_response)),
          attempts_(attempts) {}

    const std::string& last_response() const noexcept { return last_response_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string last_response_;
    int attempts_;
};

class PlanningError : public AgentRetryError {
public:
    PlanningError(const std::string& message, std::string last_response, int attempts)
        : AgentRetryError("PlanningError", message, std::move(last_response), attempts) {}
};

class AnalysisError : public AgentRetryError {
public:
    AnalysisError(const std::string& message, std::string last_response, int attempts)
        : AgentRetryError("AnalysisError", message, std::move(last_response), attempts) {}
};

// backends
VIDEOMEMORY_DEFINE_ERROR(QueueExhausted);
VIDEOMEMORY_DEFINE_ERROR(ConfigError);

class BackendError : public Error {
public:
    BackendError(std::string kind, const std::string& message, bool retryable, int attempts = 1)
        : Error(std::move(kind), message), retryable_(retryable), attempts_(attempts) {}

    bool retryable() const noexcept { return retryable_; }
    int attempts() const noexcept { return attempts_; }

private:
    bool retryable_;
    int attempts_;
};

class TimeoutError : public BackendError {
public:
    explicit TimeoutError(const std::string& message, int attempts = 1)
        : BackendError("Timeout", message, true, attempts) {}
};

class HttpStatusError : public BackendError {
public:
    HttpStatusError(int status, const std::string& message, int attempts = 1)
        : BackendError("HttpStatus", message, status < 400 || status >= 500, attempts),
          status_(status) {}

    int status() const noexcept { return status_; }

private:
    int status_;
};

class DecodeError : public BackendError {
public:
    explicit DecodeError(const std::string& message, int attempts = 1)
        : BackendError("DecodeError", message, true, attempts) {}
};

// pipeline
VIDEOMEMORY_DEFINE_ERROR(SnapshotMismatch);
VIDEOMEMORY_DEFINE_ERROR(RunError);

// eval
VIDEOMEMORY_DEFINE_ERROR(EmptyShot);
VIDEOMEMORY_DEFINE_ERROR(DimensionMismatch);
VIDEOMEMORY_DEFINE_ERROR(ZeroVector);
VIDEOMEMORY_DEFINE_ERROR(EmbedderError);
VIDEOMEMORY_DEFINE_ERROR(MissingOutput);

class LayoutError : public Error {
public:
    explicit LayoutError(std::vector<std::string> violations)
        : Error("LayoutError", join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out = "benchmark layout invalid (" + std::to_string(items.size()) +
                          " violation" + (items.size() == 1 ? "" : "s") + ")";
        for (const auto& item : items) out += "\n  - " + item;
        return out;
    }

    std::vector<std::string> violations_;
};

#undef VIDEOMEMORY_DEFINE_ERROR

}  // namespace videomemory
