// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "videomemory/backends.hpp"

// Thin HTTP adapters. The wire scheme is ours, not any provider's; a proxy or
// a per-provider gateway is expected to translate.
//
//   text   POST <endpoint>  {"model", "prompt", "attachments": [{"name", "data"}]}
//          -> {"text": "..."}
//   image  POST <endpoint>  {"model", "prompt", "references": [{"name", "category", "data"}]}
//          (or multipart/form-data: model, prompt, ref_<i> files)
//          -> image/png body, or {"image": "<base64>"}, or {"url": "..."} fetched with GET
//   video  POST <endpoint>  {"model", "prompt", "keyframe": "<base64>"}
//          -> {"frames": ["<base64>", ...]} or {"urls": [...]}
//
// "data" fields are base64 PNG. When `api_key_env` is set, the key is read
// from that environment variable and sent as "Authorization: Bearer <key>".

namespace videomemory {

enum class ReferenceEncoding { inline_base64, multipart };

struct BackendConfig {
    std::string kind = "mock";  // "mock" or "http"
    std::string endpoint;
    std::string model;
    double timeout_seconds = 120;
    int max_retries = 2;
    std::string api_key_env;  // variable NAME; the value never enters config
    int backoff_ms = 250;     // doubled after each failed attempt
    ReferenceEncoding reference_encoding = ReferenceEncoding::inline_base64;

    /// Throws ConfigError: timeout <= 0, retries < 0, http without endpoint.
    void validate() const;
};

BackendConfig backend_config_from_json(const Json& doc);
Json to_json(const BackendConfig& config);

/// One named backend selection: a config per service plus mock tuning.
struct Profile {
    BackendConfig text;
    BackendConfig image;
    BackendConfig video;
    int frames = 5;  // mock video frames per shot
};

Json to_json(const Profile& profile);

/// Config file:
///   {"default_profile": "mock",
///    "profiles": {"<name>": {"text": {...}, "image": {...}, "video": {...}, "frames": 5}}}
/// A built-in all-mock profile named "mock" is always present.
struct ConfigFile {
    std::map<std::string, Profile> profiles;
    std::string default_profile = "mock";

    /// Selected profile (default when `name` is empty). Throws ConfigError.
    const Profile& profile(const std::string& name = {}) const;
};

ConfigFile default_config();
/// Throws ConfigError for unreadable files or invalid entries.
ConfigFile load_config(const std::filesystem::path& path);

/// Thread-safe record of HTTP exchanges. Values of every registered secret are
/// replaced by "***" before an entry is stored.
class RequestLog {
public:
    void add_secret(std::string value);
    void record(Json entry);
    std::vector<Json> entries() const;
    std::string redact(std::string text) const;

private:
    mutable std::mutex mutex_;
    std::vector<std::string> secrets_;
    std::vector<Json> entries_;
};

/// Shared transport: endpoint parsing, auth, retries with exponential backoff.
/// 4xx statuses are not retried.
class HttpTransport {
public:
    HttpTransport(BackendConfig config, std::string service, std::shared_ptr<RequestLog> log);

    struct Response {
        int status = 0;
        std::string content_type;
        std::string body;
        int attempts = 0;
    };

    /// POSTs `body` and returns a 2xx response; decode errors raised by
    /// `check` are retried like transport errors. Throws BackendError subclasses.
    Response post(const std::string& body, const std::string& content_type,
                  const std::function<void(const Response&)>& check = {});
    struct FormPart {
        std::string name;
        std::string content;
        std::string filename;
        std::string content_type;
    };
    /// multipart/form-data variant of post().
    Response post_multipart(const std::vector<FormPart>& parts,
                            const std::function<void(const Response&)>& check = {});
    /// Plain GET of an absolute URL (asset fetch), single attempt.
    std::string fetch(const std::string& url);

    const BackendConfig& config() const { return config_; }

private:
    using Sender = std::function<Response(const std::string& path)>;
    Response send(const Sender& sender, std::size_t request_bytes,
                  const std::function<void(const Response&)>& check);

    BackendConfig config_;
    std::string service_;
    std::shared_ptr<RequestLog> log_;
    std::optional<std::string> api_key_;
};

class HttpTextBackend final : public TextBackend {
public:
    HttpTextBackend(BackendConfig config, std::shared_ptr<RequestLog> log);
    std::string complete(const TextRequest& request) override;

private:
    HttpTransport transport_;
};

class HttpImageBackend final : public ImageBackend {
public:
    HttpImageBackend(BackendConfig config, std::shared_ptr<RequestLog> log);
    AssetRef generate(const ImageRequest& request) override;

private:
    HttpTransport transport_;
};

class HttpVideoBackend final : public VideoBackend {
public:
    HttpVideoBackend(BackendConfig config, std::shared_ptr<RequestLog> log);
    AssetRef animate(const VideoRequest& request) override;

private:
    HttpTransport transport_;
};

}  // namespace videomemory
