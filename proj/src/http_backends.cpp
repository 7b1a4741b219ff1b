// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "httplib.h"

#include "videomemory/http_backends.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <thread>

#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"

namespace videomemory {

namespace fs = std::filesystem;

// -- config ------------------------------------------------------------------------

void BackendConfig::validate() const {
    if (kind != "mock" && kind != "http") throw ConfigError("backend kind must be 'mock' or 'http', got '" + kind + "'");
    if (!(timeout_seconds > 0)) throw ConfigError("timeout_seconds must be positive");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (backoff_ms < 0) throw ConfigError("backoff_ms must be >= 0");
    if (kind == "http" && endpoint.find("://") == std::string::npos) {
        throw ConfigError("http backend needs an absolute endpoint URL");
    }
}

BackendConfig backend_config_from_json(const Json& doc) {
    if (!doc.is_object()) throw ConfigError("backend config must be an object");
    static const std::set<std::string> known = {"kind", "endpoint", "model", "timeout_seconds", "max_retries",
                                                "api_key_env", "backoff_ms", "reference_encoding", "api_key"};
    for (const auto& [key, _] : doc.items()) {
        if (!known.contains(key)) throw ConfigError("unknown backend config field '" + key + "'");
    }
    if (doc.contains("api_key")) {
        throw ConfigError("secrets are not accepted in config files; name an environment variable in api_key_env");
    }
    BackendConfig config;
    try {
        config.kind = doc.value("kind", config.kind);
        config.endpoint = doc.value("endpoint", config.endpoint);
        config.model = doc.value("model", config.model);
        config.timeout_seconds = doc.value("timeout_seconds", config.timeout_seconds);
        config.max_retries = doc.value("max_retries", config.max_retries);
        config.api_key_env = doc.value("api_key_env", config.api_key_env);
        config.backoff_ms = doc.value("backoff_ms", config.backoff_ms);
        const std::string encoding = doc.value("reference_encoding", std::string("inline"));
        if (encoding == "inline") config.reference_encoding = ReferenceEncoding::inline_base64;
        else if (encoding == "multipart") config.reference_encoding = ReferenceEncoding::multipart;
        else throw ConfigError("reference_encoding must be 'inline' or 'multipart'");
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("invalid backend config: ") + e.what());
    }
    config.validate();
    return config;
}

Json to_json(const BackendConfig& config) {
    return Json{{"kind", config.kind},
                {"endpoint", config.endpoint},
                {"model", config.model},
                {"timeout_seconds", config.timeout_seconds},
                {"max_retries", config.max_retries},
                {"api_key_env", config.api_key_env},
                {"backoff_ms", config.backoff_ms},
                {"reference_encoding",
                 config.reference_encoding == ReferenceEncoding::multipart ? "multipart" : "inline"}};
}

Json to_json(const Profile& profile) {
    return Json{{"text", to_json(profile.text)},
                {"image", to_json(profile.image)},
                {"video", to_json(profile.video)},
                {"frames", profile.frames}};
}

const Profile& ConfigFile::profile(const std::string& name) const {
    const std::string& wanted = name.empty() ? default_profile : name;
    auto it = profiles.find(wanted);
    if (it == profiles.end()) throw ConfigError("unknown profile '" + wanted + "'");
    return it->second;
}

ConfigFile default_config() {
    ConfigFile config;
    config.profiles.emplace("mock", Profile{});
    return config;
}

ConfigFile load_config(const fs::path& path) {
    Json doc;
    try {
        doc = Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be an object");
    ConfigFile config = default_config();
    if (doc.contains("profiles")) {
        if (!doc.at("profiles").is_object()) throw ConfigError("'profiles' must be an object");
        for (const auto& [name, body] : doc.at("profiles").items()) {
            if (!body.is_object()) throw ConfigError("profile '" + name + "' must be an object");
            Profile profile;
            if (body.contains("text")) profile.text = backend_config_from_json(body.at("text"));
            if (body.contains("image")) profile.image = backend_config_from_json(body.at("image"));
            if (body.contains("video")) profile.video = backend_config_from_json(body.at("video"));
            if (body.contains("frames")) {
                if (!body.at("frames").is_number_integer() || body.at("frames").get<int>() < 1) {
                    throw ConfigError("profile '" + name + "': frames must be a positive integer");
                }
                profile.frames = body.at("frames").get<int>();
            }
            config.profiles[name] = profile;
        }
    }
    if (doc.contains("default_profile")) {
        if (!doc.at("default_profile").is_string()) throw ConfigError("'default_profile' must be a string");
        config.default_profile = doc.at("default_profile").get<std::string>();
    }
    config.profile();  // the default must resolve
    return config;
}

// -- request log ---------------------------------------------------------------------

void RequestLog::add_secret(std::string value) {
    if (value.empty()) return;
    std::lock_guard lock(mutex_);
    secrets_.push_back(std::move(value));
}

std::string RequestLog::redact(std::string text) const {
    std::lock_guard lock(mutex_);
    for (const auto& secret : secrets_) {
        std::size_t pos = 0;
        while ((pos = text.find(secret, pos)) != std::string::npos) {
            text.replace(pos, secret.size(), "***");
            pos += 3;
        }
    }
    return text;
}

void RequestLog::record(Json entry) {
    Json clean = Json::parse(redact(entry.dump()));
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(clean));
}

std::vector<Json> RequestLog::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

// -- transport -----------------------------------------------------------------------

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // "/..." including query
};

Endpoint split_url(const std::string& url) {
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("not an absolute URL: " + url);
    const std::size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

[[noreturn]] void rethrow_with_attempts(const BackendError& e, int attempts) {
    if (const auto* status = dynamic_cast<const HttpStatusError*>(&e)) {
        throw HttpStatusError(status->status(), e.what(), attempts);
    }
    if (dynamic_cast<const TimeoutError*>(&e)) throw TimeoutError(e.what(), attempts);
    if (dynamic_cast<const DecodeError*>(&e)) throw DecodeError(e.what(), attempts);
    throw BackendError(e.kind(), e.what(), e.retryable(), attempts);
}

httplib::Client make_client(const std::string& origin, double timeout_seconds) {
    httplib::Client client(origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(timeout_seconds));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    return client;
}

HttpTransport::Response to_response(const httplib::Result& result) {
    if (!result) {
        const auto error = result.error();
        const std::string message = "request failed: " + httplib::to_string(error);
        if (error == httplib::Error::Read || error == httplib::Error::Write ||
            error == httplib::Error::ConnectionTimeout) {
            throw TimeoutError(message);
        }
        throw BackendError("Connection", message, true);
    }
    HttpTransport::Response response;
    response.status = result->status;
    response.content_type = result->get_header_value("Content-Type");
    response.body = result->body;
    return response;
}

}  // namespace

HttpTransport::HttpTransport(BackendConfig config, std::string service, std::shared_ptr<RequestLog> log)
    : config_(std::move(config)), service_(std::move(service)), log_(std::move(log)) {
    config_.validate();
    if (!log_) log_ = std::make_shared<RequestLog>();
    split_url(config_.endpoint);
    if (!config_.api_key_env.empty()) {
        const char* value = std::getenv(config_.api_key_env.c_str());
        if (!value || !*value) {
            throw ConfigError(service_ + " backend needs environment variable " + config_.api_key_env);
        }
        api_key_ = value;
        log_->add_secret(*api_key_);
    }
}

HttpTransport::Response HttpTransport::send(const Sender& sender, std::size_t request_bytes,
                                            const std::function<void(const Response&)>& check) {
    const Endpoint endpoint = split_url(config_.endpoint);
    const int max_attempts = config_.max_retries + 1;
    for (int attempt = 1;; ++attempt) {
        Json entry{{"service", service_},
                   {"method", "POST"},
                   {"url", config_.endpoint},
                   {"model", config_.model},
                   {"attempt", attempt},
                   {"request_bytes", request_bytes}};
        try {
            Response response = sender(endpoint.path);
            response.attempts = attempt;
            entry["status"] = response.status;
            entry["response_bytes"] = response.body.size();
            if (response.status < 200 || response.status >= 300) {
                throw HttpStatusError(response.status, service_ + " endpoint returned HTTP " +
                                                           std::to_string(response.status));
            }
            if (check) check(response);
            log_->record(std::move(entry));
            return response;
        } catch (const BackendError& e) {
            entry["error"] = e.what();
            log_->record(std::move(entry));
            if (!e.retryable() || attempt >= max_attempts) rethrow_with_attempts(e, attempt);
            const auto delay = std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms) << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
    }
}

HttpTransport::Response HttpTransport::post(const std::string& body, const std::string& content_type,
                                            const std::function<void(const Response&)>& check) {
    const Endpoint endpoint = split_url(config_.endpoint);
    return send(
        [&](const std::string& path) {
            auto client = make_client(endpoint.origin, config_.timeout_seconds);
            httplib::Headers headers;
            if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
            return to_response(client.Post(path, headers, body, content_type));
        },
        body.size(), check);
}

HttpTransport::Response HttpTransport::post_multipart(const std::vector<FormPart>& parts,
                                                      const std::function<void(const Response&)>& check) {
    const Endpoint endpoint = split_url(config_.endpoint);
    httplib::MultipartFormDataItems items;
    std::size_t bytes = 0;
    for (const auto& part : parts) {
        items.push_back({part.name, part.content, part.filename, part.content_type});
        bytes += part.content.size();
    }
    return send(
        [&](const std::string& path) {
            auto client = make_client(endpoint.origin, config_.timeout_seconds);
            httplib::Headers headers;
            if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
            return to_response(client.Post(path, headers, items));
        },
        bytes, check);
}

std::string HttpTransport::fetch(const std::string& url) {
    const Endpoint endpoint = split_url(url);
    auto client = make_client(endpoint.origin, config_.timeout_seconds);
    httplib::Headers headers;
    // Only send credentials back to the configured origin.
    if (api_key_ && endpoint.origin == split_url(config_.endpoint).origin) {
        headers.emplace("Authorization", "Bearer " + *api_key_);
    }
    Response response = to_response(client.Get(endpoint.path, headers));
    log_->record(Json{{"service", service_},
                      {"method", "GET"},
                      {"url", url},
                      {"status", response.status},
                      {"response_bytes", response.body.size()}});
    if (response.status < 200 || response.status >= 300) {
        throw HttpStatusError(response.status, "asset fetch returned HTTP " + std::to_string(response.status));
    }
    return response.body;
}

// -- adapters ------------------------------------------------------------------------

namespace {

Json parse_json_body(const HttpTransport::Response& response) {
    try {
        return Json::parse(response.body);
    } catch (const Json::parse_error& e) {
        throw DecodeError(std::string("response is not JSON: ") + e.what());
    }
}

bool is_png(std::string_view bytes) { return bytes.size() >= 8 && bytes.substr(0, 8) == "\x89PNG\r\n\x1a\n"; }

std::string decode_png_field(const Json& value, const std::string& what) {
    if (!value.is_string()) throw DecodeError(what + " must be a base64 string");
    std::string bytes;
    try {
        const auto raw = base64_decode(value.get<std::string>());
        bytes.assign(raw.begin(), raw.end());
    } catch (const Error&) {
        throw DecodeError(what + " is not valid base64");
    }
    if (!is_png(bytes)) throw DecodeError(what + " is not a PNG image");
    return bytes;
}

}  // namespace

HttpTextBackend::HttpTextBackend(BackendConfig config, std::shared_ptr<RequestLog> log)
    : transport_(std::move(config), "text", std::move(log)) {}

std::string HttpTextBackend::complete(const TextRequest& request) {
    Json attachments = Json::array();
    for (const auto& path : request.attachments) {
        attachments.push_back(Json{{"name", path.filename().string()}, {"data", base64_encode(read_file(path))}});
    }
    const Json body{{"model", transport_.config().model},
                    {"prompt", request.prompt},
                    {"attachments", attachments}};
    std::string text;
    transport_.post(body.dump(), "application/json", [&](const HttpTransport::Response& response) {
        const Json doc = parse_json_body(response);
        if (!doc.is_object() || !doc.contains("text") || !doc.at("text").is_string()) {
            throw DecodeError("text response lacks a 'text' string");
        }
        text = doc.at("text").get<std::string>();
        if (trim(text).empty()) throw DecodeError("text response is empty");
    });
    return text;
}

HttpImageBackend::HttpImageBackend(BackendConfig config, std::shared_ptr<RequestLog> log)
    : transport_(std::move(config), "image", std::move(log)) {}

AssetRef HttpImageBackend::generate(const ImageRequest& request) {
    std::string image;
    const auto check = [&](const HttpTransport::Response& response) {
        if (is_png(response.body)) {
            image = response.body;
            return;
        }
        const Json doc = parse_json_body(response);
        if (doc.is_object() && doc.contains("image")) {
            image = decode_png_field(doc.at("image"), "'image'");
        } else if (doc.is_object() && doc.contains("url") && doc.at("url").is_string()) {
            image = transport_.fetch(doc.at("url").get<std::string>());
            if (!is_png(image)) throw DecodeError("fetched asset is not a PNG image");
        } else {
            throw DecodeError("image response has neither PNG body, 'image' nor 'url'");
        }
    };

    if (transport_.config().reference_encoding == ReferenceEncoding::multipart) {
        std::vector<HttpTransport::FormPart> parts{{"model", transport_.config().model, "", ""},
                                                   {"prompt", request.prompt, "", ""}};
        for (std::size_t i = 0; i < request.references.size(); ++i) {
            const auto& ref = request.references[i];
            parts.push_back({"ref_" + std::to_string(i), read_file(ref.asset.path),
                             ref.asset.path.filename().string(), "image/png"});
        }
        transport_.post_multipart(parts, check);
    } else {
        Json references = Json::array();
        for (const auto& ref : request.references) {
            references.push_back(Json{{"name", ref.name},
                                      {"category", to_string(ref.category)},
                                      {"data", base64_encode(read_file(ref.asset.path))}});
        }
        const Json body{{"model", transport_.config().model},
                        {"prompt", request.prompt},
                        {"references", references}};
        transport_.post(body.dump(), "application/json", check);
    }
    if (request.output.has_parent_path()) fs::create_directories(request.output.parent_path());
    write_file_atomic(request.output, image);
    return image_asset(request.output);
}

HttpVideoBackend::HttpVideoBackend(BackendConfig config, std::shared_ptr<RequestLog> log)
    : transport_(std::move(config), "video", std::move(log)) {}

AssetRef HttpVideoBackend::animate(const VideoRequest& request) {
    std::error_code ec;
    if (!fs::is_regular_file(request.keyframe.path, ec)) {
        throw IoError("keyframe not found: " + request.keyframe.path.string());
    }
    const Json body{{"model", transport_.config().model},
                    {"prompt", request.prompt},
                    {"keyframe", base64_encode(read_file(request.keyframe.path))}};
    std::vector<std::string> frames;
    transport_.post(body.dump(), "application/json", [&](const HttpTransport::Response& response) {
        frames.clear();
        const Json doc = parse_json_body(response);
        if (doc.is_object() && doc.contains("frames") && doc.at("frames").is_array()) {
            for (const auto& frame : doc.at("frames")) frames.push_back(decode_png_field(frame, "frame"));
        } else if (doc.is_object() && doc.contains("urls") && doc.at("urls").is_array()) {
            for (const auto& url : doc.at("urls")) {
                if (!url.is_string()) throw DecodeError("'urls' must hold strings");
                frames.push_back(transport_.fetch(url.get<std::string>()));
                if (!is_png(frames.back())) throw DecodeError("fetched frame is not a PNG image");
            }
        } else {
            throw DecodeError("video response has neither 'frames' nor 'urls'");
        }
        if (frames.empty()) throw DecodeError("video response has no frames");
    });
    fs::create_directories(request.output_dir);
    for (const auto& stale : list_frames(request.output_dir)) fs::remove(stale, ec);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%04zu.png", i);
        write_file_atomic(request.output_dir / name, frames[i]);
    }
    return frame_sequence_asset(request.output_dir);
}

}  // namespace videomemory
