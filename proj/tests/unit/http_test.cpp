// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "test_support.hpp"
#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/http_backends.hpp"
#include "videomemory/pipeline.hpp"

using namespace videomemory;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSecret = "sk-planted-7f3a9c1e55d2";
constexpr const char* kSecretEnv = "VM_TEST_PLANTED_KEY";

std::string png_bytes(Rgb color) { return encode_png(RgbImage(8, 8, color)); }

/// httplib server on an ephemeral loopback port, stopped on destruction.
class StubServer {
public:
    httplib::Server server;
    std::atomic<int> hits{0};
    std::atomic<int> failures_left{0};
    int failure_status = 500;
    std::string last_authorization;
    std::string last_body;
    std::string last_content_type;

    StubServer() {
        server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            last_authorization = req.get_header_value("Authorization");
            last_body = req.body;
            last_content_type = req.get_header_value("Content-Type");
            if (failures_left > 0) {
                --failures_left;
                res.status = failure_status;
                res.set_content("{\"error\": \"try later\"}", "application/json");
                return httplib::Server::HandlerResponse::Handled;
            }
            return httplib::Server::HandlerResponse::Unhandled;
        });
    }

    void start() {
        port_ = server.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~StubServer() {
        server.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

private:
    int port_ = 0;
    std::thread thread_;
};

BackendConfig http_config(const std::string& endpoint, int retries = 0) {
    BackendConfig config;
    config.kind = "http";
    config.endpoint = endpoint;
    config.model = "stub-model";
    config.timeout_seconds = 5;
    config.max_retries = retries;
    config.backoff_ms = 1;
    return config;
}

TextRequest text_request(const std::string& prompt) {
    TextRequest r;
    r.prompt = prompt;
    r.template_name = "storyboard";
    return r;
}

}  // namespace

TEST(BackendConfig, ParsesAndValidates) {
    const BackendConfig config = backend_config_from_json(
        Json{{"kind", "http"}, {"endpoint", "http://x/y"}, {"max_retries", 4}, {"reference_encoding", "multipart"}});
    EXPECT_EQ(config.max_retries, 4);
    EXPECT_EQ(config.reference_encoding, ReferenceEncoding::multipart);
    EXPECT_EQ(backend_config_from_json(to_json(config)).endpoint, "http://x/y");
    EXPECT_THROW(backend_config_from_json(Json{{"kind", "http"}}), ConfigError);
    EXPECT_THROW(backend_config_from_json(Json{{"timeout_seconds", 0}}), ConfigError);
    EXPECT_THROW(backend_config_from_json(Json{{"max_retries", -1}}), ConfigError);
    EXPECT_THROW(backend_config_from_json(Json{{"api_key", "abc"}}), ConfigError);
    EXPECT_THROW(backend_config_from_json(Json{{"colour", "red"}}), ConfigError);
}

TEST(ConfigFile, LoadsProfilesAndKeepsBuiltinMock) {
    vmtest::TempDir dir;
    write_file_atomic(dir / "c.json", Json{{"default_profile", "remote"},
                                           {"profiles",
                                            {{"remote",
                                              {{"text", {{"kind", "http"}, {"endpoint", "http://h/t"}}},
                                               {"frames", 7}}}}}}
                                          .dump());
    const ConfigFile file = load_config(dir / "c.json");
    EXPECT_EQ(file.profile().text.kind, "http");
    EXPECT_EQ(file.profile().frames, 7);
    EXPECT_EQ(file.profile("mock").image.kind, "mock");
    EXPECT_THROW(file.profile("absent"), ConfigError);
    write_file_atomic(dir / "bad.json", "{");
    EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
    EXPECT_THROW(load_config(dir / "none.json"), ConfigError);
}

TEST(HttpText, SuccessReturnsText) {
    StubServer stub;
    stub.server.Post("/text", [](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body);
        res.set_content(Json{{"text", "echo: " + body.at("prompt").get<std::string>()}}.dump(), "application/json");
    });
    stub.start();
    auto log = std::make_shared<RequestLog>();
    HttpTextBackend text(http_config(stub.url("/text")), log);
    EXPECT_EQ(text.complete(text_request("hi")), "echo: hi");
    const auto entries = log->entries();
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].at("status"), 200);
    EXPECT_EQ(entries[0].at("model"), "stub-model");
    EXPECT_FALSE(entries[0].contains("headers"));
}

TEST(HttpText, ServerErrorIsRetried) {
    StubServer stub;
    stub.failures_left = 1;
    stub.server.Post("/text", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text": "ok"})", "application/json");
    });
    stub.start();
    auto log = std::make_shared<RequestLog>();
    HttpTransport transport(http_config(stub.url("/text"), 1), "text", log);
    const auto response = transport.post("{}", "application/json");
    EXPECT_EQ(response.attempts, 2);
    EXPECT_EQ(stub.hits, 2);
    const auto entries = log->entries();
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].at("status"), 500);
    EXPECT_EQ(entries[1].at("attempt"), 2);
}

TEST(HttpText, ExhaustedRetriesReportAttempts) {
    StubServer stub;
    stub.failures_left = 10;
    stub.server.Post("/text", [](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
    stub.start();
    HttpTextBackend text(http_config(stub.url("/text"), 2), std::make_shared<RequestLog>());
    try {
        text.complete(text_request("x"));
        FAIL() << "expected HttpStatusError";
    } catch (const HttpStatusError& e) {
        EXPECT_EQ(e.status(), 500);
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_TRUE(e.retryable());
    }
    EXPECT_EQ(stub.hits, 3);
}

TEST(HttpText, ClientErrorIsNotRetried) {
    StubServer stub;
    stub.failures_left = 1;
    stub.failure_status = 401;
    stub.server.Post("/text", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"text": "never"})", "application/json");
    });
    stub.start();
    HttpTextBackend text(http_config(stub.url("/text"), 3), std::make_shared<RequestLog>());
    try {
        text.complete(text_request("x"));
        FAIL() << "expected HttpStatusError";
    } catch (const HttpStatusError& e) {
        EXPECT_EQ(e.status(), 401);
        EXPECT_EQ(e.attempts(), 1);
        EXPECT_FALSE(e.retryable());
    }
    EXPECT_EQ(stub.hits, 1);
}

TEST(HttpText, UndecodableBodyIsRetriedThenDecodeError) {
    StubServer stub;
    stub.server.Post("/text", [](const httplib::Request&, httplib::Response& res) {
        res.set_content("<html>busy</html>", "text/html");
    });
    stub.start();
    HttpTextBackend text(http_config(stub.url("/text"), 1), std::make_shared<RequestLog>());
    EXPECT_THROW(text.complete(text_request("x")), DecodeError);
    EXPECT_EQ(stub.hits, 2);
}

TEST(HttpText, SlowServerTimesOut) {
    StubServer stub;
    stub.server.Post("/text", [](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content(R"({"text": "late"})", "application/json");
    });
    stub.start();
    BackendConfig config = http_config(stub.url("/text"));
    config.timeout_seconds = 0.3;
    HttpTextBackend text(config, std::make_shared<RequestLog>());
    EXPECT_THROW(text.complete(text_request("x")), TimeoutError);
}

TEST(HttpText, UnreachableEndpointIsBackendError) {
    HttpTextBackend text(http_config("http://127.0.0.1:1/text"), std::make_shared<RequestLog>());
    EXPECT_THROW(text.complete(text_request("x")), BackendError);
}

TEST(HttpText, MissingKeyVariableIsConfigError) {
    BackendConfig config = http_config("http://127.0.0.1:1/text");
    config.api_key_env = "VM_TEST_VARIABLE_THAT_IS_NOT_SET";
    ::unsetenv(config.api_key_env.c_str());
    EXPECT_THROW(HttpTextBackend(config, std::make_shared<RequestLog>()), ConfigError);
}

TEST(HttpImage, AcceptsPngBodyBase64AndUrl) {
    vmtest::TempDir dir;
    StubServer stub;
    const std::string png = png_bytes(Rgb{10, 20, 30});
    stub.server.Post("/raw", [&](const httplib::Request&, httplib::Response& res) { res.set_content(png, "image/png"); });
    stub.server.Post("/b64", [&](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body);
        EXPECT_EQ(body.at("references").size(), 1u);
        EXPECT_EQ(body.at("references")[0].at("category"), "prop");
        res.set_content(Json{{"image", base64_encode(png)}}.dump(), "application/json");
    });
    stub.server.Post("/url", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(Json{{"url", stub.url("/asset.png")}}.dump(), "application/json");
    });
    stub.server.Get("/asset.png", [&](const httplib::Request&, httplib::Response& res) { res.set_content(png, "image/png"); });
    stub.start();

    const AssetRef ref = image_asset(vmtest::write_solid_png(dir / "ref.png", Rgb{1, 1, 1}));
    for (const std::string path : {"/raw", "/b64", "/url"}) {
        HttpImageBackend image(http_config(stub.url(path)), std::make_shared<RequestLog>());
        ImageRequest request;
        request.prompt = "lantern";
        request.references = {ReferenceImage{ref, "lantern", EntityCategory::prop}};
        request.output = dir / ("out" + path.substr(1) + ".png");
        const AssetRef out = image.generate(request);
        EXPECT_EQ(out.digest, sha256_hex(png)) << path;
    }
}

TEST(HttpImage, MultipartCarriesReferenceFiles) {
    vmtest::TempDir dir;
    StubServer stub;
    std::atomic<std::size_t> files{0};
    stub.server.Post("/img", [&](const httplib::Request& req, httplib::Response& res) {
        files = req.files.size();
        EXPECT_TRUE(req.has_file("ref_0"));
        EXPECT_EQ(req.get_file_value("prompt").content, "scene");
        res.set_content(png_bytes(Rgb{4, 4, 4}), "image/png");
    });
    stub.start();
    BackendConfig config = http_config(stub.url("/img"));
    config.reference_encoding = ReferenceEncoding::multipart;
    HttpImageBackend image(config, std::make_shared<RequestLog>());
    ImageRequest request;
    request.prompt = "scene";
    request.references = {
        ReferenceImage{image_asset(vmtest::write_solid_png(dir / "a.png", Rgb{1, 1, 1})), "a", EntityCategory::character},
        ReferenceImage{image_asset(vmtest::write_solid_png(dir / "b.png", Rgb{2, 2, 2})), "b", EntityCategory::prop}};
    request.output = dir / "out.png";
    image.generate(request);
    EXPECT_EQ(files.load(), 4u);  // model, prompt, ref_0, ref_1
    EXPECT_NE(stub.last_content_type.find("multipart/form-data"), std::string::npos);
}

TEST(HttpImage, NonImageResponseIsDecodeError) {
    vmtest::TempDir dir;
    StubServer stub;
    stub.server.Post("/img", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(Json{{"image", base64_encode(std::string_view("not a png"))}}.dump(), "application/json");
    });
    stub.start();
    HttpImageBackend image(http_config(stub.url("/img")), std::make_shared<RequestLog>());
    ImageRequest request;
    request.prompt = "x";
    request.output = dir / "out.png";
    EXPECT_THROW(image.generate(request), DecodeError);
    EXPECT_FALSE(fs::exists(dir / "out.png"));
}

TEST(HttpVideo, WritesReturnedFrames) {
    vmtest::TempDir dir;
    StubServer stub;
    stub.server.Post("/video", [](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body);
        const std::string keyframe = body.at("keyframe");
        res.set_content(Json{{"frames", {keyframe, keyframe, keyframe}}}.dump(), "application/json");
    });
    stub.start();
    HttpVideoBackend video(http_config(stub.url("/video")), std::make_shared<RequestLog>());
    const AssetRef key = image_asset(vmtest::write_solid_png(dir / "key.png", Rgb{3, 3, 3}));
    const AssetRef seq = video.animate(VideoRequest{key, "walks", dir / "video"});
    EXPECT_EQ(seq.kind, AssetKind::frame_sequence);
    const auto frames = list_frames(dir / "video");
    ASSERT_EQ(frames.size(), 3u);
    EXPECT_EQ(sha256_file(frames[0]), key.digest);
}

TEST(RequestLog, RedactsRegisteredSecrets) {
    RequestLog log;
    log.add_secret(kSecret);
    log.record(Json{{"url", std::string("http://h/?key=") + kSecret}, {"nested", {{"a", kSecret}}}});
    const std::string dumped = log.entries().at(0).dump();
    EXPECT_EQ(dumped.find(kSecret), std::string::npos);
    EXPECT_NE(dumped.find("***"), std::string::npos);
    EXPECT_EQ(log.redact(std::string("x") + kSecret + "y"), "x***y");
}

TEST(Secrets, PlantedKeyNeverReachesLogOrManifest) {
    ::setenv(kSecretEnv, kSecret, 1);
    vmtest::TempDir dir;
    StubServer stub;
    stub.server.Post("/image", [](const httplib::Request& req, httplib::Response& res) {
        const Json body = Json::parse(req.body);
        const auto h = fnv1a64(body.at("prompt").get<std::string>());
        res.set_content(png_bytes(Rgb{static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), 7}),
                        "image/png");
    });
    stub.server.Post("/video", [](const httplib::Request& req, httplib::Response& res) {
        const std::string keyframe = Json::parse(req.body).at("keyframe");
        res.set_content(Json{{"frames", {keyframe, keyframe}}}.dump(), "application/json");
    });
    stub.start();

    // The key travels in the Authorization header and, for the image service,
    // also in the endpoint query string; neither may be recorded.
    BackendConfig image_config = http_config(stub.url(std::string("/image?key=") + kSecret));
    image_config.api_key_env = kSecretEnv;
    BackendConfig video_config = http_config(stub.url("/video"));
    video_config.api_key_env = kSecretEnv;
    auto log = std::make_shared<RequestLog>();
    HttpImageBackend image(image_config, log);
    HttpVideoBackend video(video_config, log);
    vmtest::MockStack mocks;
    RunConfig config;
    config.output_root = dir / "runs";
    config.run_id = "secret-run";
    const RunManifest manifest = run_storyboard(vmtest::character_persistent_board(2), config,
                                                Backends{mocks.text, image, video, log}, mocks.matcher);
    ASSERT_TRUE(manifest.complete());
    EXPECT_EQ(stub.last_authorization, std::string("Bearer ") + kSecret);
    EXPECT_FALSE(manifest.requests.empty());
    for (const auto& entry : log->entries()) EXPECT_EQ(entry.dump().find(kSecret), std::string::npos);
    const std::string manifest_text = read_file(manifest.manifest_path());
    EXPECT_EQ(manifest_text.find(kSecret), std::string::npos);
    EXPECT_NE(manifest_text.find("\"requests\""), std::string::npos);
    ::unsetenv(kSecretEnv);
}
