// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "test_support.hpp"
#include "videomemory/error.hpp"
#include "videomemory/eval.hpp"

using namespace videomemory;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> fake(std::vector<std::string> flags = {}) {
    flags.insert(flags.begin(), VM_FAKE_SIDECAR);
    return flags;
}

FeatureVector padded(FeatureVector v, std::size_t dim) {
    v.values.resize(dim, 0.0);
    return v;
}

void expect_near(const FeatureVector& a, const FeatureVector& b) {
    ASSERT_EQ(a.detected, b.detected);
    ASSERT_EQ(a.values.size(), b.values.size());
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

/// Runs the fake in unix-socket mode for the lifetime of the object.
class SocketSidecar {
public:
    explicit SocketSidecar(const fs::path& socket) : socket_(socket) {
        pid_ = ::fork();
        if (pid_ == 0) {
            const std::string path = socket.string();
            ::execl(VM_FAKE_SIDECAR, VM_FAKE_SIDECAR, "--unix", path.c_str(), "--dim", "5", static_cast<char*>(nullptr));
            ::_exit(127);
        }
        for (int i = 0; i < 200 && !fs::exists(socket); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ~SocketSidecar() {
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            ::waitpid(pid_, nullptr, 0);
        }
    }

private:
    fs::path socket_;
    pid_t pid_ = -1;
};

}  // namespace

class SidecarTest : public ::testing::Test {
protected:
    void SetUp() override {
        frame_ = vmtest::write_solid_png(dir_ / "frame.png", Rgb{30, 60, 90});
        vmtest::write_solid_png(dir_ / "black.png", Rgb{0, 0, 0});
    }
    vmtest::TempDir dir_;
    fs::path frame_;
    MockEmbedder local_;
};

TEST_F(SidecarTest, StdioHandshakeAndVectors) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--dim", "8"}), 10);
    EXPECT_EQ(sidecar->dim(), 8u);
    EXPECT_EQ(sidecar->identity(), "fake-sidecar/1");
    EXPECT_FALSE(sidecar->aggregated());
    EXPECT_EQ(sidecar->metadata().at("type"), "handshake");
    for (FeatureMode mode : {FeatureMode::character, FeatureMode::prop, FeatureMode::background}) {
        const std::optional<std::string> text =
            mode == FeatureMode::prop ? std::optional<std::string>("compass") : std::nullopt;
        expect_near(sidecar->embed(mode, frame_, text), padded(local_.embed(mode, frame_, text), 8));
    }
    EXPECT_FALSE(sidecar->embed(FeatureMode::character, dir_ / "black.png", std::nullopt).detected);
}

TEST_F(SidecarTest, RelativeFramePathsAreResolved) {
    auto sidecar = SidecarEmbedder::spawn(fake(), 10);
    const fs::path cwd = fs::current_path();
    fs::current_path(dir_.path());
    const FeatureVector v = sidecar->embed(FeatureMode::background, "frame.png", std::nullopt);
    fs::current_path(cwd);
    EXPECT_TRUE(v.detected);
}

TEST_F(SidecarTest, FaceListsAreAggregatedClientSide) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--faces", "--dim", "4"}), 10);
    EXPECT_TRUE(sidecar->aggregated());
    expect_near(sidecar->embed(FeatureMode::character, frame_, std::nullopt),
                padded(local_.embed(FeatureMode::character, frame_, std::nullopt), 4));
}

TEST_F(SidecarTest, ScoresThroughTheSidecarMatchLocalScores) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--dim", "6"}), 10);
    const fs::path other = vmtest::write_solid_png(dir_ / "other.png", Rgb{90, 60, 30});
    BenchmarkCase c{"c", Subclass::background_persistent, 4, {"a", "b", "c", "d"}, "hall", {}};
    const std::vector<std::vector<fs::path>> shots{{frame_}, {other}, {frame_}, {other}};
    EXPECT_NEAR(sequence_score(c, shots, *sidecar).score, sequence_score(c, shots, local_).score, 1e-12);
}

TEST_F(SidecarTest, DimensionMismatchIsAnEmbedderError) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--bad-dim"}), 10);
    EXPECT_THROW(sidecar->embed(FeatureMode::prop, frame_, std::string("x")), EmbedderError);
}

TEST_F(SidecarTest, ErrorFieldIsAnEmbedderError) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--error"}), 10);
    try {
        sidecar->embed(FeatureMode::character, frame_, std::nullopt);
        FAIL() << "expected EmbedderError";
    } catch (const EmbedderError& e) {
        EXPECT_NE(std::string(e.what()).find("model not loaded"), std::string::npos);
    }
}

TEST_F(SidecarTest, DeadSidecarIsAnEmbedderError) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--die-after", "1"}), 10);
    EXPECT_NO_THROW(sidecar->embed(FeatureMode::background, frame_, std::nullopt));
    EXPECT_THROW(sidecar->embed(FeatureMode::background, frame_, std::nullopt), EmbedderError);
}

TEST_F(SidecarTest, SilentSidecarTimesOut) {
    auto sidecar = SidecarEmbedder::spawn(fake({"--hang"}), 0.3);
    const auto start = std::chrono::steady_clock::now();
    EXPECT_THROW(sidecar->embed(FeatureMode::background, frame_, std::nullopt), EmbedderError);
    EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(5));
}

TEST_F(SidecarTest, StartupFailures) {
    EXPECT_THROW(SidecarEmbedder::spawn(fake({"--no-handshake"}), 10), EmbedderError);
    EXPECT_THROW(SidecarEmbedder::spawn({}, 10), EmbedderError);
    EXPECT_THROW(SidecarEmbedder::spawn({(dir_ / "no-such-binary").string()}, 2), EmbedderError);
    EXPECT_THROW(SidecarEmbedder::connect_unix(dir_ / "absent.sock", 2), EmbedderError);
}

TEST_F(SidecarTest, UnixSocketTransport) {
    const fs::path socket = dir_ / "s.sock";
    SocketSidecar server(socket);
    ASSERT_TRUE(fs::exists(socket));
    auto sidecar = SidecarEmbedder::connect_unix(socket, 10);
    EXPECT_EQ(sidecar->dim(), 5u);
    expect_near(sidecar->embed(FeatureMode::prop, frame_, std::string("compass")),
                padded(local_.embed(FeatureMode::prop, frame_, std::string("compass")), 5));
}
