// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>

#include "videomemory/error.hpp"
#include "videomemory/eval.hpp"

namespace videomemory {

namespace fs = std::filesystem;

namespace {

std::string errno_text() { return std::strerror(errno); }

/// Writes all of `data`, with SIGPIPE suppressed for this thread.
bool write_all(int fd, std::string_view data) {
    sigset_t block;
    sigset_t old;
    sigemptyset(&block);
    sigaddset(&block, SIGPIPE);
    pthread_sigmask(SIG_BLOCK, &block, &old);
    bool ok = true;
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            ok = false;
            break;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    if (!ok && errno == EPIPE) {
        const timespec zero{0, 0};
        sigtimedwait(&block, nullptr, &zero);  // discard the pending SIGPIPE
    }
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    return ok;
}

}  // namespace

SidecarEmbedder::SidecarEmbedder(int read_fd, int write_fd, int pid, double timeout_seconds)
    : read_fd_(read_fd), write_fd_(write_fd), pid_(pid), timeout_ms_(static_cast<int>(timeout_seconds * 1000)) {}

SidecarEmbedder::~SidecarEmbedder() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
        // Closing stdin asks the sidecar to exit; give it a moment, then insist.
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) != 0) return;
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
    }
}

std::unique_ptr<SidecarEmbedder> SidecarEmbedder::spawn(const std::vector<std::string>& argv, double timeout_seconds) {
    if (argv.empty()) throw EmbedderError("sidecar command is empty");
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw EmbedderError("pipe failed: " + errno_text());
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
        ::close(to_child[0]);
        ::close(to_child[1]);
        throw EmbedderError("pipe failed: " + errno_text());
    }
    std::vector<char*> args;
    for (const auto& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) throw EmbedderError("fork failed: " + errno_text());
    if (pid == 0) {
        ::dup2(to_child[0], STDIN_FILENO);
        ::dup2(from_child[1], STDOUT_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    std::unique_ptr<SidecarEmbedder> embedder(new SidecarEmbedder(from_child[0], to_child[1], pid, timeout_seconds));
    embedder->handshake();
    return embedder;
}

std::unique_ptr<SidecarEmbedder> SidecarEmbedder::connect_unix(const fs::path& socket_path, double timeout_seconds) {
    sockaddr_un address{};
    address.sun_family = AF_UNIX;
    const std::string path = socket_path.string();
    if (path.size() >= sizeof address.sun_path) throw EmbedderError("socket path too long: " + path);
    std::memcpy(address.sun_path, path.c_str(), path.size() + 1);
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0) throw EmbedderError("socket failed: " + errno_text());
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&address), sizeof address) != 0) {
        const std::string reason = errno_text();
        ::close(fd);
        throw EmbedderError("cannot connect to sidecar at " + path + ": " + reason);
    }
    std::unique_ptr<SidecarEmbedder> embedder(new SidecarEmbedder(fd, fd, -1, timeout_seconds));
    embedder->handshake();
    return embedder;
}

void SidecarEmbedder::write_line(const std::string& line) {
    if (!write_all(write_fd_, line + "\n")) throw EmbedderError("sidecar closed its input: " + errno_text());
}

std::string SidecarEmbedder::read_line() {
    for (;;) {
        const std::size_t newline = buffer_.find('\n');
        if (newline != std::string::npos) {
            std::string line = buffer_.substr(0, newline);
            buffer_.erase(0, newline + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            return line;
        }
        pollfd pfd{read_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, timeout_ms_);
        if (ready == 0) throw EmbedderError("sidecar did not answer within the timeout");
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw EmbedderError("poll failed: " + errno_text());
        }
        char chunk[4096];
        const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw EmbedderError("read from sidecar failed: " + errno_text());
        }
        if (n == 0) throw EmbedderError("sidecar closed the connection");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void SidecarEmbedder::handshake() {
    Json doc;
    try {
        doc = Json::parse(read_line());
    } catch (const Json::parse_error& e) {
        throw EmbedderError(std::string("malformed sidecar handshake: ") + e.what());
    }
    if (!doc.is_object() || doc.value("type", std::string()) != "handshake") {
        throw EmbedderError("first sidecar record is not a handshake");
    }
    if (!doc.contains("dim") || !doc.at("dim").is_number_integer() || doc.at("dim").get<long>() <= 0) {
        throw EmbedderError("sidecar handshake lacks a positive 'dim'");
    }
    dim_ = doc.at("dim").get<std::size_t>();
    identity_ = doc.value("identity", std::string("unknown"));
    aggregated_ = doc.value("aggregated", false);
    handshake_ = doc;
}

FeatureVector SidecarEmbedder::embed(FeatureMode mode, const fs::path& frame,
                                     const std::optional<std::string>& prop_text) {
    Json request{{"mode", to_string(mode)}, {"frame_path", fs::absolute(frame).string()}};
    if (prop_text) request["prop_text"] = *prop_text;
    write_line(request.dump());

    Json doc;
    try {
        doc = Json::parse(read_line());
    } catch (const Json::parse_error& e) {
        throw EmbedderError(std::string("malformed sidecar response: ") + e.what());
    }
    if (!doc.is_object()) throw EmbedderError("sidecar response is not an object");
    if (doc.contains("error") && !doc.at("error").is_null()) {
        throw EmbedderError("sidecar error for " + frame.string() + ": " + doc.at("error").dump());
    }
    if (!doc.contains("dim") || !doc.at("dim").is_number_integer() || doc.at("dim").get<std::size_t>() != dim_) {
        throw EmbedderError("sidecar response dim differs from handshake dim " + std::to_string(dim_));
    }
    auto read_vector = [&](const Json& values) {
        if (!values.is_array() || values.size() != dim_) {
            throw EmbedderError("sidecar vector length differs from dim " + std::to_string(dim_));
        }
        std::vector<double> out;
        for (const auto& v : values) {
            if (!v.is_number()) throw EmbedderError("sidecar vector holds a non-number");
            out.push_back(v.get<double>());
        }
        return out;
    };

    if (doc.contains("faces")) {
        if (!doc.at("faces").is_array()) throw EmbedderError("'faces' must be a list of vectors");
        std::vector<std::vector<double>> faces;
        for (const auto& face : doc.at("faces")) faces.push_back(read_vector(face));
        return aggregate_faces(faces);
    }
    if (!doc.contains("detected") || !doc.at("detected").is_boolean()) {
        throw EmbedderError("sidecar response lacks boolean 'detected'");
    }
    if (!doc.at("detected").get<bool>()) {
        if (doc.contains("vector") && !doc.at("vector").is_null()) {
            throw EmbedderError("undetected sidecar response carries a vector");
        }
        return FeatureVector::missing();
    }
    if (!doc.contains("vector")) throw EmbedderError("detected sidecar response lacks 'vector'");
    return FeatureVector{read_vector(doc.at("vector")), true};
}

}  // namespace videomemory
