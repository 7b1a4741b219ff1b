// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "videomemory/domain.hpp"

namespace videomemory {

// -- benchmark cases -------------------------------------------------------------

enum class Subclass { character_persistent, prop_persistent, background_persistent };

inline constexpr Subclass kAllSubclasses[] = {Subclass::character_persistent, Subclass::prop_persistent,
                                              Subclass::background_persistent};
inline constexpr int kShotLengths[] = {4, 8, 12};
inline constexpr int kCasesPerCell = 6;
inline constexpr int kFullSuiteSize = 54;

/// "character-persistent", "prop-persistent", "background-persistent".
std::string_view to_string(Subclass subclass);
std::optional<Subclass> parse_subclass(std::string_view text);

enum class FeatureMode { character, prop, background };

/// "char", "prop", "bg".
std::string_view to_string(FeatureMode mode);
std::optional<FeatureMode> parse_mode(std::string_view text);
/// One metric per subclass.
FeatureMode mode_for(Subclass subclass);

/// One benchmark script. Stored as <suite>/<subclass>/<N>/<id>.json:
///   {"id", "subclass", "shots_required", "shots": [text, ...], "target"}
struct BenchmarkCase {
    std::string id;
    Subclass subclass = Subclass::character_persistent;
    int shots_required = 4;
    std::vector<std::string> shots;
    std::string target;  // character description, prop phrase or scene label
    std::filesystem::path source;

    friend bool operator==(const BenchmarkCase&, const BenchmarkCase&) = default;
};

Json to_json(const BenchmarkCase& benchmark_case);
/// Throws ParseError for schema problems.
BenchmarkCase benchmark_case_from_json(const Json& doc);

struct BenchmarkSuite {
    std::vector<BenchmarkCase> cases;  // ordered by subclass, length, id
    bool complete = false;             // all 3 x 3 x 6 cells present
};

/// Loads every case file and checks tags, lengths and shot counts against the
/// directory they sit in. With `require_full`, also demands 6 cases in each of
/// the 9 cells. Throws LayoutError listing every violation found.
BenchmarkSuite validate_suite_layout(const std::filesystem::path& dir, bool require_full = true);

/// Writes the 3 x 3 directory grid with a case template in each cell. Throws
/// IoError when `dir` is non-empty and `force` is false.
void scaffold_suite(const std::filesystem::path& dir, bool force = false);

// -- features ----------------------------------------------------------------------

struct FeatureVector {
    std::vector<double> values;  // empty when not detected
    bool detected = false;

    static FeatureVector missing() { return {}; }
    friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Deterministic frame descriptor for one mode.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dim() const = 0;
    virtual std::string identity() const = 0;
    virtual FeatureVector embed(FeatureMode mode, const std::filesystem::path& frame,
                                const std::optional<std::string>& prop_text) = 0;
    /// Free-form metadata echoed into reports.
    virtual Json metadata() const { return Json::object(); }
};

/// Zero-based index of the middle frame: floor((F - 1) / 2). Throws EmptyShot.
std::size_t middle_frame_index(std::size_t frame_count);
const std::filesystem::path& middle_frame(const std::vector<std::filesystem::path>& frames);

/// Throws DimensionMismatch or ZeroVector; undetected inputs are rejected too.
double cosine(const FeatureVector& u, const FeatureVector& v);

/// Mean of the vectors, then L2-normalized. Empty input -> undetected.
FeatureVector aggregate_faces(const std::vector<std::vector<double>>& faces);

FeatureVector char_features(const std::filesystem::path& frame, Embedder& embedder);
FeatureVector prop_features(const std::filesystem::path& frame, Embedder& embedder, const std::string& prop_text);
FeatureVector bg_features(const std::filesystem::path& frame, Embedder& embedder);

/// Mean RGB of the mock frame region that matches the mode (character slot,
/// prop slot, or background pixels), L2-normalized; length 3. A zero mean is
/// reported as not detected.
class MockEmbedder final : public Embedder {
public:
    std::size_t dim() const override { return 3; }
    std::string identity() const override { return "mock-mean-rgb/1"; }
    FeatureVector embed(FeatureMode mode, const std::filesystem::path& frame,
                        const std::optional<std::string>& prop_text) override;
    Json metadata() const override;
};

// -- scoring -----------------------------------------------------------------------

struct CaseScore {
    std::string case_id;
    Subclass subclass = Subclass::character_persistent;
    int shots_required = 0;
    int shots_produced = 0;
    double score = 0;
    std::vector<double> similarities;  // raw cosine for shots 2..min(N_out, N_req); 0 when undetected
    std::vector<bool> detected;        // per scored shot, reference first
    std::vector<std::string> warnings;
    bool missing = false;              // no output for the case

    friend bool operator==(const CaseScore&, const CaseScore&) = default;
};

/// score = sum_{i=2}^{min(N_out, N_req)} max(0, sim(f_1, f_i)) / (N_req - 1).
/// Undetected shots contribute 0; an undetected reference scores 0.
CaseScore score_features(const std::string& case_id, Subclass subclass, int shots_required,
                         const std::vector<FeatureVector>& features);

/// Embeds the middle frame of each produced shot (extra shots discarded) in the
/// subclass's mode and scores the sequence.
CaseScore sequence_score(const BenchmarkCase& benchmark_case,
                         const std::vector<std::vector<std::filesystem::path>>& shot_frames, Embedder& embedder);

struct EvalReport {
    std::string method = "videomemory";
    std::string embedder;
    Json metadata = Json::object();
    std::vector<CaseScore> cases;

    int scored() const;
    int missing() const;
    /// Mean over scored cases of one (subclass, N_req) cell.
    std::optional<double> cell_mean(Subclass subclass, int shots_required) const;
    /// Mean over all scored cases of a subclass.
    std::optional<double> subclass_mean(Subclass subclass) const;
};

/// Frame lists of each produced shot in a run directory: the manifest's
/// videos when present, else <run>/shots/<i>/video in numeric order.
std::vector<std::vector<std::filesystem::path>> load_run_frames(const std::filesystem::path& run_dir);

/// Scores every case against <runs>/<case id>/. Cases without output are
/// recorded as missing and excluded from the means.
EvalReport evaluate_suite(const BenchmarkSuite& suite, const std::filesystem::path& runs_dir, Embedder& embedder,
                          const std::string& method = "videomemory");
EvalReport evaluate_suite(const BenchmarkSuite& suite,
                          const std::map<std::string, std::vector<std::vector<std::filesystem::path>>>& outputs,
                          Embedder& embedder, const std::string& method = "videomemory");

Json to_json(const EvalReport& report);
/// Rows are methods; columns 4 / 8 / 12 / Avg for each of the three metrics.
std::string format_table(const std::vector<EvalReport>& reports);
/// Writes report.json and report.txt into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

// -- sidecar embedder --------------------------------------------------------------

/// Embedder speaking the newline-delimited JSON protocol to an external
/// process (stdio) or a unix-domain socket.
///
///   handshake  <- {"type": "handshake", "dim": N, "identity": "...", "aggregated": bool}
///   request    -> {"mode": "char"|"prop"|"bg", "frame_path": "...", "prop_text"?: "..."}
///   response   <- {"detected": bool, "vector"?: [...], "dim": N, "error"?: "..."}
///                 char mode may answer {"faces": [[...], ...], "dim": N} instead,
///                 which the client aggregates (mean, then L2).
class SidecarEmbedder final : public Embedder {
public:
    ~SidecarEmbedder() override;
    SidecarEmbedder(const SidecarEmbedder&) = delete;
    SidecarEmbedder& operator=(const SidecarEmbedder&) = delete;

    /// Starts `argv` with piped stdin/stdout. Throws EmbedderError.
    static std::unique_ptr<SidecarEmbedder> spawn(const std::vector<std::string>& argv, double timeout_seconds = 60);
    /// Connects to a listening unix socket. Throws EmbedderError.
    static std::unique_ptr<SidecarEmbedder> connect_unix(const std::filesystem::path& socket_path,
                                                         double timeout_seconds = 60);

    std::size_t dim() const override { return dim_; }
    std::string identity() const override { return identity_; }
    bool aggregated() const { return aggregated_; }
    FeatureVector embed(FeatureMode mode, const std::filesystem::path& frame,
                        const std::optional<std::string>& prop_text) override;
    Json metadata() const override { return handshake_; }

private:
    SidecarEmbedder(int read_fd, int write_fd, int pid, double timeout_seconds);
    void handshake();
    void write_line(const std::string& line);
    std::string read_line();

    int read_fd_ = -1;
    int write_fd_ = -1;
    int pid_ = -1;
    int timeout_ms_ = 60000;
    std::string buffer_;
    std::size_t dim_ = 0;
    std::string identity_;
    bool aggregated_ = false;
    Json handshake_ = Json::object();
};

}  // namespace videomemory
