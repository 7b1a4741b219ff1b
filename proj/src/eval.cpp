// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "videomemory/error.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/image.hpp"
#include "videomemory/mock_layout.hpp"

namespace videomemory {

namespace fs = std::filesystem;

// -- enums -------------------------------------------------------------------------

std::string_view to_string(Subclass subclass) {
    switch (subclass) {
        case Subclass::character_persistent: return "character-persistent";
        case Subclass::prop_persistent: return "prop-persistent";
        case Subclass::background_persistent: return "background-persistent";
    }
    return "character-persistent";
}

std::optional<Subclass> parse_subclass(std::string_view text) {
    for (Subclass subclass : kAllSubclasses) {
        if (text == to_string(subclass)) return subclass;
    }
    return std::nullopt;
}

std::string_view to_string(FeatureMode mode) {
    switch (mode) {
        case FeatureMode::character: return "char";
        case FeatureMode::prop: return "prop";
        case FeatureMode::background: return "bg";
    }
    return "char";
}

std::optional<FeatureMode> parse_mode(std::string_view text) {
    if (text == "char") return FeatureMode::character;
    if (text == "prop") return FeatureMode::prop;
    if (text == "bg") return FeatureMode::background;
    return std::nullopt;
}

FeatureMode mode_for(Subclass subclass) {
    switch (subclass) {
        case Subclass::character_persistent: return FeatureMode::character;
        case Subclass::prop_persistent: return FeatureMode::prop;
        case Subclass::background_persistent: return FeatureMode::background;
    }
    return FeatureMode::character;
}

// -- cases ---------------------------------------------------------------------------

Json to_json(const BenchmarkCase& c) {
    return Json{{"id", c.id},
                {"subclass", to_string(c.subclass)},
                {"shots_required", c.shots_required},
                {"shots", c.shots},
                {"target", c.target}};
}

BenchmarkCase benchmark_case_from_json(const Json& doc) {
    if (!doc.is_object()) throw ParseError("case document must be an object");
    auto require = [&](const char* field, auto check, const char* what) -> const Json& {
        if (!doc.contains(field) || !check(doc.at(field))) {
            throw ParseError(std::string("field '") + field + "' must be " + what, field);
        }
        return doc.at(field);
    };
    BenchmarkCase c;
    c.id = require("id", [](const Json& j) { return j.is_string(); }, "a string").get<std::string>();
    if (trim(c.id).empty()) throw ParseError("case id is empty", "id");
    const auto tag = require("subclass", [](const Json& j) { return j.is_string(); }, "a string").get<std::string>();
    const auto subclass = parse_subclass(tag);
    if (!subclass) throw ParseError("unknown subclass tag '" + tag + "'", "subclass");
    c.subclass = *subclass;
    c.shots_required =
        require("shots_required", [](const Json& j) { return j.is_number_integer(); }, "an integer").get<int>();
    const Json& shots = require("shots", [](const Json& j) { return j.is_array(); }, "an array");
    for (std::size_t i = 0; i < shots.size(); ++i) {
        if (!shots[i].is_string()) throw ParseError("shot text must be a string", "shots[" + std::to_string(i) + "]");
        c.shots.push_back(shots[i].get<std::string>());
    }
    c.target = require("target", [](const Json& j) { return j.is_string(); }, "a string").get<std::string>();
    return c;
}

namespace {

bool is_case_file(const fs::path& path) {
    const std::string name = path.filename().string();
    return path.extension() == ".json" && name.find(".template.") == std::string::npos;
}

std::string cell_name(Subclass subclass, int length) {
    return std::string(to_string(subclass)) + "/" + std::to_string(length);
}

std::vector<fs::path> sorted_entries(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

BenchmarkSuite validate_suite_layout(const fs::path& dir, bool require_full) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw LayoutError({"suite directory " + dir.string() + " does not exist"});

    std::vector<std::string> violations;
    std::map<std::pair<Subclass, int>, int> cells;
    std::set<std::string> ids;
    BenchmarkSuite suite;

    for (const auto& sub_dir : sorted_entries(dir)) {
        const std::string sub_name = sub_dir.filename().string();
        if (!fs::is_directory(sub_dir)) {
            if (sub_name.front() != '.') violations.push_back("unexpected file " + sub_name + " at suite root");
            continue;
        }
        const auto subclass = parse_subclass(sub_name);
        if (!subclass) {
            violations.push_back("unknown subclass directory '" + sub_name + "'");
            continue;
        }
        for (const auto& len_dir : sorted_entries(sub_dir)) {
            const std::string len_name = len_dir.filename().string();
            if (!fs::is_directory(len_dir)) {
                if (is_case_file(len_dir)) violations.push_back(sub_name + "/" + len_name + ": case file outside a length directory");
                continue;
            }
            int length = 0;
            if (len_name != "4" && len_name != "8" && len_name != "12") {
                violations.push_back(sub_name + "/" + len_name + ": shot length must be 4, 8 or 12");
                continue;
            }
            length = std::stoi(len_name);
            for (const auto& file : sorted_entries(len_dir)) {
                if (!is_case_file(file)) continue;
                const std::string where = sub_name + "/" + len_name + "/" + file.filename().string();
                BenchmarkCase c;
                try {
                    c = benchmark_case_from_json(Json::parse(read_file(file)));
                } catch (const Json::parse_error& e) {
                    violations.push_back(where + ": not valid JSON (" + e.what() + ")");
                    continue;
                } catch (const Error& e) {
                    violations.push_back(where + ": " + e.what());
                    continue;
                }
                c.source = file;
                bool ok = true;
                if (c.subclass != *subclass) {
                    violations.push_back(where + ": subclass tag '" + std::string(to_string(c.subclass)) +
                                         "' does not match directory '" + sub_name + "'");
                    ok = false;
                }
                if (c.shots_required != 4 && c.shots_required != 8 && c.shots_required != 12) {
                    violations.push_back(where + ": shots_required " + std::to_string(c.shots_required) +
                                         " is not 4, 8 or 12");
                    ok = false;
                } else if (c.shots_required != length) {
                    violations.push_back(where + ": shots_required " + std::to_string(c.shots_required) +
                                         " does not match directory " + len_name);
                    ok = false;
                }
                if (static_cast<int>(c.shots.size()) != c.shots_required) {
                    violations.push_back(where + ": has " + std::to_string(c.shots.size()) + " shot texts, expected " +
                                         std::to_string(c.shots_required));
                    ok = false;
                }
                if (trim(c.target).empty()) {
                    violations.push_back(where + ": target descriptor is empty");
                    ok = false;
                }
                if (!ids.insert(c.id).second) {
                    violations.push_back(where + ": duplicate case id '" + c.id + "'");
                    ok = false;
                }
                if (ok) {
                    ++cells[{*subclass, length}];
                    suite.cases.push_back(std::move(c));
                }
            }
        }
    }

    bool complete = true;
    for (Subclass subclass : kAllSubclasses) {
        for (int length : kShotLengths) {
            const int n = cells[{subclass, length}];
            if (n == kCasesPerCell) continue;
            complete = false;
            if (!require_full) continue;
            if (n == 0) violations.push_back("cell " + cell_name(subclass, length) + " is missing");
            else violations.push_back("cell " + cell_name(subclass, length) + " has " + std::to_string(n) +
                                      " cases, expected " + std::to_string(kCasesPerCell));
        }
    }
    if (!violations.empty()) throw LayoutError(std::move(violations));

    std::sort(suite.cases.begin(), suite.cases.end(), [](const BenchmarkCase& a, const BenchmarkCase& b) {
        return std::tie(a.subclass, a.shots_required, a.id) < std::tie(b.subclass, b.shots_required, b.id);
    });
    suite.complete = complete && suite.cases.size() == static_cast<std::size_t>(kFullSuiteSize);
    return suite;
}

void scaffold_suite(const fs::path& dir, bool force) {
    std::error_code ec;
    if (fs::exists(dir, ec) && !fs::is_empty(dir, ec) && !force) {
        throw IoError("scaffold target " + dir.string() + " is not empty (use --force)");
    }
    for (Subclass subclass : kAllSubclasses) {
        for (int length : kShotLengths) {
            const fs::path cell = dir / std::string(to_string(subclass)) / std::to_string(length);
            fs::create_directories(cell);
            BenchmarkCase c;
            c.id = std::string(to_string(subclass)) + "-" + std::to_string(length) + "-01";
            c.subclass = subclass;
            c.shots_required = length;
            for (int i = 1; i <= length; ++i) c.shots.push_back("Shot " + std::to_string(i) + ": ...");
            c.target = subclass == Subclass::character_persistent ? "description of the persistent character"
                       : subclass == Subclass::prop_persistent    ? "text phrase naming the persistent prop"
                                                                  : "label of the persistent scene";
            write_file_atomic(cell / "case.template.json", to_json(c).dump(2) + "\n");
        }
    }
}

// -- features ------------------------------------------------------------------------

std::size_t middle_frame_index(std::size_t frame_count) {
    if (frame_count == 0) throw EmptyShot("shot has no frames");
    return (frame_count - 1) / 2;
}

const fs::path& middle_frame(const std::vector<fs::path>& frames) { return frames[middle_frame_index(frames.size())]; }

double cosine(const FeatureVector& u, const FeatureVector& v) {
    if (!u.detected || !v.detected) throw ZeroVector("cosine of an undetected feature");
    if (u.values.size() != v.values.size()) {
        throw DimensionMismatch("feature lengths differ: " + std::to_string(u.values.size()) + " vs " +
                                std::to_string(v.values.size()));
    }
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.values.size(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0 || nv == 0) throw ZeroVector("cosine of an all-zero vector");
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

namespace {

FeatureVector normalized(std::vector<double> values) {
    double norm = 0;
    for (double v : values) norm += v * v;
    if (norm == 0 || values.empty()) return FeatureVector::missing();
    norm = std::sqrt(norm);
    for (double& v : values) v /= norm;
    return FeatureVector{std::move(values), true};
}

}  // namespace

FeatureVector aggregate_faces(const std::vector<std::vector<double>>& faces) {
    if (faces.empty()) return FeatureVector::missing();
    std::vector<double> mean(faces.front().size(), 0.0);
    for (const auto& face : faces) {
        if (face.size() != mean.size()) throw DimensionMismatch("face embeddings differ in length");
        for (std::size_t i = 0; i < face.size(); ++i) mean[i] += face[i];
    }
    for (double& v : mean) v /= static_cast<double>(faces.size());
    return normalized(std::move(mean));
}

FeatureVector char_features(const fs::path& frame, Embedder& embedder) {
    return embedder.embed(FeatureMode::character, frame, std::nullopt);
}

FeatureVector prop_features(const fs::path& frame, Embedder& embedder, const std::string& prop_text) {
    return embedder.embed(FeatureMode::prop, frame, prop_text);
}

FeatureVector bg_features(const fs::path& frame, Embedder& embedder) {
    return embedder.embed(FeatureMode::background, frame, std::nullopt);
}

FeatureVector MockEmbedder::embed(FeatureMode mode, const fs::path& frame, const std::optional<std::string>&) {
    const RgbImage image = read_png(frame);
    const int w = image.width();
    const int h = image.height();
    std::array<double, 3> mean{};
    switch (mode) {
        case FeatureMode::character: {
            const Rect slot = mock_layout::character_slot(w, h);
            mean = mean_rgb(image, [&](int x, int y) { return slot.contains(x, y); });
            break;
        }
        case FeatureMode::prop: {
            const Rect slot = mock_layout::prop_slot(w, h);
            mean = mean_rgb(image, [&](int x, int y) { return slot.contains(x, y); });
            break;
        }
        case FeatureMode::background:
            mean = mean_rgb(image, [&](int x, int y) { return mock_layout::in_background(x, y, w, h); });
            break;
    }
    return normalized({mean[0], mean[1], mean[2]});
}

Json MockEmbedder::metadata() const {
    return Json{{"identity", identity()},
                {"dim", dim()},
                {"regions", {{"char", "character slot"}, {"prop", "prop slot"}, {"bg", "background pixels"}}},
                {"face_aggregation", "mean then L2-normalize"}};
}

// -- scoring -------------------------------------------------------------------------

CaseScore score_features(const std::string& case_id, Subclass subclass, int shots_required,
                         const std::vector<FeatureVector>& features) {
    if (shots_required < 2) throw ValidationError("shots_required must be at least 2", "shots_required");
    if (features.empty()) throw EmptyShot("case " + case_id + " produced no shots");
    CaseScore out;
    out.case_id = case_id;
    out.subclass = subclass;
    out.shots_required = shots_required;
    out.shots_produced = static_cast<int>(features.size());
    const std::size_t used = std::min(features.size(), static_cast<std::size_t>(shots_required));
    if (features.size() > used) {
        out.warnings.push_back("discarded " + std::to_string(features.size() - used) + " extra shots");
    }
    for (std::size_t i = 0; i < used; ++i) out.detected.push_back(features[i].detected);

    const FeatureVector& reference = features.front();
    if (used == 1) out.warnings.push_back("no comparison shots");
    if (!reference.detected) {
        out.warnings.push_back("target not detected in the reference shot");
        out.similarities.assign(used - 1, 0.0);
        out.score = 0;
        return out;
    }
    double sum = 0;
    for (std::size_t i = 1; i < used; ++i) {
        double raw = 0;
        if (features[i].detected) {
            try {
                raw = cosine(reference, features[i]);
            } catch (const ZeroVector&) {
                out.warnings.push_back("shot " + std::to_string(i + 1) + " has an all-zero descriptor");
                raw = 0;
            }
        } else {
            out.warnings.push_back("target not detected in shot " + std::to_string(i + 1));
        }
        out.similarities.push_back(raw);
        sum += std::max(0.0, raw);
    }
    out.score = sum / static_cast<double>(shots_required - 1);
    return out;
}

CaseScore sequence_score(const BenchmarkCase& c, const std::vector<std::vector<fs::path>>& shot_frames,
                         Embedder& embedder) {
    if (shot_frames.empty()) throw EmptyShot("case " + c.id + " produced no shots");
    const std::size_t used = std::min(shot_frames.size(), static_cast<std::size_t>(c.shots_required));
    const FeatureMode mode = mode_for(c.subclass);
    std::vector<FeatureVector> features;
    for (std::size_t i = 0; i < used; ++i) {
        const fs::path& frame = middle_frame(shot_frames[i]);
        switch (mode) {
            case FeatureMode::character: features.push_back(char_features(frame, embedder)); break;
            case FeatureMode::prop: features.push_back(prop_features(frame, embedder, c.target)); break;
            case FeatureMode::background: features.push_back(bg_features(frame, embedder)); break;
        }
        if (features.back().detected && features.back().values.size() != embedder.dim()) {
            throw DimensionMismatch("embedder declared dim " + std::to_string(embedder.dim()) + " but returned " +
                                    std::to_string(features.back().values.size()));
        }
    }
    CaseScore score = score_features(c.id, c.subclass, c.shots_required, features);
    score.shots_produced = static_cast<int>(shot_frames.size());
    if (shot_frames.size() > used) {
        score.warnings.insert(score.warnings.begin(),
                              "discarded " + std::to_string(shot_frames.size() - used) + " extra shots");
    }
    return score;
}

// -- reports -------------------------------------------------------------------------

int EvalReport::scored() const {
    return static_cast<int>(std::count_if(cases.begin(), cases.end(), [](const CaseScore& c) { return !c.missing; }));
}

int EvalReport::missing() const { return static_cast<int>(cases.size()) - scored(); }

std::optional<double> EvalReport::cell_mean(Subclass subclass, int shots_required) const {
    double sum = 0;
    int n = 0;
    for (const auto& c : cases) {
        if (c.missing || c.subclass != subclass || c.shots_required != shots_required) continue;
        sum += c.score;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::optional<double> EvalReport::subclass_mean(Subclass subclass) const {
    double sum = 0;
    int n = 0;
    for (const auto& c : cases) {
        if (c.missing || c.subclass != subclass) continue;
        sum += c.score;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / n;
}

std::vector<std::vector<fs::path>> load_run_frames(const fs::path& run_dir) {
    std::vector<std::vector<fs::path>> out;
    const fs::path manifest = run_dir / "manifest.json";
    std::error_code ec;
    if (fs::is_regular_file(manifest, ec)) {
        const Json doc = Json::parse(read_file(manifest));
        for (const auto& video : doc.value("videos", Json::array())) {
            fs::path path = video.get<std::string>();
            out.push_back(list_frames(path.is_absolute() ? path : run_dir / path));
        }
        return out;
    }
    const fs::path shots = run_dir / "shots";
    if (!fs::is_directory(shots, ec)) throw MissingOutput("no shots under " + run_dir.string());
    std::vector<std::pair<int, fs::path>> numbered;
    for (const auto& entry : fs::directory_iterator(shots)) {
        const std::string name = entry.path().filename().string();
        if (name.empty() || !std::all_of(name.begin(), name.end(), ::isdigit)) continue;
        numbered.emplace_back(std::stoi(name), entry.path());
    }
    std::sort(numbered.begin(), numbered.end());
    for (const auto& [index, path] : numbered) {
        const fs::path video = fs::is_directory(path / "video") ? path / "video" : path;
        auto frames = list_frames(video);
        if (frames.empty()) break;  // shots after a gap were not produced
        out.push_back(std::move(frames));
    }
    return out;
}

namespace {

CaseScore missing_score(const BenchmarkCase& c, const std::string& why) {
    CaseScore score;
    score.case_id = c.id;
    score.subclass = c.subclass;
    score.shots_required = c.shots_required;
    score.missing = true;
    score.warnings.push_back(why);
    return score;
}

EvalReport new_report(Embedder& embedder, const std::string& method) {
    EvalReport report;
    report.method = method;
    report.embedder = embedder.identity();
    report.metadata = embedder.metadata();
    return report;
}

}  // namespace

EvalReport evaluate_suite(const BenchmarkSuite& suite, const fs::path& runs_dir, Embedder& embedder,
                          const std::string& method) {
    EvalReport report = new_report(embedder, method);
    for (const auto& c : suite.cases) {
        std::vector<std::vector<fs::path>> frames;
        try {
            frames = load_run_frames(runs_dir / c.id);
        } catch (const MissingOutput&) {
            // Path-free so reports do not depend on where the runs live.
            report.cases.push_back(missing_score(c, "no output for case " + c.id));
            continue;
        }
        if (frames.empty()) {
            report.cases.push_back(missing_score(c, "run for case " + c.id + " produced no shots"));
            continue;
        }
        report.cases.push_back(sequence_score(c, frames, embedder));
    }
    return report;
}

EvalReport evaluate_suite(const BenchmarkSuite& suite,
                          const std::map<std::string, std::vector<std::vector<fs::path>>>& outputs,
                          Embedder& embedder, const std::string& method) {
    EvalReport report = new_report(embedder, method);
    for (const auto& c : suite.cases) {
        auto it = outputs.find(c.id);
        if (it == outputs.end() || it->second.empty()) {
            report.cases.push_back(missing_score(c, "no output for case " + c.id));
            continue;
        }
        report.cases.push_back(sequence_score(c, it->second, embedder));
    }
    return report;
}

namespace {

Json optional_number(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

std::string_view metric_name(Subclass subclass) {
    switch (subclass) {
        case Subclass::character_persistent: return "character";
        case Subclass::prop_persistent: return "prop";
        case Subclass::background_persistent: return "background";
    }
    return "character";
}

}  // namespace

Json to_json(const EvalReport& report) {
    Json cases = Json::array();
    for (const auto& c : report.cases) {
        Json detected = Json::array();
        for (bool d : c.detected) detected.push_back(d);
        cases.push_back(Json{{"id", c.case_id},
                             {"subclass", to_string(c.subclass)},
                             {"shots_required", c.shots_required},
                             {"shots_produced", c.shots_produced},
                             {"score", c.missing ? Json(nullptr) : Json(c.score)},
                             {"similarities", c.similarities},
                             {"detected", detected},
                             {"missing", c.missing},
                             {"warnings", c.warnings}});
    }
    Json table = Json::object();
    for (Subclass subclass : kAllSubclasses) {
        Json row = Json::object();
        for (int length : kShotLengths) row[std::to_string(length)] = optional_number(report.cell_mean(subclass, length));
        row["avg"] = optional_number(report.subclass_mean(subclass));
        table[std::string(metric_name(subclass))] = row;
    }
    return Json{{"method", report.method},
                {"embedder", report.embedder},
                {"metadata", report.metadata},
                {"scored", report.scored()},
                {"missing", report.missing()},
                {"table", table},
                {"cases", cases}};
}

std::string format_table(const std::vector<EvalReport>& reports) {
    auto cell = [](const std::optional<double>& v) {
        char buf[16];
        if (v) std::snprintf(buf, sizeof buf, "%6.3f", *v);
        else std::snprintf(buf, sizeof buf, "%6s", "-");
        return std::string(buf);
    };
    std::size_t width = 6;
    for (const auto& r : reports) width = std::max(width, r.method.size());
    auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };

    std::string out = pad("") + " |";
    for (Subclass subclass : kAllSubclasses) {
        std::string name(metric_name(subclass));
        name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
        const std::size_t span = 4 * 7 - 1;
        const std::size_t left = (span - name.size()) / 2;
        out += " " + std::string(left, ' ') + name + std::string(span - left - name.size(), ' ') + " |";
    }
    out += "\n" + pad("Method") + " |";
    for (int i = 0; i < 3; ++i) out += "      4      8     12    Avg |";
    out += "\n" + std::string(width, '-') + "-+" + std::string(3 * 30, '-') + "\n";
    for (const auto& report : reports) {
        out += pad(report.method) + " |";
        for (Subclass subclass : kAllSubclasses) {
            for (int length : kShotLengths) out += " " + cell(report.cell_mean(subclass, length));
            out += " " + cell(report.subclass_mean(subclass)) + " |";
        }
        out += "\n";
    }
    for (const auto& report : reports) {
        out += "\n" + report.method + ": " + std::to_string(report.scored()) + " scored / " +
               std::to_string(report.missing()) + " missing; embedder " + report.embedder + "\n";
    }
    return out;
}

void write_report(const EvalReport& report, const fs::path& dir) {
    fs::create_directories(dir);
    write_file_atomic(dir / "report.json", to_json(report).dump(2) + "\n");
    write_file_atomic(dir / "report.txt", format_table({report}));
}

}  // namespace videomemory
