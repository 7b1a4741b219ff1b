// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "videomemory/error.hpp"
#include "videomemory/eval.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/image.hpp"
#include "videomemory/mock_layout.hpp"

using namespace videomemory;
namespace fs = std::filesystem;

namespace {

FeatureVector vec(std::vector<double> v) { return FeatureVector{std::move(v), true}; }

/// Regenerates one oracle instance's features from its seed.
struct Instance {
    int n_req = 0;
    std::vector<FeatureVector> features;
};

Instance regenerate(std::uint64_t seed) {
    vmtest::SplitMix64 rng(seed);
    Instance out;
    static constexpr int kLengths[] = {4, 8, 12};
    out.n_req = kLengths[rng.next() % 3];
    const auto n_out = 1 + rng.next() % static_cast<std::uint64_t>(out.n_req + 3);
    const auto dim = 2 + rng.next() % 63;
    for (std::uint64_t s = 0; s < n_out; ++s) {
        const bool detected = rng.next() % 10 != 0;
        std::vector<double> values(dim);
        for (auto& v : values) v = rng.unit();
        out.features.push_back(detected ? FeatureVector{values, true} : FeatureVector::missing());
    }
    return out;
}

void write_case(const fs::path& suite, const BenchmarkCase& c, const std::string& file = {}) {
    const fs::path cell = suite / std::string(to_string(c.subclass)) / std::to_string(c.shots_required);
    fs::create_directories(cell);
    write_file_atomic(cell / (file.empty() ? c.id + ".json" : file), to_json(c).dump(2));
}

std::vector<std::string> violations_of(const fs::path& suite) {
    try {
        validate_suite_layout(suite);
    } catch (const LayoutError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& items, const std::string& needle) {
    for (const auto& item : items) {
        if (item.find(needle) != std::string::npos) return true;
    }
    return false;
}

/// Frames of one shot: a solid image per frame, all in `color`.
std::vector<fs::path> solid_shot(const fs::path& dir, Rgb color, int frames = 3) {
    std::vector<fs::path> out;
    for (int i = 0; i < frames; ++i) {
        out.push_back(vmtest::write_solid_png(dir / ("frame_000" + std::to_string(i) + ".png"), color, 16));
    }
    return out;
}

}  // namespace

// -- primitives --------------------------------------------------------------------

TEST(MiddleFrame, IsFloorOfHalfMinusOne) {
    EXPECT_EQ(middle_frame_index(1), 0u);
    EXPECT_EQ(middle_frame_index(2), 0u);
    EXPECT_EQ(middle_frame_index(3), 1u);
    EXPECT_EQ(middle_frame_index(4), 1u);
    EXPECT_EQ(middle_frame_index(81), 40u);
    EXPECT_THROW(middle_frame_index(0), EmptyShot);
}

TEST(Cosine, HandWorkedExamples) {
    EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({0, 1})), 0.0);
    EXPECT_DOUBLE_EQ(cosine(vec({1, 2, 3}), vec({2, 4, 6})), 1.0);
    EXPECT_DOUBLE_EQ(cosine(vec({1, 0}), vec({-1, 0})), -1.0);
    EXPECT_NEAR(cosine(vec({1, 1}), vec({1, 0})), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_THROW(cosine(vec({1, 0}), vec({1, 0, 0})), DimensionMismatch);
    EXPECT_THROW(cosine(vec({0, 0}), vec({1, 0})), ZeroVector);
    EXPECT_THROW(cosine(FeatureVector::missing(), vec({1, 0})), ZeroVector);
}

TEST(AggregateFaces, MeanThenUnitNorm) {
    const FeatureVector v = aggregate_faces({{1, 0}, {0, 1}});
    ASSERT_TRUE(v.detected);
    EXPECT_NEAR(v.values[0], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(v.values[1], 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_FALSE(aggregate_faces({}).detected);
    EXPECT_FALSE(aggregate_faces({{1, 0}, {-1, 0}}).detected);
    EXPECT_THROW(aggregate_faces({{1, 0}, {1}}), DimensionMismatch);
}

// -- scoring -----------------------------------------------------------------------

TEST(Score, EightRequestedSixProducedDividesBySeven) {
    std::vector<FeatureVector> features(6, vec({1, 2, 3}));
    const CaseScore all_ones = score_features("c", Subclass::character_persistent, 8, features);
    EXPECT_NEAR(all_ones.score, 5.0 / 7.0, 1e-12);
    EXPECT_EQ(all_ones.similarities.size(), 5u);

    // Constructed similarities 0.9, 0.8, 0.7, 0.6, 0.5 against e1.
    std::vector<FeatureVector> constructed{vec({1, 0})};
    const double sims[] = {0.9, 0.8, 0.7, 0.6, 0.5};
    for (double s : sims) constructed.push_back(vec({s, std::sqrt(1 - s * s)}));
    const CaseScore score = score_features("c", Subclass::prop_persistent, 8, constructed);
    EXPECT_NEAR(score.score, (0.9 + 0.8 + 0.7 + 0.6 + 0.5) / 7.0, 1e-12);
}

TEST(Score, NegativeSimilaritiesAreClampedAndExtrasDiscarded) {
    const CaseScore s = score_features("c", Subclass::background_persistent, 4,
                                       {vec({1, 0}), vec({-1, 0}), vec({1, 0}), vec({0, 1}), vec({1, 0}), vec({1, 0})});
    EXPECT_DOUBLE_EQ(s.score, 1.0 / 3.0);
    EXPECT_EQ(s.similarities, (std::vector<double>{-1.0, 1.0, 0.0}));
    EXPECT_EQ(s.shots_produced, 6);
    EXPECT_FALSE(s.warnings.empty());
}

TEST(Score, UndetectedShotsContributeZero) {
    const CaseScore missing_ref =
        score_features("c", Subclass::character_persistent, 4, {FeatureVector::missing(), vec({1}), vec({1})});
    EXPECT_EQ(missing_ref.score, 0.0);
    EXPECT_FALSE(missing_ref.warnings.empty());
    const CaseScore gap =
        score_features("c", Subclass::character_persistent, 4, {vec({1}), FeatureVector::missing(), vec({1}), vec({1})});
    EXPECT_DOUBLE_EQ(gap.score, 2.0 / 3.0);
    EXPECT_EQ(gap.detected, (std::vector<bool>{true, false, true, true}));
}

TEST(Score, SingleShotScoresZeroAndInvalidRequestsThrow) {
    EXPECT_EQ(score_features("c", Subclass::character_persistent, 4, {vec({1})}).score, 0.0);
    EXPECT_THROW(score_features("c", Subclass::character_persistent, 4, {}), EmptyShot);
    EXPECT_THROW(score_features("c", Subclass::character_persistent, 1, {vec({1})}), ValidationError);
}

TEST(Score, MatchesBruteForceOracle) {
    const Json oracle = vmtest::load_json(vmtest::data_dir() / "oracle_scores.json");
    const auto& instances = oracle.at("instances");
    ASSERT_GE(instances.size(), 1000u);
    double worst = 0;
    for (const auto& item : instances) {
        const Instance inst = regenerate(item.at("seed").get<std::uint64_t>());
        ASSERT_EQ(inst.n_req, item.at("n_req").get<int>());
        ASSERT_EQ(inst.features.size(), item.at("n_out").get<std::size_t>());
        const CaseScore s = score_features("oracle", Subclass::character_persistent, inst.n_req, inst.features);
        worst = std::max(worst, std::abs(s.score - item.at("score").get<double>()));
        const auto& cosines = item.at("cosines");
        ASSERT_EQ(s.similarities.size(), cosines.size());
        for (std::size_t i = 0; i < cosines.size(); ++i) {
            if (cosines[i].is_null()) EXPECT_EQ(s.similarities[i], 0.0);
            else worst = std::max(worst, std::abs(s.similarities[i] - cosines[i].get<double>()));
        }
    }
    EXPECT_LE(worst, 1e-9);
}

TEST(Score, MonotoneInAddedPerfectShots) {
    // Appending an identical shot never lowers the score while N_out < N_req.
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        Instance inst = regenerate(seed);
        inst.features.resize(1);
        inst.features[0] = vec({1, 0.5});
        double previous = 0;
        for (int n = 2; n <= inst.n_req; ++n) {
            inst.features.push_back(vec({2, 1}));
            const double now = score_features("m", Subclass::prop_persistent, inst.n_req, inst.features).score;
            EXPECT_GE(now, previous);
            previous = now;
        }
        EXPECT_NEAR(previous, 1.0, 1e-12);
    }
}

// -- embedders ---------------------------------------------------------------------

TEST(MockEmbedder, RegionsFollowTheMockLayout) {
    vmtest::TempDir dir;
    RgbImage frame(64, 64, Rgb{0, 0, 100});
    frame.fill(mock_layout::character_slot(64, 64), Rgb{100, 0, 0});
    frame.fill(mock_layout::prop_slot(64, 64), Rgb{0, 100, 0});
    write_png(dir / "f.png", frame);
    MockEmbedder embedder;
    EXPECT_EQ(embedder.embed(FeatureMode::character, dir / "f.png", std::nullopt), vec({1, 0, 0}));
    EXPECT_EQ(embedder.embed(FeatureMode::prop, dir / "f.png", std::string("x")), vec({0, 1, 0}));
    EXPECT_EQ(embedder.embed(FeatureMode::background, dir / "f.png", std::nullopt), vec({0, 0, 1}));
    vmtest::write_solid_png(dir / "black.png", Rgb{0, 0, 0});
    EXPECT_FALSE(embedder.embed(FeatureMode::character, dir / "black.png", std::nullopt).detected);
    EXPECT_EQ(embedder.dim(), 3u);
}

TEST(SequenceScore, UsesMiddleFrameAndSubclassMode) {
    vmtest::TempDir dir;
    BenchmarkCase c{"case", Subclass::character_persistent, 4, {"a", "b", "c", "d"}, "Mara", {}};
    std::vector<std::vector<fs::path>> shots;
    for (int s = 0; s < 4; ++s) {
        // Frame 1 (the middle of 3) carries the shot's color; the others are black.
        auto frames = solid_shot(dir / std::to_string(s), Rgb{0, 0, 0});
        vmtest::write_solid_png(frames[1], s == 2 ? Rgb{0, 50, 0} : Rgb{50, 0, 0}, 16);
        shots.push_back(frames);
    }
    MockEmbedder embedder;
    const CaseScore score = sequence_score(c, shots, embedder);
    EXPECT_NEAR(score.score, 2.0 / 3.0, 1e-12);
}

// -- suite layout ------------------------------------------------------------------

TEST(SuiteLayout, AcceptsCompleteFixtureSuite) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir.path());
    const BenchmarkSuite suite = validate_suite_layout(dir.path());
    EXPECT_TRUE(suite.complete);
    EXPECT_EQ(suite.cases.size(), 54u);
    EXPECT_EQ(suite.cases.front().subclass, Subclass::character_persistent);
    EXPECT_EQ(suite.cases.back().shots_required, 12);
}

TEST(SuiteLayout, ReportsWrongShotCount) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir.path());
    BenchmarkCase c = validate_suite_layout(dir.path()).cases.at(7);
    c.shots.pop_back();
    write_case(dir.path(), c);
    const auto v = violations_of(dir.path());
    EXPECT_TRUE(mentions(v, c.id + ".json: has " + std::to_string(c.shots_required - 1) + " shot texts, expected " +
                                std::to_string(c.shots_required)))
        << ::testing::PrintToString(v);
}

TEST(SuiteLayout, ReportsMissingCell) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir.path());
    fs::remove_all(dir / "prop-persistent" / "8");
    const auto v = violations_of(dir.path());
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], "cell prop-persistent/8 is missing");
}

TEST(SuiteLayout, ReportsBadSubclassTag) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir.path());
    const fs::path file = dir / "background-persistent" / "4" / "background-persistent-4-2.json";
    Json doc = Json::parse(read_file(file));
    doc["subclass"] = "character-persistent";
    write_file_atomic(file, doc.dump());
    const auto v = violations_of(dir.path());
    EXPECT_TRUE(mentions(v, "background-persistent-4-2.json: subclass tag 'character-persistent' does not match "
                            "directory 'background-persistent'"))
        << ::testing::PrintToString(v);
    EXPECT_TRUE(mentions(v, "cell background-persistent/4 has 5 cases, expected 6"));
}

TEST(SuiteLayout, ReportsUnknownDirectoriesDuplicatesAndEmptyTargets) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir.path());
    BenchmarkCase dup = validate_suite_layout(dir.path()).cases.at(0);
    fs::create_directories(dir / "vehicle-persistent");
    fs::create_directories(dir / "prop-persistent" / "6");
    write_case(dir.path(), dup, "copy.json");
    BenchmarkCase blank = dup;
    blank.id = "blank";
    blank.target = " ";
    write_case(dir.path(), blank);
    const auto v = violations_of(dir.path());
    EXPECT_TRUE(mentions(v, "unknown subclass directory 'vehicle-persistent'"));
    EXPECT_TRUE(mentions(v, "prop-persistent/6: shot length must be 4, 8 or 12"));
    EXPECT_TRUE(mentions(v, "duplicate case id"));
    EXPECT_TRUE(mentions(v, "target descriptor is empty"));
}

TEST(SuiteLayout, PartialSuitesAndTemplates) {
    vmtest::TempDir dir;
    scaffold_suite(dir.path());
    EXPECT_THROW(scaffold_suite(dir.path()), IoError);
    EXPECT_NO_THROW(scaffold_suite(dir.path(), true));
    const BenchmarkSuite partial = validate_suite_layout(dir.path(), false);
    EXPECT_TRUE(partial.cases.empty());  // templates are not cases
    EXPECT_FALSE(partial.complete);
    EXPECT_EQ(violations_of(dir.path()).size(), 9u);
    EXPECT_THROW(validate_suite_layout(dir / "absent"), LayoutError);
}

TEST(BenchmarkCase, JsonRoundTripAndSchemaErrors) {
    BenchmarkCase c{"id-1", Subclass::prop_persistent, 4, {"a", "b", "c", "d"}, "brass compass", {}};
    EXPECT_EQ(benchmark_case_from_json(to_json(c)), c);
    Json bad = to_json(c);
    bad["subclass"] = "hat-persistent";
    EXPECT_THROW(benchmark_case_from_json(bad), ParseError);
    EXPECT_EQ(parse_subclass("prop-persistent"), Subclass::prop_persistent);
    EXPECT_EQ(mode_for(Subclass::background_persistent), FeatureMode::background);
    EXPECT_EQ(parse_mode("bg"), FeatureMode::background);
}

// -- suite evaluation --------------------------------------------------------------

TEST(EvaluateSuite, ScoresOutputsAndRecordsMissingCases) {
    vmtest::TempDir dir;
    vmtest::write_fixture_suite(dir / "suite");
    const BenchmarkSuite suite = validate_suite_layout(dir / "suite");
    std::map<std::string, std::vector<std::vector<fs::path>>> outputs;
    const BenchmarkCase& first = suite.cases.at(0);  // character-persistent, 4 shots
    for (int s = 0; s < 4; ++s) outputs[first.id].push_back(solid_shot(dir / "o" / std::to_string(s), Rgb{9, 9, 9}));
    MockEmbedder embedder;
    const EvalReport report = evaluate_suite(suite, outputs, embedder, "mock-method");
    EXPECT_EQ(report.scored(), 1);
    EXPECT_EQ(report.missing(), 53);
    EXPECT_DOUBLE_EQ(report.cell_mean(Subclass::character_persistent, 4).value(), 1.0);
    EXPECT_FALSE(report.cell_mean(Subclass::prop_persistent, 4));

    const Json doc = to_json(report);
    EXPECT_EQ(doc.at("cases").size(), 54u);
    EXPECT_EQ(doc.at("table").at("character").at("4"), 1.0);
    EXPECT_TRUE(doc.at("table").at("prop").at("avg").is_null());
    EXPECT_EQ(doc.at("embedder"), "mock-mean-rgb/1");

    const std::string table = format_table({report});
    EXPECT_NE(table.find("mock-method"), std::string::npos);
    EXPECT_NE(table.find("Character"), std::string::npos);
    EXPECT_NE(table.find("1.000"), std::string::npos);

    write_report(report, dir / "report");
    EXPECT_EQ(Json::parse(read_file(dir / "report" / "report.json")), doc);
    EXPECT_EQ(read_file(dir / "report" / "report.txt").find(table.substr(0, 20)), 0u);
}

TEST(EvaluateSuite, SubclassMeanAveragesOverCases) {
    EvalReport report;
    auto add = [&](int n, double score) {
        CaseScore c;
        c.subclass = Subclass::prop_persistent;
        c.shots_required = n;
        c.score = score;
        report.cases.push_back(c);
    };
    add(4, 1.0);
    add(4, 1.0);
    add(8, 0.0);
    EXPECT_DOUBLE_EQ(report.subclass_mean(Subclass::prop_persistent).value(), 2.0 / 3.0);
}

TEST(LoadRunFrames, FallsBackToShotDirectories) {
    vmtest::TempDir dir;
    solid_shot(dir / "run" / "shots" / "2" / "video", Rgb{1, 1, 1}, 2);
    solid_shot(dir / "run" / "shots" / "1" / "video", Rgb{1, 1, 1}, 4);
    solid_shot(dir / "run" / "shots" / "10" / "video", Rgb{1, 1, 1}, 1);
    const auto frames = load_run_frames(dir / "run");
    ASSERT_EQ(frames.size(), 3u);
    EXPECT_EQ(frames[0].size(), 4u);
    EXPECT_EQ(frames[2].size(), 1u);
    EXPECT_THROW(load_run_frames(dir / "nothing"), MissingOutput);
}
