// Copyright 2026 The VideoMemory Authors
// SPDX-License-Identifier: Apache-2.0

#include "videomemory/cli.hpp"

#include <sstream>

#include "CLI11.hpp"
#include "videomemory/agents.hpp"
#include "videomemory/error.hpp"
#include "videomemory/eval.hpp"
#include "videomemory/hash.hpp"
#include "videomemory/pipeline.hpp"
#include "videomemory/prompts.hpp"

namespace videomemory {

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
    std::string config_path;
    std::string profile;
    std::string out = "runs";
    bool verbose = false;
};

struct Context {
    std::ostream& out;
    std::ostream& err;
    GlobalOptions global;
};

ConfigFile load_effective_config(const GlobalOptions& global) {
    return global.config_path.empty() ? default_config() : load_config(global.config_path);
}

std::optional<Json> load_fixture(const std::string& path) {
    if (path.empty()) return std::nullopt;
    try {
        return Json::parse(read_file(path));
    } catch (const Json::parse_error& e) {
        throw ConfigError("mock responses file " + path + " is not valid JSON: " + e.what());
    }
}

Synopsis read_synopsis(const fs::path& path) {
    const std::string text = read_file(path);
    const Json doc = Json::parse(text, nullptr, false);
    if (doc.is_object() && doc.contains("text")) return synopsis_from_json(doc);
    return make_synopsis(trim(text));
}

std::unique_ptr<SemanticMatcher> make_matcher(const Profile& profile, TextBackend& text) {
    if (profile.text.kind == "http") return std::make_unique<LlmMatcher>(text);
    return std::make_unique<ExactMatcher>();
}

std::vector<std::string> split_command(const std::string& command) {
    std::istringstream in(command);
    std::vector<std::string> argv;
    for (std::string word; in >> word;) argv.push_back(word);
    return argv;
}

std::unique_ptr<Embedder> make_embedder(const std::string& spec) {
    if (spec == "mock") return std::make_unique<MockEmbedder>();
    if (spec.rfind("sidecar:", 0) == 0) return SidecarEmbedder::spawn(split_command(spec.substr(8)));
    if (spec.rfind("unix:", 0) == 0) return SidecarEmbedder::connect_unix(spec.substr(5));
    throw ConfigError("--embedder must be mock, sidecar:<command> or unix:<socket path>");
}

void report_shot(Context& ctx, const ShotEntry& shot, std::size_t total) {
    ctx.out << "shot " << shot.index;
    if (total > 0) ctx.out << "/" << total;
    ctx.out << " " << to_string(shot.status);
    if (shot.status == ShotStatus::done && ctx.global.verbose) {
        int reused = 0;
        for (const auto& r : shot.resolutions) reused += r.provenance == Provenance::reused;
        ctx.out << " (" << shot.resolutions.size() << " entities, " << reused << " reused)";
    }
    ctx.out << "\n";
    if (shot.error) ctx.err << "shot " << shot.index << " failed: " << *shot.error << "\n";
    if (ctx.global.verbose && shot.record) {
        for (const auto& warning : shot.record->warnings) ctx.err << "  warning: " << warning << "\n";
    }
}

int finish_run(Context& ctx, const RunManifest& manifest) {
    ctx.out << "manifest: " << manifest.manifest_path().string() << "\n";
    return manifest.complete() ? kExitOk : kExitFailure;
}

// -- commands ----------------------------------------------------------------------

struct PlanArgs {
    std::string synopsis;
    std::string output;
    std::string mock_responses;
};

int cmd_plan(Context& ctx, const PlanArgs& args) {
    const ConfigFile config = load_effective_config(ctx.global);
    const Profile& profile = config.profile(ctx.global.profile);
    OwnedBackends backends = make_backends(profile, load_fixture(args.mock_responses));
    const Synopsis synopsis = read_synopsis(args.synopsis);
    try {
        const PlanResult plan = storyboard_plan(synopsis, *backends.text);
        const fs::path output = args.output.empty() ? fs::path(ctx.global.out) / "storyboard.json" : fs::path(args.output);
        if (output.has_parent_path()) fs::create_directories(output.parent_path());
        write_file_atomic(output, serialize_storyboard(plan.storyboard) + "\n");
        ctx.out << "storyboard: " << output.string() << " (" << plan.storyboard.shots.size() << " shots, "
                << plan.attempts << " attempt" << (plan.attempts == 1 ? "" : "s") << ")\n";
        return kExitOk;
    } catch (const PlanningError& e) {
        ctx.err << "error: PlanningError: " << e.what() << "\nlast response:\n" << e.last_response() << "\n";
        return kExitFailure;
    }
}

struct GenerateArgs {
    std::string input;
    bool no_memory = false;
    std::vector<std::string> disabled_banks;
    std::string resume;
    std::string run_id;
    std::string memory_root;
    std::string mock_responses;
    int frames = 0;
};

int cmd_generate(Context& ctx, const GenerateArgs& args) {
    const ConfigFile config = load_effective_config(ctx.global);
    const Profile& profile_ref = config.profile(ctx.global.profile);
    Profile profile = profile_ref;
    if (args.frames > 0) profile.frames = args.frames;
    OwnedBackends backends = make_backends(profile, load_fixture(args.mock_responses));
    auto matcher = make_matcher(profile, *backends.text);

    if (!args.resume.empty()) {
        const RunManifest before = load_manifest(args.resume);
        const std::size_t total = before.shots.size();
        const RunManifest manifest = resume(args.resume, backends.view(), *matcher,
                                            [&](const ShotEntry& shot) { report_shot(ctx, shot, total); });
        return finish_run(ctx, manifest);
    }

    RunConfig run_config;
    run_config.output_root = ctx.global.out;
    if (!args.memory_root.empty()) run_config.memory_root = args.memory_root;
    run_config.ablation_no_memory = args.no_memory;
    for (const auto& bank : args.disabled_banks) {
        if (bank == "char") run_config.enable_character_bank = false;
        else if (bank == "prop") run_config.enable_prop_bank = false;
        else if (bank == "bg") run_config.enable_background_bank = false;
    }
    run_config.profile = ctx.global.profile.empty() ? config.default_profile : ctx.global.profile;
    run_config.frames = profile.frames;
    run_config.profile_echo = to_json(profile);
    if (!args.run_id.empty()) run_config.run_id = args.run_id;

    // A .json input that parses as a storyboard skips planning.
    std::optional<Storyboard> storyboard;
    if (fs::path(args.input).extension() == ".json") {
        const Json doc = Json::parse(read_file(args.input), nullptr, false);
        if (!doc.is_discarded() && !(doc.is_object() && doc.contains("text") && !doc.contains("shots"))) {
            storyboard = parse_storyboard(read_file(args.input));
        }
    }
    const std::size_t total = storyboard ? storyboard->shots.size() : 0;
    auto progress = [&](const ShotEntry& shot) { report_shot(ctx, shot, total); };
    RunManifest manifest;
    if (storyboard) {
        manifest = run_storyboard(*storyboard, run_config, backends.view(), *matcher, progress);
    } else {
        manifest = run(read_synopsis(args.input), run_config, backends.view(), *matcher, progress);
    }
    return finish_run(ctx, manifest);
}

struct MemoryArgs {
    std::string root;
    std::string key;
};

int cmd_memory_list(Context& ctx, const MemoryArgs& args) {
    const MemoryBank bank = load_bank(args.root);
    for (EntityCategory category : kAllCategories) {
        const auto& entries = bank.entries(category);
        ctx.out << store_name(category) << " (" << entries.size() << ")\n";
        for (const auto& entry : entries) {
            ctx.out << "  " << entry.key << "  shot " << entry.created_at_shot << "  " << entry.entity.state.summary
                    << "\n";
        }
    }
    return kExitOk;
}

int cmd_memory_show(Context& ctx, const MemoryArgs& args) {
    const MemoryBank bank = load_bank(args.root);
    for (EntityCategory category : kAllCategories) {
        if (const MemoryEntry* entry = bank.find(category, args.key)) {
            ctx.out << "key: " << entry->key << "\n"
                    << "name: " << entry->entity.name << "\n"
                    << "category: " << to_string(category) << "\n"
                    << "created_at_shot: " << entry->created_at_shot << "\n"
                    << "sequence: " << entry->sequence << "\n"
                    << "summary: " << entry->entity.state.summary << "\n";
            for (const auto& [name, value] : entry->entity.state.attributes) {
                ctx.out << "attribute " << name << ": " << value << "\n";
            }
            ctx.out << "image: " << entry->reference.path.string() << "\n"
                    << "digest: " << entry->reference.digest << "\n";
            return kExitOk;
        }
    }
    ctx.err << "error: key '" << args.key << "' not found in " << args.root << "\n";
    return kExitFailure;
}

int cmd_memory_verify(Context& ctx, const MemoryArgs& args) {
    const auto problems = verify_bank(args.root);
    if (problems.empty()) {
        ctx.out << "ok: " << args.root << "\n";
        return kExitOk;
    }
    for (const auto& problem : problems) ctx.err << "corrupt: " << problem << "\n";
    return kExitFailure;
}

struct EvalArgs {
    std::string suite;
    std::string runs;
    std::string embedder = "mock";
    std::string report;
    std::string method = "videomemory";
    bool partial = false;
};

int cmd_eval(Context& ctx, const EvalArgs& args) {
    const BenchmarkSuite suite = validate_suite_layout(args.suite, !args.partial);
    auto embedder = make_embedder(args.embedder);
    const EvalReport report = evaluate_suite(suite, args.runs, *embedder, args.method);
    const fs::path report_dir = args.report.empty() ? fs::path(ctx.global.out) / "report" : fs::path(args.report);
    write_report(report, report_dir);
    ctx.out << format_table({report});
    ctx.out << "report: " << (report_dir / "report.json").string() << "\n";
    if (ctx.global.verbose) {
        for (const auto& c : report.cases) {
            for (const auto& warning : c.warnings) ctx.err << c.case_id << ": " << warning << "\n";
        }
    }
    return kExitOk;
}

int cmd_bench_scaffold(Context& ctx, const std::string& dir, bool force) {
    scaffold_suite(dir, force);
    ctx.out << "scaffolded 9 cells under " << dir << "\n";
    return kExitOk;
}

int cmd_bench_emit_prompt(Context& ctx, const std::string& output) {
    const std::string_view prompt = benchmark_generation_prompt();
    if (output.empty()) {
        ctx.out << prompt;
        return kExitOk;
    }
    const fs::path path(output);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, prompt);
    ctx.out << "prompt: " << output << "\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-shot video generation with a persistent entity memory", "videomemory"};
    app.require_subcommand(1);
    Context ctx{out, err, {}};
    app.add_option("--config", ctx.global.config_path, "Backend profile file (JSON)")->check(CLI::ExistingFile);
    app.add_option("--profile", ctx.global.profile, "Backend profile name");
    app.add_option("--out", ctx.global.out, "Output root")->capture_default_str();
    app.add_flag("-v,--verbose", ctx.global.verbose, "Print warnings and details");

    std::function<int()> action;

    PlanArgs plan;
    auto* plan_cmd = app.add_subcommand("plan", "Plan a storyboard from a synopsis");
    plan_cmd->add_option("synopsis", plan.synopsis, "Synopsis text file")->required()->check(CLI::ExistingFile);
    plan_cmd->add_option("-o,--output", plan.output, "Storyboard output file");
    plan_cmd->add_option("--mock-responses", plan.mock_responses, "Scripted mock text responses")
        ->check(CLI::ExistingFile);
    plan_cmd->callback([&] { action = [&] { return cmd_plan(ctx, plan); }; });

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Run the full pipeline");
    gen_cmd->add_option("input", gen.input, "Synopsis text file or storyboard JSON")->check(CLI::ExistingFile);
    gen_cmd->add_flag("--no-memory", gen.no_memory, "Disable every bank (shot-salted regeneration)");
    gen_cmd->add_option("--disable-bank", gen.disabled_banks, "Disable one bank")
        ->check(CLI::IsMember({"char", "prop", "bg"}))
        ->delimiter(',');
    gen_cmd->add_option("--resume", gen.resume, "Continue a halted run from its manifest")->check(CLI::ExistingFile);
    gen_cmd->add_option("--run-id", gen.run_id, "Run directory name");
    gen_cmd->add_option("--memory-root", gen.memory_root, "Existing bank to start from");
    gen_cmd->add_option("--mock-responses", gen.mock_responses, "Scripted mock text responses")
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--frames", gen.frames, "Mock frames per shot")->check(CLI::PositiveNumber);
    gen_cmd->callback([&] {
        if (gen.input.empty() && gen.resume.empty()) throw CLI::ValidationError("generate", "needs an input file or --resume");
        action = [&] { return cmd_generate(ctx, gen); };
    });

    MemoryArgs mem;
    auto* mem_cmd = app.add_subcommand("memory", "Inspect a memory bank");
    mem_cmd->require_subcommand(1);
    auto* list_cmd = mem_cmd->add_subcommand("list", "List entries per store");
    auto* show_cmd = mem_cmd->add_subcommand("show", "Show one entry");
    auto* verify_cmd = mem_cmd->add_subcommand("verify", "Check digests and keys");
    for (auto* sub : {list_cmd, show_cmd, verify_cmd}) {
        sub->add_option("--root", mem.root, "Bank root directory")->required();
    }
    show_cmd->add_option("key", mem.key, "Entity key")->required();
    list_cmd->callback([&] { action = [&] { return cmd_memory_list(ctx, mem); }; });
    show_cmd->callback([&] { action = [&] { return cmd_memory_show(ctx, mem); }; });
    verify_cmd->callback([&] { action = [&] { return cmd_memory_verify(ctx, mem); }; });

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score runs against a benchmark suite");
    eval_cmd->add_option("suite", ev.suite, "Benchmark suite directory")->required();
    eval_cmd->add_option("runs", ev.runs, "Directory holding one run per case id")->required();
    eval_cmd->add_option("--embedder", ev.embedder, "mock | sidecar:<command> | unix:<socket>")->capture_default_str();
    eval_cmd->add_option("--report", ev.report, "Report output directory");
    eval_cmd->add_option("--method", ev.method, "Method label in the table")->capture_default_str();
    eval_cmd->add_flag("--partial", ev.partial, "Accept a suite without all 54 cases");
    eval_cmd->callback([&] { action = [&] { return cmd_eval(ctx, ev); }; });

    std::string bench_dir;
    std::string prompt_out;
    bool force = false;
    auto* bench_cmd = app.add_subcommand("bench", "Benchmark suite helpers");
    bench_cmd->require_subcommand(1);
    auto* scaffold_cmd = bench_cmd->add_subcommand("scaffold", "Write the 3 x 3 suite grid with templates");
    scaffold_cmd->add_option("dir", bench_dir, "Target directory")->required();
    scaffold_cmd->add_flag("--force", force, "Write into a non-empty directory");
    scaffold_cmd->callback([&] { action = [&] { return cmd_bench_scaffold(ctx, bench_dir, force); }; });
    auto* emit_cmd = bench_cmd->add_subcommand("emit-prompt", "Write the benchmark story-generation prompt");
    emit_cmd->add_option("-o,--output", prompt_out, "Output file (stdout when omitted)");
    emit_cmd->callback([&] { action = [&] { return cmd_bench_emit_prompt(ctx, prompt_out); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    if (!action) return kExitUsage;
    try {
        return action();
    } catch (const LayoutError& e) {
        err << "error: LayoutError:\n";
        for (const auto& violation : e.violations()) err << "  " << violation << "\n";
        return kExitFailure;
    } catch (const CorruptIndex& e) {
        err << "error: CorruptIndex: " << e.what() << "\n";
        for (const auto& key : e.bad_keys()) err << "  bad key: " << key << "\n";
        return kExitFailure;
    } catch (const AgentRetryError& e) {
        err << "error: " << e.kind() << ": " << e.what() << "\nlast response:\n" << e.last_response() << "\n";
        return kExitFailure;
    } catch (const Error& e) {
        err << "error: " << e.kind() << ": " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace videomemory
