#include "ripple/orchestrator.hpp"

#include "ripple/bug_filter.hpp"
#include "ripple/change_context.hpp"
#include "ripple/diff_engine.hpp"
#include "ripple/executor.hpp"
#include "ripple/hash.hpp"
#include "ripple/oracle.hpp"
#include "ripple/parallel.hpp"
#include "ripple/report.hpp"
#include "ripple/scenario.hpp"
#include "ripple/skb.hpp"
#include "ripple/timestamp.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <stdexcept>

namespace ripple::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::pair<Stage, const char*> kStageNames[] = {
    {Stage::ingest, "ingest"}, {Stage::generate, "generate"}, {Stage::execute, "execute"}, {Stage::diff, "diff"},
    {Stage::detect, "detect"}, {Stage::filter, "filter"},     {Stage::report, "report"},
};

std::string now() {
    return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

void write_json(const fs::path& path, const json& j) {
    fs::create_directories(path.parent_path());
    write_file_atomic(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("missing artifact " + path.string());
    try {
        return json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

StageStatus status_from_string(const std::string& s) {
    if (s == "pending") return StageStatus::pending;
    if (s == "done") return StageStatus::done;
    if (s == "failed") return StageStatus::failed;
    throw ParseError("unknown stage status: " + s);
}

/// What every stage body gets.
struct StageEnv {
    const Config& config;
    const fs::path& run_dir;
    const fs::path& out;
    llm::Gateway& gateway;
    int workers;
    const std::vector<fs::path>& search_path;
    const RunOptions& options;

    change::ChangeContext context() const { return read_json(run_dir / "ingest" / "change_context.json").get<change::ChangeContext>(); }
    scenario::ScenarioBatch scenarios() const {
        return read_json(run_dir / "generate" / "scenarios.json").get<scenario::ScenarioBatch>();
    }
};

void ingest(const std::string& pr_id, const StageEnv& env) {
    change::GitVcsClient vcs(env.config.sut.repo_location);
    auto tracker = change::make_tracker(env.config);
    change::FetchOptions fo;
    fo.commit_issue_pattern = env.config.sut.tracker.commit_issue_pattern;
    fo.max_preceding = env.config.generator.max_preceding_intents;
    const auto ctx = change::fetch_change_context(pr_id, *tracker, vcs, fo);
    for (const auto& w : ctx.warnings) spdlog::warn("PR {}: {}", pr_id, w);
    write_json(env.out / "change_context.json", ctx);
}

void generate(const StageEnv& env) {
    const auto ctx = env.context();
    const auto options = scenario::pipeline_options_from(env.config);
    skb::SkbIndex index;
    const std::string& index_path = env.config.skb.index_path;
    if (!index_path.empty() && fs::exists(index_path))
        index = skb::SkbIndex::load(index_path);
    else
        spdlog::warn("no scenario knowledge base at '{}'; enrichment proceeds without retrieval", index_path);

    const auto vocab = scenario::CodeVocabulary::of(ctx.code_change);
    const auto generated = scenario::generate_scenarios(ctx, env.gateway, options);
    write_json(env.out / "generated.json", generated);
    scenario::EnrichmentLog log;
    const auto events =
        scenario::enrich_event_sequences(generated, index, env.gateway, ctx.pr_intent.created_at, options, &log, vocab);
    write_json(env.out / "event_enriched.json", events);
    write_json(env.out / "enrichment_log.json", scenario::to_json(log));
    write_json(env.out / "scenarios.json", scenario::enrich_test_data(events, env.gateway, options, vocab));
}

void execute_scenarios(const StageEnv& env) {
    const auto ctx = env.context();
    const auto batch = env.scenarios();
    auto runtime = exec::make_runtime(env.config, env.run_dir, env.search_path);
    if (env.options.wrap_runtime) runtime = env.options.wrap_runtime(std::move(runtime));
    exec::BuildArtifact post, pre;
    try {
        post = runtime->build_sut(env.config.sut, ctx.post_revision);
        pre = runtime->build_sut(env.config.sut, ctx.pre_revision);
    } catch (const BuildFailure& e) {
        json unexecuted = json::array();
        for (const auto& s : batch.scenarios) unexecuted.push_back({{"scenario_id", s.scenario_id}, {"termination", nullptr}});
        write_json(env.out / "summary.json", {{"build_failure", e.what()}, {"scenarios", unexecuted}});
        throw;
    }

    const exec::XdotoolDriver driver(env.config.executor.driver_executable);
    std::vector<exec::ExecutionTrace> traces(batch.scenarios.size());
    parallel_for(batch.scenarios.size(), env.workers, [&](std::size_t i) {
        const auto& s = batch.scenarios[i];
        exec::ExecutorOptions o;
        o.budgets = env.config.budgets;
        o.trace_dir = env.out / s.scenario_id;
        o.session_label = batch.pr_id + "-" + s.scenario_id + "-execute";
        traces[i] = exec::run_scenario(s, post, pre, env.config.sut, env.gateway, *runtime, driver, o);
    });

    json summary = json::array();
    for (const auto& t : traces)
        summary.push_back({{"scenario_id", t.scenario_id},
                           {"termination", exec::to_string(t.termination)},
                           {"steps", t.steps.size()},
                           {"llm_turns_used", t.llm_turns_used},
                           {"replay_failure_at", t.replay_failure_at ? json(*t.replay_failure_at) : json()},
                           {"error", t.error ? json(*t.error) : json()}});
    write_json(env.out / "summary.json", {{"build_failure", nullptr}, {"scenarios", summary}});
}

void diff_traces(const StageEnv& env) {
    const auto batch = env.scenarios();
    const diff::DiffOptions options{env.config.budgets.pixel_diff_threshold, env.config.diff.dilation_radius};
    for (const auto& s : batch.scenarios) {
        const fs::path trace_dir = env.run_dir / "execute" / s.scenario_id;
        const auto trace = exec::load_trace(trace_dir);
        json parsed = json::array();
        for (const auto& step : trace.steps) {
            if (!step.pre_screenshot) continue;
            const Image pre = read_png(trace_dir / step.pre_screenshot->path);
            const Image post = read_png(trace_dir / step.post_screenshot.path);
            const auto info = diff::parse_differences(pre, post, options, step.step_index);
            if (info.dimension_mismatch)
                spdlog::warn("{} step {}: screenshots differ in size", s.scenario_id, step.step_index);
            const fs::path dir = env.out / s.scenario_id;
            fs::create_directories(dir);
            write_png(diff::annotate(pre, info.regions), dir / fmt::format("step_{}_pre.png", step.step_index));
            write_png(diff::annotate(post, info.regions), dir / fmt::format("step_{}_post.png", step.step_index));
            parsed.push_back(info);
        }
        write_json(env.out / s.scenario_id / "parsed.json", parsed);
    }
}

void detect(const StageEnv& env) {
    const auto ctx = env.context();
    const auto batch = env.scenarios();
    std::vector<oracle::Detection> found(batch.scenarios.size());
    parallel_for(batch.scenarios.size(), env.workers, [&](std::size_t i) {
        const auto& s = batch.scenarios[i];
        const auto trace = exec::load_trace(env.run_dir / "execute" / s.scenario_id);
        const fs::path diff_dir = env.run_dir / "diff" / s.scenario_id;
        const auto parsed = read_json(diff_dir / "parsed.json").get<std::vector<diff::ParsedInfo>>();
        std::vector<oracle::AnnotatedPair> pairs;
        for (const auto& p : parsed)
            pairs.push_back({diff_dir / fmt::format("step_{}_pre.png", p.step_index),
                             diff_dir / fmt::format("step_{}_post.png", p.step_index)});
        oracle::DetectOptions o;
        o.max_regions_per_prompt = env.config.oracle.max_regions_per_prompt;
        o.image_base = env.run_dir;
        o.scenario_title = s.title;
        found[i] = oracle::detect_bugs(trace, parsed, pairs, ctx, batch.analysis, env.gateway, o);
    });
    json candidates = json::array();
    for (std::size_t i = 0; i < found.size(); ++i) {
        write_json(env.out / (batch.scenarios[i].scenario_id + ".json"), found[i]);
        for (const auto& r : found[i].reports) candidates.push_back(r);
    }
    write_json(env.out / "candidates.json", candidates);
}

void filter(const std::string& pr_id, const StageEnv& env) {
    const auto candidates = read_json(env.run_dir / "detect" / "candidates.json").get<std::vector<oracle::BugReport>>();
    write_json(env.out / "result.json", filter::filter_reports(candidates, env.gateway, {pr_id, env.run_dir}));
}

void emit_report(const RunManifest& manifest, const StageEnv& env) {
    const auto ctx = env.context();
    const auto batch = env.scenarios();
    const auto result = read_json(env.run_dir / "filter" / "result.json").get<filter::FilterResult>();
    auto summary = report::summarize(result, manifest.meter_snapshot());
    summary.run_id = manifest.run_id;
    summary.pr_id = manifest.pr_id;
    summary.pr_title = ctx.pr_intent.title;
    summary.warnings.insert(summary.warnings.begin(), ctx.warnings.begin(), ctx.warnings.end());

    const json executed = read_json(env.run_dir / "execute" / "summary.json").at("scenarios");
    for (std::size_t i = 0; i < batch.scenarios.size() && i < executed.size(); ++i) {
        const auto& e = executed[i];
        summary.scenarios.push_back({batch.scenarios[i].scenario_id, batch.scenarios[i].title,
                                     e.at("termination").get<std::string>(), e.at("steps").get<int>(),
                                     e.at("llm_turns_used").get<int>(),
                                     e.at("replay_failure_at").is_null()
                                         ? std::nullopt
                                         : std::optional(e.at("replay_failure_at").get<int>())});
        const auto d = read_json(env.run_dir / "detect" / (batch.scenarios[i].scenario_id + ".json")).get<oracle::Detection>();
        for (const auto& inc : d.incomplete) summary.incomplete.push_back(batch.scenarios[i].scenario_id + " " + inc);
    }

    for (const auto& r : summary.kept) {
        const int step = r.evidence.front().step_index;
        const fs::path dir = env.run_dir / "diff" / r.scenario_id;
        const Image thumb = report::thumbnail(read_png(dir / fmt::format("step_{}_pre.png", step)),
                                              read_png(dir / fmt::format("step_{}_post.png", step)));
        const std::string rel = "evidence/" + r.report_id + ".png";
        fs::create_directories(env.out / "evidence");
        write_png(thumb, env.out / rel);
        summary.thumbnails[r.report_id] = rel;
    }
    write_json(env.out / "report.json", summary);
    write_file_atomic(env.out / "summary.md", report::render_markdown(summary));
}

}  // namespace

std::string to_string(Stage s) {
    for (const auto& [v, n] : kStageNames)
        if (v == s) return n;
    return "?";
}

Stage stage_from_string(const std::string& s) {
    for (const auto& [v, n] : kStageNames)
        if (s == n) return v;
    throw ParseError("unknown stage: " + s);
}

std::string to_string(StageStatus s) {
    switch (s) {
        case StageStatus::pending: return "pending";
        case StageStatus::done: return "done";
        case StageStatus::failed: return "failed";
    }
    return "pending";
}

RunManifest RunManifest::fresh(std::string run_id, std::string pr_id) {
    RunManifest m;
    m.run_id = std::move(run_id);
    m.pr_id = std::move(pr_id);
    for (Stage s : kStages) m.stages[s] = {};
    return m;
}

bool RunManifest::runnable(Stage s) const {
    for (Stage p : kStages) {
        if (p == s) return true;
        auto it = stages.find(p);
        if (it == stages.end() || it->second.status != StageStatus::done) return false;
    }
    return false;
}

llm::MeterSnapshot RunManifest::meter_snapshot() const {
    llm::MeterSnapshot total;
    for (const auto& [stage, rec] : stages) {
        if (rec.status != StageStatus::done) continue;
        for (const auto& [role, c] : rec.usage) total[role] += c;
    }
    return total;
}

void to_json(json& j, const RunManifest& v) {
    json stages = json::object(), status = json::object(), timestamps = json::object(), paths = json::object();
    for (const auto& [s, rec] : v.stages) {
        const std::string name = to_string(s);
        status[name] = to_string(rec.status);
        timestamps[name] = {{"started_at", rec.started_at ? json(*rec.started_at) : json()},
                            {"finished_at", rec.finished_at ? json(*rec.finished_at) : json()}};
        paths[name] = rec.artifact_path;
        stages[name] = {{"error", rec.error ? json(*rec.error) : json()}, {"usage", llm::meter_to_json(rec.usage)}};
    }
    j = {{"run_id", v.run_id},
         {"pr_id", v.pr_id},
         {"stage_status", status},
         {"timestamps", timestamps},
         {"artifact_paths", paths},
         {"meter_snapshot", llm::meter_to_json(v.meter_snapshot())},
         {"stages", stages}};
}

void from_json(const json& j, RunManifest& v) {
    v = RunManifest::fresh(j.at("run_id").get<std::string>(), j.at("pr_id").get<std::string>());
    for (const auto& [name, status] : j.at("stage_status").items()) {
        auto& rec = v.stages[stage_from_string(name)];
        rec.status = status_from_string(status.get<std::string>());
        const json& ts = j.at("timestamps").at(name);
        if (!ts.at("started_at").is_null()) rec.started_at = ts.at("started_at").get<std::string>();
        if (!ts.at("finished_at").is_null()) rec.finished_at = ts.at("finished_at").get<std::string>();
        rec.artifact_path = j.at("artifact_paths").value(name, "");
        const json& st = j.at("stages").at(name);
        if (!st.at("error").is_null()) rec.error = st.at("error").get<std::string>();
        rec.usage = llm::meter_from_json(st.at("usage"));
    }
}

RunManifest load_manifest(const fs::path& run_dir) { return read_json(run_dir / "manifest.json").get<RunManifest>(); }

int exit_code_for(const std::exception& e) {
    if (const auto* f = dynamic_cast<const StageFailure*>(&e)) return f->exit_code();
    if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ProviderRefusal*>(&e)) return kExitProvider;
    if (dynamic_cast<const UnknownRole*>(&e)) return kExitConfig;
    return kExitStage;
}

Orchestrator::Orchestrator(Config config, std::string pr_id, RunOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
    run_dir_ = options_.run_dir.empty() ? fs::path(config_.run.runs_dir) / pr_id : options_.run_dir;
    if (fs::exists(run_dir_ / "manifest.json")) {
        manifest_ = load_manifest(run_dir_);
        if (manifest_.pr_id != pr_id)
            throw ValidationError("pr", fmt::format("run directory {} belongs to PR {}", run_dir_.string(), manifest_.pr_id));
    } else {
        manifest_ = RunManifest::fresh("pr-" + pr_id, pr_id);
        fs::create_directories(run_dir_);
        save_manifest();
    }
}

int Orchestrator::workers() const { return std::max(1, options_.workers.value_or(config_.run.workers)); }

void Orchestrator::save_manifest() const { write_json(run_dir_ / "manifest.json", manifest_); }

void Orchestrator::reset_from(Stage stage) {
    bool reached = false;
    for (Stage s : kStages) {
        reached = reached || s == stage;
        if (!reached) continue;
        fs::remove_all(run_dir_ / to_string(s));
        manifest_.stages[s] = {};
    }
    save_manifest();
}

RunManifest Orchestrator::run() {
    if (options_.force) reset_from(Stage::ingest);
    for (Stage s : kStages) {
        if (manifest_.stages[s].status == StageStatus::done) {
            spdlog::info("stage {} already done", to_string(s));
            continue;
        }
        execute(s);
    }
    return manifest_;
}

bool Orchestrator::run_stage(Stage stage) {
    if (options_.force) reset_from(stage);
    if (manifest_.stages[stage].status == StageStatus::done) return false;
    execute(stage);
    return true;
}

void Orchestrator::execute(Stage stage) {
    const std::string name = to_string(stage);
    if (!manifest_.runnable(stage)) {
        std::string missing;
        for (Stage p : kStages) {
            if (p == stage) break;
            if (manifest_.stages[p].status != StageStatus::done) missing += (missing.empty() ? "" : ", ") + to_string(p);
        }
        throw StageFailure(stage, kExitStage, "requires completed stage(s): " + missing);
    }
    auto& rec = manifest_.stages[stage];
    rec = {};
    rec.started_at = now();
    save_manifest();
    spdlog::info("stage {} started", name);

    const fs::path tmp = run_dir_ / (name + ".tmp"), final_dir = run_dir_ / name;
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    fs::create_directories(run_dir_ / "llm");
    try {
        auto gateway = llm::Gateway::from_config(config_, run_dir_ / "llm");
        const StageEnv env{config_, run_dir_, tmp, gateway, workers(), options_.search_path, options_};
        try {
            switch (stage) {
                case Stage::ingest: ingest(manifest_.pr_id, env); break;
                case Stage::generate: generate(env); break;
                case Stage::execute: execute_scenarios(env); break;
                case Stage::diff: diff_traces(env); break;
                case Stage::detect: detect(env); break;
                case Stage::filter: filter(manifest_.pr_id, env); break;
                case Stage::report: emit_report(manifest_, env); break;
            }
        } catch (...) {
            rec.usage = gateway.meter().snapshot();
            throw;
        }
        rec.usage = gateway.meter().snapshot();
    } catch (const std::exception& e) {
        rec.status = StageStatus::failed;
        rec.error = e.what();
        rec.finished_at = now();
        save_manifest();
        spdlog::error("stage {} failed: {}", name, e.what());
        throw StageFailure(stage, exit_code_for(e), e.what());
    }
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
    rec.status = StageStatus::done;
    rec.finished_at = now();
    rec.artifact_path = name;
    save_manifest();
    spdlog::info("stage {} done", name);
    if (options_.after_stage) options_.after_stage(stage);
}

}  // namespace ripple::pipeline
