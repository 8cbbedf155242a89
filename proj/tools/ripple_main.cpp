// ripple: differential GUI testing of a pull request.

#include "ripple/config.hpp"
#include "ripple/diff_engine.hpp"
#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/image.hpp"
#include "ripple/orchestrator.hpp"
#include "ripple/skb.hpp"
#include "ripple/timestamp.hpp"

#include <CLI/CLI.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

namespace fs = std::filesystem;
using namespace ripple;
using nlohmann::json;

namespace {

struct Globals {
    std::string config = "ripple.yaml";
    std::string run_dir;
    bool force = false;
    int workers = 0;
    std::string pr;
    bool verbose = false;
};

fs::path self_dir(const char* argv0) {
    std::error_code ec;
    fs::path p = fs::read_symlink("/proc/self/exe", ec);
    if (ec) p = fs::absolute(argv0);
    return p.parent_path();
}

Config config_of(const Globals& g) {
    try {
        return load_config(g.config);
    } catch (const Error& e) {
        spdlog::error("config {}: {}", g.config, e.what());
        std::exit(pipeline::kExitConfig);
    }
}

pipeline::Orchestrator orchestrator(const Globals& g, const fs::path& tools) {
    pipeline::RunOptions o;
    o.run_dir = g.run_dir;
    o.force = g.force;
    if (g.workers > 0) o.workers = g.workers;
    o.search_path = {tools};
    return pipeline::Orchestrator(config_of(g), g.pr, std::move(o));
}

int standalone_diff(const std::string& a, const std::string& b, int threshold, int radius, const fs::path& out) {
    const Image pre = read_png(a), post = read_png(b);
    const auto info = diff::parse_differences(pre, post, {threshold, radius});
    fs::create_directories(out);
    write_file_atomic(out / "parsed.json", json(info).dump(2) + "\n");
    write_png(diff::annotate(pre, info.regions), out / "a_annotated.png");
    write_png(diff::annotate(post, info.regions), out / "b_annotated.png");
    std::cout << json(info).dump(2) << "\n";
    return pipeline::kExitOk;
}

int skb_build(const Globals& g, const std::string& source, const fs::path& out) {
    const Config cfg = config_of(g);
    fs::path from = source;
    if (source == "tracker") {
        if (cfg.sut.tracker.kind != TrackerKind::mock)
            throw ValidationError("sut.tracker.kind", "skb build --source tracker reads a mock tracker directory only");
        from = cfg.sut.tracker.location;
    }
    auto gateway = llm::Gateway::from_config(cfg);
    skb::FilterOptions fo;
    fo.timestamp_line_ratio = cfg.skb.timestamp_line_ratio;
    fo.stop_keywords = cfg.skb.stop_keywords;
    fo.workers = std::max(1, g.workers > 0 ? g.workers : cfg.run.workers);
    const auto raw = skb::load_reports(from);
    const auto kept = skb::filter_reports(raw, gateway, fo);
    std::vector<std::string> warnings;
    auto bo = skb::build_options_from(cfg);
    bo.workers = fo.workers;
    const auto index = skb::build_index(kept, gateway, bo, &warnings);
    for (const auto& w : warnings) spdlog::warn("{}", w);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    index.save(out);
    std::cout << json{{"reports", raw.size()}, {"kept", kept.size()}, {"chunks", index.chunks().size()},
                      {"index", out.string()}}
                     .dump(2)
              << "\n";
    return pipeline::kExitOk;
}

int skb_query(const Globals& g, const fs::path& index_path, const std::string& cutoff, int k, const std::string& text) {
    const Config cfg = config_of(g);
    const auto index = skb::SkbIndex::load(index_path);
    auto gateway = llm::Gateway::from_config(cfg);
    json out = json::array();
    for (const auto& r : index.query(text, gateway, parse_timestamp(cutoff), k)) out.push_back(skb::to_json(r));
    std::cout << out.dump(2) << "\n";
    return pipeline::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("ripple"));
    const fs::path tools = self_dir(argv[0]);

    CLI::App app{"ripple: change-intent driven differential GUI testing"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "configuration file")->capture_default_str();
    app.add_option("--run-dir", g.run_dir, "run directory (default <runs_dir>/<pr>)");
    app.add_flag("--force", g.force, "re-execute the selected stage(s) even when done");
    app.add_option("--workers", g.workers, "concurrent scenarios")->check(CLI::PositiveNumber);
    app.add_flag("-v,--verbose", g.verbose, "debug logging");

    auto* run = app.add_subcommand("run", "all stages from the first one not done");
    run->add_option("--pr", g.pr, "pull request id")->required();

    std::map<CLI::App*, pipeline::Stage> stage_cmds;
    const std::pair<pipeline::Stage, const char*> descriptions[] = {
        {pipeline::Stage::ingest, "collect the change context"},
        {pipeline::Stage::generate, "generate and enrich test scenarios"},
        {pipeline::Stage::execute, "run scenarios on the post- and pre-change builds"},
        {pipeline::Stage::diff, "parse screenshot differences (or compare two images with --a/--b)"},
        {pipeline::Stage::detect, "classify differences and draft bug reports"},
        {pipeline::Stage::filter, "drop duplicate and spurious reports"},
        {pipeline::Stage::report, "write the report bundle"},
    };
    std::string diff_a, diff_b, diff_out;
    int diff_threshold = 30, diff_radius = 3;
    for (const auto& [stage, text] : descriptions) {
        auto* cmd = app.add_subcommand(pipeline::to_string(stage), text);
        cmd->add_option("--pr", g.pr, "pull request id");
        stage_cmds[cmd] = stage;
        if (stage == pipeline::Stage::diff) {
            cmd->add_option("--a", diff_a, "pre-change image");
            cmd->add_option("--b", diff_b, "post-change image");
            cmd->add_option("--threshold", diff_threshold, "per-channel threshold")->capture_default_str();
            cmd->add_option("--radius", diff_radius, "dilation radius")->capture_default_str();
            cmd->add_option("--out", diff_out, "output directory for a standalone comparison");
        }
    }

    auto* skb_cmd = app.add_subcommand("skb", "scenario knowledge base");
    skb_cmd->require_subcommand(1);
    std::string skb_source, skb_out, skb_index, skb_cutoff, skb_text;
    int skb_k = 8;
    auto* skb_build_cmd = skb_cmd->add_subcommand("build", "filter, chunk and embed historical reports");
    skb_build_cmd->add_option("--source", skb_source, "report directory, or 'tracker' for the configured mock tracker")
        ->required();
    skb_build_cmd->add_option("--out", skb_out, "index file")->required();
    auto* skb_query_cmd = skb_cmd->add_subcommand("query", "retrieve chunks created before a cutoff");
    skb_query_cmd->add_option("--index", skb_index, "index file")->required();
    skb_query_cmd->add_option("--cutoff", skb_cutoff, "ISO-8601 cutoff")->required();
    skb_query_cmd->add_option("--k", skb_k, "number of results")->capture_default_str();
    skb_query_cmd->add_option("text", skb_text, "query text")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? pipeline::kExitOk : pipeline::kExitConfig;
    }
    if (g.verbose) spdlog::set_level(spdlog::level::debug);

    try {
        if (skb_build_cmd->parsed()) return skb_build(g, skb_source, skb_out);
        if (skb_query_cmd->parsed()) return skb_query(g, skb_index, skb_cutoff, skb_k, skb_text);

        for (const auto& [cmd, stage] : stage_cmds) {
            if (!cmd->parsed()) continue;
            if (stage == pipeline::Stage::diff && (!diff_a.empty() || !diff_b.empty())) {
                if (diff_a.empty() || diff_b.empty() || diff_out.empty()) {
                    std::cerr << "diff: --a, --b and --out go together\n";
                    return pipeline::kExitConfig;
                }
                return standalone_diff(diff_a, diff_b, diff_threshold, diff_radius, diff_out);
            }
            if (g.pr.empty()) {
                std::cerr << pipeline::to_string(stage) << ": --pr is required\n";
                return pipeline::kExitConfig;
            }
            auto o = orchestrator(g, tools);
            if (!o.run_stage(stage)) spdlog::info("stage {} is already done; use --force to redo it", to_string(stage));
            std::cout << (o.run_dir() / pipeline::to_string(stage)).string() << "\n";
            return pipeline::kExitOk;
        }

        auto o = orchestrator(g, tools);
        o.run();
        std::cout << (o.run_dir() / "report" / "summary.md").string() << "\n";
        return pipeline::kExitOk;
    } catch (const pipeline::StageFailure& e) {
        spdlog::error("{}", e.what());
        return e.exit_code();
    } catch (const ValidationError& e) {
        spdlog::error("{}", e.what());
        return pipeline::kExitConfig;
    } catch (const UnknownRole& e) {
        spdlog::error("{}", e.what());
        return pipeline::kExitConfig;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return pipeline::exit_code_for(e);
    }
}
