// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "ripple/bug_filter.hpp"
#include "ripple/change_context.hpp"
#include "ripple/diff_engine.hpp"
#include "ripple/executor.hpp"
#include "ripple/orchestrator.hpp"
#include "ripple/report.hpp"
#include "ripple/skb.hpp"

#include "support/diff_oracle.hpp"
#include "support/e2e.hpp"
#include "support/fake_llm.hpp"
#include "support/filter_fixture.hpp"
#include "support/preceding_oracle.hpp"
#include "support/random_images.hpp"
#include "support/recording_runtime.hpp"
#include "support/skb_corpus.hpp"
#include "support/sut_config.hpp"
#include "support/temp_dir.hpp"

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <deque>
#include <functional>
#include <iostream>
#include <random>

using namespace ripple;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Collects the failed expectations of one criterion.
struct Check {
    std::vector<std::string> failures;
    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json read_json(const fs::path& p) { return json::parse(testkit::read_text(p)); }

// ---------------------------------------------------------------------------

void diff_oracle(Check& c) {
    const auto t0 = Clock::now();
    std::mt19937 rng(1000);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        auto [a, b] = testkit::random_image_pair(rng, 64);
        const int threshold = std::uniform_int_distribution<int>(0, 100)(rng);
        const int radius = std::uniform_int_distribution<int>(0, 3)(rng);
        const auto raw = testkit::brute_diff_mask(a, b, threshold);
        const auto grown = testkit::brute_dilate(raw, radius);
        const auto expected = testkit::brute_regions(grown, raw);
        const auto mask = diff::diff_mask(a, b, threshold).mask;
        const bool ok = testkit::same_bits(mask, raw) && testkit::same_bits(diff::dilate(mask, radius), grown) &&
                        diff::parse_differences(a, b, {threshold, radius}).regions == expected;
        if (!ok && mismatches++ < 3) c.failures.push_back(fmt::format("pair {} differs from the reference", i));
    }
    c.expect(mismatches == 0, fmt::format("{} of 1000 pairs differ", mismatches));
    const double s = seconds_since(t0);
    c.expect(s < 60, fmt::format("took {:.1f} s", s));
}

void threshold_fidelity(Check& c) {
    const Image base(32, 24, {100, 100, 100});
    Image d30 = base, d31 = base;
    d30.set(7, 9, {100, 130, 100});
    d31.set(7, 9, {100, 100, 69});
    c.expect(diff::parse_differences(base, d30, {30, 3}).regions.empty(), "difference of 30 yields a region");
    const auto one = diff::parse_differences(base, d31, {30, 3}).regions;
    c.expect(one.size() == 1, fmt::format("difference of 31 yields {} regions", one.size()));
    if (one.size() == 1) c.expect(one[0].pixel_count == 1, "the region counts more than the changed pixel");

    const Image black(640, 480, {0, 0, 0}), white(640, 480, {255, 255, 255});
    const auto full = diff::parse_differences(black, white, {30, 3}).regions;
    c.expect(full.size() == 1, fmt::format("full-screen divergence yields {} regions", full.size()));
    if (full.size() == 1) {
        c.expect(full[0].index == 0, "full-screen region is not index 0");
        c.expect(full[0].bbox == diff::BBox{0, 0, 640, 480}, "full-screen region does not span the image");
    }
}

// ---------------------------------------------------------------------------

json continue_with(int n) {
    json batch = json::array();
    for (int i = 0; i < n; ++i) batch.push_back({{"action", "move"}, {"target", "somewhere"}, {"position", {5, 5}}});
    return {{"status", "continue"}, {"instructions", batch}};
}

scenario::TestScenario wandering_scenario() {
    scenario::TestScenario s;
    s.scenario_id = "S1";
    s.title = "Move the pointer around";
    s.stage = scenario::Stage::data_enriched;
    s.steps = {{"Move the pointer over the form", std::nullopt}};
    return s;
}

void budgets(Check& c) {
    testkit::TempDir dir;
    const SutConfig cfg = testkit::mock_sut_config();
    exec::LocalRuntime runtime({dir / "cache", dir / "sessions", {testkit::tools_dir()}});
    const exec::XdotoolDriver driver;
    const auto build = runtime.build_sut(cfg, testkit::sut_fixture().rev("base"));
    auto options = [&](const std::string& sub) {
        exec::ExecutorOptions o;
        o.trace_dir = dir / sub;
        o.sleeper = [](std::chrono::milliseconds) {};
        return o;
    };

    json turns = json::array();
    for (int i = 0; i < 21; ++i) turns.push_back({{"reply", continue_with(1)}});
    llm::Gateway gw_turns(testkit::fake_options(dir.write("turns.json", turns.dump())));
    const auto t = exec::run_scenario(wandering_scenario(), build, build, cfg, gw_turns, runtime, driver, options("t"));
    c.expect(t.termination == exec::Termination::llm_budget_exhausted,
             "21 demanded turns end with " + exec::to_string(t.termination));
    c.expect(t.llm_turns_used == 20, fmt::format("{} turns used", t.llm_turns_used));
    c.expect(gw_turns.meter().snapshot().at(Role::executor).requests == 20, "more than 20 executor requests");

    const json many = json::array({{{"reply", continue_with(36)}}});
    llm::Gateway gw_ui(testkit::fake_options(dir.write("ui.json", many.dump())));
    const auto u = exec::run_scenario(wandering_scenario(), build, build, cfg, gw_ui, runtime, driver, options("u"));
    c.expect(u.termination == exec::Termination::ui_budget_exhausted,
             "36 demanded instructions end with " + exec::to_string(u.termination));
    c.expect(u.steps.size() == 35, fmt::format("{} instructions executed", u.steps.size()));
}

// ---------------------------------------------------------------------------

void anti_leakage(Check& c) {
    testkit::TempDir dir;
    llm::Gateway gw(testkit::fake_options(dir.write("s.json", "[]")));
    std::mt19937 rng(4242);
    const auto reports = testkit::random_reports(rng, 60);
    const auto index = skb::build_index(reports, gw, testkit::small_chunks());
    int returned = 0, leaked = 0, short_lists = 0, both_sides = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Timestamp cutoff =
            from_unix(1672531200LL + std::uniform_int_distribution<long long>(-30, 760)(rng) * 86400);
        const int k = std::uniform_int_distribution<int>(1, 20)(rng);
        std::size_t before = 0, after = 0;
        for (const auto& ch : index.chunks()) (ch.created_at < cutoff ? before : after)++;
        if (before > 0 && after > 0) ++both_sides;
        const auto res = index.query(testkit::random_text(rng, 1, 6), gw, cutoff, k);
        returned += static_cast<int>(res.size());
        for (const auto& r : res) leaked += !(r.chunk.created_at < cutoff);
        short_lists += res.size() != std::min<std::size_t>(before, static_cast<std::size_t>(k));
    }
    c.expect(leaked == 0, fmt::format("{} of {} returned chunks do not predate the cutoff", leaked, returned));
    c.expect(short_lists == 0, fmt::format("{} queries returned fewer eligible chunks than asked", short_lists));
    c.expect(both_sides >= 150, fmt::format("only {} cutoffs split the corpus", both_sides));
}

void preceding_ranking(Check& c) {
    const auto& fx = testkit::sut_fixture();
    change::MockTracker tracker(fx.tracker());
    change::GitVcsClient git(fx.repo());
    testkit::GitReader reader(fx.repo());
    auto chain = reader.first_parent_chain("base");
    c.expect(chain.size() == 10, fmt::format("fixture history has {} commits", chain.size()));
    for (const char* tip : {"pr-7", "pr-12", "pr-10"}) chain.push_back(fx.rev(tip));
    int compared = 0, nonempty = 0;
    for (std::size_t i = 0; i < 10 && i < chain.size(); ++i)
        for (std::size_t j = i + 1; j < chain.size(); ++j) {
            change::CodeChange code;
            code.files = change::parse_unified_diff(git.diff(chain[i], chain[j]));
            change::PrecedingOptions o;
            o.pre_revision = chain[i];
            std::vector<testkit::Ranked> got;
            for (const auto& p : change::compute_preceding_intents(code, git, tracker, o))
                got.push_back({p.intent.source_id, p.overlap_lines, p.rank});
            const auto expected = testkit::brute_preceding(reader, chain[i], chain[j]);
            nonempty += !expected.empty();
            if (got != expected) c.failures.push_back(fmt::format("revisions {}..{} rank differently", i, j));
            ++compared;
        }
    c.expect(compared == 75, fmt::format("{} revision pairs compared", compared));
    c.expect(nonempty > 0, "no pair has preceding intents");
}

void filter_conservation(Check& c) {
    testkit::TempDir dir;
    const auto fx = testkit::triple_group_fixture(dir.path());
    auto o = testkit::fake_options(dir.write("filter.json", fx.script.dump()));
    llm::Gateway gw(o);
    const auto r = filter::filter_reports(fx.candidates, gw, {"7", dir.path()});
    int non_duplicate = 0, kept = 0, filtered = 0, group_kept = 0;
    for (const auto& d : r.decisions) non_duplicate += d.outcome != filter::Outcome::duplicate;
    for (const auto& rep : r.reports) {
        if (rep.status == oracle::ReportStatus::kept) {
            ++kept;
            group_kept += rep.report_id == "S1-B02" || rep.report_id == "S2-B01" || rep.report_id == "S3-B01";
        } else {
            ++filtered;
        }
    }
    c.expect(non_duplicate == 4, fmt::format("{} non-duplicate outcomes", non_duplicate));
    c.expect(group_kept == 1, fmt::format("{} kept in the duplicate group", group_kept));
    c.expect(kept + filtered == 6, fmt::format("kept {} + filtered {} != 6", kept, filtered));
    c.expect(r.reports.size() == 6, fmt::format("{} reports out", r.reports.size()));
}

// ---------------------------------------------------------------------------
// The end-to-end runs are shared by the last criteria.

// Hands its session logs to `sink` when the execute stage releases it.
struct KeepingRecorder : testkit::RecordingRuntime {
    KeepingRecorder(std::unique_ptr<exec::ContainerRuntime> inner, std::deque<SessionLog>& out)
        : RecordingRuntime(std::move(inner)), sink(out) {}
    ~KeepingRecorder() override { sink = sessions; }
    std::deque<SessionLog>& sink;
};

struct E2e {
    testkit::TempDir dir;
    bool recorded_runtime = false;
    std::deque<testkit::RecordingRuntime::SessionLog> sessions;
    double pr7_seconds = 0, pr12_seconds = 0;
    std::vector<std::string> errors;

    fs::path recorded() const { return dir / "pr7-recorded"; }

    E2e() {
        auto timed = [&](const std::string& pr, const fs::path& run_dir, pipeline::RunOptions o, double* seconds) {
            const auto t0 = Clock::now();
            try {
                pipeline::Orchestrator(testkit::e2e_config(pr), pr, std::move(o)).run();
            } catch (const std::exception& e) {
                errors.push_back(fmt::format("PR {} run in {} failed: {}", pr, run_dir.filename().string(), e.what()));
            }
            if (seconds) *seconds = seconds_since(t0);
        };
        auto o = testkit::e2e_options(recorded());
        o.workers = 1;
        o.wrap_runtime = [this](std::unique_ptr<exec::ContainerRuntime> inner) -> std::unique_ptr<exec::ContainerRuntime> {
            recorded_runtime = true;
            return std::make_unique<KeepingRecorder>(std::move(inner), sessions);
        };
        timed("7", recorded(), o, &pr7_seconds);
        timed("12", dir / "pr12", testkit::e2e_options(dir / "pr12"), &pr12_seconds);
        timed("7", dir / "pr7-a", testkit::e2e_options(dir / "pr7-a"), nullptr);
        timed("7", dir / "pr7-b", testkit::e2e_options(dir / "pr7-b"), nullptr);
    }
};

void verbatim_replay(Check& c, E2e& e) {
    c.expect(e.recorded_runtime, "the execute stage never built a runtime");
    const exec::XdotoolDriver driver;
    const json summary = read_json(e.recorded() / "execute" / "summary.json");
    std::size_t session = 0, completed = 0;
    for (const auto& s : summary["scenarios"]) {
        const std::string sid = s["scenario_id"];
        const auto trace = exec::load_trace(e.recorded() / "execute" / sid);
        if (session + 2 > e.sessions.size()) {
            c.failures.push_back("no sessions recorded for " + sid);
            break;
        }
        const auto& post = e.sessions[session++];
        const auto& pre = e.sessions[session++];
        c.expect(post.revision == trace.post_revision && pre.revision == trace.pre_revision,
                 sid + ": sessions ran on the wrong builds");
        if (trace.termination != exec::Termination::completed || trace.replay_failure_at) continue;
        ++completed;
        std::vector<testkit::Command> expected;
        for (const auto& step : trace.steps) {
            for (auto& cmd : driver.commands(step.instruction)) expected.push_back(std::move(cmd));
        }
        const auto played = testkit::without_captures(post.commands);
        const auto replayed = testkit::without_captures(pre.commands);
        c.expect(played == expected, sid + ": the play session did not receive the recorded stream");
        c.expect(replayed == played, sid + ": the replayed stream differs from the recorded stream");
    }
    c.expect(session == e.sessions.size(), "sessions recorded beyond the scenarios");
    c.expect(completed == 2, fmt::format("{} completed scenarios checked", completed));
}

// First S1 step whose raw pre and post status lines differ.
std::optional<int> divergent_step(const fs::path& run_dir) {
    const auto trace = exec::load_trace(run_dir / "execute" / "S1");
    for (const auto& step : trace.steps) {
        if (!step.pre_screenshot) continue;
        const Image pre = read_png(run_dir / "execute" / "S1" / step.pre_screenshot->path);
        const Image post = read_png(run_dir / "execute" / "S1" / step.post_screenshot.path);
        for (int y = 456; y < 472; ++y)
            for (int x = 0; x < pre.width(); ++x)
                if (!(pre.at(x, y) == post.at(x, y))) return step.step_index;
    }
    return std::nullopt;
}

void seeded_regression(Check& c, E2e& e) {
    for (const auto& err : e.errors) c.failures.push_back(err);
    const fs::path r7 = e.recorded() / "report" / "report.json";
    const fs::path r12 = e.dir / "pr12" / "report" / "report.json";
    if (!fs::exists(r7) || !fs::exists(r12)) {
        c.failures.push_back("missing report.json");
        return;
    }
    const json kept7 = read_json(r7)["kept"];
    c.expect(kept7.size() == 1, fmt::format("PR 7 keeps {} reports", kept7.size()));
    const auto step = divergent_step(e.recorded());
    c.expect(step.has_value(), "PR 7 screenshots never diverge");
    if (kept7.size() == 1 && step) {
        const auto& ev = kept7[0]["evidence"];
        bool cites = false;
        for (const auto& x : ev) cites = cites || x["step_index"] == *step;
        c.expect(cites, fmt::format("the kept report does not cite step {}", *step));
    }
    const json kept12 = read_json(r12)["kept"];
    c.expect(kept12.empty(), fmt::format("PR 12 keeps {} reports", kept12.size()));
    c.expect(e.pr7_seconds < 300, fmt::format("PR 7 took {:.1f} s", e.pr7_seconds));
    c.expect(e.pr12_seconds < 300, fmt::format("PR 12 took {:.1f} s", e.pr12_seconds));
}

void determinism(Check& c, E2e& e) {
    const auto a = testkit::artifact_hashes(e.dir / "pr7-a");
    const auto b = testkit::artifact_hashes(e.dir / "pr7-b");
    c.expect(!a.empty(), "first run wrote nothing");
    int pngs = 0;
    for (const auto& [path, hash] : a) {
        pngs += path.ends_with(".png");
        auto it = b.find(path);
        if (it == b.end()) c.failures.push_back(path + " missing from the second run");
        else if (it->second != hash) c.failures.push_back(path + " differs");
    }
    for (const auto& [path, hash] : b)
        if (!a.count(path)) c.failures.push_back(path + " missing from the first run");
    c.expect(pngs > 0, "no screenshots compared");
}

void cost_accounting(Check& c, E2e& e) {
    const fs::path run = e.recorded();
    if (!fs::exists(run / "report" / "report.json")) {
        c.failures.push_back("missing report.json");
        return;
    }
    const json r = read_json(run / "report" / "report.json");
    const auto meter = llm::total(pipeline::load_manifest(run).meter_snapshot());
    c.expect(r["breakdown"].size() == 3, fmt::format("{} breakdown rows", r["breakdown"].size()));
    llm::RoleCounters sum;
    for (const auto& row : r["breakdown"]) sum += row["usage"].get<llm::RoleCounters>();
    const auto total = r["total"].get<llm::RoleCounters>();
    c.expect(sum == total, "breakdown rows do not add up to the total");
    c.expect(total == meter, "report total differs from the meter");
    c.expect(total.cost_micro_usd > 0, "nothing was priced");
    const std::string md = testkit::read_text(run / "report" / "summary.md");
    c.expect(md.find("| " + report::format_usd(meter.cost_micro_usd) + " |") != std::string::npos,
             "summary.md does not show the meter's cost");
}

}  // namespace

int main() {
    spdlog::set_default_logger(spdlog::stderr_color_mt("acceptance"));
    struct Criterion {
        int number;
        const char* name;
        std::function<void(Check&)> body;
    };
    std::unique_ptr<E2e> e2e;
    auto shared = [&]() -> E2e& {
        if (!e2e) e2e = std::make_unique<E2e>();
        return *e2e;
    };
    const std::vector<Criterion> criteria = {
        {1, "diff engine matches the brute-force reference", diff_oracle},
        {2, "threshold 30 boundary and full-screen region", threshold_fidelity},
        {3, "turn and instruction budgets bind exactly", budgets},
        {4, "replay feeds the recorded stream verbatim", [&](Check& c) { verbatim_replay(c, shared()); }},
        {5, "retrieval never returns chunks after the cutoff", anti_leakage},
        {6, "preceding intents match the blame oracle", preceding_ranking},
        {7, "seeded regression yields one kept report, clean change none",
         [&](Check& c) { seeded_regression(c, shared()); }},
        {8, "filter conserves candidates and collapses the duplicate group", filter_conservation},
        {9, "two clean runs produce identical artifacts", [&](Check& c) { determinism(c, shared()); }},
        {10, "overhead breakdown sums to the meter", [&](Check& c) { cost_accounting(c, shared()); }},
    };
    int failed = 0;
    for (const auto& cr : criteria) {
        Check check;
        const auto t0 = Clock::now();
        try {
            cr.body(check);
        } catch (const std::exception& ex) {
            check.failures.push_back(std::string("threw: ") + ex.what());
        }
        const bool ok = check.failures.empty();
        failed += !ok;
        std::cout << fmt::format("criterion {:>2} {} ({:.1f} s): {}", cr.number, ok ? "PASS" : "FAIL",
                                 seconds_since(t0), cr.name)
                  << std::endl;
        for (const auto& f : check.failures) std::cout << "    " << f << "\n";
    }
    std::cout << fmt::format("{} of {} criteria passed", criteria.size() - static_cast<std::size_t>(failed),
                             criteria.size())
              << std::endl;
    return failed == 0 ? 0 : 1;
}
