#include "ripple/report.hpp"

#include <fmt/format.h>

#include <algorithm>

namespace ripple::report {

using nlohmann::json;
using oracle::ReportStatus;

namespace {

const char* category_label(const std::string& status) {
    if (status == "filtered_duplicate") return "Duplicate of another report";
    if (status == "filtered_rendering") return "Screenshot timing or rendering artifact";
    if (status == "filtered_nondeterminism") return "Unstable or non-deterministic GUI behavior";
    return "Other";
}

std::string evidence_text(const oracle::BugReport& r) {
    std::string out;
    for (const auto& e : r.evidence) {
        if (!out.empty()) out += ", ";
        out += e.region_index < 0 ? fmt::format("step {} (whole screen)", e.step_index)
                                  : fmt::format("step {} region {}", e.step_index, e.region_index);
    }
    return out;
}

std::string seconds(long long ms) { return fmt::format("{}.{:03}", ms / 1000, ms % 1000); }

}  // namespace

std::vector<Component> overhead_breakdown(const llm::MeterSnapshot& meter) {
    std::vector<Component> rows = {
        {"Generator", {Role::generator, Role::classifier, Role::embedding}, {}},
        {"Executor", {Role::executor}, {}},
        {"Detector", {Role::detector, Role::filter}, {}},
    };
    for (auto& row : rows)
        for (Role r : row.roles) {
            auto it = meter.find(r);
            if (it != meter.end()) row.counters += it->second;
        }
    return rows;
}

Summary summarize(const filter::FilterResult& filtered, const llm::MeterSnapshot& meter) {
    Summary s;
    s.candidates = static_cast<int>(filtered.reports.size());
    for (const char* k : {"filtered_duplicate", "filtered_rendering", "filtered_nondeterminism"}) s.filtered[k] = 0;
    for (const auto& r : filtered.reports) {
        if (r.status == ReportStatus::kept)
            s.kept.push_back(r);
        else
            ++s.filtered[oracle::to_string(r.status)];
        if (s.pr_id.empty()) s.pr_id = r.pr_id;
    }
    for (const auto& d : filtered.decisions)
        if (d.flag) s.warnings.push_back(d.report_id + ": " + *d.flag);
    s.breakdown = overhead_breakdown(meter);
    s.total = llm::total(meter);
    return s;
}

std::string format_usd(long long micro_usd) {
    const bool negative = micro_usd < 0;
    const long long ten_thousandths = ((negative ? -micro_usd : micro_usd) + 50) / 100;
    return fmt::format("{}${}.{:04}", negative ? "-" : "", ten_thousandths / 10000, ten_thousandths % 10000);
}

Image thumbnail(const Image& pre, const Image& post, int factor) {
    factor = std::max(1, factor);
    const int gap = 8;
    const int w = pre.width() + gap + post.width(), h = std::max(pre.height(), post.height());
    Image joined(w, h, {255, 255, 255});
    for (int y = 0; y < pre.height(); ++y)
        for (int x = 0; x < pre.width(); ++x) joined.set(x, y, pre.at(x, y));
    for (int y = 0; y < post.height(); ++y)
        for (int x = 0; x < post.width(); ++x) joined.set(pre.width() + gap + x, y, post.at(x, y));
    if (factor == 1) return joined;

    Image out(std::max(1, w / factor), std::max(1, h / factor));
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            int r = 0, g = 0, b = 0, n = 0;
            for (int dy = 0; dy < factor; ++dy)
                for (int dx = 0; dx < factor; ++dx) {
                    const int sx = x * factor + dx, sy = y * factor + dy;
                    if (sx >= w || sy >= h) continue;
                    const Rgb p = joined.at(sx, sy);
                    r += p.r;
                    g += p.g;
                    b += p.b;
                    ++n;
                }
            out.set(x, y, {static_cast<std::uint8_t>(r / n), static_cast<std::uint8_t>(g / n), static_cast<std::uint8_t>(b / n)});
        }
    return out;
}

std::string render_markdown(const Summary& s) {
    std::string md = fmt::format("# Differential GUI test report: PR {}\n\n", s.pr_id);
    if (!s.pr_title.empty()) md += fmt::format("Change: {}\n\n", s.pr_title);
    md += fmt::format("Run `{}`. {} scenario(s) executed, {} candidate report(s), {} kept.\n\n", s.run_id,
                      s.scenarios.size(), s.candidates, s.kept.size());

    md += "## Scenarios\n\n| Scenario | Title | Outcome | Steps | LLM turns |\n|---|---|---|---|---|\n";
    for (const auto& sc : s.scenarios) {
        std::string outcome = sc.termination;
        if (sc.replay_failure_at) outcome += fmt::format(", replay failed at step {}", *sc.replay_failure_at);
        md += fmt::format("| {} | {} | {} | {} | {} |\n", sc.scenario_id, sc.title, outcome, sc.steps, sc.llm_turns);
    }

    md += "\n## Bug reports\n\n";
    if (s.kept.empty()) md += "No unintended differences were found.\n";
    for (const auto& r : s.kept) {
        md += fmt::format("### {}: {}\n\nScenario {}. Evidence: {}.\n\n", r.report_id, r.title, r.scenario_id,
                          evidence_text(r));
        if (!r.description.empty()) md += r.description + "\n\n";
        if (!r.reasoning.empty()) md += "Reasoning: " + r.reasoning + "\n\n";
        auto it = s.thumbnails.find(r.report_id);
        if (it != s.thumbnails.end()) md += fmt::format("![{} before and after]({})\n\n", r.report_id, it->second);
    }

    md += "\n## Filtered reports\n\n| Category | Count |\n|---|---|\n";
    for (const auto& [status, n] : s.filtered) md += fmt::format("| {} | {} |\n", category_label(status), n);

    md += "\n## Overhead breakdown\n\n| Component | Requests | Input tokens | Output tokens | Images | LLM time (s) | Cost |\n"
          "|---|---|---|---|---|---|---|\n";
    auto row = [&](const std::string& name, const llm::RoleCounters& c) {
        md += fmt::format("| {} | {} | {} | {} | {} | {} | {} |\n", name, c.requests, c.input_tokens, c.output_tokens,
                          c.image_count, seconds(c.wall_time_ms), format_usd(c.cost_micro_usd));
    };
    for (const auto& c : s.breakdown) row(c.name, c.counters);
    row("Total", s.total);

    if (!s.incomplete.empty()) {
        md += "\n## Incomplete analysis\n\n";
        for (const auto& i : s.incomplete) md += "- " + i + "\n";
    }
    if (!s.warnings.empty()) {
        md += "\n## Warnings\n\n";
        for (const auto& w : s.warnings) md += "- " + w + "\n";
    }
    return md;
}

void to_json(json& j, const Component& v) {
    json roles = json::array();
    for (Role r : v.roles) roles.push_back(to_string(r));
    j = {{"component", v.name}, {"roles", roles}, {"usage", v.counters}};
}

void to_json(json& j, const ScenarioOutcome& v) {
    j = {{"scenario_id", v.scenario_id},
         {"title", v.title},
         {"termination", v.termination},
         {"steps", v.steps},
         {"llm_turns", v.llm_turns},
         {"replay_failure_at", v.replay_failure_at ? json(*v.replay_failure_at) : json()}};
}

void to_json(json& j, const Summary& v) {
    j = {{"run_id", v.run_id},
         {"pr_id", v.pr_id},
         {"pr_title", v.pr_title},
         {"scenarios", v.scenarios},
         {"candidates", v.candidates},
         {"kept", v.kept},
         {"filtered", v.filtered},
         {"breakdown", v.breakdown},
         {"total", v.total},
         {"thumbnails", v.thumbnails},
         {"incomplete", v.incomplete},
         {"warnings", v.warnings}};
}

}  // namespace ripple::report
