#include "ripple/oracle.hpp"

#include "ripple/error.hpp"
#include "ripple/prompts.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fmt/format.h>
#include <map>
#include <set>
#include <stdexcept>

namespace ripple::oracle {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Classification c) { return c == Classification::bug ? "bug" : "expected"; }

namespace {

Classification classification_from_string(const std::string& s) {
    if (s == "bug") return Classification::bug;
    if (s == "expected") return Classification::expected;
    throw LlmFormatError("classification must be \"expected\" or \"bug\", got \"" + s + "\"");
}

const std::pair<ReportStatus, const char*> kStatusNames[] = {
    {ReportStatus::candidate, "candidate"},
    {ReportStatus::kept, "kept"},
    {ReportStatus::filtered_duplicate, "filtered_duplicate"},
    {ReportStatus::filtered_rendering, "filtered_rendering"},
    {ReportStatus::filtered_nondeterminism, "filtered_nondeterminism"},
};

std::string text_field(const json& j, const char* key, bool required) {
    if (!j.contains(key) || j[key].is_null()) {
        if (required) throw LlmFormatError(std::string("missing \"") + key + "\"");
        return {};
    }
    if (!j[key].is_string()) throw LlmFormatError(std::string("\"") + key + "\" must be a string");
    return j[key].get<std::string>();
}

int int_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
        throw LlmFormatError(std::string("\"") + key + "\" must be an integer");
    return j[key].get<int>();
}

std::string intent_block(const change::ChangeIntent& i) {
    std::string s = "#" + i.source_id + " " + i.title;
    if (!i.description.empty()) s += "\n  " + i.description;
    return s;
}

std::string context_prompt(const exec::ExecutionTrace& trace, const change::ChangeContext& ctx,
                           const scenario::ImpactAnalysis& analysis, const std::string& scenario_title) {
    std::string issues;
    for (const auto& i : ctx.resolved_issues) issues += (issues.empty() ? "" : "\n") + intent_block(i);
    return prompts::render("user_detect_context", {{"pr_id", ctx.pr_id},
                                                   {"pr_title", ctx.pr_intent.title},
                                                   {"pr_description", ctx.pr_intent.description},
                                                   {"resolved_issues", issues.empty() ? "(none)" : issues},
                                                   {"intent_explanation", analysis.intent_explanation},
                                                   {"scenario_id", trace.scenario_id},
                                                   {"scenario_title", scenario_title}});
}

struct StepReply {
    std::vector<DifferenceVerdict> verdicts;
    std::vector<BugReport> reports;
};

}  // namespace

std::string to_string(ReportStatus s) {
    for (const auto& [v, n] : kStatusNames)
        if (v == s) return n;
    return "candidate";
}

ReportStatus report_status_from_string(const std::string& s) {
    for (const auto& [v, n] : kStatusNames)
        if (s == n) return v;
    throw ParseError("unknown report status: " + s);
}

std::vector<diff::DiffRegion> prompt_regions(const std::vector<diff::DiffRegion>& regions, int limit) {
    std::vector<diff::DiffRegion> sorted = regions;
    if (limit >= 0 && sorted.size() > static_cast<std::size_t>(limit)) {
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const auto& a, const auto& b) { return a.pixel_count > b.pixel_count; });
        sorted.resize(static_cast<std::size_t>(limit));
    }
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    return sorted;
}

Detection detect_bugs(const exec::ExecutionTrace& trace, const std::vector<diff::ParsedInfo>& parsed,
                      const std::vector<AnnotatedPair>& pairs, const change::ChangeContext& ctx,
                      const scenario::ImpactAnalysis& analysis, llm::Gateway& gateway,
                      const DetectOptions& options) {
    if (parsed.size() != pairs.size()) throw std::invalid_argument("parsed differences and image pairs differ in count");
    int last = -1;
    for (const auto& p : parsed) {
        if (p.step_index <= last || p.step_index < 0 || static_cast<std::size_t>(p.step_index) >= trace.steps.size() ||
            !trace.steps[static_cast<std::size_t>(p.step_index)].pre_screenshot)
            throw std::invalid_argument(fmt::format("parsed differences for step {} do not match the trace", p.step_index));
        last = p.step_index;
    }

    Detection out;
    std::optional<llm::Session> session;
    // Regions per analyzed step, for resolving evidence that points back.
    std::map<int, std::set<int>> analyzed;
    std::map<int, std::size_t> pair_of_step;
    int next_report = 1;

    auto image_path = [&](const fs::path& p) {
        return (options.image_base.empty() ? p : p.lexically_relative(options.image_base)).generic_string();
    };

    for (std::size_t n = 0; n < parsed.size(); ++n) {
        const auto& info = parsed[n];
        const int step = info.step_index;
        pair_of_step[step] = n;
        if (info.regions.empty()) continue;

        const auto shown = prompt_regions(info.regions, options.max_regions_per_prompt);
        std::set<int> shown_ids;
        for (const auto& r : shown) shown_ids.insert(r.index);
        std::vector<int> omitted;
        for (const auto& r : info.regions)
            if (!shown_ids.count(r.index)) omitted.push_back(r.index);
        if (!omitted.empty()) {
            out.incomplete.push_back(fmt::format("step {}: {} smallest region(s) left out of the prompt and marked expected",
                                                 step, omitted.size()));
            for (int idx : omitted)
                out.verdicts.push_back({step, idx, Classification::expected, "", "", "omitted from prompt"});
        }

        diff::ParsedInfo listed = info;
        listed.regions = shown;
        std::string indices;
        for (int idx : shown_ids) indices += (indices.empty() ? "" : ", ") + std::to_string(idx);
        std::string prompt = prompts::render(
            "user_detect_step",
            {{"step_index", std::to_string(step)},
             {"instruction", trace.steps[static_cast<std::size_t>(step)].instruction.canonical()},
             {"parsed_info", json(listed).dump()},
             {"omitted", omitted.empty() ? ""
                                         : fmt::format("{} smaller region(s) are not listed and need no verdict.\n",
                                                       omitted.size())},
             {"region_indices", indices}});
        if (!session) {
            session = gateway.open_session(Role::detector, trace.scenario_id + "-detect");
            prompt = context_prompt(trace, ctx, analysis, options.scenario_title) + "\n" + prompt;
        }
        analyzed[step] = shown_ids;
        analyzed[step].insert(-1);

        const std::vector<llm::ImageRef> images = {llm::ImageRef::from_file(pairs[n].pre),
                                                   llm::ImageRef::from_file(pairs[n].post)};
        StepReply reply;
        try {
            llm::ask_json(*session, prompt, images, [&](const json& j, bool) {
                StepReply r;
                if (!j.is_object() || !j.contains("verdicts") || !j["verdicts"].is_array())
                    throw LlmFormatError("reply needs a \"verdicts\" list");
                std::set<int> seen;
                for (const auto& v : j["verdicts"]) {
                    if (!v.is_object()) throw LlmFormatError("each verdict must be an object");
                    const int idx = int_field(v, "region_index");
                    if (!shown_ids.count(idx)) throw LlmFormatError(fmt::format("region {} is not listed for step {}", idx, step));
                    if (!seen.insert(idx).second) throw LlmFormatError(fmt::format("region {} has two verdicts", idx));
                    r.verdicts.push_back({step, idx, classification_from_string(text_field(v, "classification", true)),
                                          text_field(v, "description", false), text_field(v, "reasoning", false),
                                          std::nullopt});
                }
                for (int idx : shown_ids)
                    if (!seen.count(idx)) throw LlmFormatError(fmt::format("region {} has no verdict", idx));

                const json reports = j.value("bug_reports", json::array());
                if (!reports.is_array()) throw LlmFormatError("\"bug_reports\" must be a list");
                for (const auto& b : reports) {
                    if (!b.is_object()) throw LlmFormatError("each bug report must be an object");
                    BugReport rep;
                    rep.title = text_field(b, "title", true);
                    if (rep.title.empty()) throw LlmFormatError("bug report title is empty");
                    rep.description = text_field(b, "description", false);
                    rep.reasoning = text_field(b, "reasoning", false);
                    if (!b.contains("evidence") || !b["evidence"].is_array() || b["evidence"].empty())
                        throw LlmFormatError("bug report \"" + rep.title + "\" cites no evidence");
                    for (const auto& e : b["evidence"]) {
                        if (!e.is_object()) throw LlmFormatError("evidence entries must be objects");
                        Evidence ev{step, int_field(e, "region_index")};
                        if (e.contains("step_index") && !e["step_index"].is_null()) ev.step_index = int_field(e, "step_index");
                        auto it = analyzed.find(ev.step_index);
                        if (it == analyzed.end() || !it->second.count(ev.region_index))
                            throw LlmFormatError(fmt::format("evidence (step {}, region {}) does not resolve to a region",
                                                             ev.step_index, ev.region_index));
                        if (std::find(rep.evidence.begin(), rep.evidence.end(), ev) == rep.evidence.end())
                            rep.evidence.push_back(ev);
                    }
                    r.reports.push_back(std::move(rep));
                }
                reply = std::move(r);
            });
        } catch (const LlmFormatError& e) {
            spdlog::warn("{}: step {} left unanalyzed: {}", trace.scenario_id, step, e.what());
            out.incomplete.push_back(fmt::format("step {}: {}", step, e.what()));
            reply = {};
            for (int idx : shown_ids)
                reply.verdicts.push_back({step, idx, Classification::expected, "", "", "analysis failed"});
        }

        for (auto& v : reply.verdicts) out.verdicts.push_back(std::move(v));
        for (auto& r : reply.reports) {
            r.report_id = fmt::format("{}-B{:02}", trace.scenario_id, next_report++);
            r.pr_id = ctx.pr_id;
            r.scenario_id = trace.scenario_id;
            std::set<int> steps;
            for (const auto& e : r.evidence) steps.insert(e.step_index);
            for (int s : steps) {
                const auto& pair = pairs[pair_of_step.at(s)];
                r.evidence_images.push_back(image_path(pair.pre));
                r.evidence_images.push_back(image_path(pair.post));
            }
            out.reports.push_back(std::move(r));
        }
    }
    std::sort(out.verdicts.begin(), out.verdicts.end(), [](const auto& a, const auto& b) {
        return std::tie(a.step_index, a.region_index) < std::tie(b.step_index, b.region_index);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

void to_json(json& j, const DifferenceVerdict& v) {
    j = {{"step_index", v.step_index},   {"region_index", v.region_index}, {"classification", to_string(v.classification)},
         {"description", v.description}, {"reasoning", v.reasoning},       {"flag", v.flag ? json(*v.flag) : json()}};
}

void from_json(const json& j, DifferenceVerdict& v) {
    v.step_index = j.at("step_index").get<int>();
    v.region_index = j.at("region_index").get<int>();
    const auto c = j.at("classification").get<std::string>();
    if (c != "bug" && c != "expected") throw ParseError("unknown classification: " + c);
    v.classification = c == "bug" ? Classification::bug : Classification::expected;
    v.description = j.value("description", "");
    v.reasoning = j.value("reasoning", "");
    v.flag = j.contains("flag") && !j["flag"].is_null() ? std::optional(j["flag"].get<std::string>()) : std::nullopt;
}

void to_json(json& j, const Evidence& v) { j = {{"step_index", v.step_index}, {"region_index", v.region_index}}; }

void from_json(const json& j, Evidence& v) {
    v.step_index = j.at("step_index").get<int>();
    v.region_index = j.at("region_index").get<int>();
}

void to_json(json& j, const BugReport& v) {
    j = {{"report_id", v.report_id},     {"pr_id", v.pr_id},
         {"scenario_id", v.scenario_id}, {"title", v.title},
         {"description", v.description}, {"reasoning", v.reasoning},
         {"evidence", v.evidence},       {"evidence_images", v.evidence_images},
         {"status", to_string(v.status)}};
}

void from_json(const json& j, BugReport& v) {
    v.report_id = j.at("report_id").get<std::string>();
    v.pr_id = j.at("pr_id").get<std::string>();
    v.scenario_id = j.at("scenario_id").get<std::string>();
    v.title = j.at("title").get<std::string>();
    v.description = j.value("description", "");
    v.reasoning = j.value("reasoning", "");
    v.evidence = j.at("evidence").get<std::vector<Evidence>>();
    if (v.evidence.empty()) throw ValidationError("evidence", "bug report " + v.report_id + " cites no evidence");
    v.evidence_images = j.value("evidence_images", std::vector<std::string>{});
    v.status = report_status_from_string(j.at("status").get<std::string>());
}

void to_json(json& j, const Detection& v) {
    j = {{"reports", v.reports}, {"verdicts", v.verdicts}, {"incomplete", v.incomplete}};
}

void from_json(const json& j, Detection& v) {
    v.reports = j.at("reports").get<std::vector<BugReport>>();
    v.verdicts = j.at("verdicts").get<std::vector<DifferenceVerdict>>();
    v.incomplete = j.value("incomplete", std::vector<std::string>{});
}

}  // namespace ripple::oracle
