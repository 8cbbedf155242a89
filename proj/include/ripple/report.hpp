#pragma once

#include "ripple/bug_filter.hpp"
#include "ripple/image.hpp"
#include "ripple/llm.hpp"
#include "ripple/oracle.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ripple::report {

/// One row of the overhead split.
struct Component {
    std::string name;
    std::vector<Role> roles;
    llm::RoleCounters counters;
    friend bool operator==(const Component&, const Component&) = default;
};

/// Generator (generator, classifier, embedding), Executor (executor) and
/// Detector (detector, filter); every role lands in exactly one row.
std::vector<Component> overhead_breakdown(const llm::MeterSnapshot& meter);

struct ScenarioOutcome {
    std::string scenario_id;
    std::string title;
    std::string termination;
    int steps = 0;
    int llm_turns = 0;
    std::optional<int> replay_failure_at;
    friend bool operator==(const ScenarioOutcome&, const ScenarioOutcome&) = default;
};

struct Summary {
    std::string run_id;
    std::string pr_id;
    std::string pr_title;
    std::vector<ScenarioOutcome> scenarios;
    int candidates = 0;
    std::vector<oracle::BugReport> kept;
    /// Keyed by filtered status name.
    std::map<std::string, int> filtered;
    std::vector<Component> breakdown;
    llm::RoleCounters total;
    /// Evidence thumbnail per kept report id, relative to the report directory.
    std::map<std::string, std::string> thumbnails;
    std::vector<std::string> incomplete;
    std::vector<std::string> warnings;
    friend bool operator==(const Summary&, const Summary&) = default;
};

Summary summarize(const filter::FilterResult& filtered, const llm::MeterSnapshot& meter);

/// Human-readable form.
std::string render_markdown(const Summary& summary);

/// Side-by-side pre | post, box-averaged down by `factor`.
Image thumbnail(const Image& pre, const Image& post, int factor = 2);

/// "$0.0123"
std::string format_usd(long long micro_usd);

void to_json(nlohmann::json& j, const Component& v);
void to_json(nlohmann::json& j, const ScenarioOutcome& v);
void to_json(nlohmann::json& j, const Summary& v);

}  // namespace ripple::report
