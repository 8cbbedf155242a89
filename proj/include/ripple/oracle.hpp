#pragma once

#include "ripple/change_context.hpp"
#include "ripple/diff_engine.hpp"
#include "ripple/executor.hpp"
#include "ripple/llm.hpp"
#include "ripple/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ripple::oracle {

enum class Classification { expected, bug };
std::string to_string(Classification c);

struct DifferenceVerdict {
    int step_index = 0;
    int region_index = 0;
    Classification classification = Classification::expected;
    std::string description;
    std::string reasoning;
    /// Set when the verdict was assigned without the model (failed step, omitted region).
    std::optional<std::string> flag;
    friend bool operator==(const DifferenceVerdict&, const DifferenceVerdict&) = default;
};

/// region_index -1 anchors to the whole step.
struct Evidence {
    int step_index = 0;
    int region_index = 0;
    friend bool operator==(const Evidence&, const Evidence&) = default;
    friend auto operator<=>(const Evidence&, const Evidence&) = default;
};

enum class ReportStatus { candidate, kept, filtered_duplicate, filtered_rendering, filtered_nondeterminism };
std::string to_string(ReportStatus s);
ReportStatus report_status_from_string(const std::string& s);

struct BugReport {
    std::string report_id;
    std::string pr_id;
    std::string scenario_id;
    std::string title;
    std::string description;
    std::string reasoning;
    std::vector<Evidence> evidence;
    /// Annotated pre/post screenshots of the cited steps.
    std::vector<std::string> evidence_images;
    ReportStatus status = ReportStatus::candidate;
    friend bool operator==(const BugReport&, const BugReport&) = default;
};

struct AnnotatedPair {
    std::filesystem::path pre;
    std::filesystem::path post;
};

struct DetectOptions {
    int max_regions_per_prompt = 40;
    /// Evidence image paths are stored relative to this directory when set.
    std::filesystem::path image_base;
    std::string scenario_title;
};

struct Detection {
    std::vector<BugReport> reports;
    std::vector<DifferenceVerdict> verdicts;
    /// Steps the model could not analyze, and regions left out of prompts.
    std::vector<std::string> incomplete;
    friend bool operator==(const Detection&, const Detection&) = default;
};

/// One dialogue per trace. `parsed` and `pairs` are aligned with the trace
/// steps that have both screenshots. Steps without regions are not sent.
/// Throws std::invalid_argument on misaligned inputs; TransportError and
/// ProviderRefusal propagate.
Detection detect_bugs(const exec::ExecutionTrace& trace, const std::vector<diff::ParsedInfo>& parsed,
                      const std::vector<AnnotatedPair>& pairs, const change::ChangeContext& ctx,
                      const scenario::ImpactAnalysis& analysis, llm::Gateway& gateway,
                      const DetectOptions& options = {});

/// Regions shown to the model: the `limit` largest by pixel count, in index order.
std::vector<diff::DiffRegion> prompt_regions(const std::vector<diff::DiffRegion>& regions, int limit);

void to_json(nlohmann::json& j, const DifferenceVerdict& v);
void from_json(const nlohmann::json& j, DifferenceVerdict& v);
void to_json(nlohmann::json& j, const Evidence& v);
void from_json(const nlohmann::json& j, Evidence& v);
void to_json(nlohmann::json& j, const BugReport& v);
void from_json(const nlohmann::json& j, BugReport& v);
void to_json(nlohmann::json& j, const Detection& v);
void from_json(const nlohmann::json& j, Detection& v);

}  // namespace ripple::oracle
