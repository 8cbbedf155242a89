#pragma once

#include "ripple/llm.hpp"
#include "ripple/oracle.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ripple::filter {

enum class Outcome { keep, duplicate, rendering_artifact, nondeterministic };
std::string to_string(Outcome o);
Outcome outcome_from_string(const std::string& s);

struct FilterDecision {
    std::string report_id;
    Outcome outcome = Outcome::keep;
    std::optional<std::string> duplicate_of;
    std::string rationale;
    /// Set when the decision was not taken by the model as given.
    std::optional<std::string> flag;
    friend bool operator==(const FilterDecision&, const FilterDecision&) = default;
};

struct FilterOptions {
    std::string pr_id;
    /// Relative evidence image paths resolve against this directory.
    std::filesystem::path image_base;
};

struct FilterResult {
    /// Every candidate in input order, with its final status.
    std::vector<oracle::BugReport> reports;
    std::vector<FilterDecision> decisions;
    friend bool operator==(const FilterResult&, const FilterResult&) = default;
};

/// One joint pass over a PR's candidates. Throws std::invalid_argument when a
/// report is not a candidate or ids repeat; TransportError and ProviderRefusal
/// propagate.
FilterResult filter_reports(const std::vector<oracle::BugReport>& candidates, llm::Gateway& gateway,
                            const FilterOptions& options = {});

/// Groups reports linked by duplicate_of edges; each group keeps its lowest id
/// (numeric runs compare by value) and every other member points at it.
std::vector<FilterDecision> resolve_duplicates(std::vector<FilterDecision> decisions);

/// "S2-B01" < "S10-B01".
bool natural_less(const std::string& a, const std::string& b);

void to_json(nlohmann::json& j, const FilterDecision& v);
void from_json(const nlohmann::json& j, FilterDecision& v);
void to_json(nlohmann::json& j, const FilterResult& v);
void from_json(const nlohmann::json& j, FilterResult& v);

}  // namespace ripple::filter
