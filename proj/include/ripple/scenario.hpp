#pragma once

#include "ripple/change_context.hpp"
#include "ripple/config.hpp"
#include "ripple/llm.hpp"
#include "ripple/skb.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace ripple::scenario {

enum class Stage { generated, event_enriched, data_enriched };

std::string to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct ImpactAnalysis {
    std::string intent_explanation;
    std::vector<std::string> affected_behaviors;
    std::vector<std::string> high_risk_cases;
    friend bool operator==(const ImpactAnalysis&, const ImpactAnalysis&) = default;
};

struct ScenarioStep {
    std::string description;
    std::optional<std::string> expected_observation;
    friend bool operator==(const ScenarioStep&, const ScenarioStep&) = default;
};

struct TestDatum {
    std::string name;
    std::string constraint;
    std::string concrete_value;
    friend bool operator==(const TestDatum&, const TestDatum&) = default;
};

struct TestScenario {
    std::string scenario_id;
    std::string title;
    Stage stage = Stage::generated;
    std::vector<std::string> preconditions;
    std::vector<ScenarioStep> steps;
    std::vector<TestDatum> test_data;
    std::vector<std::string> provenance;  // chunk ids used for enrichment

    /// Steps with every {data:<name>} replaced by its concrete value.
    std::vector<ScenarioStep> rendered_steps() const;
    friend bool operator==(const TestScenario&, const TestScenario&) = default;
};

/// Names referenced as {data:<name>} in a text, in order of appearance.
std::vector<std::string> data_references(const std::string& text);

struct ScenarioBatch {
    std::string pr_id;
    ImpactAnalysis analysis;
    std::vector<TestScenario> scenarios;

    /// Keeps the first `max_scenarios` in the given order.
    static ScenarioBatch make(std::string pr_id, ImpactAnalysis analysis, std::vector<TestScenario> scenarios,
                              int max_scenarios);
    friend bool operator==(const ScenarioBatch&, const ScenarioBatch&) = default;
};

struct PipelineOptions {
    int max_scenarios = 7;
    int max_queries = 5;
    int k = 8;
    int complexity_step_limit = 15;
    int max_preceding = 10;
};

PipelineOptions pipeline_options_from(const Config& config);

/// What the event-enrichment stage retrieved and decided.
struct EnrichmentLog {
    struct Query {
        std::string text;
        std::vector<std::string> chunk_ids;
    };
    std::vector<Query> queries;
    /// Scenario ids whose enrichment exceeded the step limit and was replaced.
    std::vector<std::string> rejected_extensions;
    /// (replaced id, new id)
    std::vector<std::pair<std::string, std::string>> replacements;
    std::vector<std::string> warnings;
};

/// Lexical end-user check: the changed file paths of a change and the code
/// identifiers its patch touches.
struct CodeVocabulary {
    std::vector<std::string> paths;
    std::vector<std::string> identifiers;

    static CodeVocabulary of(const change::CodeChange& change);
    /// First path contained in `text`, if any.
    std::optional<std::string> path_in(const std::string& text) const;
    /// First path or identifier (whole word) contained in `text`, if any.
    std::optional<std::string> code_in(const std::string& text) const;
};

/// Stage 1. Throws LlmFormatError after one repair attempt, TransportError,
/// ProviderRefusal.
ScenarioBatch generate_scenarios(const change::ChangeContext& ctx, llm::Gateway& gateway,
                                 const PipelineOptions& options = {});

/// Stage 2. Every retrieval is checked against `cutoff` here as well as in
/// the index (LeakageError).
ScenarioBatch enrich_event_sequences(const ScenarioBatch& batch, const skb::SkbIndex& index, llm::Gateway& gateway,
                                     Timestamp cutoff, const PipelineOptions& options = {},
                                     EnrichmentLog* log = nullptr,
                                     const CodeVocabulary& vocabulary = {});

/// Stage 3.
ScenarioBatch enrich_test_data(const ScenarioBatch& batch, llm::Gateway& gateway, const PipelineOptions& options = {},
                               const CodeVocabulary& vocabulary = {});

void to_json(nlohmann::json& j, const ImpactAnalysis& v);
void from_json(const nlohmann::json& j, ImpactAnalysis& v);
void to_json(nlohmann::json& j, const TestScenario& v);
void from_json(const nlohmann::json& j, TestScenario& v);
void to_json(nlohmann::json& j, const ScenarioBatch& v);
void from_json(const nlohmann::json& j, ScenarioBatch& v);
nlohmann::json to_json(const EnrichmentLog& log);

}  // namespace ripple::scenario
