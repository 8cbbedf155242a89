#include "ripple/config.hpp"
#include "ripple/error.hpp"

#include <gtest/gtest.h>

using namespace ripple;

namespace {

const std::string kMinimal = R"(
sut:
  name: notes
  repo_location: repo
  build_command: "make REV={revision}"
  launch_command: "./notes"
  display_geometry: 640x480
  issue_tracker: {kind: mock, location: tracker}
)";

Config load(const std::string& text, const EnvMap& env = {}) { return load_config_text(text, "/base", env); }

std::string with(const std::string& extra) { return kMinimal + extra; }

}  // namespace

TEST(Config, MinimalFileTakesDefaultBudgets) {
    const Config c = load(kMinimal);
    EXPECT_EQ(c.budgets.max_llm_turns_per_scenario, 20);
    EXPECT_EQ(c.budgets.max_ui_instructions_per_scenario, 35);
    EXPECT_EQ(c.budgets.max_scenarios_per_pr, 7);
    EXPECT_EQ(c.budgets.pixel_diff_threshold, 30);
    EXPECT_EQ(c.diff.dilation_radius, 3);
    EXPECT_EQ(c.skb.chunk_tokens, 512);
    EXPECT_EQ(c.skb.overlap_tokens, 64);
    EXPECT_DOUBLE_EQ(c.skb.timestamp_line_ratio, 0.30);
    EXPECT_EQ(c.skb.max_queries, 5);
    EXPECT_EQ(c.skb.k, 8);
    EXPECT_EQ(c.generator.complexity_step_limit, 15);
    EXPECT_EQ(c.generator.max_preceding_intents, 10);
    EXPECT_EQ(c.oracle.max_regions_per_prompt, 40);
    EXPECT_EQ(c.sut.settle_ms, 800);
    EXPECT_EQ(c.run.workers, 2);
    EXPECT_NE(std::find(c.skb.stop_keywords.begin(), c.skb.stop_keywords.end(), "intermittent"),
              c.skb.stop_keywords.end());
    EXPECT_EQ(c.sut.display_geometry, (DisplayGeometry{640, 480}));
    EXPECT_EQ(c.sut.repo_location, "/base/repo");
    EXPECT_EQ(c.sut.tracker.location, "/base/tracker");
}

TEST(Config, ZeroScenarioBudgetNamesTheField) {
    try {
        load(with("budgets: {max_scenarios_per_pr: 0}\n"));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "max_scenarios_per_pr");
    }
}

TEST(Config, ThresholdOutOfRange) {
    try {
        load(with("budgets: {pixel_diff_threshold: 300}\n"));
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "pixel_diff_threshold");
    }
    EXPECT_NO_THROW(load(with("budgets: {pixel_diff_threshold: 255}\n")));
    EXPECT_NO_THROW(load(with("budgets: {pixel_diff_threshold: 0}\n")));
}

TEST(Config, BuildCommandNeedsExactlyOnePlaceholder) {
    const std::string two = R"(
sut:
  name: n
  repo_location: r
  build_command: "{revision} {revision}"
  launch_command: x
  issue_tracker: {kind: mock, location: t}
)";
    EXPECT_THROW(load(two), ValidationError);
}

TEST(Config, GeometryBounds) {
    auto geom = [](const std::string& g) {
        return "sut:\n  name: n\n  repo_location: r\n  build_command: 'b {revision}'\n  launch_command: x\n"
               "  issue_tracker: {kind: mock, location: t}\n  display_geometry: " +
               g + "\n";
    };
    EXPECT_THROW(load(geom("319x480")), ValidationError);
    EXPECT_THROW(load(geom("640x8193")), ValidationError);
    EXPECT_NO_THROW(load(geom("320x8192")));
    EXPECT_NO_THROW(load(geom("{width: 800, height: 600}")));
}

TEST(Config, MalformedFileIsParseError) {
    EXPECT_THROW(load("sut: [unterminated"), ParseError);
    EXPECT_THROW(load("- just\n- a list\n"), ParseError);
}

TEST(Config, UnknownAndMistypedKeysRejected) {
    EXPECT_THROW(load(with("budgets: {max_scenario_per_pr: 3}\n")), ValidationError);
    EXPECT_THROW(load(with("budgets: {max_scenarios_per_pr: many}\n")), ValidationError);
}

TEST(Config, FakeModelSentinelAcceptedForEveryRole) {
    const Config c = load(with(R"(
models:
  generator: fake:scripts/gen.json
  executor: {model: "fake:/abs/exec.json"}
  filter: {model: gpt-x, endpoint: "https://api.example.com/v1", api_key_env: EXAMPLE_KEY}
  embedding: fake:emb.json
)"));
    EXPECT_TRUE(c.models.at(Role::generator).is_fake());
    EXPECT_EQ(c.models.at(Role::generator).fake_script(), "/base/scripts/gen.json");
    EXPECT_EQ(c.models.at(Role::executor).fake_script(), "/abs/exec.json");
    EXPECT_EQ(c.models.at(Role::detector), c.models.at(Role::generator));
    EXPECT_EQ(c.models.at(Role::classifier).model, "gpt-x");
    EXPECT_EQ(c.models.at(Role::filter).api_key_env, "EXAMPLE_KEY");
}

TEST(Config, MissingRoleIsUnknownRole) {
    const Config c = load(kMinimal);
    EXPECT_THROW(c.models.at(Role::executor), UnknownRole);
}

TEST(Config, EnvironmentOverrides) {
    const Config c = load(with("budgets: {max_scenarios_per_pr: 4}\nmodels: {generator: fake:a.json}\n"),
                          {{"RIPPLE_BUDGETS_MAX_SCENARIOS_PER_PR", "3"},
                           {"RIPPLE_SUT_DISPLAY_GEOMETRY_WIDTH", "1024"},
                           {"RIPPLE_SKB_STOP_KEYWORDS", "flaky,timeout"},
                           {"RIPPLE_MODELS_GENERATOR_ENDPOINT", "http://localhost:1"},
                           {"RIPPLE_RUN_WORKERS", "5"},
                           {"RIPPLE_UNRELATED_THING", "x"}});
    EXPECT_EQ(c.budgets.max_scenarios_per_pr, 3);
    EXPECT_EQ(c.sut.display_geometry, (DisplayGeometry{1024, 480}));
    EXPECT_EQ(c.skb.stop_keywords, (std::vector<std::string>{"flaky", "timeout"}));
    EXPECT_EQ(c.models.at(Role::generator).endpoint, "http://localhost:1");
    EXPECT_EQ(c.models.at(Role::generator).fake_script(), "/base/a.json");
    EXPECT_EQ(c.run.workers, 5);
}

TEST(Config, EnvironmentOverrideIsValidated) {
    EXPECT_THROW(load(kMinimal, {{"RIPPLE_BUDGETS_MAX_LLM_TURNS_PER_SCENARIO", "0"}}), ValidationError);
}

TEST(Config, IdenticalBytesGiveIdenticalConfig) { EXPECT_EQ(load(kMinimal), load(kMinimal)); }

TEST(Config, RoundTripThroughYaml) {
    const Config c = load(with(R"(
models:
  generator: fake:gen.json
  embedding: {model: text-embed, endpoint: "http://e", api_key_env: K}
pricing:
  text-embed: {input_per_mtok: 0.13, output_per_mtok: 0}
  "fake:x": {input_per_mtok: 1.25, output_per_mtok: 10, per_image: 0.001}
skb: {timestamp_line_ratio: 0.3, stop_keywords: ["a: b", "it's"]}
executor: {runtime: docker, runtime_executable: podman}
llm: {audit_log: false}
)"));
    const std::string yaml = to_yaml(c);
    const Config again = load_config_text(yaml, "/elsewhere");
    EXPECT_EQ(again, c);
    EXPECT_EQ(to_yaml(again), yaml);
}

TEST(Config, MissingFileIsIoError) { EXPECT_THROW(load_config("/nonexistent/ripple.yaml", {}), IoError); }
