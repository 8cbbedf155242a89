#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ripple {

enum class TrackerKind { github, bugzilla, mock };

/// Model-addressed roles. `detector` and `classifier` fall back to the
/// generator and filter models when not configured explicitly.
enum class Role { generator, executor, detector, filter, classifier, embedding };

inline constexpr Role kAllRoles[] = {Role::generator, Role::executor,   Role::detector,
                                     Role::filter,    Role::classifier, Role::embedding};

std::string to_string(Role role);
Role role_from_string(const std::string& name);  // throws UnknownRole
std::string to_string(TrackerKind kind);

struct DisplayGeometry {
    int width = 1280;
    int height = 800;
    friend bool operator==(const DisplayGeometry&, const DisplayGeometry&) = default;
};

struct TrackerConfig {
    TrackerKind kind = TrackerKind::mock;
    /// Fixture directory (mock), "owner/repo" (github) or product name (bugzilla).
    std::string location;
    /// API base URL for github/bugzilla.
    std::string endpoint;
    /// Environment variable holding an API token; never the token itself.
    std::string token_env;
    /// Pattern whose first capture group is an issue or PR key in a commit message.
    std::string commit_issue_pattern = "#(\\d+)";
    friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

struct SutConfig {
    std::string name;
    std::string repo_location;
    std::string container_image_ref;
    std::string build_command;
    std::string launch_command;
    DisplayGeometry display_geometry;
    TrackerConfig tracker;
    int settle_ms = 800;
    friend bool operator==(const SutConfig&, const SutConfig&) = default;
};

struct Budgets {
    int max_llm_turns_per_scenario = 20;
    int max_ui_instructions_per_scenario = 35;
    int max_scenarios_per_pr = 7;
    int pixel_diff_threshold = 30;
    friend bool operator==(const Budgets&, const Budgets&) = default;
};

struct ModelRole {
    std::string model;
    std::string endpoint;
    std::string api_key_env;
    bool is_fake() const { return model.rfind("fake:", 0) == 0; }
    std::string fake_script() const { return is_fake() ? model.substr(5) : std::string{}; }
    friend bool operator==(const ModelRole&, const ModelRole&) = default;
};

/// USD prices. Token prices are per million tokens.
struct ModelPrice {
    double input_per_mtok = 0.0;
    double output_per_mtok = 0.0;
    double per_image = 0.0;
    friend bool operator==(const ModelPrice&, const ModelPrice&) = default;
};

struct ModelRoles {
    std::map<Role, ModelRole> roles;
    const ModelRole& at(Role role) const;  // throws UnknownRole
    bool has(Role role) const { return roles.count(role) != 0; }
    friend bool operator==(const ModelRoles&, const ModelRoles&) = default;
};

struct DiffSettings {
    int dilation_radius = 3;
    friend bool operator==(const DiffSettings&, const DiffSettings&) = default;
};

struct SkbSettings {
    int chunk_tokens = 512;
    int overlap_tokens = 64;
    double timestamp_line_ratio = 0.30;
    std::vector<std::string> stop_keywords = {"intermittent", "flaky", "crash report", "stack trace"};
    int max_queries = 5;
    int k = 8;
    int embed_attempts = 3;
    std::string index_path;
    friend bool operator==(const SkbSettings&, const SkbSettings&) = default;
};

struct GeneratorSettings {
    int max_preceding_intents = 10;
    int complexity_step_limit = 15;
    friend bool operator==(const GeneratorSettings&, const GeneratorSettings&) = default;
};

enum class RuntimeKind { local, docker };

struct ExecutorSettings {
    RuntimeKind runtime = RuntimeKind::local;
    std::string runtime_executable = "docker";
    std::string driver_executable = "xdotool";
    std::string artifact_cache;
    friend bool operator==(const ExecutorSettings&, const ExecutorSettings&) = default;
};

struct OracleSettings {
    int max_regions_per_prompt = 40;
    friend bool operator==(const OracleSettings&, const OracleSettings&) = default;
};

struct LlmSettings {
    int max_attempts = 3;
    int backoff_initial_ms = 500;
    int timeout_s = 120;
    bool audit_log = true;
    friend bool operator==(const LlmSettings&, const LlmSettings&) = default;
};

struct RunSettings {
    std::string runs_dir = "runs";
    int workers = 2;
    friend bool operator==(const RunSettings&, const RunSettings&) = default;
};

struct Config {
    SutConfig sut;
    Budgets budgets;
    ModelRoles models;
    std::map<std::string, ModelPrice> pricing;
    DiffSettings diff;
    SkbSettings skb;
    GeneratorSettings generator;
    ExecutorSettings executor;
    OracleSettings oracle;
    LlmSettings llm;
    RunSettings run;

    /// Price for a model id; zero if the table has no entry.
    ModelPrice price_for(const std::string& model) const;
    friend bool operator==(const Config&, const Config&) = default;
};

using EnvMap = std::map<std::string, std::string>;

/// Every `RIPPLE_*` variable of the process environment.
EnvMap ripple_environment();

/// Reads, applies `RIPPLE_<SECTION>_<KEY>` overrides from the process
/// environment, fills defaults and validates. Relative paths resolve against
/// the file's directory. Throws ParseError, ValidationError, IoError.
Config load_config(const std::filesystem::path& path);
Config load_config(const std::filesystem::path& path, const EnvMap& env);

/// Same, from text. `base_dir` anchors relative paths.
Config load_config_text(const std::string& text, const std::filesystem::path& base_dir, const EnvMap& env = {});

/// Throws ValidationError naming the first offending field.
void validate(const Config& config);

/// Canonical YAML form; loading it back yields an equal Config.
std::string to_yaml(const Config& config);

}  // namespace ripple
