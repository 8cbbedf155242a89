#pragma once

#include "ripple/config.hpp"
#include "ripple/image.hpp"
#include "ripple/llm.hpp"
#include "ripple/process.hpp"
#include "ripple/scenario.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ripple::exec {

// ---------------------------------------------------------------------------
// UI instructions

enum class ActionKind {
    click,
    right_click,
    long_click,
    double_click,
    triple_click,
    input,
    scroll,
    drag,
    move,
    keypress,
    wait
};
enum class Direction { up, down, left, right };

std::string to_string(ActionKind k);
/// Accepts "right_click" and "right-click" spellings. Throws ParseError.
ActionKind action_from_string(std::string s);
std::string to_string(Direction d);
Direction direction_from_string(const std::string& s);

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct UiInstruction {
    ActionKind kind = ActionKind::click;
    std::string target_name;
    std::optional<Point> position;
    std::optional<std::string> text;
    std::optional<std::vector<std::string>> keys;
    std::optional<Direction> direction;
    std::optional<Point> end_position;
    std::optional<int> wait_ms;

    /// Kind-argument matrix and display bounds. Throws ValidationError.
    void validate(DisplayGeometry display) const;
    /// Sorted-key JSON with absent arguments omitted.
    std::string canonical() const;
    friend bool operator==(const UiInstruction&, const UiInstruction&) = default;
};

void to_json(nlohmann::json& j, const UiInstruction& v);
void from_json(const nlohmann::json& j, UiInstruction& v);

/// One instruction as the executor model writes it ("action", "target", ...).
/// Null arguments count as absent. Throws LlmFormatError.
UiInstruction parse_model_instruction(const nlohmann::json& j, DisplayGeometry display);

// ---------------------------------------------------------------------------
// Builds and sessions

struct BuildArtifact {
    std::string image_ref;
    std::string revision;
    /// Directory holding the build output (local) or the derived image tag (docker).
    std::string location;
    friend bool operator==(const BuildArtifact&, const BuildArtifact&) = default;
};

enum class SessionState { building, ready, running, torn_down };

struct SessionInfo {
    std::string session_id;
    std::string image_ref;
    std::string sut_revision;
    DisplayGeometry display_geometry;
};

/// One SUT process in a private display. Torn down on destruction.
class ContainerSession {
public:
    virtual ~ContainerSession() = default;
    const SessionInfo& info() const { return info_; }
    SessionState state() const { return state_; }

    /// Runs a display-automation command inside the session. Throws DriverError.
    virtual void exec(const std::vector<std::string>& argv) = 0;
    /// Full-display lossless capture. Throws DriverError.
    virtual Image capture_screenshot() = 0;
    virtual void copy_in(const std::filesystem::path& host_path, const std::string& session_path) = 0;
    /// Idempotent.
    virtual void teardown() = 0;

protected:
    SessionInfo info_;
    SessionState state_ = SessionState::building;
};

class ContainerRuntime {
public:
    virtual ~ContainerRuntime() = default;

    /// Cached by (image_ref, revision); a failed build is remembered too.
    /// Throws BuildFailure.
    BuildArtifact build_sut(const SutConfig& cfg, const std::string& revision);
    virtual std::unique_ptr<ContainerSession> start_session(const BuildArtifact& artifact, const SutConfig& cfg) = 0;

    /// Builds actually run by this runtime.
    int builds_performed() const { return builds_; }

protected:
    virtual BuildArtifact build_image(const SutConfig& cfg, const std::string& revision) = 0;
    std::atomic<int> builds_{0};

private:
    std::mutex mutex_;
    std::map<std::pair<std::string, std::string>, std::shared_future<BuildArtifact>> cache_;
};

/// Substitutes {name} placeholders.
std::string expand(std::string text, const std::map<std::string, std::string>& values);

/// Builds from a `git archive` of the revision on the host and runs the SUT
/// as a child process speaking the mock app's line protocol. `{out}` in the
/// build command is the artifact directory and `{revision}` the revision; the
/// launch command may use {artifact}, {profile}, {width} and {height}.
class LocalRuntime : public ContainerRuntime {
public:
    struct Options {
        std::filesystem::path cache_dir;
        std::filesystem::path work_dir;
        /// Prepended to PATH when launching the SUT.
        std::vector<std::filesystem::path> search_path;
    };
    explicit LocalRuntime(Options options);
    std::unique_ptr<ContainerSession> start_session(const BuildArtifact& artifact, const SutConfig& cfg) override;

protected:
    BuildArtifact build_image(const SutConfig& cfg, const std::string& revision) override;

private:
    Options options_;
    std::atomic<int> sessions_{0};
};

/// Shells out to a docker-compatible executable. The derived image copies the
/// revision's sources onto `container_image_ref` and runs the build command
/// with {out} = /opt/sut; sessions run Xvfb plus the launch command.
class DockerRuntime : public ContainerRuntime {
public:
    struct Options {
        std::string executable = "docker";
        std::filesystem::path context_dir;
        std::string display = ":99";
    };
    explicit DockerRuntime(Options options);
    std::unique_ptr<ContainerSession> start_session(const BuildArtifact& artifact, const SutConfig& cfg) override;

protected:
    BuildArtifact build_image(const SutConfig& cfg, const std::string& revision) override;

private:
    Options options_;
};

std::unique_ptr<ContainerRuntime> make_runtime(const Config& config, const std::filesystem::path& run_dir,
                                               std::vector<std::filesystem::path> search_path = {});

// ---------------------------------------------------------------------------
// Input injection

class InputDriver {
public:
    virtual ~InputDriver() = default;
    /// Commands to run in the session, in order.
    virtual std::vector<std::vector<std::string>> commands(const UiInstruction& instr) const = 0;
};

/// X11 reference driver built on the xdotool command set.
class XdotoolDriver : public InputDriver {
public:
    explicit XdotoolDriver(std::string executable = "xdotool") : exe_(std::move(executable)) {}
    std::vector<std::vector<std::string>> commands(const UiInstruction& instr) const override;

private:
    std::string exe_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Injects the instruction (each failing command is retried once), waits
/// `settle_ms` and captures the display. Throws DriverError.
Image execute_instruction(const UiInstruction& instr, ContainerSession& session, const InputDriver& driver,
                          int settle_ms, const Sleeper& sleeper = {});

// ---------------------------------------------------------------------------
// Translation loop

struct Translation {
    bool complete = false;
    std::vector<UiInstruction> instructions;
    int turns_used = 0;
    /// A repair was needed but no turn was left.
    bool budget_exhausted = false;
};

/// One executor turn (plus at most one repair turn when `turns_available`
/// allows). The first call on a session presents the scenario.
/// Throws LlmFormatError, TransportError, ProviderRefusal.
Translation translate_next(const scenario::TestScenario& scenario, const std::filesystem::path& screenshot,
                           llm::Session& session, DisplayGeometry display, int executed_count, int turns_available);

enum class Termination { completed, llm_budget_exhausted, ui_budget_exhausted, execution_error };
std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct Screenshot {
    std::string path;  // relative to the trace directory
    std::string sha256;
    friend bool operator==(const Screenshot&, const Screenshot&) = default;
};

struct StepRecord {
    int step_index = 0;
    UiInstruction instruction;
    Screenshot post_screenshot;
    std::optional<Screenshot> pre_screenshot;
    int llm_turn_index = 0;
    friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct ExecutionTrace {
    std::string scenario_id;
    std::vector<StepRecord> steps;
    Termination termination = Termination::completed;
    int llm_turns_used = 0;
    std::string pre_revision;
    std::string post_revision;
    std::optional<int> replay_failure_at;
    std::optional<std::string> error;
    friend bool operator==(const ExecutionTrace&, const ExecutionTrace&) = default;
};

void to_json(nlohmann::json& j, const ExecutionTrace& v);
void from_json(const nlohmann::json& j, ExecutionTrace& v);

struct ExecutorOptions {
    Budgets budgets;
    /// Screenshots and trace.json are written here.
    std::filesystem::path trace_dir;
    std::string session_label;
    Sleeper sleeper;
};

/// Play on a fresh post-build session, then replay the executed instructions
/// verbatim on a fresh pre-build session. Other failures end the trace, but
/// TransportError and ProviderRefusal propagate.
ExecutionTrace run_scenario(const scenario::TestScenario& scenario, const BuildArtifact& post_build,
                            const BuildArtifact& pre_build, const SutConfig& cfg, llm::Gateway& gateway,
                            ContainerRuntime& runtime, const InputDriver& driver, const ExecutorOptions& options);

ExecutionTrace load_trace(const std::filesystem::path& trace_dir);

}  // namespace ripple::exec
