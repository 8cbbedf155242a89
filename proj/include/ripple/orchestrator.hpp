#pragma once

#include "ripple/config.hpp"
#include "ripple/error.hpp"
#include "ripple/llm.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ripple::exec {
class ContainerRuntime;
}

namespace ripple::pipeline {

enum class Stage { ingest, generate, execute, diff, detect, filter, report };
inline constexpr Stage kStages[] = {Stage::ingest, Stage::generate, Stage::execute, Stage::diff,
                                    Stage::detect, Stage::filter,   Stage::report};

std::string to_string(Stage s);
/// Throws ParseError.
Stage stage_from_string(const std::string& s);

enum class StageStatus { pending, done, failed };
std::string to_string(StageStatus s);

struct StageRecord {
    StageStatus status = StageStatus::pending;
    std::optional<std::string> started_at;
    std::optional<std::string> finished_at;
    /// Relative to the run directory.
    std::string artifact_path;
    std::optional<std::string> error;
    /// Model usage of the stage's last successful execution.
    llm::MeterSnapshot usage;
    friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

struct RunManifest {
    std::string run_id;
    std::string pr_id;
    std::map<Stage, StageRecord> stages;

    static RunManifest fresh(std::string run_id, std::string pr_id);
    /// All predecessors are done.
    bool runnable(Stage s) const;
    /// Sum of the usage of every done stage.
    llm::MeterSnapshot meter_snapshot() const;
    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

void to_json(nlohmann::json& j, const RunManifest& v);
void from_json(const nlohmann::json& j, RunManifest& v);

/// A stage failed; the manifest has been saved with the failure.
class StageFailure : public Error {
public:
    StageFailure(Stage stage, int exit_code, const std::string& message)
        : Error(to_string(stage) + ": " + message), stage_(stage), exit_code_(exit_code) {}
    Stage stage() const { return stage_; }
    int exit_code() const { return exit_code_; }

private:
    Stage stage_;
    int exit_code_;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitStage = 3;
inline constexpr int kExitProvider = 4;

/// Exit code for an exception escaping a stage.
int exit_code_for(const std::exception& e);

struct RunOptions {
    /// Defaults to <runs_dir>/<pr_id>.
    std::filesystem::path run_dir;
    bool force = false;
    std::optional<int> workers;
    /// Prepended to PATH for locally launched SUT processes.
    std::vector<std::filesystem::path> search_path;
    /// Called after each stage completes; lets tests interrupt a run.
    std::function<void(Stage)> after_stage;
    /// Wraps the runtime the execute stage uses; lets tests observe sessions.
    std::function<std::unique_ptr<exec::ContainerRuntime>(std::unique_ptr<exec::ContainerRuntime>)> wrap_runtime;
};

/// Run directory layout, one subdirectory per stage:
///   manifest.json
///   ingest/change_context.json
///   generate/{scenarios,generated,event_enriched,enrichment_log}.json
///   execute/<scenario>/{trace.json,*.png}, execute/summary.json
///   diff/<scenario>/{parsed.json,step_<i>_pre.png,step_<i>_post.png}
///   detect/<scenario>.json, detect/candidates.json
///   filter/result.json
///   report/{report.json,summary.md,evidence/<report>.png}
///   llm/<session>.jsonl, builds/, sessions/
/// A stage writes into <stage>.tmp and is renamed into place on success.
class Orchestrator {
public:
    Orchestrator(Config config, std::string pr_id, RunOptions options = {});

    const std::filesystem::path& run_dir() const { return run_dir_; }
    const RunManifest& manifest() const { return manifest_; }

    /// Every stage from the first one not done (all of them with `force`).
    /// Throws StageFailure.
    RunManifest run();
    /// One stage; its predecessors must be done. With `force` the stage and
    /// everything after it are reset first. Returns false when the stage was
    /// already done. Throws StageFailure.
    bool run_stage(Stage stage);

private:
    void execute(Stage stage);
    void reset_from(Stage stage);
    void save_manifest() const;
    int workers() const;

    Config config_;
    RunOptions options_;
    std::filesystem::path run_dir_;
    RunManifest manifest_;
};

/// Reads <run_dir>/manifest.json. Throws IoError, ParseError.
RunManifest load_manifest(const std::filesystem::path& run_dir);

}  // namespace ripple::pipeline
