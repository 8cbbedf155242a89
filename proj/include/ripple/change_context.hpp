#pragma once

#include "ripple/config.hpp"
#include "ripple/timestamp.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ripple::change {

struct ChangeIntent {
    std::string source_id;
    std::string title;
    std::string description;
    Timestamp created_at{};
    friend bool operator==(const ChangeIntent&, const ChangeIntent&) = default;
};

/// Inclusive, 1-based.
struct LineRange {
    int start = 0;
    int end = 0;
    int length() const { return end - start + 1; }
    friend bool operator==(const LineRange&, const LineRange&) = default;
};

struct FileChange {
    std::string path;      // post-change path
    std::string old_path;  // pre-change path; differs from path for renames, empty for added files
    std::string patch;
    bool binary = false;
    std::vector<LineRange> old_ranges;  // modified or deleted lines, pre-change numbering
    std::vector<LineRange> new_ranges;  // added lines, post-change numbering
    friend bool operator==(const FileChange&, const FileChange&) = default;
};

struct CodeChange {
    std::vector<std::string> commit_messages;
    std::vector<FileChange> files;
    /// Number of modified or deleted lines over all files.
    long removed_line_count() const;
    friend bool operator==(const CodeChange&, const CodeChange&) = default;
};

struct PrecedingChangeIntent {
    ChangeIntent intent;
    /// Issues resolved by a preceding PR; context only, carries no overlap of its own.
    std::vector<ChangeIntent> related;
    long overlap_lines = 0;
    int rank = 0;
    friend bool operator==(const PrecedingChangeIntent&, const PrecedingChangeIntent&) = default;
};

struct ChangeContext {
    std::string pr_id;
    ChangeIntent pr_intent;
    std::vector<ChangeIntent> resolved_issues;
    CodeChange code_change;
    std::vector<PrecedingChangeIntent> preceding;
    std::string pre_revision;
    std::string post_revision;
    /// Files whose blame could not be computed, and similar notes.
    std::vector<std::string> warnings;
    friend bool operator==(const ChangeContext&, const ChangeContext&) = default;
};

/// Splits `git diff` (or plain unified diff) output into per-file changes.
/// Throws ParseError on a malformed hunk header.
std::vector<FileChange> parse_unified_diff(const std::string& text);

/// Collapses sorted, unique line numbers into maximal runs.
std::vector<LineRange> to_ranges(const std::vector<int>& lines);

// ---------------------------------------------------------------------------
// Version control

struct CommitInfo {
    std::string id;
    std::string subject;
    std::string body;
    Timestamp committed_at{};
};

struct BlameEntry {
    int line = 0;  // 1-based, numbering of the blamed revision
    std::string commit;
};

class VcsClient {
public:
    virtual ~VcsClient() = default;
    /// Full id of a revision expression. Throws NotFound.
    virtual std::string resolve(const std::string& revision) = 0;
    /// First parent. Throws NotFound for a root commit.
    virtual std::string resolve_parent(const std::string& revision) = 0;
    /// Commits reachable from `to` but not from `from`, oldest first.
    virtual std::vector<std::string> commits_between(const std::string& from, const std::string& to) = 0;
    virtual CommitInfo commit(const std::string& revision) = 0;
    virtual std::string diff(const std::string& from, const std::string& to) = 0;
    /// Last-touching commit of each requested line of `path` at `revision`.
    /// Throws BlameUnavailable.
    virtual std::vector<BlameEntry> blame(const std::string& revision, const std::string& path,
                                          const std::vector<LineRange>& ranges) = 0;
};

/// Shells out to the `git` executable.
class GitVcsClient : public VcsClient {
public:
    explicit GitVcsClient(std::filesystem::path repo, std::string git = "git");
    std::string resolve(const std::string& revision) override;
    std::string resolve_parent(const std::string& revision) override;
    std::vector<std::string> commits_between(const std::string& from, const std::string& to) override;
    CommitInfo commit(const std::string& revision) override;
    std::string diff(const std::string& from, const std::string& to) override;
    std::vector<BlameEntry> blame(const std::string& revision, const std::string& path,
                                  const std::vector<LineRange>& ranges) override;
    const std::filesystem::path& repo() const { return repo_; }

private:
    std::string run(const std::vector<std::string>& args);
    std::filesystem::path repo_;
    std::string git_;
};

// ---------------------------------------------------------------------------
// Issue trackers

struct PrRecord {
    std::string id;
    ChangeIntent intent;
    std::vector<std::string> resolved_issues;
    /// Merge or head revision.
    std::string head;
    /// Target branch, used when `commits` is empty.
    std::string base;
    std::vector<std::string> commits;
    std::string state = "merged";
};

struct CrossReference {
    enum class Kind { pr, issue } kind = Kind::pr;
    std::string id;
    friend bool operator==(const CrossReference&, const CrossReference&) = default;
};

class IssueTrackerClient {
public:
    virtual ~IssueTrackerClient() = default;
    /// Throws NotFound, NetworkError.
    virtual PrRecord get_pr(const std::string& id) = 0;
    virtual ChangeIntent get_issue(const std::string& id) = 0;
    /// PRs or issues the tracker links to a commit id.
    virtual std::vector<CrossReference> list_cross_references(const std::string& commit) = 0;
};

/// Fixture directory: prs/<id>.json, issues/<id>.json and an optional
/// cross_references.json mapping commit ids to [{kind, id}].
class MockTracker : public IssueTrackerClient {
public:
    explicit MockTracker(std::filesystem::path dir);
    PrRecord get_pr(const std::string& id) override;
    ChangeIntent get_issue(const std::string& id) override;
    std::vector<CrossReference> list_cross_references(const std::string& commit) override;

private:
    std::filesystem::path dir_;
    std::map<std::string, std::vector<CrossReference>> xrefs_;
};

struct HttpTrackerOptions {
    std::string endpoint;
    std::string token_env;
    int max_attempts = 3;
    int backoff_initial_ms = 500;
    int timeout_s = 30;
};

/// REST v3. `repo` is "owner/name".
class GitHubTracker : public IssueTrackerClient {
public:
    GitHubTracker(std::string repo, HttpTrackerOptions options);
    PrRecord get_pr(const std::string& id) override;
    ChangeIntent get_issue(const std::string& id) override;
    std::vector<CrossReference> list_cross_references(const std::string& commit) override;

private:
    nlohmann::json get(const std::string& path);
    std::string repo_;
    HttpTrackerOptions options_;
};

/// Bugzilla REST. Bugzilla has no pull requests, so get_pr throws NotFound
/// and commits are linked to bugs through the commit-message pattern.
class BugzillaTracker : public IssueTrackerClient {
public:
    explicit BugzillaTracker(HttpTrackerOptions options);
    PrRecord get_pr(const std::string& id) override;
    ChangeIntent get_issue(const std::string& id) override;
    std::vector<CrossReference> list_cross_references(const std::string& commit) override;

private:
    nlohmann::json get(const std::string& path);
    HttpTrackerOptions options_;
};

/// Issue references ("Fixes #12") in a PR description.
std::vector<std::string> closing_references(const std::string& text);

std::unique_ptr<IssueTrackerClient> make_tracker(const Config& config);

// ---------------------------------------------------------------------------

struct PrecedingOptions {
    std::string pre_revision;
    /// First capture group is a PR or issue key.
    std::string commit_issue_pattern = "#(\\d+)";
    /// Intents created at or after this instant are dropped.
    std::optional<Timestamp> cutoff;
};

/// Blames every modified or deleted line at the pre-change revision, maps the
/// last-touching commits to intents and ranks them by overlap.
std::vector<PrecedingChangeIntent> compute_preceding_intents(const CodeChange& code_change, VcsClient& repo,
                                                             IssueTrackerClient& tracker,
                                                             const PrecedingOptions& options,
                                                             std::vector<std::string>* warnings = nullptr);

struct FetchOptions {
    std::string commit_issue_pattern = "#(\\d+)";
    int max_preceding = 10;
};

/// Throws NotFound, NetworkError, DetachedPr.
ChangeContext fetch_change_context(const std::string& pr_id, IssueTrackerClient& tracker, VcsClient& repo,
                                   const FetchOptions& options = {});

void to_json(nlohmann::json& j, const ChangeIntent& v);
void from_json(const nlohmann::json& j, ChangeIntent& v);
void to_json(nlohmann::json& j, const FileChange& v);
void from_json(const nlohmann::json& j, FileChange& v);
void to_json(nlohmann::json& j, const PrecedingChangeIntent& v);
void from_json(const nlohmann::json& j, PrecedingChangeIntent& v);
void to_json(nlohmann::json& j, const ChangeContext& v);
void from_json(const nlohmann::json& j, ChangeContext& v);

}  // namespace ripple::change
