#include "ripple/change_context.hpp"
#include "ripple/error.hpp"

#include "support/blame_oracle.hpp"
#include "support/preceding_oracle.hpp"
#include "support/sut_fixture.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <thread>

using namespace ripple;
using namespace ripple::change;
using testkit::sut_fixture;
using testkit::brute_preceding;
using testkit::Ranked;

namespace {

std::vector<LineRange> R(std::initializer_list<std::pair<int, int>> l) {
    std::vector<LineRange> out;
    for (auto [a, b] : l) out.push_back({a, b});
    return out;
}

}  // namespace

TEST(DiffParser, ModifiedFileWithTwoHunks) {
    const std::string d =
        "diff --git a/src/a.txt b/src/a.txt\n"
        "index 111..222 100644\n"
        "--- a/src/a.txt\n"
        "+++ b/src/a.txt\n"
        "@@ -1,4 +1,4 @@\n"
        " one\n"
        "-two\n"
        "-three\n"
        "+TWO\n"
        "+THREE\n"
        " four\n"
        "@@ -10,3 +10,4 @@ context\n"
        " ten\n"
        "-eleven\n"
        "+ELEVEN\n"
        "+extra\n"
        " twelve\n";
    const auto files = parse_unified_diff(d);
    ASSERT_EQ(files.size(), 1u);
    EXPECT_EQ(files[0].path, "src/a.txt");
    EXPECT_EQ(files[0].old_path, "src/a.txt");
    EXPECT_FALSE(files[0].binary);
    EXPECT_EQ(files[0].old_ranges, R({{2, 3}, {11, 11}}));
    EXPECT_EQ(files[0].new_ranges, R({{2, 3}, {11, 12}}));
    EXPECT_NE(files[0].patch.find("+extra"), std::string::npos);
}

TEST(DiffParser, RenameAddDeleteAndBinary) {
    const std::string d =
        "diff --git a/old name.txt b/new name.txt\n"
        "similarity index 80%\n"
        "rename from old name.txt\n"
        "rename to new name.txt\n"
        "--- a/old name.txt\n"
        "+++ b/new name.txt\n"
        "@@ -3 +3 @@\n"
        "-x\n"
        "+y\n"
        "\\ No newline at end of file\n"
        "diff --git a/pure.txt b/moved.txt\n"
        "similarity index 100%\n"
        "rename from pure.txt\n"
        "rename to moved.txt\n"
        "diff --git a/added.txt b/added.txt\n"
        "new file mode 100644\n"
        "index 0000000..e69de29\n"
        "--- /dev/null\n"
        "+++ b/added.txt\n"
        "@@ -0,0 +1,2 @@\n"
        "+a\n"
        "+b\n"
        "diff --git a/gone.txt b/gone.txt\n"
        "deleted file mode 100644\n"
        "--- a/gone.txt\n"
        "+++ /dev/null\n"
        "@@ -1,2 +0,0 @@\n"
        "-p\n"
        "-q\n"
        "diff --git a/img.png b/img.png\n"
        "index 1..2 100644\n"
        "Binary files a/img.png and b/img.png differ\n";
    const auto f = parse_unified_diff(d);
    ASSERT_EQ(f.size(), 5u);
    EXPECT_EQ(f[0].old_path, "old name.txt");
    EXPECT_EQ(f[0].path, "new name.txt");
    EXPECT_EQ(f[0].old_ranges, R({{3, 3}}));
    EXPECT_EQ(f[0].new_ranges, R({{3, 3}}));

    EXPECT_EQ(f[1].old_path, "pure.txt");
    EXPECT_EQ(f[1].path, "moved.txt");
    EXPECT_TRUE(f[1].old_ranges.empty());

    EXPECT_EQ(f[2].old_path, "");
    EXPECT_EQ(f[2].path, "added.txt");
    EXPECT_TRUE(f[2].old_ranges.empty());
    EXPECT_EQ(f[2].new_ranges, R({{1, 2}}));

    EXPECT_EQ(f[3].old_path, "gone.txt");
    EXPECT_EQ(f[3].path, "gone.txt");
    EXPECT_EQ(f[3].old_ranges, R({{1, 2}}));
    EXPECT_TRUE(f[3].new_ranges.empty());

    EXPECT_TRUE(f[4].binary);
    EXPECT_TRUE(f[4].old_ranges.empty());
    EXPECT_TRUE(f[4].patch.empty());
}

TEST(DiffParser, DiffLinesInsideHunkAreContent) {
    // A removed line that itself reads "-- a" must not start a new file.
    const std::string d =
        "--- a/x\n"
        "+++ b/x\n"
        "@@ -1,2 +1,1 @@\n"
        "--- a\n"
        " keep\n";
    const auto f = parse_unified_diff(d);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].path, "x");
    EXPECT_EQ(f[0].old_ranges, R({{1, 1}}));
}

TEST(DiffParser, MalformedInput) {
    EXPECT_THROW(parse_unified_diff("diff --git a/x b/x\n@@ -a +b @@\n"), ParseError);
    EXPECT_THROW(parse_unified_diff("diff --git a/x b/x\n@@ -1,1 +1,1 @@\n?bad\n"), ParseError);
    EXPECT_TRUE(parse_unified_diff("").empty());
}

TEST(DiffParser, RemovedLineCount) {
    CodeChange c;
    c.files.resize(2);
    c.files[0].old_ranges = R({{1, 3}, {7, 7}});
    c.files[1].old_ranges = R({{10, 11}});
    EXPECT_EQ(c.removed_line_count(), 6);
}

TEST(Ranges, CollapsesRuns) {
    EXPECT_EQ(to_ranges({1, 2, 3, 5, 7, 8}), R({{1, 3}, {5, 5}, {7, 8}}));
    EXPECT_TRUE(to_ranges({}).empty());
}

TEST(ClosingReferences, KeywordsAndDeduplication) {
    EXPECT_EQ(closing_references("Fixes #3 and closes #4; resolves: #3. See #9. fixed #12"),
              (std::vector<std::string>{"3", "4", "12"}));
    EXPECT_TRUE(closing_references("Related to #3").empty());
}

TEST(MockTracker, ReadsFixtures) {
    MockTracker t(sut_fixture().tracker());
    const PrRecord pr = t.get_pr("7");
    EXPECT_EQ(pr.intent.title, "Restyle buttons");
    EXPECT_EQ(pr.resolved_issues, std::vector<std::string>{"3"});
    EXPECT_EQ(pr.head, "pr-7");
    EXPECT_EQ(format_timestamp(pr.intent.created_at), "2024-02-01T10:00:00Z");
    EXPECT_EQ(t.get_issue("3").title, "Restyle the Save button");
    EXPECT_THROW(t.get_pr("1"), NotFound);
    EXPECT_THROW(t.get_issue("../prs/7"), NotFound);
    const auto refs = t.list_cross_references(sut_fixture().rev("base~6"));
    ASSERT_EQ(refs.size(), 1u);
    EXPECT_EQ(refs[0], (CrossReference{CrossReference::Kind::pr, "4"}));
    EXPECT_TRUE(t.list_cross_references("deadbeef").empty());
    EXPECT_THROW(MockTracker("/nonexistent/tracker"), NotFound);
}

TEST(GitVcs, ResolvesAndReads) {
    const auto& fx = sut_fixture();
    GitVcsClient git(fx.repo());
    EXPECT_EQ(git.resolve("base"), fx.rev("base"));
    EXPECT_EQ(git.resolve_parent("base"), fx.rev("base~1"));
    EXPECT_THROW(git.resolve("no-such-branch"), NotFound);
    EXPECT_THROW(git.resolve_parent(fx.rev("base~9")), NotFound);
    const auto commits = git.commits_between("base", "pr-7");
    ASSERT_EQ(commits.size(), 2u);
    EXPECT_EQ(commits[0], fx.rev("pr-7~1"));
    const CommitInfo info = git.commit(commits[0]);
    EXPECT_EQ(info.subject, "Restyle buttons");
    EXPECT_EQ(info.body, "Fixes #3");
    EXPECT_EQ(format_timestamp(info.committed_at), "2024-02-01T09:00:00Z");
    EXPECT_THROW(git.blame("base", "missing.txt", R({{1, 1}})), BlameUnavailable);
}

TEST(GitVcs, BlameMatchesBruteForceForEveryLineAndRevision) {
    const auto& fx = sut_fixture();
    GitVcsClient git(fx.repo());
    testkit::GitReader reader(fx.repo());
    for (const auto& rev : reader.first_parent_chain("base")) {
        for (const std::string path : {"app/layout.json", "README.md", "build.sh"}) {
            const auto expected = reader.brute_blame(rev, path);
            const auto got = git.blame(rev, path, R({{1, static_cast<int>(expected.size())}}));
            ASSERT_EQ(got.size(), expected.size()) << rev << " " << path;
            for (std::size_t i = 0; i < got.size(); ++i) {
                EXPECT_EQ(got[i].line, static_cast<int>(i) + 1);
                EXPECT_EQ(got[i].commit, expected[i]) << rev << " " << path << ":" << i + 1;
            }
        }
    }
}

TEST(FetchChangeContext, RegressedPullRequest) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    const ChangeContext ctx = fetch_change_context("7", tracker, git);

    EXPECT_EQ(ctx.pr_id, "7");
    EXPECT_EQ(ctx.pre_revision, fx.rev("base"));
    EXPECT_EQ(ctx.post_revision, fx.rev("pr-7"));
    ASSERT_EQ(ctx.resolved_issues.size(), 1u);
    EXPECT_EQ(ctx.resolved_issues[0].source_id, "3");
    EXPECT_EQ(ctx.code_change.commit_messages,
              (std::vector<std::string>{"Restyle buttons\n\nFixes #3", "Mention the new button colour in the README"}));

    ASSERT_EQ(ctx.code_change.files.size(), 2u);
    EXPECT_EQ(ctx.code_change.files[0].path, "README.md");
    EXPECT_EQ(ctx.code_change.files[0].old_ranges, R({{3, 3}}));
    EXPECT_EQ(ctx.code_change.files[1].path, "app/layout.json");
    EXPECT_EQ(ctx.code_change.files[1].old_ranges, R({{7, 8}, {10, 11}}));
    EXPECT_EQ(ctx.code_change.files[1].new_ranges, R({{7, 8}, {10, 11}}));

    // Email lines from #1 (2 lines); single-line ties ordered newest first.
    ASSERT_EQ(ctx.preceding.size(), 4u);
    EXPECT_EQ(ctx.preceding[0].intent.source_id, "1");
    EXPECT_EQ(ctx.preceding[0].overlap_lines, 2);
    EXPECT_EQ(ctx.preceding[1].intent.source_id, "commit:" + fx.rev("base~3").substr(0, 12));
    EXPECT_EQ(ctx.preceding[1].intent.title, "Update README");
    EXPECT_EQ(ctx.preceding[2].intent.source_id, "5");
    EXPECT_EQ(ctx.preceding[3].intent.source_id, "4");
    EXPECT_EQ(ctx.preceding[3].intent.title, "Save and cancel buttons");
    ASSERT_EQ(ctx.preceding[3].related.size(), 1u);
    EXPECT_EQ(ctx.preceding[3].related[0].source_id, "2");
    for (int i = 0; i < 4; ++i) EXPECT_EQ(ctx.preceding[i].rank, i + 1);
    for (int i = 1; i < 4; ++i) EXPECT_EQ(ctx.preceding[i].overlap_lines, 1);
    EXPECT_TRUE(ctx.warnings.empty());

    const ChangeContext back = nlohmann::json(ctx).get<ChangeContext>();
    EXPECT_EQ(back, ctx);
}

TEST(FetchChangeContext, CapsPrecedingList) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    FetchOptions opts;
    opts.max_preceding = 2;
    const auto ctx = fetch_change_context("7", tracker, git, opts);
    ASSERT_EQ(ctx.preceding.size(), 2u);
    EXPECT_EQ(ctx.preceding[1].rank, 2);
}

TEST(FetchChangeContext, AdditionsOnlyHasNoPrecedingIntents) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    const auto ctx = fetch_change_context("10", tracker, git);
    ASSERT_EQ(ctx.code_change.files.size(), 1u);
    EXPECT_TRUE(ctx.code_change.files[0].old_ranges.empty());
    EXPECT_EQ(ctx.code_change.files[0].new_ranges, R({{9, 9}}));
    EXPECT_TRUE(ctx.preceding.empty());
    EXPECT_TRUE(ctx.resolved_issues.empty());
}

TEST(FetchChangeContext, DetachedAndMissing) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    EXPECT_THROW(fetch_change_context("8", tracker, git), DetachedPr);
    EXPECT_THROW(fetch_change_context("9", tracker, git), DetachedPr);
    EXPECT_THROW(fetch_change_context("404", tracker, git), NotFound);
}

TEST(PrecedingIntents, CutoffDropsLaterIntents) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    CodeChange change;
    change.files = parse_unified_diff(git.diff("base", "pr-7"));
    PrecedingOptions o;
    o.pre_revision = fx.rev("base");
    o.cutoff = parse_timestamp("2024-01-06T00:00:00Z");
    std::vector<std::string> warnings;
    const auto p = compute_preceding_intents(change, git, tracker, o, &warnings);
    std::vector<std::string> ids;
    for (const auto& x : p) ids.push_back(x.intent.source_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"1", "5", "4"}));
    EXPECT_EQ(warnings.size(), 1u);
}

TEST(PrecedingIntents, UnblameableFileIsSkippedWithWarning) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    CodeChange change;
    FileChange ghost;
    ghost.path = ghost.old_path = "not/tracked.txt";
    ghost.old_ranges = R({{1, 2}});
    FileChange binary;
    binary.path = binary.old_path = "build.sh";
    binary.binary = true;
    binary.old_ranges = R({{1, 1}});
    change.files = {ghost, binary};
    FileChange readme;
    readme.path = readme.old_path = "README.md";
    readme.old_ranges = R({{1, 1}});
    change.files.push_back(readme);
    PrecedingOptions o;
    o.pre_revision = "base";
    std::vector<std::string> warnings;
    const auto p = compute_preceding_intents(change, git, tracker, o, &warnings);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0].intent.title, "Initial profile editor");
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("not/tracked.txt"), std::string::npos);
}

TEST(PrecedingIntents, MatchesBruteForceOverAllRevisionPairs) {
    const auto& fx = sut_fixture();
    MockTracker tracker(fx.tracker());
    GitVcsClient git(fx.repo());
    testkit::GitReader reader(fx.repo());
    auto chain = reader.first_parent_chain("base");
    chain.push_back(fx.rev("pr-7"));
    chain.push_back(fx.rev("pr-12"));
    chain.push_back(fx.rev("pr-10"));
    int compared = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = i + 1; j < chain.size(); ++j) {
            CodeChange change;
            change.files = parse_unified_diff(git.diff(chain[i], chain[j]));
            PrecedingOptions o;
            o.pre_revision = chain[i];
            std::vector<Ranked> got;
            for (const auto& p : compute_preceding_intents(change, git, tracker, o))
                got.push_back({p.intent.source_id, p.overlap_lines, p.rank});
            EXPECT_EQ(got, brute_preceding(reader, chain[i], chain[j])) << i << ".." << j;
            ++compared;
        }
    }
    EXPECT_EQ(compared, 75);
}

// ---------------------------------------------------------------------------

namespace {

class FakeHttpTracker : public ::testing::Test {
protected:
    void SetUp() override {
        server_.Get("/api/repos/acme/app/pulls/7", [this](const httplib::Request& req, httplib::Response& res) {
            auth_seen_ = req.get_header_value("Authorization");
            res.set_content(R"({"number": 7, "title": "Restyle", "body": "Fixes #3\r\nand #4", "created_at": "2024-02-01T10:00:00Z",
                "head": {"sha": "abc123"}, "base": {"ref": "main"}, "state": "closed", "merged_at": "2024-02-02T00:00:00Z", "draft": false})",
                            "application/json");
        });
        server_.Get("/api/repos/acme/app/pulls/7/commits", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"([{"sha": "c1"}, {"sha": "c2"}])", "application/json");
        });
        server_.Get("/api/repos/acme/app/pulls/8", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"number": 8, "title": "WIP", "body": null, "created_at": "2024-02-01T10:00:00Z",
                "head": {"sha": "d"}, "base": {"ref": "main"}, "state": "open", "merged_at": null, "draft": true})",
                            "application/json");
        });
        server_.Get("/api/repos/acme/app/pulls/8/commits", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("[]", "application/json");
        });
        server_.Get("/api/repos/acme/app/issues/3", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"number": 3, "title": "Restyle Save", "body": "Make it green", "created_at": "2024-01-20T08:00:00Z"})",
                            "application/json");
        });
        server_.Get("/api/repos/acme/app/issues/5", [this](const httplib::Request&, httplib::Response& res) {
            if (++flaky_calls_ < 3) {
                res.status = 503;
                return;
            }
            res.set_content(R"({"number": 5, "title": "Flaky", "body": "", "created_at": "2024-01-01T00:00:00Z"})",
                            "application/json");
        });
        server_.Get("/api/repos/acme/app/issues/6", [](const httplib::Request&, httplib::Response& res) { res.status = 502; });
        server_.Get("/api/repos/acme/app/commits/c1/pulls", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"([{"number": 7}])", "application/json");
        });
        server_.Get("/bz/rest/bug/42", [this](const httplib::Request& req, httplib::Response& res) {
            auth_seen_ = req.get_header_value("X-BUGZILLA-API-KEY");
            res.set_content(R"({"bugs": [{"id": 42, "summary": "Crash on save", "creation_time": "2024-01-02T03:04:05Z"}]})",
                            "application/json");
        });
        server_.Get("/bz/rest/bug/42/comment", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"bugs": {"42": {"comments": [{"text": "Steps: click save"}, {"text": "later"}]}}})",
                            "application/json");
        });
        server_.Get("/bz/rest/bug/43", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"error": true, "code": 101, "message": "Bug #43 does not exist."})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        setenv("RIPPLE_TEST_TRACKER_TOKEN", "s3cret", 1);
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
    }
    HttpTrackerOptions options(const std::string& prefix) const {
        HttpTrackerOptions o;
        o.endpoint = "http://127.0.0.1:" + std::to_string(port_) + prefix;
        o.token_env = "RIPPLE_TEST_TRACKER_TOKEN";
        o.backoff_initial_ms = 1;
        o.timeout_s = 5;
        return o;
    }

    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    int flaky_calls_ = 0;
    std::string auth_seen_;
};

}  // namespace

TEST_F(FakeHttpTracker, GitHubPullRequestAndIssues) {
    GitHubTracker gh("acme/app", options("/api"));
    const PrRecord pr = gh.get_pr("7");
    EXPECT_EQ(auth_seen_, "Bearer s3cret");
    EXPECT_EQ(pr.id, "7");
    EXPECT_EQ(pr.head, "abc123");
    EXPECT_EQ(pr.base, "main");
    EXPECT_EQ(pr.state, "merged");
    EXPECT_EQ(pr.commits, (std::vector<std::string>{"c1", "c2"}));
    EXPECT_EQ(pr.resolved_issues, std::vector<std::string>{"3"});
    EXPECT_EQ(gh.get_pr("8").state, "draft");
    EXPECT_EQ(gh.get_issue("3").description, "Make it green");
    EXPECT_THROW(gh.get_issue("404"), NotFound);
    EXPECT_EQ(gh.list_cross_references("c1"), (std::vector<CrossReference>{{CrossReference::Kind::pr, "7"}}));
    EXPECT_TRUE(gh.list_cross_references("zz").empty());
}

TEST_F(FakeHttpTracker, GitHubRetriesThenGivesUp) {
    GitHubTracker gh("acme/app", options("/api"));
    EXPECT_EQ(gh.get_issue("5").title, "Flaky");
    EXPECT_EQ(flaky_calls_, 3);
    try {
        gh.get_issue("6");
        FAIL() << "expected NetworkError";
    } catch (const NetworkError& e) {
        EXPECT_EQ(e.attempts(), 3);
    }
    HttpTrackerOptions dead = options("/api");
    dead.endpoint = "http://127.0.0.1:1";
    dead.max_attempts = 2;
    try {
        GitHubTracker("acme/app", dead).get_issue("3");
        FAIL() << "expected NetworkError";
    } catch (const NetworkError& e) {
        EXPECT_EQ(e.attempts(), 2);
    }
    EXPECT_THROW(GitHubTracker("noslash", options("/api")), ValidationError);
}

TEST_F(FakeHttpTracker, Bugzilla) {
    BugzillaTracker bz(options("/bz"));
    const ChangeIntent bug = bz.get_issue("42");
    EXPECT_EQ(auth_seen_, "s3cret");
    EXPECT_EQ(bug.source_id, "42");
    EXPECT_EQ(bug.title, "Crash on save");
    EXPECT_EQ(bug.description, "Steps: click save");
    EXPECT_EQ(format_timestamp(bug.created_at), "2024-01-02T03:04:05Z");
    EXPECT_THROW(bz.get_issue("43"), NotFound);
    EXPECT_THROW(bz.get_pr("42"), NotFound);
    EXPECT_TRUE(bz.list_cross_references("abc").empty());
}

TEST(MakeTracker, FollowsConfiguredKind) {
    Config c;
    c.sut.tracker.kind = TrackerKind::mock;
    c.sut.tracker.location = sut_fixture().tracker().string();
    EXPECT_NE(dynamic_cast<MockTracker*>(make_tracker(c).get()), nullptr);
    c.sut.tracker.kind = TrackerKind::github;
    c.sut.tracker.location = "acme/app";
    EXPECT_NE(dynamic_cast<GitHubTracker*>(make_tracker(c).get()), nullptr);
    c.sut.tracker.kind = TrackerKind::bugzilla;
    c.sut.tracker.endpoint = "https://bugs.example.org";
    EXPECT_NE(dynamic_cast<BugzillaTracker*>(make_tracker(c).get()), nullptr);
}
