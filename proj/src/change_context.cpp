#include "ripple/change_context.hpp"

#include "ripple/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <regex>
#include <set>
#include <sstream>

namespace ripple::change {

using nlohmann::json;

long CodeChange::removed_line_count() const {
    long n = 0;
    for (const auto& f : files)
        for (const auto& r : f.old_ranges) n += r.length();
    return n;
}

std::vector<LineRange> to_ranges(const std::vector<int>& lines) {
    std::vector<LineRange> out;
    for (int l : lines) {
        if (!out.empty() && out.back().end + 1 == l) out.back().end = l;
        else out.push_back({l, l});
    }
    return out;
}

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

// "a/path" -> "path"; handles git's C-style quoting of unusual names.
std::string strip_prefix(std::string p) {
    if (p.size() >= 2 && p.front() == '"' && p.back() == '"') {
        std::string out;
        for (std::size_t i = 1; i + 1 < p.size(); ++i) {
            if (p[i] == '\\' && i + 2 < p.size()) {
                const char c = p[++i];
                out += c == 'n' ? '\n' : c == 't' ? '\t' : c;
            } else {
                out += p[i];
            }
        }
        p = out;
    }
    if (const auto tab = p.find('\t'); tab != std::string::npos) p.resize(tab);
    if (p == "/dev/null") return {};
    if (starts_with(p, "a/") || starts_with(p, "b/")) return p.substr(2);
    return p;
}

struct FileBuilder {
    FileChange file;
    std::vector<int> removed, added;
    bool have_header_paths = false;

    FileChange finish() {
        file.old_ranges = to_ranges(removed);
        file.new_ranges = to_ranges(added);
        while (!file.patch.empty() && file.patch.back() == '\n' && file.patch.size() >= 2 &&
               file.patch[file.patch.size() - 2] == '\n')
            file.patch.pop_back();
        if (file.binary) {
            file.patch.clear();
            file.old_ranges.clear();
            file.new_ranges.clear();
        }
        return std::move(file);
    }
};

}  // namespace

std::vector<FileChange> parse_unified_diff(const std::string& text) {
    std::vector<FileChange> files;
    std::optional<FileBuilder> cur;
    int old_line = 0, new_line = 0, old_left = 0, new_left = 0;
    static const std::regex hunk_re(R"(^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@.*$)");

    auto flush = [&] {
        if (cur) files.push_back(cur->finish());
        cur.reset();
        old_left = new_left = 0;
    };

    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const bool in_hunk = old_left > 0 || new_left > 0;

        if (!in_hunk && starts_with(line, "diff --git ")) {
            flush();
            cur.emplace();
            // Paths from "diff --git a/x b/y"; refined by ---/+++ or rename lines.
            const std::string rest = line.substr(11);
            const auto split = rest.find(" b/");
            if (split != std::string::npos) {
                cur->file.old_path = strip_prefix(rest.substr(0, split));
                cur->file.path = strip_prefix(rest.substr(split + 1));
            }
            cur->file.patch += line + "\n";
            continue;
        }
        if (!in_hunk && starts_with(line, "--- ") && (!cur || cur->have_header_paths)) {
            // A plain unified diff without "diff --git" headers.
            std::streampos mark = in.tellg();
            std::string next;
            if (std::getline(in, next) && starts_with(next, "+++ ")) {
                flush();
                cur.emplace();
                cur->file.old_path = strip_prefix(line.substr(4));
                cur->file.path = strip_prefix(next.substr(4));
                cur->have_header_paths = true;
                cur->file.patch += line + "\n" + next + "\n";
                continue;
            }
            in.clear();
            in.seekg(mark);
        }
        if (!cur) continue;

        if (!in_hunk) {
            if (starts_with(line, "--- ")) {
                cur->file.old_path = strip_prefix(line.substr(4));
            } else if (starts_with(line, "+++ ")) {
                cur->file.path = strip_prefix(line.substr(4));
                cur->have_header_paths = true;
            } else if (starts_with(line, "rename from ")) {
                cur->file.old_path = line.substr(12);
            } else if (starts_with(line, "rename to ")) {
                cur->file.path = line.substr(10);
            } else if (starts_with(line, "new file mode")) {
                cur->file.old_path.clear();
            } else if (starts_with(line, "Binary files ") || starts_with(line, "GIT binary patch")) {
                cur->file.binary = true;
            } else if (starts_with(line, "@@")) {
                std::smatch m;
                if (!std::regex_match(line, m, hunk_re)) throw ParseError("malformed hunk header: " + line);
                old_line = std::stoi(m[1]);
                old_left = m[2].matched ? std::stoi(m[2]) : 1;
                new_line = std::stoi(m[3]);
                new_left = m[4].matched ? std::stoi(m[4]) : 1;
            }
            cur->file.patch += line + "\n";
            continue;
        }

        cur->file.patch += line + "\n";
        if (line.empty() || line[0] == ' ') {
            ++old_line;
            ++new_line;
            --old_left;
            --new_left;
        } else if (line[0] == '-') {
            cur->removed.push_back(old_line++);
            --old_left;
        } else if (line[0] == '+') {
            cur->added.push_back(new_line++);
            --new_left;
        } else if (line[0] == '\\') {
            // "\ No newline at end of file"
        } else {
            throw ParseError("unexpected line inside hunk: " + line);
        }
        if (old_left < 0 || new_left < 0) throw ParseError("hunk longer than its header declares");
    }
    flush();
    // Deleted files report "+++ /dev/null"; keep the old path as the identity.
    for (auto& f : files)
        if (f.path.empty()) f.path = f.old_path;
    return files;
}

std::vector<std::string> closing_references(const std::string& text) {
    static const std::regex re(R"((?:close[sd]?|fix(?:e[sd])?|resolve[sd]?)\s*:?\s+#(\d+))", std::regex::icase);
    std::vector<std::string> out;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        const std::string id = (*it)[1];
        if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
    }
    return out;
}

namespace {

struct Mapped {
    std::string key;
    ChangeIntent intent;
    std::vector<ChangeIntent> related;
};

class IntentResolver {
public:
    IntentResolver(VcsClient& repo, IssueTrackerClient& tracker, const std::string& pattern)
        : repo_(repo), tracker_(tracker), pattern_(pattern) {}

    const Mapped& of_commit(const std::string& commit) {
        if (auto it = cache_.find(commit); it != cache_.end()) return it->second;
        return cache_.emplace(commit, resolve(commit)).first->second;
    }

private:
    std::optional<Mapped> from_pr(const std::string& id) {
        try {
            const PrRecord pr = tracker_.get_pr(id);
            Mapped m{"pr:" + pr.id, pr.intent, {}};
            for (const auto& issue : pr.resolved_issues) {
                try {
                    m.related.push_back(tracker_.get_issue(issue));
                } catch (const NotFound&) {
                    spdlog::warn("PR {} resolves unknown issue {}", pr.id, issue);
                }
            }
            return m;
        } catch (const NotFound&) {
            return std::nullopt;
        }
    }

    std::optional<Mapped> from_issue(const std::string& id) {
        try {
            ChangeIntent i = tracker_.get_issue(id);
            return Mapped{"issue:" + i.source_id, std::move(i), {}};
        } catch (const NotFound&) {
            return std::nullopt;
        }
    }

    Mapped resolve(const std::string& commit) {
        for (const auto& ref : tracker_.list_cross_references(commit)) {
            auto m = ref.kind == CrossReference::Kind::pr ? from_pr(ref.id) : from_issue(ref.id);
            if (m) return *m;
        }
        const CommitInfo info = repo_.commit(commit);
        const std::string message = info.subject + "\n" + info.body;
        for (auto it = std::sregex_iterator(message.begin(), message.end(), pattern_); it != std::sregex_iterator();
             ++it) {
            const std::string key = (*it)[1];
            if (auto m = from_pr(key)) return *m;
            if (auto m = from_issue(key)) return *m;
        }
        // No traceability: the commit stands for its own intent.
        return Mapped{"commit:" + info.id, {"commit:" + info.id.substr(0, 12), info.subject, info.body, info.committed_at},
                      {}};
    }

    VcsClient& repo_;
    IssueTrackerClient& tracker_;
    std::regex pattern_;
    std::map<std::string, Mapped> cache_;
};

}  // namespace

std::vector<PrecedingChangeIntent> compute_preceding_intents(const CodeChange& code_change, VcsClient& repo,
                                                             IssueTrackerClient& tracker,
                                                             const PrecedingOptions& options,
                                                             std::vector<std::string>* warnings) {
    IntentResolver resolver(repo, tracker, options.commit_issue_pattern);
    std::map<std::string, PrecedingChangeIntent> by_key;

    for (const auto& file : code_change.files) {
        if (file.binary || file.old_ranges.empty() || file.old_path.empty()) continue;
        std::vector<BlameEntry> entries;
        try {
            entries = repo.blame(options.pre_revision, file.old_path, file.old_ranges);
        } catch (const BlameUnavailable& e) {
            spdlog::warn("{}", e.what());
            if (warnings) warnings->push_back(std::string("blame unavailable: ") + e.what());
            continue;
        }
        for (const auto& entry : entries) {
            const Mapped& m = resolver.of_commit(entry.commit);
            auto& slot = by_key[m.key];
            if (slot.overlap_lines == 0) {
                slot.intent = m.intent;
                slot.related = m.related;
            }
            ++slot.overlap_lines;
        }
    }

    std::vector<PrecedingChangeIntent> out;
    for (auto& [key, p] : by_key) {
        if (options.cutoff && p.intent.created_at >= *options.cutoff) {
            if (warnings)
                warnings->push_back("dropped preceding intent " + p.intent.source_id + " created after the PR");
            continue;
        }
        out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), [](const PrecedingChangeIntent& a, const PrecedingChangeIntent& b) {
        if (a.overlap_lines != b.overlap_lines) return a.overlap_lines > b.overlap_lines;
        if (a.intent.created_at != b.intent.created_at) return a.intent.created_at > b.intent.created_at;
        return a.intent.source_id < b.intent.source_id;
    });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].rank = static_cast<int>(i) + 1;
    return out;
}

ChangeContext fetch_change_context(const std::string& pr_id, IssueTrackerClient& tracker, VcsClient& repo,
                                   const FetchOptions& options) {
    const PrRecord pr = tracker.get_pr(pr_id);
    if (pr.state == "draft") throw DetachedPr("PR " + pr_id + " is a draft");
    if (pr.head.empty()) throw DetachedPr("PR " + pr_id + " has no head revision");

    ChangeContext ctx;
    ctx.pr_id = pr.id;
    ctx.pr_intent = pr.intent;
    for (const auto& issue : pr.resolved_issues) ctx.resolved_issues.push_back(tracker.get_issue(issue));

    try {
        ctx.post_revision = repo.resolve(pr.head);
    } catch (const NotFound&) {
        throw DetachedPr("head revision '" + pr.head + "' of PR " + pr_id + " is not in the repository");
    }
    std::vector<std::string> commits;
    if (!pr.commits.empty()) {
        for (const auto& c : pr.commits) commits.push_back(repo.resolve(c));
    } else if (!pr.base.empty()) {
        commits = repo.commits_between(pr.base, ctx.post_revision);
    }
    if (commits.empty()) throw DetachedPr("PR " + pr_id + " has no commits of its own");
    try {
        ctx.pre_revision = repo.resolve_parent(commits.front());
    } catch (const NotFound&) {
        throw DetachedPr("first commit of PR " + pr_id + " has no parent");
    }
    if (ctx.pre_revision == ctx.post_revision) throw DetachedPr("PR " + pr_id + " does not change its base");

    for (const auto& c : repo.commits_between(ctx.pre_revision, ctx.post_revision)) {
        const CommitInfo info = repo.commit(c);
        ctx.code_change.commit_messages.push_back(info.body.empty() ? info.subject : info.subject + "\n\n" + info.body);
    }
    ctx.code_change.files = parse_unified_diff(repo.diff(ctx.pre_revision, ctx.post_revision));

    PrecedingOptions po;
    po.pre_revision = ctx.pre_revision;
    po.commit_issue_pattern = options.commit_issue_pattern;
    po.cutoff = ctx.pr_intent.created_at;
    ctx.preceding = compute_preceding_intents(ctx.code_change, repo, tracker, po, &ctx.warnings);
    if (options.max_preceding >= 0 && ctx.preceding.size() > static_cast<std::size_t>(options.max_preceding))
        ctx.preceding.resize(static_cast<std::size_t>(options.max_preceding));
    return ctx;
}

// ---------------------------------------------------------------------------

void to_json(json& j, const ChangeIntent& v) {
    j = {{"source_id", v.source_id},
         {"title", v.title},
         {"description", v.description},
         {"created_at", format_timestamp(v.created_at)}};
}

void from_json(const json& j, ChangeIntent& v) {
    v.source_id = j.at("source_id").get<std::string>();
    v.title = j.value("title", std::string{});
    v.description = j.value("description", std::string{});
    v.created_at = parse_timestamp(j.at("created_at").get<std::string>());
}

void to_json(json& j, const FileChange& v) {
    json old_r = json::array(), new_r = json::array();
    for (const auto& r : v.old_ranges) old_r.push_back({r.start, r.end});
    for (const auto& r : v.new_ranges) new_r.push_back({r.start, r.end});
    j = {{"path", v.path},         {"old_path", v.old_path}, {"binary", v.binary},
         {"patch", v.patch},       {"changed_line_ranges", {{"old", old_r}, {"new", new_r}}}};
}

void from_json(const json& j, FileChange& v) {
    v.path = j.at("path").get<std::string>();
    v.old_path = j.value("old_path", std::string{});
    v.binary = j.value("binary", false);
    v.patch = j.value("patch", std::string{});
    v.old_ranges.clear();
    v.new_ranges.clear();
    for (const auto& r : j.at("changed_line_ranges").at("old")) v.old_ranges.push_back({r.at(0), r.at(1)});
    for (const auto& r : j.at("changed_line_ranges").at("new")) v.new_ranges.push_back({r.at(0), r.at(1)});
}

void to_json(json& j, const PrecedingChangeIntent& v) {
    j = {{"intent", v.intent}, {"related", v.related}, {"overlap_lines", v.overlap_lines}, {"rank", v.rank}};
}

void from_json(const json& j, PrecedingChangeIntent& v) {
    v.intent = j.at("intent").get<ChangeIntent>();
    v.related = j.value("related", std::vector<ChangeIntent>{});
    v.overlap_lines = j.at("overlap_lines").get<long>();
    v.rank = j.at("rank").get<int>();
}

void to_json(json& j, const ChangeContext& v) {
    j = {{"pr_id", v.pr_id},
         {"pr_intent", v.pr_intent},
         {"resolved_issues", v.resolved_issues},
         {"code_change", {{"commit_messages", v.code_change.commit_messages}, {"files", v.code_change.files}}},
         {"preceding", v.preceding},
         {"pre_revision", v.pre_revision},
         {"post_revision", v.post_revision},
         {"warnings", v.warnings}};
}

void from_json(const json& j, ChangeContext& v) {
    v.pr_id = j.at("pr_id").get<std::string>();
    v.pr_intent = j.at("pr_intent").get<ChangeIntent>();
    v.resolved_issues = j.at("resolved_issues").get<std::vector<ChangeIntent>>();
    v.code_change.commit_messages = j.at("code_change").at("commit_messages").get<std::vector<std::string>>();
    v.code_change.files = j.at("code_change").at("files").get<std::vector<FileChange>>();
    v.preceding = j.at("preceding").get<std::vector<PrecedingChangeIntent>>();
    v.pre_revision = j.at("pre_revision").get<std::string>();
    v.post_revision = j.at("post_revision").get<std::string>();
    v.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace ripple::change
