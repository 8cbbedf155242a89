#include "ripple/change_context.hpp"
#include "ripple/error.hpp"
#include "ripple/hash.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <thread>

namespace ripple::change {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : std::to_string(v.get<long long>()); }

std::string string_or_empty(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return {};
    return j[key].get<std::string>();
}

ChangeIntent issue_from_fixture(const json& j, const std::string& fallback_id) {
    ChangeIntent i;
    i.source_id = j.contains("id") ? id_string(j["id"]) : fallback_id;
    i.title = string_or_empty(j, "title");
    i.description = string_or_empty(j, "description");
    i.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    return i;
}

bool safe_id(const std::string& id) {
    return !id.empty() && id.find_first_of("/\\") == std::string::npos && id != "." && id != "..";
}

}  // namespace

MockTracker::MockTracker(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) throw NotFound("tracker fixture directory " + dir_.string() + " not found");
    const auto xref = dir_ / "cross_references.json";
    if (!std::filesystem::exists(xref)) return;
    const json j = read_json(xref);
    for (const auto& [commit, refs] : j.items()) {
        auto& list = xrefs_[commit];
        for (const auto& r : refs) {
            const std::string kind = r.at("kind").get<std::string>();
            if (kind != "pr" && kind != "issue") throw ParseError("cross reference kind must be pr or issue");
            list.push_back({kind == "pr" ? CrossReference::Kind::pr : CrossReference::Kind::issue, id_string(r.at("id"))});
        }
    }
}

PrRecord MockTracker::get_pr(const std::string& id) {
    const auto path = dir_ / "prs" / (id + ".json");
    if (!safe_id(id) || !std::filesystem::exists(path)) throw NotFound("no pull request " + id);
    const json j = read_json(path);
    PrRecord pr;
    pr.intent = issue_from_fixture(j, id);
    pr.id = pr.intent.source_id;
    if (j.contains("resolved_issues")) {
        for (const auto& v : j["resolved_issues"]) pr.resolved_issues.push_back(id_string(v));
    } else {
        pr.resolved_issues = closing_references(pr.intent.description);
    }
    pr.head = string_or_empty(j, "head");
    pr.base = string_or_empty(j, "base");
    if (j.contains("commits")) pr.commits = j["commits"].get<std::vector<std::string>>();
    if (j.contains("state")) pr.state = j["state"].get<std::string>();
    return pr;
}

ChangeIntent MockTracker::get_issue(const std::string& id) {
    const auto path = dir_ / "issues" / (id + ".json");
    if (!safe_id(id) || !std::filesystem::exists(path)) throw NotFound("no issue " + id);
    return issue_from_fixture(read_json(path), id);
}

std::vector<CrossReference> MockTracker::list_cross_references(const std::string& commit) {
    if (auto it = xrefs_.find(commit); it != xrefs_.end()) return it->second;
    // Fixtures may key by abbreviated id.
    for (const auto& [key, refs] : xrefs_)
        if (key.size() >= 7 && commit.rfind(key, 0) == 0) return refs;
    return {};
}

// ---------------------------------------------------------------------------

namespace {

struct Origin {
    std::string origin;
    std::string prefix;
};

Origin split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint", "'" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    Origin o{url.substr(0, path_start), path_start == std::string::npos ? std::string{} : url.substr(path_start)};
    while (!o.prefix.empty() && o.prefix.back() == '/') o.prefix.pop_back();
    return o;
}

json http_get(const HttpTrackerOptions& opts, const std::string& path, const httplib::Headers& headers) {
    const Origin o = split_url(opts.endpoint);
    std::string last_error;
    const int attempts = std::max(1, opts.max_attempts);
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        if (attempt > 1)
            std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long>(opts.backoff_initial_ms) << (attempt - 2)));
        httplib::Client client(o.origin);
        client.set_connection_timeout(opts.timeout_s, 0);
        client.set_read_timeout(opts.timeout_s, 0);
        const auto res = client.Get(o.prefix + path, headers);
        if (!res) {
            last_error = "GET " + path + ": " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 404) throw NotFound("GET " + path + ": not found");
        if (res->status == 429 || res->status >= 500) {
            last_error = "GET " + path + ": HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw NetworkError("GET " + path + ": HTTP " + std::to_string(res->status) + " " + res->body.substr(0, 200),
                               attempt);
        try {
            return json::parse(res->body);
        } catch (const json::parse_error& e) {
            throw ParseError("GET " + path + ": " + e.what());
        }
    }
    throw NetworkError(last_error, attempts);
}

std::string token_from(const std::string& env) {
    if (env.empty()) return {};
    const char* v = std::getenv(env.c_str());
    return v ? v : "";
}

}  // namespace

GitHubTracker::GitHubTracker(std::string repo, HttpTrackerOptions options)
    : repo_(std::move(repo)), options_(std::move(options)) {
    if (options_.endpoint.empty()) options_.endpoint = "https://api.github.com";
    if (repo_.find('/') == std::string::npos) throw ValidationError("location", "expected owner/name, got '" + repo_ + "'");
}

json GitHubTracker::get(const std::string& path) {
    httplib::Headers h{{"Accept", "application/vnd.github+json"}, {"User-Agent", "ripple"}};
    if (const auto token = token_from(options_.token_env); !token.empty()) h.emplace("Authorization", "Bearer " + token);
    return http_get(options_, path, h);
}

PrRecord GitHubTracker::get_pr(const std::string& id) {
    const json j = get("/repos/" + repo_ + "/pulls/" + id);
    PrRecord pr;
    pr.id = id_string(j.at("number"));
    pr.intent = {pr.id, string_or_empty(j, "title"), string_or_empty(j, "body"),
                 parse_timestamp(j.at("created_at").get<std::string>())};
    pr.resolved_issues = closing_references(pr.intent.description);
    pr.head = j.at("head").at("sha").get<std::string>();
    pr.base = j.at("base").at("ref").get<std::string>();
    if (j.value("draft", false)) pr.state = "draft";
    else if (j.contains("merged_at") && !j["merged_at"].is_null()) pr.state = "merged";
    else pr.state = string_or_empty(j, "state");
    for (const auto& c : get("/repos/" + repo_ + "/pulls/" + id + "/commits")) pr.commits.push_back(c.at("sha"));
    return pr;
}

ChangeIntent GitHubTracker::get_issue(const std::string& id) {
    const json j = get("/repos/" + repo_ + "/issues/" + id);
    return {id_string(j.at("number")), string_or_empty(j, "title"), string_or_empty(j, "body"),
            parse_timestamp(j.at("created_at").get<std::string>())};
}

std::vector<CrossReference> GitHubTracker::list_cross_references(const std::string& commit) {
    std::vector<CrossReference> out;
    try {
        for (const auto& p : get("/repos/" + repo_ + "/commits/" + commit + "/pulls"))
            out.push_back({CrossReference::Kind::pr, id_string(p.at("number"))});
    } catch (const NotFound&) {
    }
    return out;
}

BugzillaTracker::BugzillaTracker(HttpTrackerOptions options) : options_(std::move(options)) {
    if (options_.endpoint.empty()) throw ValidationError("endpoint", "bugzilla tracker needs an endpoint");
}

json BugzillaTracker::get(const std::string& path) {
    httplib::Headers h{{"Accept", "application/json"}};
    if (const auto token = token_from(options_.token_env); !token.empty()) h.emplace("X-BUGZILLA-API-KEY", token);
    json j = http_get(options_, path, h);
    if (j.is_object() && j.value("error", false)) {
        // 101/102: bug does not exist or is inaccessible.
        const int code = j.value("code", 0);
        if (code == 101 || code == 102) throw NotFound("GET " + path + ": " + j.value("message", std::string{}));
        throw NetworkError("GET " + path + ": " + j.value("message", std::string{"bugzilla error"}), 1);
    }
    return j;
}

PrRecord BugzillaTracker::get_pr(const std::string& id) {
    throw NotFound("bugzilla has no pull request " + id);
}

ChangeIntent BugzillaTracker::get_issue(const std::string& id) {
    const json bug = get("/rest/bug/" + id).at("bugs").at(0);
    ChangeIntent i{id_string(bug.at("id")), string_or_empty(bug, "summary"), {},
                   parse_timestamp(bug.at("creation_time").get<std::string>())};
    const json comments = get("/rest/bug/" + id + "/comment");
    const auto& list = comments.at("bugs").at(i.source_id).at("comments");
    if (!list.empty()) i.description = string_or_empty(list.at(0), "text");
    return i;
}

std::vector<CrossReference> BugzillaTracker::list_cross_references(const std::string&) { return {}; }

std::unique_ptr<IssueTrackerClient> make_tracker(const Config& config) {
    const TrackerConfig& t = config.sut.tracker;
    HttpTrackerOptions opts{t.endpoint, t.token_env, config.llm.max_attempts, config.llm.backoff_initial_ms, 30};
    switch (t.kind) {
        case TrackerKind::mock: return std::make_unique<MockTracker>(t.location);
        case TrackerKind::github: return std::make_unique<GitHubTracker>(t.location, opts);
        case TrackerKind::bugzilla: return std::make_unique<BugzillaTracker>(opts);
    }
    throw ValidationError("kind", "unknown tracker kind");
}

}  // namespace ripple::change
