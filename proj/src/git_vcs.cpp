#include "ripple/change_context.hpp"
#include "ripple/error.hpp"
#include "ripple/process.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace ripple::change {

GitVcsClient::GitVcsClient(std::filesystem::path repo, std::string git) : repo_(std::move(repo)), git_(std::move(git)) {
    if (!std::filesystem::exists(repo_)) throw NotFound("repository " + repo_.string() + " does not exist");
}

std::string GitVcsClient::run(const std::vector<std::string>& args) {
    std::vector<std::string> argv{git_, "-C", repo_.string()};
    argv.insert(argv.end(), args.begin(), args.end());
    ProcessOptions opts;
    opts.env = {{"GIT_CONFIG_NOSYSTEM", "1"}, {"LC_ALL", "C"}, {"GIT_PAGER", "cat"}};
    const ProcessResult r = run_process(argv, opts);
    if (!r.ok()) {
        std::string cmd;
        for (const auto& a : args) cmd += " " + a;
        throw NotFound("git" + cmd + " failed: " + r.err.substr(0, 400));
    }
    return r.out;
}

namespace {
std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}
}  // namespace

std::string GitVcsClient::resolve(const std::string& revision) {
    return trim(run({"rev-parse", "--verify", "--quiet", revision + "^{commit}"}));
}

std::string GitVcsClient::resolve_parent(const std::string& revision) {
    return trim(run({"rev-parse", "--verify", "--quiet", revision + "^1"}));
}

std::vector<std::string> GitVcsClient::commits_between(const std::string& from, const std::string& to) {
    std::istringstream in(run({"rev-list", "--reverse", from + ".." + to}));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

CommitInfo GitVcsClient::commit(const std::string& revision) {
    const std::string out = run({"log", "-1", "--no-color", "--format=%H%x00%cI%x00%s%x00%b", revision});
    std::vector<std::string> fields;
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto nul = out.find('\0', pos);
        if (nul == std::string::npos) throw ParseError("unexpected git log output for " + revision);
        fields.push_back(out.substr(pos, nul - pos));
        pos = nul + 1;
    }
    CommitInfo info;
    info.id = fields[0];
    info.committed_at = parse_timestamp(fields[1]);
    info.subject = fields[2];
    info.body = trim(out.substr(pos));
    return info;
}

std::string GitVcsClient::diff(const std::string& from, const std::string& to) {
    return run({"diff", "-M", "--no-color", "--no-ext-diff", "--full-index", from, to});
}

std::vector<BlameEntry> GitVcsClient::blame(const std::string& revision, const std::string& path,
                                            const std::vector<LineRange>& ranges) {
    if (ranges.empty()) return {};
    std::vector<std::string> args{"blame", "--porcelain"};
    for (const auto& r : ranges) args.push_back("-L" + std::to_string(r.start) + "," + std::to_string(r.end));
    args.push_back(revision);
    args.push_back("--");
    args.push_back(path);
    std::string out;
    try {
        out = run(args);
    } catch (const NotFound& e) {
        throw BlameUnavailable(path + " at " + revision + ": " + e.what());
    }

    // Porcelain: "<sha> <orig> <final> [<count>]" headers, metadata lines,
    // then one tab-prefixed content line per blamed line.
    std::vector<BlameEntry> entries;
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '\t') continue;
        const auto sp1 = line.find(' ');
        if (sp1 != 40 && sp1 != 64) continue;
        const std::string sha = line.substr(0, sp1);
        if (sha.find_first_not_of("0123456789abcdef") != std::string::npos) continue;
        std::istringstream fields(line.substr(sp1 + 1));
        int orig = 0, final_line = 0;
        if (!(fields >> orig >> final_line)) continue;
        entries.push_back({final_line, sha});
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
    return entries;
}

}  // namespace ripple::change
