#include "ripple/config.hpp"

#include "ripple/error.hpp"

#include <spdlog/spdlog.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

extern char** environ;

namespace ripple {

namespace fs = std::filesystem;

std::string to_string(Role role) {
    switch (role) {
        case Role::generator: return "generator";
        case Role::executor: return "executor";
        case Role::detector: return "detector";
        case Role::filter: return "filter";
        case Role::classifier: return "classifier";
        case Role::embedding: return "embedding";
    }
    return "unknown";
}

Role role_from_string(const std::string& name) {
    for (Role r : kAllRoles)
        if (to_string(r) == name) return r;
    throw UnknownRole("unknown role '" + name + "'");
}

std::string to_string(TrackerKind kind) {
    switch (kind) {
        case TrackerKind::github: return "github";
        case TrackerKind::bugzilla: return "bugzilla";
        case TrackerKind::mock: return "mock";
    }
    return "mock";
}

const ModelRole& ModelRoles::at(Role role) const {
    if (auto it = roles.find(role); it != roles.end()) return it->second;
    if (role == Role::detector && has(Role::generator)) return roles.at(Role::generator);
    if (role == Role::classifier && has(Role::filter)) return roles.at(Role::filter);
    throw UnknownRole("no model configured for role '" + to_string(role) + "'");
}

ModelPrice Config::price_for(const std::string& model) const {
    auto it = pricing.find(model);
    return it == pricing.end() ? ModelPrice{} : it->second;
}

namespace {

// Reads one typed field, turning conversion failures into ValidationError.
class Section {
public:
    Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ValidationError(name_, "expected a mapping");
    }

    template <typename T>
    void read(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_ || node_.IsNull()) return;
        const YAML::Node v = node_[key];
        if (!v || v.IsNull()) return;
        try {
            out = v.as<T>();
        } catch (const YAML::Exception&) {
            throw ValidationError(key, "has the wrong type in section '" + name_ + "'");
        }
    }

    YAML::Node child(const std::string& key) {
        seen_.insert(key);
        if (!node_ || node_.IsNull()) return YAML::Node();
        return node_[key];
    }

    void reject_unknown() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ValidationError(key, "unknown key in section '" + name_ + "'");
        }
    }

private:
    YAML::Node node_;
    std::string name_;
    std::set<std::string> seen_;
};

bool is_remote(const std::string& location) {
    return location.find("://") != std::string::npos || location.rfind("git@", 0) == 0;
}

std::string anchor(const std::string& p, const fs::path& base) {
    if (p.empty() || is_remote(p)) return p;
    fs::path path(p);
    if (path.is_relative()) path = base / path;
    return path.lexically_normal().string();
}

DisplayGeometry parse_geometry(const YAML::Node& n) {
    DisplayGeometry g;
    if (!n || n.IsNull()) return g;
    if (n.IsMap()) {
        Section s(n, "display_geometry");
        s.read("width", g.width);
        s.read("height", g.height);
        s.reject_unknown();
        return g;
    }
    const auto text = n.as<std::string>();
    static const std::regex re(R"(^\s*(\d+)\s*[xX]\s*(\d+)\s*$)");
    std::smatch m;
    if (!std::regex_match(text, m, re)) throw ValidationError("display_geometry", "expected WIDTHxHEIGHT");
    g.width = std::stoi(m[1]);
    g.height = std::stoi(m[2]);
    return g;
}

TrackerKind parse_tracker_kind(const std::string& s) {
    if (s == "github") return TrackerKind::github;
    if (s == "bugzilla") return TrackerKind::bugzilla;
    if (s == "mock") return TrackerKind::mock;
    throw ValidationError("kind", "issue tracker kind must be github, bugzilla or mock");
}

Config from_node(const YAML::Node& root, const fs::path& base) {
    if (root && !root.IsNull() && !root.IsMap()) throw ValidationError("config", "top level must be a mapping");
    Config c;
    Section top(root, "top level");

    {
        Section s(top.child("sut"), "sut");
        auto& sut = c.sut;
        s.read("name", sut.name);
        s.read("repo_location", sut.repo_location);
        s.read("container_image_ref", sut.container_image_ref);
        s.read("build_command", sut.build_command);
        s.read("launch_command", sut.launch_command);
        s.read("settle_ms", sut.settle_ms);
        sut.display_geometry = parse_geometry(s.child("display_geometry"));
        Section t(s.child("issue_tracker"), "issue_tracker");
        std::string kind = to_string(sut.tracker.kind);
        t.read("kind", kind);
        sut.tracker.kind = parse_tracker_kind(kind);
        t.read("location", sut.tracker.location);
        t.read("endpoint", sut.tracker.endpoint);
        t.read("token_env", sut.tracker.token_env);
        t.read("commit_issue_pattern", sut.tracker.commit_issue_pattern);
        t.reject_unknown();
        s.reject_unknown();
        sut.repo_location = anchor(sut.repo_location, base);
        if (sut.tracker.kind == TrackerKind::mock) sut.tracker.location = anchor(sut.tracker.location, base);
    }
    {
        Section s(top.child("budgets"), "budgets");
        s.read("max_llm_turns_per_scenario", c.budgets.max_llm_turns_per_scenario);
        s.read("max_ui_instructions_per_scenario", c.budgets.max_ui_instructions_per_scenario);
        s.read("max_scenarios_per_pr", c.budgets.max_scenarios_per_pr);
        s.read("pixel_diff_threshold", c.budgets.pixel_diff_threshold);
        s.reject_unknown();
    }
    {
        const YAML::Node models = top.child("models");
        Section s(models, "models");
        for (Role r : kAllRoles) {
            const YAML::Node n = s.child(to_string(r));
            if (!n || n.IsNull()) continue;
            ModelRole m;
            if (n.IsScalar()) {
                m.model = n.as<std::string>();
            } else {
                Section ms(n, to_string(r));
                ms.read("model", m.model);
                ms.read("endpoint", m.endpoint);
                ms.read("api_key_env", m.api_key_env);
                ms.reject_unknown();
            }
            if (m.is_fake()) m.model = "fake:" + anchor(m.fake_script(), base);
            c.models.roles[r] = m;
        }
        s.reject_unknown();
    }
    if (const YAML::Node pricing = top.child("pricing"); pricing && !pricing.IsNull()) {
        if (!pricing.IsMap()) throw ValidationError("pricing", "expected a mapping");
        for (const auto& kv : pricing) {
            auto model = kv.first.as<std::string>();
            Section ps(kv.second, model);
            if (model.rfind("fake:", 0) == 0) model = "fake:" + anchor(model.substr(5), base);
            ModelPrice p;
            ps.read("input_per_mtok", p.input_per_mtok);
            ps.read("output_per_mtok", p.output_per_mtok);
            ps.read("per_image", p.per_image);
            ps.reject_unknown();
            c.pricing[model] = p;
        }
    }
    {
        Section s(top.child("diff"), "diff");
        s.read("dilation_radius", c.diff.dilation_radius);
        s.reject_unknown();
    }
    {
        Section s(top.child("skb"), "skb");
        s.read("chunk_tokens", c.skb.chunk_tokens);
        s.read("overlap_tokens", c.skb.overlap_tokens);
        s.read("timestamp_line_ratio", c.skb.timestamp_line_ratio);
        s.read("stop_keywords", c.skb.stop_keywords);
        s.read("max_queries", c.skb.max_queries);
        s.read("k", c.skb.k);
        s.read("embed_attempts", c.skb.embed_attempts);
        s.read("index_path", c.skb.index_path);
        s.reject_unknown();
        c.skb.index_path = anchor(c.skb.index_path, base);
    }
    {
        Section s(top.child("generator"), "generator");
        s.read("max_preceding_intents", c.generator.max_preceding_intents);
        s.read("complexity_step_limit", c.generator.complexity_step_limit);
        s.reject_unknown();
    }
    {
        Section s(top.child("executor"), "executor");
        std::string runtime = c.executor.runtime == RuntimeKind::local ? "local" : "docker";
        s.read("runtime", runtime);
        if (runtime == "local") c.executor.runtime = RuntimeKind::local;
        else if (runtime == "docker") c.executor.runtime = RuntimeKind::docker;
        else throw ValidationError("runtime", "must be local or docker");
        s.read("runtime_executable", c.executor.runtime_executable);
        s.read("driver_executable", c.executor.driver_executable);
        s.read("artifact_cache", c.executor.artifact_cache);
        s.reject_unknown();
        c.executor.artifact_cache = anchor(c.executor.artifact_cache, base);
    }
    {
        Section s(top.child("oracle"), "oracle");
        s.read("max_regions_per_prompt", c.oracle.max_regions_per_prompt);
        s.reject_unknown();
    }
    {
        Section s(top.child("llm"), "llm");
        s.read("max_attempts", c.llm.max_attempts);
        s.read("backoff_initial_ms", c.llm.backoff_initial_ms);
        s.read("timeout_s", c.llm.timeout_s);
        s.read("audit_log", c.llm.audit_log);
        s.reject_unknown();
    }
    {
        Section s(top.child("run"), "run");
        s.read("runs_dir", c.run.runs_dir);
        s.read("workers", c.run.workers);
        s.reject_unknown();
        c.run.runs_dir = anchor(c.run.runs_dir, base);
    }
    top.reject_unknown();
    return c;
}

std::vector<std::string> split_upper(const std::string& key) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : key) {
        if (ch == '_') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
        }
    }
    out.push_back(cur);
    return out;
}

// Finds the key path in `schema` spelled by `tokens`. Keys may themselves
// contain underscores, so every prefix split is tried.
bool resolve_path(const YAML::Node& schema, const std::vector<std::string>& tokens, std::size_t pos,
                  std::vector<std::string>& path, bool& is_list) {
    if (!schema.IsMap()) return false;
    for (const auto& kv : schema) {
        const auto key = kv.first.as<std::string>();
        const auto kt = split_upper(key);
        if (pos + kt.size() > tokens.size()) continue;
        if (!std::equal(kt.begin(), kt.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos))) continue;
        const std::size_t next = pos + kt.size();
        path.push_back(key);
        if (next == tokens.size() && !kv.second.IsMap()) {
            is_list = kv.second.IsSequence();
            return true;
        }
        if (next < tokens.size() && resolve_path(kv.second, tokens, next, path, is_list)) return true;
        path.pop_back();
    }
    return false;
}

void set_path(YAML::Node node, const std::vector<std::string>& path, std::size_t i, const YAML::Node& value) {
    if (i + 1 == path.size()) {
        node[path[i]] = value;
        return;
    }
    YAML::Node child = node[path[i]];
    if (child.IsScalar()) {
        // models.<role> may be a bare model id; promote it to a mapping.
        const auto model = child.as<std::string>();
        YAML::Node m(YAML::NodeType::Map);
        m["model"] = model;
        node[path[i]] = m;
        child = node[path[i]];
    }
    set_path(child, path, i + 1, value);
}

YAML::Node override_schema() {
    Config c;
    for (Role r : kAllRoles) c.models.roles[r] = {"m", "e", "k"};
    YAML::Node schema = YAML::Load(to_yaml(c));
    schema["sut"]["display_geometry"] = YAML::Node(YAML::NodeType::Map);
    schema["sut"]["display_geometry"]["width"] = 0;
    schema["sut"]["display_geometry"]["height"] = 0;
    schema.remove("pricing");
    return schema;
}

void apply_env(YAML::Node& root, const EnvMap& env) {
    if (env.empty()) return;
    const YAML::Node schema = override_schema();
    for (const auto& [name, value] : env) {
        if (name.rfind("RIPPLE_", 0) != 0) continue;
        const auto tokens = split_upper(name.substr(7));
        std::vector<std::string> path;
        bool is_list = false;
        if (!resolve_path(schema, tokens, 0, path, is_list)) {
            spdlog::debug("ignoring environment variable {}", name);
            continue;
        }
        YAML::Node v;
        if (is_list) {
            v = YAML::Node(YAML::NodeType::Sequence);
            std::stringstream ss(value);
            for (std::string item; std::getline(ss, item, ',');)
                if (!item.empty()) v.push_back(item);
        } else {
            v = YAML::Node(value);
        }
        if (path.size() >= 2 && path[0] == "sut" && path[1] == "display_geometry" && root["sut"] &&
            root["sut"]["display_geometry"] && root["sut"]["display_geometry"].IsScalar()) {
            const DisplayGeometry g = parse_geometry(root["sut"]["display_geometry"]);
            YAML::Node m(YAML::NodeType::Map);
            m["width"] = g.width;
            m["height"] = g.height;
            root["sut"]["display_geometry"] = m;
        }
        set_path(root, path, 0, v);
    }
}

void require_positive(const std::string& field, long long v) {
    if (v <= 0) throw ValidationError(field, "must be a positive integer, got " + std::to_string(v));
}

void require_range(const std::string& field, double v, double lo, double hi) {
    if (v < lo || v > hi) {
        std::ostringstream os;
        os << "must be within [" << lo << ", " << hi << "], got " << v;
        throw ValidationError(field, os.str());
    }
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

void validate(const Config& c) {
    if (c.sut.name.empty()) throw ValidationError("name", "SUT name is required");
    if (c.sut.repo_location.empty()) throw ValidationError("repo_location", "is required");
    if (c.sut.launch_command.empty()) throw ValidationError("launch_command", "is required");
    if (count_of(c.sut.build_command, "{revision}") != 1)
        throw ValidationError("build_command", "must contain exactly one {revision} placeholder");
    require_range("width", c.sut.display_geometry.width, 320, 8192);
    require_range("height", c.sut.display_geometry.height, 320, 8192);
    if (c.sut.settle_ms < 0) throw ValidationError("settle_ms", "must not be negative");
    if (c.sut.tracker.kind == TrackerKind::mock && c.sut.tracker.location.empty())
        throw ValidationError("location", "mock issue tracker needs a fixture directory");
    try {
        const std::regex re(c.sut.tracker.commit_issue_pattern);
        if (re.mark_count() < 1) throw ValidationError("commit_issue_pattern", "needs one capture group");
    } catch (const std::regex_error& e) {
        throw ValidationError("commit_issue_pattern", std::string("invalid pattern: ") + e.what());
    }

    require_positive("max_llm_turns_per_scenario", c.budgets.max_llm_turns_per_scenario);
    require_positive("max_ui_instructions_per_scenario", c.budgets.max_ui_instructions_per_scenario);
    require_positive("max_scenarios_per_pr", c.budgets.max_scenarios_per_pr);
    require_range("pixel_diff_threshold", c.budgets.pixel_diff_threshold, 0, 255);

    for (const auto& [role, m] : c.models.roles) {
        if (m.model.empty()) throw ValidationError(to_string(role), "model identifier is empty");
        if (m.is_fake() && m.fake_script().empty()) throw ValidationError(to_string(role), "fake: needs a script path");
    }
    for (const auto& [model, p] : c.pricing) {
        if (p.input_per_mtok < 0 || p.output_per_mtok < 0 || p.per_image < 0)
            throw ValidationError(model, "prices must not be negative");
    }

    if (c.diff.dilation_radius < 0) throw ValidationError("dilation_radius", "must not be negative");
    require_positive("chunk_tokens", c.skb.chunk_tokens);
    if (c.skb.overlap_tokens < 0 || c.skb.overlap_tokens >= c.skb.chunk_tokens)
        throw ValidationError("overlap_tokens", "must satisfy 0 <= overlap_tokens < chunk_tokens");
    if (!(c.skb.timestamp_line_ratio > 0.0 && c.skb.timestamp_line_ratio <= 1.0))
        throw ValidationError("timestamp_line_ratio", "must be within (0, 1]");
    if (c.skb.max_queries < 0) throw ValidationError("max_queries", "must not be negative");
    require_positive("k", c.skb.k);
    require_positive("embed_attempts", c.skb.embed_attempts);
    if (c.generator.max_preceding_intents < 0) throw ValidationError("max_preceding_intents", "must not be negative");
    require_positive("complexity_step_limit", c.generator.complexity_step_limit);
    require_positive("max_regions_per_prompt", c.oracle.max_regions_per_prompt);
    require_positive("max_attempts", c.llm.max_attempts);
    if (c.llm.backoff_initial_ms < 0) throw ValidationError("backoff_initial_ms", "must not be negative");
    require_positive("timeout_s", c.llm.timeout_s);
    require_positive("workers", c.run.workers);
    if (c.run.runs_dir.empty()) throw ValidationError("runs_dir", "is required");
}

EnvMap ripple_environment() {
    EnvMap env;
    for (char** e = environ; e && *e; ++e) {
        const std::string kv(*e);
        if (kv.rfind("RIPPLE_", 0) != 0) continue;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        env[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return env;
}

Config load_config_text(const std::string& text, const fs::path& base_dir, const EnvMap& env) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ParseError(std::string("malformed configuration: ") + e.what());
    }
    if (!root || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ParseError("malformed configuration: top level must be a mapping");
    apply_env(root, env);
    Config c = from_node(root, base_dir);
    validate(c);
    return c;
}

Config load_config(const fs::path& path, const EnvMap& env) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read configuration file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const fs::path base = fs::absolute(path).parent_path();
    return load_config_text(ss.str(), base, env);
}

Config load_config(const fs::path& path) { return load_config(path, ripple_environment()); }

std::string to_yaml(const Config& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;

    out << YAML::Key << "sut" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.sut.name;
    out << YAML::Key << "repo_location" << YAML::Value << YAML::DoubleQuoted << c.sut.repo_location;
    out << YAML::Key << "container_image_ref" << YAML::Value << YAML::DoubleQuoted << c.sut.container_image_ref;
    out << YAML::Key << "build_command" << YAML::Value << YAML::DoubleQuoted << c.sut.build_command;
    out << YAML::Key << "launch_command" << YAML::Value << YAML::DoubleQuoted << c.sut.launch_command;
    out << YAML::Key << "display_geometry" << YAML::Value
        << (std::to_string(c.sut.display_geometry.width) + "x" + std::to_string(c.sut.display_geometry.height));
    out << YAML::Key << "settle_ms" << YAML::Value << c.sut.settle_ms;
    out << YAML::Key << "issue_tracker" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(c.sut.tracker.kind);
    out << YAML::Key << "location" << YAML::Value << YAML::DoubleQuoted << c.sut.tracker.location;
    out << YAML::Key << "endpoint" << YAML::Value << YAML::DoubleQuoted << c.sut.tracker.endpoint;
    out << YAML::Key << "token_env" << YAML::Value << YAML::DoubleQuoted << c.sut.tracker.token_env;
    out << YAML::Key << "commit_issue_pattern" << YAML::Value << YAML::DoubleQuoted
        << c.sut.tracker.commit_issue_pattern;
    out << YAML::EndMap << YAML::EndMap;

    out << YAML::Key << "budgets" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_llm_turns_per_scenario" << YAML::Value << c.budgets.max_llm_turns_per_scenario;
    out << YAML::Key << "max_ui_instructions_per_scenario" << YAML::Value
        << c.budgets.max_ui_instructions_per_scenario;
    out << YAML::Key << "max_scenarios_per_pr" << YAML::Value << c.budgets.max_scenarios_per_pr;
    out << YAML::Key << "pixel_diff_threshold" << YAML::Value << c.budgets.pixel_diff_threshold;
    out << YAML::EndMap;

    out << YAML::Key << "models" << YAML::Value << YAML::BeginMap;
    for (const auto& [role, m] : c.models.roles) {
        out << YAML::Key << to_string(role) << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "model" << YAML::Value << YAML::DoubleQuoted << m.model;
        out << YAML::Key << "endpoint" << YAML::Value << YAML::DoubleQuoted << m.endpoint;
        out << YAML::Key << "api_key_env" << YAML::Value << YAML::DoubleQuoted << m.api_key_env;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "pricing" << YAML::Value << YAML::BeginMap;
    for (const auto& [model, p] : c.pricing) {
        out << YAML::Key << YAML::DoubleQuoted << model << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "input_per_mtok" << YAML::Value << p.input_per_mtok;
        out << YAML::Key << "output_per_mtok" << YAML::Value << p.output_per_mtok;
        out << YAML::Key << "per_image" << YAML::Value << p.per_image;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;

    out << YAML::Key << "diff" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "dilation_radius" << YAML::Value << c.diff.dilation_radius;
    out << YAML::EndMap;

    out << YAML::Key << "skb" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "chunk_tokens" << YAML::Value << c.skb.chunk_tokens;
    out << YAML::Key << "overlap_tokens" << YAML::Value << c.skb.overlap_tokens;
    out << YAML::Key << "timestamp_line_ratio" << YAML::Value << c.skb.timestamp_line_ratio;
    out << YAML::Key << "stop_keywords" << YAML::Value << YAML::BeginSeq;
    for (const auto& k : c.skb.stop_keywords) out << YAML::DoubleQuoted << k;
    out << YAML::EndSeq;
    out << YAML::Key << "max_queries" << YAML::Value << c.skb.max_queries;
    out << YAML::Key << "k" << YAML::Value << c.skb.k;
    out << YAML::Key << "embed_attempts" << YAML::Value << c.skb.embed_attempts;
    out << YAML::Key << "index_path" << YAML::Value << YAML::DoubleQuoted << c.skb.index_path;
    out << YAML::EndMap;

    out << YAML::Key << "generator" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_preceding_intents" << YAML::Value << c.generator.max_preceding_intents;
    out << YAML::Key << "complexity_step_limit" << YAML::Value << c.generator.complexity_step_limit;
    out << YAML::EndMap;

    out << YAML::Key << "executor" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "runtime" << YAML::Value << (c.executor.runtime == RuntimeKind::local ? "local" : "docker");
    out << YAML::Key << "runtime_executable" << YAML::Value << YAML::DoubleQuoted << c.executor.runtime_executable;
    out << YAML::Key << "driver_executable" << YAML::Value << YAML::DoubleQuoted << c.executor.driver_executable;
    out << YAML::Key << "artifact_cache" << YAML::Value << YAML::DoubleQuoted << c.executor.artifact_cache;
    out << YAML::EndMap;

    out << YAML::Key << "oracle" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_regions_per_prompt" << YAML::Value << c.oracle.max_regions_per_prompt;
    out << YAML::EndMap;

    out << YAML::Key << "llm" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "max_attempts" << YAML::Value << c.llm.max_attempts;
    out << YAML::Key << "backoff_initial_ms" << YAML::Value << c.llm.backoff_initial_ms;
    out << YAML::Key << "timeout_s" << YAML::Value << c.llm.timeout_s;
    out << YAML::Key << "audit_log" << YAML::Value << c.llm.audit_log;
    out << YAML::EndMap;

    out << YAML::Key << "run" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "runs_dir" << YAML::Value << YAML::DoubleQuoted << c.run.runs_dir;
    out << YAML::Key << "workers" << YAML::Value << c.run.workers;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace ripple
