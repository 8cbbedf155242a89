#include "ripple/executor.hpp"

#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/prompts.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <random>
#include <thread>

namespace ripple::exec {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Instructions

namespace {

constexpr std::pair<ActionKind, const char*> kActions[] = {
    {ActionKind::click, "click"},          {ActionKind::right_click, "right_click"},
    {ActionKind::long_click, "long_click"}, {ActionKind::double_click, "double_click"},
    {ActionKind::triple_click, "triple_click"}, {ActionKind::input, "input"},
    {ActionKind::scroll, "scroll"},         {ActionKind::drag, "drag"},
    {ActionKind::move, "move"},             {ActionKind::keypress, "keypress"},
    {ActionKind::wait, "wait"},
};

constexpr std::pair<Direction, const char*> kDirections[] = {
    {Direction::up, "up"}, {Direction::down, "down"}, {Direction::left, "left"}, {Direction::right, "right"}};

}  // namespace

std::string to_string(ActionKind k) {
    for (const auto& [kind, name] : kActions)
        if (kind == k) return name;
    return "unknown";
}

ActionKind action_from_string(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return c == '-' ? '_' : std::tolower(c); });
    for (const auto& [kind, name] : kActions)
        if (s == name) return kind;
    throw ParseError("unknown UI action '" + s + "'");
}

std::string to_string(Direction d) {
    for (const auto& [dir, name] : kDirections)
        if (dir == d) return name;
    return "unknown";
}

Direction direction_from_string(const std::string& s) {
    for (const auto& [dir, name] : kDirections)
        if (s == name) return dir;
    throw ParseError("unknown scroll direction '" + s + "'");
}

void UiInstruction::validate(DisplayGeometry display) const {
    const std::string what = to_string(kind);
    const bool pointed = kind == ActionKind::click || kind == ActionKind::right_click ||
                         kind == ActionKind::long_click || kind == ActionKind::double_click ||
                         kind == ActionKind::triple_click || kind == ActionKind::move || kind == ActionKind::input ||
                         kind == ActionKind::drag;
    auto check = [&](bool present, bool wanted, const char* arg) {
        if (present && !wanted) throw ValidationError("instruction", what + " takes no " + arg);
        if (!present && wanted) throw ValidationError("instruction", what + " requires " + arg);
    };
    check(position.has_value(), pointed, "position");
    check(text.has_value(), kind == ActionKind::input, "text");
    check(keys.has_value(), kind == ActionKind::keypress, "keys");
    check(direction.has_value(), kind == ActionKind::scroll, "direction");
    check(end_position.has_value(), kind == ActionKind::drag, "end_position");
    check(wait_ms.has_value(), kind == ActionKind::wait, "wait_ms");
    auto inside = [&](const Point& p, const char* arg) {
        if (p.x < 0 || p.y < 0 || p.x >= display.width || p.y >= display.height)
            throw ValidationError("instruction", fmt::format("{} {} ({}, {}) is outside the {}x{} display", what, arg, p.x, p.y,
                                              display.width, display.height));
    };
    if (position) inside(*position, "position");
    if (end_position) inside(*end_position, "end_position");
    if (keys && (keys->empty() || std::any_of(keys->begin(), keys->end(), [](const auto& k) { return k.empty(); })))
        throw ValidationError("instruction", "keypress requires non-empty key names");
    if (wait_ms && *wait_ms <= 0) throw ValidationError("instruction", "wait_ms must be positive");
}

void to_json(json& j, const UiInstruction& v) {
    j = {{"kind", to_string(v.kind)}, {"target_name", v.target_name}};
    if (v.position) j["position"] = {v.position->x, v.position->y};
    if (v.text) j["text"] = *v.text;
    if (v.keys) j["keys"] = *v.keys;
    if (v.direction) j["direction"] = to_string(*v.direction);
    if (v.end_position) j["end_position"] = {v.end_position->x, v.end_position->y};
    if (v.wait_ms) j["wait_ms"] = *v.wait_ms;
}

void from_json(const json& j, UiInstruction& v) {
    v = {};
    v.kind = action_from_string(j.at("kind").get<std::string>());
    v.target_name = j.value("target_name", std::string{});
    auto point = [&](const char* key) -> std::optional<Point> {
        if (!j.contains(key)) return std::nullopt;
        return Point{j[key].at(0).get<int>(), j[key].at(1).get<int>()};
    };
    v.position = point("position");
    v.end_position = point("end_position");
    if (j.contains("text")) v.text = j["text"].get<std::string>();
    if (j.contains("keys")) v.keys = j["keys"].get<std::vector<std::string>>();
    if (j.contains("direction")) v.direction = direction_from_string(j["direction"].get<std::string>());
    if (j.contains("wait_ms")) v.wait_ms = j["wait_ms"].get<int>();
}

std::string UiInstruction::canonical() const { return json(*this).dump(); }

UiInstruction parse_model_instruction(const json& j, DisplayGeometry display) {
    if (!j.is_object()) throw LlmFormatError("an instruction must be an object");
    auto present = [&](const char* key) { return j.contains(key) && !j[key].is_null(); };
    UiInstruction v;
    try {
        if (!present("action") || !j["action"].is_string()) throw LlmFormatError("instruction without \"action\"");
        v.kind = action_from_string(j["action"].get<std::string>());
        if (present("target")) v.target_name = j["target"].is_string() ? j["target"].get<std::string>() : j["target"].dump();
        auto point = [&](const char* key) -> std::optional<Point> {
            if (!present(key)) return std::nullopt;
            const json& p = j[key];
            if (p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number())
                return Point{static_cast<int>(std::lround(p[0].get<double>())), static_cast<int>(std::lround(p[1].get<double>()))};
            if (p.is_object() && p.contains("x") && p.contains("y") && p["x"].is_number() && p["y"].is_number())
                return Point{static_cast<int>(std::lround(p["x"].get<double>())), static_cast<int>(std::lround(p["y"].get<double>()))};
            throw LlmFormatError(std::string("\"") + key + "\" must be [x, y]");
        };
        v.position = point("position");
        v.end_position = point("end_position");
        if (present("text")) {
            if (!j["text"].is_string()) throw LlmFormatError("\"text\" must be a string");
            v.text = j["text"].get<std::string>();
        }
        if (present("keys")) {
            std::vector<std::string> keys;
            if (j["keys"].is_string()) {
                std::string s = j["keys"].get<std::string>();
                for (std::size_t start = 0;;) {
                    const auto plus = s.find('+', start);
                    keys.push_back(s.substr(start, plus == std::string::npos ? std::string::npos : plus - start));
                    if (plus == std::string::npos) break;
                    start = plus + 1;
                }
            } else if (j["keys"].is_array()) {
                for (const auto& k : j["keys"]) {
                    if (!k.is_string()) throw LlmFormatError("\"keys\" must be strings");
                    keys.push_back(k.get<std::string>());
                }
            } else {
                throw LlmFormatError("\"keys\" must be a list of strings");
            }
            v.keys = keys;
        }
        if (present("direction")) {
            if (!j["direction"].is_string()) throw LlmFormatError("\"direction\" must be a string");
            v.direction = direction_from_string(j["direction"].get<std::string>());
        }
        if (present("wait_ms")) {
            if (!j["wait_ms"].is_number_integer()) throw LlmFormatError("\"wait_ms\" must be an integer");
            v.wait_ms = j["wait_ms"].get<int>();
        }
        v.validate(display);
    } catch (const ParseError& e) {
        throw LlmFormatError(e.what());
    } catch (const ValidationError& e) {
        throw LlmFormatError(e.what());
    }
    return v;
}

// ---------------------------------------------------------------------------
// Runtimes

std::string expand(std::string text, const std::map<std::string, std::string>& values) {
    for (const auto& [name, value] : values) {
        const std::string key = "{" + name + "}";
        for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size()))
            text.replace(pos, key.size(), value);
    }
    return text;
}

BuildArtifact ContainerRuntime::build_sut(const SutConfig& cfg, const std::string& revision) {
    const auto key = std::make_pair(cfg.container_image_ref, revision);
    std::promise<BuildArtifact> promise;
    std::shared_future<BuildArtifact> result;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) {
            result = it->second;
        } else {
            result = promise.get_future().share();
            cache_.emplace(key, result);
            owner = true;
        }
    }
    if (owner) {
        try {
            promise.set_value(build_image(cfg, revision));
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return result.get();
}

namespace {

std::string random_hex(int digits) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::string s;
    for (int i = 0; i < digits; ++i) s += "0123456789abcdef"[rng() % 16];
    return s;
}

std::string safe_name(const std::string& s) {
    std::string out;
    for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' ? c : '_';
    return out.empty() ? "local" : out;
}

std::string tail(const std::string& text, std::size_t n = 800) {
    return text.size() <= n ? text : "..." + text.substr(text.size() - n);
}

void export_revision(const SutConfig& cfg, const std::string& revision, const fs::path& dest) {
    fs::create_directories(dest);
    const auto r = run_shell("git -C " + shell_quote(cfg.repo_location) + " archive --format=tar " +
                             shell_quote(revision) + " | tar -x -C " + shell_quote(dest.string()));
    if (!r.ok()) throw BuildFailure("cannot export revision " + revision + ": " + tail(r.err));
}

/// The mock app's line protocol over a child process.
class LocalSession : public ContainerSession {
public:
    LocalSession(SessionInfo info, fs::path dir, const std::string& command, ProcessOptions options) : dir_(std::move(dir)) {
        info_ = std::move(info);
        try {
            child_ = std::make_unique<ChildProcess>(std::vector<std::string>{"/bin/sh", "-c", "exec " + command}, options);
        } catch (const Error& e) {
            throw DriverError(std::string("cannot launch SUT: ") + e.what());
        }
        const auto ready = child_->read_line();
        if (!ready || !json::parse(*ready, nullptr, false).value("ready", false)) {
            teardown();
            throw DriverError("SUT exited before it was ready: " + info_.session_id);
        }
        state_ = SessionState::running;
    }
    ~LocalSession() override { teardown(); }

    void exec(const std::vector<std::string>& argv) override {
        if (state_ != SessionState::running) throw DriverError("session " + info_.session_id + " is not running");
        child_->write_line(json(argv).dump());
        const auto line = child_->read_line();
        if (!line) throw DriverError("SUT exited in session " + info_.session_id);
        const json reply = json::parse(*line, nullptr, false);
        if (!reply.is_object() || !reply.value("ok", false))
            throw DriverError(reply.is_object() ? reply.value("error", *line) : *line);
    }

    Image capture_screenshot() override {
        const fs::path shot = dir_ / ("capture-" + std::to_string(captures_++) + ".png");
        exec({"ripple-screenshot", shot.string()});
        Image img = read_png(shot);
        fs::remove(shot);
        return img;
    }

    void copy_in(const fs::path& host_path, const std::string& session_path) override {
        const fs::path dest = dir_ / fs::path(session_path).relative_path();
        fs::create_directories(dest.parent_path());
        fs::copy(host_path, dest, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    }

    void teardown() override {
        if (state_ == SessionState::torn_down) return;
        state_ = SessionState::torn_down;
        if (child_) {
            child_->close_stdin();
            child_->wait();
            child_.reset();
        }
        std::error_code ec;
        fs::remove_all(dir_, ec);
    }

private:
    fs::path dir_;
    std::unique_ptr<ChildProcess> child_;
    int captures_ = 0;
};

}  // namespace

LocalRuntime::LocalRuntime(Options options) : options_(std::move(options)) {}

BuildArtifact LocalRuntime::build_image(const SutConfig& cfg, const std::string& revision) {
    const fs::path dir = options_.cache_dir / safe_name(cfg.container_image_ref) / safe_name(revision);
    const fs::path out = dir / "out", stamp = dir / ".built";
    BuildArtifact artifact{cfg.container_image_ref, revision, out.string()};
    if (fs::exists(stamp)) return artifact;
    fs::remove_all(dir);
    export_revision(cfg, revision, dir / "src");
    ++builds_;
    ProcessOptions po;
    po.cwd = dir / "src";
    const auto r = run_shell(expand(cfg.build_command, {{"out", shell_quote(out.string())}, {"revision", shell_quote(revision)}}), po);
    if (!r.ok())
        throw BuildFailure(fmt::format("build of {} failed (exit {}): {}", revision, r.exit_code, tail(r.err + r.out)));
    write_file_atomic(stamp, revision + "\n");
    spdlog::info("built {} into {}", revision, out.string());
    return artifact;
}

std::unique_ptr<ContainerSession> LocalRuntime::start_session(const BuildArtifact& artifact, const SutConfig& cfg) {
    const std::string id = fmt::format("local-{}-{}", sessions_++, random_hex(8));
    const fs::path dir = options_.work_dir / id;
    fs::create_directories(dir / "profile");
    const auto& g = cfg.display_geometry;
    const std::string command = expand(cfg.launch_command, {{"artifact", shell_quote(artifact.location)},
                                                            {"profile", shell_quote((dir / "profile").string())},
                                                            {"width", std::to_string(g.width)},
                                                            {"height", std::to_string(g.height)}});
    ProcessOptions po;
    po.cwd = dir;
    std::string path;
    for (const auto& p : options_.search_path) path += fs::absolute(p).string() + ":";
    const char* inherited = std::getenv("PATH");
    po.env["PATH"] = path + (inherited ? inherited : "/usr/bin:/bin");
    return std::make_unique<LocalSession>(SessionInfo{id, artifact.image_ref, artifact.revision, g}, dir, command, po);
}

namespace {

class DockerSession : public ContainerSession {
public:
    DockerSession(SessionInfo info, std::string exe) : exe_(std::move(exe)) {
        info_ = std::move(info);
        state_ = SessionState::running;
    }
    ~DockerSession() override { teardown(); }

    void exec(const std::vector<std::string>& argv) override {
        std::vector<std::string> cmd = {exe_, "exec", info_.session_id};
        cmd.insert(cmd.end(), argv.begin(), argv.end());
        const auto r = run(cmd);
        if (!r.ok()) throw DriverError(fmt::format("{} failed (exit {}): {}", argv.empty() ? "" : argv[0], r.exit_code, tail(r.err)));
    }

    Image capture_screenshot() override {
        const auto r = run({exe_, "exec", info_.session_id, "import", "-window", "root", "png:-"});
        if (!r.ok()) throw DriverError("screenshot failed: " + tail(r.err));
        try {
            return decode_png({reinterpret_cast<const std::uint8_t*>(r.out.data()), r.out.size()});
        } catch (const Error& e) {
            throw DriverError(std::string("screenshot is not a PNG: ") + e.what());
        }
    }

    void copy_in(const fs::path& host_path, const std::string& session_path) override {
        const auto r = run({exe_, "cp", host_path.string(), info_.session_id + ":" + session_path});
        if (!r.ok()) throw DriverError("copy into session failed: " + tail(r.err));
    }

    void teardown() override {
        if (state_ == SessionState::torn_down) return;
        state_ = SessionState::torn_down;
        try {
            run({exe_, "rm", "-f", info_.session_id});
        } catch (const std::exception& e) {
            spdlog::warn("teardown of {} failed: {}", info_.session_id, e.what());
        }
    }

private:
    static ProcessResult run(const std::vector<std::string>& argv) {
        try {
            return run_process(argv);
        } catch (const IoError& e) {
            throw DriverError(e.what());
        }
    }
    std::string exe_;
};

}  // namespace

DockerRuntime::DockerRuntime(Options options) : options_(std::move(options)) {}

BuildArtifact DockerRuntime::build_image(const SutConfig& cfg, const std::string& revision) {
    const std::string tag = fmt::format("ripple-sut-{:016x}:{}", fnv1a64(cfg.container_image_ref), safe_name(revision));
    BuildArtifact artifact{cfg.container_image_ref, revision, tag};
    if (run_process({options_.executable, "image", "inspect", tag}).ok()) return artifact;

    const fs::path ctx = options_.context_dir / safe_name(tag);
    fs::remove_all(ctx);
    export_revision(cfg, revision, ctx / "src");
    write_file_atomic(ctx / "Dockerfile", "FROM " + cfg.container_image_ref +
                                              "\nCOPY src /src\nWORKDIR /src\nRUN " +
                                              expand(cfg.build_command, {{"out", "/opt/sut"}, {"revision", revision}}) + "\n");
    ++builds_;
    const auto r = run_process({options_.executable, "build", "-t", tag, ctx.string()});
    if (!r.ok()) throw BuildFailure(fmt::format("image build for {} failed (exit {}): {}", revision, r.exit_code, tail(r.err + r.out)));
    return artifact;
}

std::unique_ptr<ContainerSession> DockerRuntime::start_session(const BuildArtifact& artifact, const SutConfig& cfg) {
    const std::string name = "ripple-" + random_hex(12);
    const auto& g = cfg.display_geometry;
    const std::string launch = expand(cfg.launch_command, {{"artifact", "/opt/sut"},
                                                           {"profile", "/root/profile"},
                                                           {"width", std::to_string(g.width)},
                                                           {"height", std::to_string(g.height)}});
    const std::string script = fmt::format(
        "Xvfb {0} -screen 0 {1}x{2}x24 -nolisten tcp >/dev/null 2>&1 & sleep 1; mkdir -p /root/profile; "
        "({3}) >/tmp/sut.log 2>&1 & exec sleep infinity",
        options_.display, g.width, g.height, launch);
    ProcessResult r;
    try {
        r = run_process({options_.executable, "run", "-d", "--rm", "--name", name, "-e", "DISPLAY=" + options_.display,
                         artifact.location, "/bin/sh", "-c", script});
    } catch (const IoError& e) {
        throw DriverError(e.what());
    }
    if (!r.ok()) throw DriverError("cannot start session: " + tail(r.err));
    return std::make_unique<DockerSession>(SessionInfo{name, artifact.image_ref, artifact.revision, g}, options_.executable);
}

std::unique_ptr<ContainerRuntime> make_runtime(const Config& config, const fs::path& run_dir,
                                               std::vector<fs::path> search_path) {
    const fs::path cache =
        config.executor.artifact_cache.empty() ? run_dir / "builds" : fs::path(config.executor.artifact_cache);
    if (config.executor.runtime == RuntimeKind::docker)
        return std::make_unique<DockerRuntime>(DockerRuntime::Options{config.executor.runtime_executable, cache});
    return std::make_unique<LocalRuntime>(LocalRuntime::Options{cache, run_dir / "sessions", std::move(search_path)});
}

// ---------------------------------------------------------------------------
// Driver

namespace {

std::string keysym(const std::string& key) {
    static const std::map<std::string, std::string> names = {
        {"enter", "Return"}, {"return", "Return"}, {"backspace", "BackSpace"}, {"esc", "Escape"},
        {"escape", "Escape"}, {"tab", "Tab"},      {"delete", "Delete"},       {"del", "Delete"},
        {"space", "space"},  {"control", "ctrl"},  {"ctrl", "ctrl"},           {"alt", "alt"},
        {"shift", "shift"},  {"cmd", "super"},     {"super", "super"},         {"up", "Up"},
        {"down", "Down"},    {"left", "Left"},     {"right", "Right"},         {"home", "Home"},
        {"end", "End"},      {"pageup", "Prior"},  {"pagedown", "Next"},
    };
    std::string lower = key;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    auto it = names.find(lower);
    return it == names.end() ? key : it->second;
}

}  // namespace

std::vector<std::vector<std::string>> XdotoolDriver::commands(const UiInstruction& in) const {
    auto at = [&](const Point& p) { return std::vector<std::string>{exe_, "mousemove", "--sync", std::to_string(p.x), std::to_string(p.y)}; };
    auto then = [](std::vector<std::string> base, std::initializer_list<std::string> more) {
        base.insert(base.end(), more);
        return base;
    };
    switch (in.kind) {
        case ActionKind::click: return {then(at(*in.position), {"click", "1"})};
        case ActionKind::right_click: return {then(at(*in.position), {"click", "3"})};
        case ActionKind::double_click: return {then(at(*in.position), {"click", "--repeat", "2", "1"})};
        case ActionKind::triple_click: return {then(at(*in.position), {"click", "--repeat", "3", "1"})};
        case ActionKind::long_click: return {then(at(*in.position), {"mousedown", "1", "sleep", "1", "mouseup", "1"})};
        case ActionKind::move: return {at(*in.position)};
        case ActionKind::input:
            return {then(at(*in.position), {"click", "1"}), {exe_, "type", "--delay", "12", "--", *in.text}};
        case ActionKind::scroll: {
            const char* button = *in.direction == Direction::up     ? "4"
                                 : *in.direction == Direction::down ? "5"
                                 : *in.direction == Direction::left ? "6"
                                                                    : "7";
            return {{exe_, "click", "--repeat", "5", button}};
        }
        case ActionKind::drag: {
            auto cmd = then(at(*in.position), {"mousedown", "1", "mousemove", "--sync", std::to_string(in.end_position->x),
                                               std::to_string(in.end_position->y), "mouseup", "1"});
            return {cmd};
        }
        case ActionKind::keypress: {
            std::string chord;
            for (const auto& k : *in.keys) chord += (chord.empty() ? "" : "+") + keysym(k);
            return {{exe_, "key", chord}};
        }
        case ActionKind::wait: return {{exe_, "sleep", fmt::format("{:.3f}", *in.wait_ms / 1000.0)}};
    }
    return {};
}

Image execute_instruction(const UiInstruction& instr, ContainerSession& session, const InputDriver& driver,
                          int settle_ms, const Sleeper& sleeper) {
    for (const auto& cmd : driver.commands(instr)) {
        try {
            session.exec(cmd);
        } catch (const DriverError& e) {
            spdlog::warn("{}: {} failed ({}); retrying once", session.info().session_id, to_string(instr.kind), e.what());
            session.exec(cmd);
        }
    }
    if (settle_ms > 0) {
        const std::chrono::milliseconds delay(settle_ms);
        if (sleeper) {
            sleeper(delay);
        } else {
            std::this_thread::sleep_for(delay);
        }
    }
    return session.capture_screenshot();
}

// ---------------------------------------------------------------------------
// Translation

namespace {

Translation parse_translation(const std::string& reply, DisplayGeometry display) {
    const json j = llm::extract_json(reply);
    if (!j.is_object() || !j.contains("status") || !j["status"].is_string())
        throw LlmFormatError("reply must be an object with a \"status\"");
    const std::string status = j["status"].get<std::string>();
    const json instructions = j.value("instructions", json::array());
    if (!instructions.is_array() && !instructions.is_null()) throw LlmFormatError("\"instructions\" must be a list");
    Translation t;
    if (status == "complete") {
        if (instructions.is_array() && !instructions.empty())
            throw LlmFormatError("a complete reply must not carry instructions");
        t.complete = true;
        return t;
    }
    if (status != "continue") throw LlmFormatError("\"status\" must be \"continue\" or \"complete\"");
    if (!instructions.is_array() || instructions.empty()) throw LlmFormatError("\"continue\" needs at least one instruction");
    for (std::size_t i = 0; i < instructions.size(); ++i) {
        try {
            t.instructions.push_back(parse_model_instruction(instructions[i], display));
        } catch (const LlmFormatError& e) {
            throw LlmFormatError("instructions[" + std::to_string(i) + "]: " + e.what());
        }
    }
    return t;
}

}  // namespace

Translation translate_next(const scenario::TestScenario& scenario, const fs::path& screenshot, llm::Session& session,
                           DisplayGeometry display, int executed_count, int turns_available) {
    Translation result;
    if (turns_available < 1) {
        result.budget_exhausted = true;
        return result;
    }
    const llm::ImageRef image = llm::ImageRef::from_file(screenshot);
    std::string prompt;
    const bool first = std::none_of(session.memory().begin(), session.memory().end(),
                                    [](const llm::ChatMessage& m) { return m.speaker == llm::Speaker::user; });
    if (first) {
        std::string pre, steps;
        for (const auto& p : scenario.preconditions) pre += "- " + p + "\n";
        const auto rendered = scenario.rendered_steps();
        for (std::size_t i = 0; i < rendered.size(); ++i) {
            steps += std::to_string(i + 1) + ". " + rendered[i].description;
            if (rendered[i].expected_observation) steps += " (expected: " + *rendered[i].expected_observation + ")";
            steps += "\n";
        }
        prompt = prompts::render("user_execute_start", {{"scenario_id", scenario.scenario_id},
                                                        {"title", scenario.title},
                                                        {"preconditions", pre.empty() ? "(none)\n" : pre},
                                                        {"steps", steps},
                                                        {"width", std::to_string(display.width)},
                                                        {"height", std::to_string(display.height)}});
    } else {
        prompt = prompts::render("user_execute_next", {{"executed", std::to_string(executed_count)}});
    }

    std::string error;
    const auto reply = session.send(prompt, {image});
    try {
        auto t = parse_translation(reply.text(), display);
        t.turns_used = 1;
        return t;
    } catch (const LlmFormatError& e) {
        error = e.what();
    } catch (const json::exception& e) {
        error = e.what();
    }
    if (turns_available < 2) {
        result.turns_used = 1;
        result.budget_exhausted = true;
        return result;
    }
    spdlog::warn("{}: unusable instructions ({}); asking for a repair", session.label(), error);
    const auto repaired = session.send(prompts::render("user_repair", {{"error", error}}), {image});
    try {
        auto t = parse_translation(repaired.text(), display);
        t.turns_used = 2;
        return t;
    } catch (const json::exception& e) {
        throw LlmFormatError(session.label() + ": instructions unusable after repair: " + e.what());
    } catch (const LlmFormatError& e) {
        throw LlmFormatError(session.label() + ": instructions unusable after repair: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Traces

namespace {

constexpr std::pair<Termination, const char*> kTerminations[] = {
    {Termination::completed, "completed"},
    {Termination::llm_budget_exhausted, "llm_budget_exhausted"},
    {Termination::ui_budget_exhausted, "ui_budget_exhausted"},
    {Termination::execution_error, "execution_error"},
};

json to_json(const Screenshot& s) { return {{"path", s.path}, {"sha256", s.sha256}}; }
Screenshot screenshot_from(const json& j) { return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()}; }

Screenshot save(const Image& img, const fs::path& dir, const std::string& name) {
    const auto bytes = encode_png(img);
    write_file_atomic(dir / name, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    return {name, sha256_hex(bytes)};
}

void settle(const SutConfig& cfg, const ExecutorOptions& options) {
    if (cfg.settle_ms <= 0) return;
    const std::chrono::milliseconds delay(cfg.settle_ms);
    if (options.sleeper) {
        options.sleeper(delay);
    } else {
        std::this_thread::sleep_for(delay);
    }
}

}  // namespace

std::string to_string(Termination t) {
    for (const auto& [term, name] : kTerminations)
        if (term == t) return name;
    return "unknown";
}

Termination termination_from_string(const std::string& s) {
    for (const auto& [term, name] : kTerminations)
        if (s == name) return term;
    throw ParseError("unknown termination '" + s + "'");
}

void to_json(json& j, const ExecutionTrace& v) {
    json steps = json::array();
    for (const auto& s : v.steps) {
        json step = {{"step_index", s.step_index},
                     {"instruction", s.instruction},
                     {"post_screenshot", to_json(s.post_screenshot)},
                     {"llm_turn_index", s.llm_turn_index}};
        step["pre_screenshot"] = s.pre_screenshot ? to_json(*s.pre_screenshot) : json();
        steps.push_back(std::move(step));
    }
    j = {{"scenario_id", v.scenario_id},
         {"steps", steps},
         {"termination", to_string(v.termination)},
         {"llm_turns_used", v.llm_turns_used},
         {"build_ids", {{"pre", v.pre_revision}, {"post", v.post_revision}}},
         {"replay_failure_at", v.replay_failure_at ? json(*v.replay_failure_at) : json()},
         {"error", v.error ? json(*v.error) : json()}};
}

void from_json(const json& j, ExecutionTrace& v) {
    v = {};
    v.scenario_id = j.at("scenario_id").get<std::string>();
    for (const auto& s : j.at("steps")) {
        StepRecord r;
        r.step_index = s.at("step_index").get<int>();
        r.instruction = s.at("instruction").get<UiInstruction>();
        r.post_screenshot = screenshot_from(s.at("post_screenshot"));
        if (s.contains("pre_screenshot") && !s["pre_screenshot"].is_null()) r.pre_screenshot = screenshot_from(s["pre_screenshot"]);
        r.llm_turn_index = s.value("llm_turn_index", 0);
        v.steps.push_back(std::move(r));
    }
    v.termination = termination_from_string(j.at("termination").get<std::string>());
    v.llm_turns_used = j.at("llm_turns_used").get<int>();
    v.pre_revision = j.at("build_ids").at("pre").get<std::string>();
    v.post_revision = j.at("build_ids").at("post").get<std::string>();
    if (j.contains("replay_failure_at") && !j["replay_failure_at"].is_null()) v.replay_failure_at = j["replay_failure_at"].get<int>();
    if (j.contains("error") && !j["error"].is_null()) v.error = j["error"].get<std::string>();
}

ExecutionTrace load_trace(const fs::path& trace_dir) {
    return json::parse(read_file(trace_dir / "trace.json")).get<ExecutionTrace>();
}

ExecutionTrace run_scenario(const scenario::TestScenario& scenario, const BuildArtifact& post_build,
                            const BuildArtifact& pre_build, const SutConfig& cfg, llm::Gateway& gateway,
                            ContainerRuntime& runtime, const InputDriver& driver, const ExecutorOptions& options) {
    const fs::path& dir = options.trace_dir;
    fs::create_directories(dir);
    const DisplayGeometry display = cfg.display_geometry;
    const int max_turns = options.budgets.max_llm_turns_per_scenario;
    const auto max_steps = static_cast<std::size_t>(std::max(0, options.budgets.max_ui_instructions_per_scenario));

    ExecutionTrace trace;
    trace.scenario_id = scenario.scenario_id;
    trace.pre_revision = pre_build.revision;
    trace.post_revision = post_build.revision;

    // Play on the post-change build.
    std::optional<llm::Session> llm;
    try {
        auto session = runtime.start_session(post_build, cfg);
        llm = gateway.open_session(
            Role::executor, options.session_label.empty() ? scenario.scenario_id + "-execute" : options.session_label);
        settle(cfg, options);
        save(session->capture_screenshot(), dir, "initial_post.png");
        fs::path current = dir / "initial_post.png";
        bool done = false;
        while (!done) {
            if (trace.llm_turns_used >= max_turns) {
                trace.termination = Termination::llm_budget_exhausted;
                break;
            }
            const auto t = translate_next(scenario, current, *llm, display, static_cast<int>(trace.steps.size()),
                                          max_turns - trace.llm_turns_used);
            trace.llm_turns_used += t.turns_used;
            if (t.budget_exhausted) {
                trace.termination = Termination::llm_budget_exhausted;
                break;
            }
            if (t.complete) {
                trace.termination = Termination::completed;
                break;
            }
            for (const auto& instr : t.instructions) {
                if (trace.steps.size() >= max_steps) {
                    trace.termination = Termination::ui_budget_exhausted;
                    done = true;
                    break;
                }
                const int i = static_cast<int>(trace.steps.size());
                const Image shot = execute_instruction(instr, *session, driver, cfg.settle_ms, options.sleeper);
                StepRecord rec;
                rec.step_index = i;
                rec.instruction = instr;
                rec.post_screenshot = save(shot, dir, fmt::format("step_{}_post.png", i));
                rec.llm_turn_index = trace.llm_turns_used - 1;
                trace.steps.push_back(std::move(rec));
                current = dir / trace.steps.back().post_screenshot.path;
            }
        }
        session->teardown();
    } catch (const TransportError&) {
        throw;
    } catch (const ProviderRefusal&) {
        throw;
    } catch (const Error& e) {
        trace.termination = Termination::execution_error;
        trace.error = e.what();
        if (llm) trace.llm_turns_used = static_cast<int>(llm->turns());
        spdlog::warn("scenario {}: execution error: {}", scenario.scenario_id, e.what());
    }

    // Verbatim replay on the pre-change build.
    if (!trace.steps.empty()) {
        std::size_t i = 0;
        try {
            auto session = runtime.start_session(pre_build, cfg);
            settle(cfg, options);
            save(session->capture_screenshot(), dir, "initial_pre.png");
            for (; i < trace.steps.size(); ++i) {
                const Image shot =
                    execute_instruction(trace.steps[i].instruction, *session, driver, cfg.settle_ms, options.sleeper);
                trace.steps[i].pre_screenshot = save(shot, dir, fmt::format("step_{}_pre.png", i));
            }
            session->teardown();
        } catch (const Error& e) {
            trace.replay_failure_at = static_cast<int>(i);
            spdlog::warn("scenario {}: replay failed at step {}: {}", scenario.scenario_id, i, e.what());
        }
    }

    write_file_atomic(dir / "trace.json", json(trace).dump(2));
    return trace;
}

}  // namespace ripple::exec
