#include "ripple/llm.hpp"

#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/prompts.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <thread>

namespace ripple::llm {

namespace fs = std::filesystem;
using nlohmann::json;

ImageRef ImageRef::from_file(const fs::path& path) { return {path.string(), sha256_file(path)}; }

ChatMessage ChatMessage::system(std::string text) { return {Speaker::system, {Part{std::move(text), {}}}}; }

ChatMessage ChatMessage::user(std::string text, const std::vector<ImageRef>& images) {
    ChatMessage m{Speaker::user, {Part{std::move(text), {}}}};
    for (const auto& img : images) m.parts.push_back(Part{{}, img});
    return m;
}

ChatMessage ChatMessage::assistant(std::string text) { return {Speaker::assistant, {Part{std::move(text), {}}}}; }

std::string ChatMessage::text() const {
    std::string out;
    bool first = true;
    for (const auto& p : parts) {
        if (p.is_image()) continue;
        if (!first) out += '\n';
        out += p.text;
        first = false;
    }
    return out;
}

std::vector<ImageRef> ChatMessage::images() const {
    std::vector<ImageRef> out;
    for (const auto& p : parts)
        if (p.image) out.push_back(*p.image);
    return out;
}

void ChatMessage::check() const {
    if (parts.empty()) throw std::invalid_argument("a chat message needs at least one part");
    if (speaker != Speaker::user)
        for (const auto& p : parts)
            if (p.is_image()) throw std::invalid_argument("images are only allowed in user messages");
}

namespace {

std::string speaker_name(Speaker s) {
    switch (s) {
        case Speaker::system: return "system";
        case Speaker::user: return "user";
        case Speaker::assistant: return "assistant";
    }
    return "user";
}

Speaker speaker_from(const std::string& s) {
    if (s == "system") return Speaker::system;
    if (s == "assistant") return Speaker::assistant;
    if (s == "user") return Speaker::user;
    throw ParseError("unknown message speaker '" + s + "'");
}

std::string fence(const json& j) { return "```json\n" + j.dump(2) + "\n```"; }

}  // namespace

void to_json(json& j, const ChatMessage& m) {
    json parts = json::array();
    for (const auto& p : m.parts) {
        if (p.image) parts.push_back({{"image", {{"path", p.image->path}, {"sha256", p.image->sha256}}}});
        else parts.push_back({{"text", p.text}});
    }
    j = {{"speaker", speaker_name(m.speaker)}, {"parts", parts}};
}

void from_json(const json& j, ChatMessage& m) {
    m.speaker = speaker_from(j.at("speaker").get<std::string>());
    m.parts.clear();
    for (const auto& p : j.at("parts")) {
        if (p.contains("image")) {
            m.parts.push_back(
                Part{{}, ImageRef{p["image"].at("path").get<std::string>(), p["image"].at("sha256").get<std::string>()}});
        } else {
            m.parts.push_back(Part{p.at("text").get<std::string>(), {}});
        }
    }
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

Eigen::VectorXf fake_embedding(std::string_view text) {
    Eigen::VectorXf v = Eigen::VectorXf::Zero(kFakeEmbeddingDim);
    for (auto token : whitespace_tokens(text)) {
        for (auto& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        const std::uint64_t h = fnv1a64(token);
        const auto idx = static_cast<Eigen::Index>(h % kFakeEmbeddingDim);
        v[idx] += (h >> 63) ? -1.0f : 1.0f;
    }
    const float n = v.norm();
    if (n == 0.0f) {
        v.setZero();
        v[0] = 1.0f;
        return v;
    }
    return v / n;
}

// ---------------------------------------------------------------------------
// Scripted fake

FakeProvider::FakeProvider(fs::path script) : path_(std::move(script)) {}

const std::vector<FakeProvider::Record>& FakeProvider::script() {
    std::call_once(loaded_, [this] {
        json doc;
        try {
            doc = json::parse(read_file(path_));
        } catch (const json::exception& e) {
            throw ParseError("fake script " + path_.string() + ": " + e.what());
        }
        const json& list = doc.is_object() ? doc.at("records") : doc;
        if (!list.is_array()) throw ParseError("fake script " + path_.string() + " must be a list of records");
        for (const auto& r : list) {
            Record rec;
            if (r.contains("match") && !r["match"].is_null()) rec.match = r["match"].get<std::string>();
            if (r.contains("refuse")) rec.refuse = r["refuse"].get<std::string>();
            if (r.contains("reply")) rec.reply = r["reply"].is_string() ? r["reply"].get<std::string>() : fence(r["reply"]);
            rec.latency_ms = r.value("latency_ms", 0L);
            records_.push_back(std::move(rec));
        }
    });
    return records_;
}

Completion FakeProvider::complete(const ModelRole&, const std::vector<ChatMessage>& memory) {
    const auto& records = script();
    std::vector<bool> used(records.size(), false);
    auto pick = [&](const std::string& prompt) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!used[i] && records[i].match && prompt.find(*records[i].match) != std::string::npos) return i;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (!used[i] && !records[i].match) return i;
        return std::nullopt;
    };

    std::optional<std::size_t> chosen;
    const ChatMessage* last = nullptr;
    for (const auto& m : memory) {
        if (m.speaker != Speaker::user) continue;
        chosen = pick(m.text());
        last = &m;
        if (chosen) used[*chosen] = true;
    }
    if (!last) throw TransportError("fake provider received no user message", false);
    if (!chosen)
        throw ScriptExhausted("fake script " + path_.filename().string() + " has no record left for this session");

    const Record& rec = records[*chosen];
    Completion c;
    c.usage.latency_ms = rec.latency_ms;
    for (const auto& m : memory) {
        c.usage.input_tokens += static_cast<long>(whitespace_tokens(m.text()).size());
        c.usage.image_count += static_cast<long>(m.images().size());
    }
    if (rec.refuse) throw ProviderRefusal(*rec.refuse);

    std::string reply = rec.reply;
    if (const auto pos = reply.find("{{image_hashes}}"); pos != std::string::npos) {
        std::string tokens;
        for (const auto& img : last->images()) tokens += (tokens.empty() ? "" : " ") + img.token();
        reply.replace(pos, 16, tokens);
    }
    c.text = std::move(reply);
    c.usage.output_tokens = static_cast<long>(whitespace_tokens(c.text).size());
    return c;
}

std::vector<Eigen::VectorXf> FakeProvider::embed(const ModelRole&, const std::vector<std::string>& texts,
                                                 Usage& usage) {
    std::vector<Eigen::VectorXf> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        usage.input_tokens += static_cast<long>(whitespace_tokens(t).size());
        out.push_back(fake_embedding(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Metering

RoleCounters& RoleCounters::operator+=(const RoleCounters& o) {
    requests += o.requests;
    failures += o.failures;
    input_tokens += o.input_tokens;
    output_tokens += o.output_tokens;
    image_count += o.image_count;
    cost_micro_usd += o.cost_micro_usd;
    wall_time_ms += o.wall_time_ms;
    return *this;
}

RoleCounters total(const MeterSnapshot& snapshot) {
    RoleCounters t;
    for (const auto& [role, c] : snapshot) t += c;
    return t;
}

void UsageMeter::record(Role role, const Usage& usage, long long cost_micro_usd) {
    std::lock_guard lock(mutex_);
    auto& c = counters_[role];
    ++c.requests;
    c.input_tokens += usage.input_tokens;
    c.output_tokens += usage.output_tokens;
    c.image_count += usage.image_count;
    c.cost_micro_usd += cost_micro_usd;
    c.wall_time_ms += usage.latency_ms;
}

void UsageMeter::record_failure(Role role) {
    std::lock_guard lock(mutex_);
    auto& c = counters_[role];
    ++c.requests;
    ++c.failures;
}

void UsageMeter::absorb(const MeterSnapshot& snapshot) {
    std::lock_guard lock(mutex_);
    for (const auto& [role, c] : snapshot) counters_[role] += c;
}

MeterSnapshot UsageMeter::snapshot() const {
    std::lock_guard lock(mutex_);
    return counters_;
}

void to_json(json& j, const RoleCounters& c) {
    j = {{"requests", c.requests},         {"failures", c.failures},
         {"input_tokens", c.input_tokens}, {"output_tokens", c.output_tokens},
         {"image_count", c.image_count},   {"cost_micro_usd", c.cost_micro_usd},
         {"wall_time_ms", c.wall_time_ms}};
}

void from_json(const json& j, RoleCounters& c) {
    c.requests = j.value("requests", 0L);
    c.failures = j.value("failures", 0L);
    c.input_tokens = j.value("input_tokens", 0L);
    c.output_tokens = j.value("output_tokens", 0L);
    c.image_count = j.value("image_count", 0L);
    c.cost_micro_usd = j.value("cost_micro_usd", 0LL);
    c.wall_time_ms = j.value("wall_time_ms", 0LL);
}

json meter_to_json(const MeterSnapshot& snapshot) {
    json j = json::object();
    for (const auto& [role, c] : snapshot) j[to_string(role)] = c;
    return j;
}

MeterSnapshot meter_from_json(const json& j) {
    MeterSnapshot s;
    for (const auto& [name, c] : j.items()) s[role_from_string(name)] = c.get<RoleCounters>();
    return s;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)), sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
    if (options_.audit_dir) fs::create_directories(*options_.audit_dir);
}

Gateway Gateway::from_config(const Config& config, std::optional<fs::path> audit_dir) {
    GatewayOptions o;
    o.roles = config.models;
    o.pricing = config.pricing;
    o.settings = config.llm;
    if (config.llm.audit_log) o.audit_dir = std::move(audit_dir);
    return Gateway(std::move(o));
}

void Gateway::set_provider(Role role, std::shared_ptr<Provider> provider) {
    std::lock_guard lock(mutex_);
    overrides_[role] = std::move(provider);
}

Provider& Gateway::provider_for(Role role) {
    const ModelRole& m = options_.roles.at(role);
    std::lock_guard lock(mutex_);
    if (auto it = overrides_.find(role); it != overrides_.end()) return *it->second;
    auto& slot = by_model_[m.model];
    if (!slot) {
        if (m.is_fake()) slot = std::make_shared<FakeProvider>(m.fake_script());
        else slot = std::make_shared<HttpProvider>(options_.settings.timeout_s);
    }
    return *slot;
}

long long Gateway::cost_of(Role role, const Usage& usage) const {
    const ModelRole& m = options_.roles.at(role);
    const auto it = options_.pricing.find(m.model);
    if (it == options_.pricing.end()) return 0;
    const ModelPrice& p = it->second;
    // A USD price per million tokens is a micro-USD price per token.
    const double micro = static_cast<double>(usage.input_tokens) * p.input_per_mtok +
                         static_cast<double>(usage.output_tokens) * p.output_per_mtok +
                         static_cast<double>(usage.image_count) * p.per_image * 1e6;
    return std::llround(micro);
}

template <typename Fn>
auto Gateway::with_retry(Role role, Fn&& fn) -> decltype(fn()) {
    const int attempts = std::max(1, options_.settings.max_attempts);
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            meter_.record_failure(role);
            if (!e.retryable() || attempt >= attempts) {
                if (!e.retryable()) throw;
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) + " attempts)",
                                     false);
            }
            const auto delay = std::chrono::milliseconds(static_cast<long long>(options_.settings.backoff_initial_ms)
                                                         << (attempt - 1));
            spdlog::warn("{} request failed ({}); retrying in {} ms", to_string(role), e.what(), delay.count());
            sleeper_(delay);
        }
    }
}

Session Gateway::open_session(Role role, std::string label) {
    const std::string name = "system_" + to_string(role);
    const auto& all = prompts::all();
    const auto it = all.find(name);
    return open_session(role, std::move(label), it == all.end() ? std::string{} : it->second);
}

Session Gateway::open_session(Role role, std::string label, std::string system_prompt) {
    if (role == Role::embedding) throw UnknownRole("the embedding role has no dialogue sessions");
    (void)options_.roles.at(role);
    static std::atomic<unsigned> counter{0};
    if (label.empty()) label = to_string(role) + "-" + std::to_string(counter++);
    Session s(this, role, std::move(label));
    if (!system_prompt.empty()) s.memory_.push_back(ChatMessage::system(std::move(system_prompt)));
    if (options_.audit_dir) {
        std::lock_guard lock(audit_mutex_);
        std::ofstream(*options_.audit_dir / (s.label_ + ".jsonl"), std::ios::trunc);
    }
    return s;
}

Session Gateway::restore_session(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ParseError("session file " + path.string() + ": " + e.what());
    }
    const Role role = role_from_string(j.at("role").get<std::string>());
    (void)options_.roles.at(role);
    Session s(this, role, j.at("label").get<std::string>());
    s.memory_ = j.at("memory").get<std::vector<ChatMessage>>();
    s.turns_ = j.value("turns", std::size_t{0});
    return s;
}

std::vector<Eigen::VectorXf> Gateway::embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    Provider& provider = provider_for(Role::embedding);
    const ModelRole& model = options_.roles.at(Role::embedding);
    Usage usage;
    auto vectors = with_retry(Role::embedding, [&] {
        usage = Usage{};
        const auto started = std::chrono::steady_clock::now();
        auto v = provider.embed(model, texts, usage);
        if (!model.is_fake())
            usage.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                                      started)
                                   .count();
        return v;
    });
    meter_.record(Role::embedding, usage, cost_of(Role::embedding, usage));
    if (vectors.size() != texts.size())
        throw EmbeddingError("embedding provider returned " + std::to_string(vectors.size()) + " vectors for " +
                             std::to_string(texts.size()) + " inputs");
    for (const auto& v : vectors) {
        if (v.size() == 0 || v.size() != vectors.front().size()) throw EmbeddingError("inconsistent embedding dimension");
        if (!v.allFinite() || !(v.norm() > 0.0f)) throw EmbeddingError("degenerate embedding vector");
    }
    return vectors;
}

ChatMessage Session::send(std::string text, const std::vector<ImageRef>& images) {
    return send(ChatMessage::user(std::move(text), images));
}

ChatMessage Session::send(ChatMessage message) {
    message.check();
    Provider& provider = gateway_->provider_for(role_);
    const ModelRole& model = gateway_->options_.roles.at(role_);
    memory_.push_back(message);
    Usage usage;
    Completion reply;
    try {
        reply = gateway_->with_retry(role_, [&] {
            const auto started = std::chrono::steady_clock::now();
            Completion c = provider.complete(model, memory_);
            if (!model.is_fake())
                c.usage.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::steady_clock::now() - started)
                                         .count();
            return c;
        });
    } catch (const ProviderRefusal& e) {
        // Keep the exchange so that the script position survives the refusal.
        gateway_->meter_.record(role_, usage, 0);
        memory_.push_back(ChatMessage::assistant(std::string("[refused] ") + e.what()));
        ++turns_;
        throw;
    } catch (...) {
        memory_.pop_back();
        throw;
    }
    gateway_->meter_.record(role_, reply.usage, gateway_->cost_of(role_, reply.usage));
    ChatMessage answer = ChatMessage::assistant(std::move(reply.text));
    memory_.push_back(answer);
    ++turns_;
    audit(message, answer, reply.usage);
    return answer;
}

void Session::audit(const ChatMessage& sent, const ChatMessage& reply, const Usage& usage) const {
    if (!gateway_->options_.audit_dir) return;
    json sent_j = sent;
    for (auto& p : sent_j["parts"])
        if (p.contains("image")) p["image"].erase("path");
    const json line = {{"turn", turns_},
                       {"sent", sent_j},
                       {"reply", reply.text()},
                       {"usage",
                        {{"input_tokens", usage.input_tokens},
                         {"output_tokens", usage.output_tokens},
                         {"image_count", usage.image_count}}}};
    std::lock_guard lock(gateway_->audit_mutex_);
    std::ofstream out(*gateway_->options_.audit_dir / (label_ + ".jsonl"), std::ios::app);
    out << line.dump() << '\n';
}

void Session::persist(const fs::path& path) const {
    const json j = {{"role", to_string(role_)}, {"label", label_}, {"turns", turns_}, {"memory", memory_}};
    write_file_atomic(path, j.dump(2) + "\n");
}

json extract_json(const std::string& reply) {
    const auto open = reply.find("```json");
    if (open != std::string::npos) {
        const auto start = reply.find('\n', open);
        const auto close = start == std::string::npos ? std::string::npos : reply.find("```", start);
        if (close == std::string::npos) throw LlmFormatError("unterminated ```json block");
        try {
            return json::parse(reply.substr(start + 1, close - start - 1));
        } catch (const json::exception& e) {
            throw LlmFormatError(std::string("invalid JSON in fenced block: ") + e.what());
        }
    }
    try {
        return json::parse(reply);
    } catch (const json::exception&) {
        throw LlmFormatError("response contains no ```json block");
    }
}

void ask_json(Session& session, const std::string& prompt, const std::vector<ImageRef>& images,
              const std::function<void(const json&, bool)>& accept) {
    std::string error;
    try {
        accept(extract_json(session.send(prompt, images).text()), false);
        return;
    } catch (const LlmFormatError& e) {
        error = e.what();
    } catch (const json::exception& e) {
        error = e.what();
    }
    spdlog::warn("{}: unusable reply ({}); asking for a repair", session.label(), error);
    try {
        accept(extract_json(session.send(prompts::render("user_repair", {{"error", error}})).text()), true);
    } catch (const LlmFormatError& e) {
        throw LlmFormatError(session.label() + ": reply unusable after repair: " + e.what());
    } catch (const json::exception& e) {
        throw LlmFormatError(session.label() + ": reply unusable after repair: " + e.what());
    }
}

}  // namespace ripple::llm
