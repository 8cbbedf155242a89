#pragma once

#include "ripple/config.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace ripple::llm {

enum class Speaker { system, user, assistant };

/// An image handed to a multimodal model, identified by its content hash.
struct ImageRef {
    std::string path;
    std::string sha256;

    /// Reads and hashes the file.
    static ImageRef from_file(const std::filesystem::path& path);
    /// Short token the fake provider echoes back: "img:" + first 12 hex digits.
    std::string token() const { return "img:" + sha256.substr(0, 12); }
    friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct Part {
    std::string text;
    std::optional<ImageRef> image;
    bool is_image() const { return image.has_value(); }
    friend bool operator==(const Part&, const Part&) = default;
};

struct ChatMessage {
    Speaker speaker = Speaker::user;
    std::vector<Part> parts;

    static ChatMessage system(std::string text);
    static ChatMessage user(std::string text, const std::vector<ImageRef>& images = {});
    static ChatMessage assistant(std::string text);

    /// Text parts joined by newlines.
    std::string text() const;
    std::vector<ImageRef> images() const;
    /// Throws std::invalid_argument when empty or when a non-user message carries an image.
    void check() const;
    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct Usage {
    long input_tokens = 0;
    long output_tokens = 0;
    long image_count = 0;
    long latency_ms = 0;
};

struct Completion {
    std::string text;
    Usage usage;
};

/// One backend. Implementations must tolerate concurrent callers.
class Provider {
public:
    virtual ~Provider() = default;
    virtual Completion complete(const ModelRole& model, const std::vector<ChatMessage>& memory) = 0;
    virtual std::vector<Eigen::VectorXf> embed(const ModelRole& model, const std::vector<std::string>& texts,
                                               Usage& usage) = 0;
};

inline constexpr int kFakeEmbeddingDim = 64;

/// Whitespace-delimited tokens.
std::vector<std::string> whitespace_tokens(std::string_view text);

/// The documented hash embedding: each lower-cased whitespace token t adds
/// sign(t) to component fnv1a64(t) mod 64, where sign is -1 when the top bit
/// of the hash is set. The sum is L2-normalized; a zero sum maps to e0.
Eigen::VectorXf fake_embedding(std::string_view text);

/// Scripted provider. The script is a JSON array of records
/// `{match?, reply, latency_ms?, refuse?}`. Records are consumed per session:
/// for each user message, the first unconsumed record whose `match` occurs in
/// the message text is taken, otherwise the first unconsumed record without
/// a `match`. Consumption is recomputed from session memory, so a restored
/// session continues exactly where it left off. A `reply` that is not a string
/// is emitted as a fenced json block; `{{image_hashes}}` in a reply expands to
/// the tokens of the message's images.
class FakeProvider : public Provider {
public:
    explicit FakeProvider(std::filesystem::path script);
    Completion complete(const ModelRole& model, const std::vector<ChatMessage>& memory) override;
    std::vector<Eigen::VectorXf> embed(const ModelRole& model, const std::vector<std::string>& texts,
                                       Usage& usage) override;

private:
    struct Record {
        std::optional<std::string> match;
        std::string reply;
        std::optional<std::string> refuse;
        long latency_ms = 0;
    };
    const std::vector<Record>& script();

    std::filesystem::path path_;
    std::once_flag loaded_;
    std::vector<Record> records_;
};

/// OpenAI-compatible chat-completions and embeddings endpoints.
class HttpProvider : public Provider {
public:
    explicit HttpProvider(int timeout_s = 120) : timeout_s_(timeout_s) {}
    Completion complete(const ModelRole& model, const std::vector<ChatMessage>& memory) override;
    std::vector<Eigen::VectorXf> embed(const ModelRole& model, const std::vector<std::string>& texts,
                                       Usage& usage) override;

private:
    int timeout_s_;
};

struct RoleCounters {
    long requests = 0;
    long failures = 0;
    long input_tokens = 0;
    long output_tokens = 0;
    long image_count = 0;
    long long cost_micro_usd = 0;
    long long wall_time_ms = 0;

    RoleCounters& operator+=(const RoleCounters& o);
    friend bool operator==(const RoleCounters&, const RoleCounters&) = default;
};

using MeterSnapshot = std::map<Role, RoleCounters>;

RoleCounters total(const MeterSnapshot& snapshot);

class UsageMeter {
public:
    void record(Role role, const Usage& usage, long long cost_micro_usd);
    void record_failure(Role role);
    /// Adds a prior snapshot, e.g. when resuming a run.
    void absorb(const MeterSnapshot& snapshot);
    MeterSnapshot snapshot() const;

private:
    mutable std::mutex mutex_;
    MeterSnapshot counters_;
};

void to_json(nlohmann::json& j, const RoleCounters& c);
void from_json(const nlohmann::json& j, RoleCounters& c);
nlohmann::json meter_to_json(const MeterSnapshot& snapshot);
MeterSnapshot meter_from_json(const nlohmann::json& j);

void to_json(nlohmann::json& j, const ChatMessage& m);
void from_json(const nlohmann::json& j, ChatMessage& m);

class Gateway;

/// Dialogue with append-only memory. Confined to one task at a time.
class Session {
public:
    Role role() const { return role_; }
    const std::string& label() const { return label_; }
    const std::vector<ChatMessage>& memory() const { return memory_; }

    /// Appends `message`, invokes the provider with the whole memory and
    /// appends and returns the reply. On transport failure the message is
    /// withdrawn. Throws TransportError, ProviderRefusal.
    ChatMessage send(ChatMessage message);
    ChatMessage send(std::string text, const std::vector<ImageRef>& images = {});

    std::size_t turns() const { return turns_; }
    void persist(const std::filesystem::path& path) const;

private:
    friend class Gateway;
    Session(Gateway* gateway, Role role, std::string label) : gateway_(gateway), role_(role), label_(std::move(label)) {}
    void audit(const ChatMessage& sent, const ChatMessage& reply, const Usage& usage) const;

    Gateway* gateway_;
    Role role_;
    std::string label_;
    std::vector<ChatMessage> memory_;
    std::size_t turns_ = 0;
};

struct GatewayOptions {
    ModelRoles roles;
    std::map<std::string, ModelPrice> pricing;
    LlmSettings settings;
    /// When set, every round trip is appended to `<audit_dir>/<session label>.jsonl`.
    std::optional<std::filesystem::path> audit_dir;
};

/// Role-addressed access to every configured model.
class Gateway {
public:
    explicit Gateway(GatewayOptions options);
    static Gateway from_config(const Config& config, std::optional<std::filesystem::path> audit_dir = {});

    /// Empty memory seeded with the role's system prompt. Throws UnknownRole.
    Session open_session(Role role, std::string label = {});
    Session open_session(Role role, std::string label, std::string system_prompt);
    Session restore_session(const std::filesystem::path& path);

    /// One vector per input. Throws TransportError, EmbeddingError.
    std::vector<Eigen::VectorXf> embed(const std::vector<std::string>& texts);

    UsageMeter& meter() { return meter_; }
    const UsageMeter& meter() const { return meter_; }

    /// Replaces the backend for a role.
    void set_provider(Role role, std::shared_ptr<Provider> provider);
    /// Sleep used between retries; tests install a recorder.
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

    long long cost_of(Role role, const Usage& usage) const;

private:
    friend class Session;
    Provider& provider_for(Role role);
    template <typename Fn>
    auto with_retry(Role role, Fn&& fn) -> decltype(fn());

    GatewayOptions options_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Provider>> by_model_;
    std::map<Role, std::shared_ptr<Provider>> overrides_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
    UsageMeter meter_;
    mutable std::mutex audit_mutex_;
};

/// Extracts the first ```json fenced block (or the whole text if it parses).
/// Throws LlmFormatError.
nlohmann::json extract_json(const std::string& reply);

/// Sends `prompt` and hands the reply's JSON to `accept` (`repaired` is true on
/// the second attempt). A format or JSON error from either step earns one
/// repair turn. Throws LlmFormatError.
void ask_json(Session& session, const std::string& prompt, const std::vector<ImageRef>& images,
              const std::function<void(const nlohmann::json&, bool repaired)>& accept);

}  // namespace ripple::llm
