#include "ripple/error.hpp"
#include "ripple/hash.hpp"
#include "ripple/llm.hpp"

#include <httplib.h>

#include <cstdlib>

namespace ripple::llm {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path below the origin, without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    if (url.empty()) throw TransportError("no endpoint configured", false);
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("endpoint '" + url + "' has no scheme", false);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_start);
    e.prefix = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    return e;
}

bool retryable_status(int status) { return status == 408 || status == 409 || status == 425 || status == 429 || status >= 500; }

json post(const ModelRole& model, const std::string& path, const json& body, int timeout_s) {
    const Endpoint ep = split_endpoint(model.endpoint);
    httplib::Client client(ep.origin);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_write_timeout(timeout_s, 0);
    httplib::Headers headers;
    if (!model.api_key_env.empty()) {
        if (const char* key = std::getenv(model.api_key_env.c_str()))
            headers.emplace("Authorization", std::string("Bearer ") + key);
        else
            throw TransportError("environment variable " + model.api_key_env + " is not set", false);
    }
    const auto res = client.Post(ep.prefix + path, headers, body.dump(), "application/json");
    if (!res) throw TransportError("request to " + model.endpoint + path + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw TransportError("HTTP " + std::to_string(res->status) + " from " + model.endpoint + path + ": " +
                                 res->body.substr(0, 300),
                             retryable_status(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw TransportError(std::string("unparseable response body: ") + e.what());
    }
}

json content_of(const ChatMessage& m) {
    if (m.parts.size() == 1 && !m.parts[0].is_image()) return m.parts[0].text;
    json parts = json::array();
    for (const auto& p : m.parts) {
        if (p.image) {
            const std::string bytes = read_file(p.image->path);
            const std::string b64 = base64_encode(
                std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
            parts.push_back({{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + b64}}}});
        } else {
            parts.push_back({{"type", "text"}, {"text", p.text}});
        }
    }
    return parts;
}

}  // namespace

Completion HttpProvider::complete(const ModelRole& model, const std::vector<ChatMessage>& memory) {
    json messages = json::array();
    long images = 0;
    for (const auto& m : memory) {
        const char* role = m.speaker == Speaker::system ? "system" : m.speaker == Speaker::user ? "user" : "assistant";
        messages.push_back({{"role", role}, {"content", content_of(m)}});
        images += static_cast<long>(m.images().size());
    }
    const json body = {{"model", model.model}, {"messages", messages}};
    const json res = post(model, "/chat/completions", body, timeout_s_);

    Completion c;
    try {
        const json& choice = res.at("choices").at(0);
        const json& msg = choice.at("message");
        if (msg.contains("refusal") && msg["refusal"].is_string()) throw ProviderRefusal(msg["refusal"].get<std::string>());
        if (choice.value("finish_reason", std::string{}) == "content_filter")
            throw ProviderRefusal("response withheld by the provider's content filter");
        c.text = msg.at("content").is_string() ? msg["content"].get<std::string>() : std::string{};
        if (res.contains("usage")) {
            c.usage.input_tokens = res["usage"].value("prompt_tokens", 0L);
            c.usage.output_tokens = res["usage"].value("completion_tokens", 0L);
        }
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected chat completion shape: ") + e.what());
    }
    c.usage.image_count = images;
    return c;
}

std::vector<Eigen::VectorXf> HttpProvider::embed(const ModelRole& model, const std::vector<std::string>& texts,
                                                 Usage& usage) {
    const json res = post(model, "/embeddings", {{"model", model.model}, {"input", texts}}, timeout_s_);
    std::vector<Eigen::VectorXf> out(texts.size());
    try {
        for (const auto& item : res.at("data")) {
            const auto idx = item.value("index", std::size_t{0});
            if (idx >= out.size()) throw EmbeddingError("embedding index out of range");
            const auto values = item.at("embedding").get<std::vector<float>>();
            out[idx] = Eigen::Map<const Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(values.size()));
        }
        if (res.contains("usage")) usage.input_tokens += res["usage"].value("prompt_tokens", 0L);
    } catch (const json::exception& e) {
        throw EmbeddingError(std::string("unexpected embedding response shape: ") + e.what());
    }
    return out;
}

}  // namespace ripple::llm
