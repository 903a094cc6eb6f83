#include "mmra/llm_client.hpp"

#include "mmra/common.hpp"
#include "mmra/log.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>
#include <cstdlib>

namespace mmra {

std::string_view to_string(ReplySource s) { return s == ReplySource::llm ? "llm" : "fallback"; }

LlmEndpoint LlmEndpoint::from_env() {
    LlmEndpoint e;
    if (const char* url = std::getenv("MMRA_LLM_URL")) e.url = url;
    if (const char* model = std::getenv("MMRA_LLM_MODEL"); model && *model) e.model = model;
    if (const char* t = std::getenv("MMRA_LLM_TIMEOUT_S"); t && *t) {
        char* end = nullptr;
        const double v = std::strtod(t, &end);
        if (end == t || *end != '\0' || !(v > 0) || !std::isfinite(v))
            throw ConfigError(std::string("MMRA_LLM_TIMEOUT_S must be a positive number, got '") + t + "'");
        e.timeout_s = v;
    }
    return e;
}

namespace {

struct SplitUrl {
    std::string base;
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto start = scheme == std::string::npos ? 0 : scheme + 3;
    const auto slash = url.find('/', start);
    SplitUrl out;
    out.base = slash == std::string::npos ? url : url.substr(0, slash);
    out.path = slash == std::string::npos ? "/v1/chat/completions" : url.substr(slash);
    return out;
}

enum class Outcome { ok, transport, malformed };

Outcome attempt(httplib::Client& client, const std::string& path, const std::string& body, std::string& text) {
    auto res = client.Post(path, body, "application/json");
    if (!res) {
        log::warn("llm endpoint: " + httplib::to_string(res.error()));
        return Outcome::transport;
    }
    if (res->status != 200) {
        log::warn("llm endpoint: HTTP status " + std::to_string(res->status));
        return Outcome::malformed;
    }
    try {
        const auto doc = nlohmann::json::parse(res->body);
        const auto& content = doc.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) return Outcome::malformed;
        text = content.get<std::string>();
        return Outcome::ok;
    } catch (const nlohmann::json::exception& e) {
        log::warn(std::string("llm endpoint: malformed reply: ") + e.what());
        return Outcome::malformed;
    }
}

}  // namespace

ChatReply llm_chat(const LlmEndpoint& endpoint, const std::string& system_prompt, const std::string& user_prompt,
                   const std::function<std::string()>& fallback, const ReplyValidator& validate) {
    if (!endpoint.configured()) return {fallback(), ReplySource::fallback};

    const auto url = split_url(endpoint.url);
    nlohmann::json request = {
        {"model", endpoint.model},
        {"messages", nlohmann::json::array({{{"role", "system"}, {"content", system_prompt}},
                                            {{"role", "user"}, {"content", user_prompt}}})},
        {"temperature", endpoint.temperature},
    };
    const std::string body = request.dump();

    try {
        httplib::Client client(url.base);
        const auto secs = static_cast<time_t>(endpoint.timeout_s);
        const auto usecs = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        for (int tries = 0; tries < 2; ++tries) {
            std::string text;
            const auto outcome = attempt(client, url.path, body, text);
            if (outcome == Outcome::transport) break;
            if (outcome == Outcome::ok) {
                if (!validate || validate(text)) return {std::move(text), ReplySource::llm};
                log::warn("llm endpoint: reply failed validation");
            }
        }
    } catch (const std::exception& e) {
        log::warn(std::string("llm endpoint: ") + e.what());
    }
    return {fallback(), ReplySource::fallback};
}

}  // namespace mmra
