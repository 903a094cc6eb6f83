#ifndef MMRA_LLM_CLIENT_HPP
#define MMRA_LLM_CLIENT_HPP

// Blocking chat-completions client with a deterministic fallback.
//
// Request:  POST <url>  {"model": ..., "messages": [{"role", "content"}...], "temperature": ...}
// Response: {"choices": [{"message": {"content": "..."}}]}

#include <functional>
#include <string>
#include <string_view>

namespace mmra {

struct LlmEndpoint {
    std::string url;  // http://host:port/path; empty disables the endpoint
    std::string model = "phi3";
    double timeout_s = 30.0;
    double temperature = 0.0;

    bool configured() const { return !url.empty(); }

    /// Reads MMRA_LLM_URL, MMRA_LLM_MODEL and MMRA_LLM_TIMEOUT_S on top of
    /// the defaults.
    static LlmEndpoint from_env();
};

enum class ReplySource { llm, fallback };
std::string_view to_string(ReplySource s);

struct ChatReply {
    std::string text;
    ReplySource source = ReplySource::fallback;
};

using ReplyValidator = std::function<bool(const std::string&)>;

/// Sends one chat request. A timeout or transport failure goes straight to
/// `fallback`; a malformed reply (bad status, bad JSON, no content, or one
/// rejected by `validate`) is retried once before falling back. With an
/// unconfigured endpoint the fallback answers directly.
ChatReply llm_chat(const LlmEndpoint& endpoint, const std::string& system_prompt, const std::string& user_prompt,
                   const std::function<std::string()>& fallback, const ReplyValidator& validate = {});

}  // namespace mmra

#endif
