#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "npcsh/tool_schema.hpp"
#include "npcsh/value.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

enum class Role { system, user, assistant, tool };

const char* to_string(Role role);

struct ChatMessage {
    Role role = Role::user;
    std::string content;
    std::optional<ToolCall> tool_call;     // assistant message that called a tool
    std::optional<std::string> tool_result;  // tool role: the call's output

    static ChatMessage make_system(std::string text);
    static ChatMessage make_user(std::string text);
    static ChatMessage make_assistant(std::string text);
    static ChatMessage make_tool_result(std::string text);
};

struct TokenUsage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
};

struct ModelResponse {
    std::string text;
    std::vector<Value> native_calls;  // provider tool-call payloads, verbatim
    std::optional<TokenUsage> usage;
    double latency_s = 0.0;
};

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

struct ProviderConfig {
    std::string id;
    std::string base_url;              // e.g. http://localhost:11434/v1
    std::string api_key;               // empty = unauthenticated local runtime
    bool supports_native_tools = false;
    double request_timeout_s = 120.0;
};

// Resolves a provider id against the built-in table and environment
// overrides (NPCSH_<ID>_BASE_URL, NPCSH_<ID>_API_KEY, NPCSH_<ID>_NATIVE_TOOLS).
// Unknown ids get a bare config pointing at NPCSH_<ID>_BASE_URL.
ProviderConfig resolve_provider(const std::string& id);

// ---------------------------------------------------------------------------
// Clients
// ---------------------------------------------------------------------------

class ChatClient {
public:
    virtual ~ChatClient() = default;

    // One chat-completion round trip. When the provider does not support
    // native tool schemas, the caller is expected to have rendered `tools`
    // into the system prompt already and to pass an empty list here.
    virtual ModelResponse complete(const std::vector<ChatMessage>& messages,
                                   const std::vector<ToolSchema>& tools,
                                   const std::string& model) = 0;
};

// OpenAI-compatible chat-completions client (one codepath covers hosted
// providers and local runtimes alike).
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(ProviderConfig config);
    ModelResponse complete(const std::vector<ChatMessage>& messages,
                           const std::vector<ToolSchema>& tools,
                           const std::string& model) override;

    const ProviderConfig& config() const { return config_; }

private:
    ProviderConfig config_;
};

// Deterministic provider for tests and benchmark dry-runs: returns scripted
// responses in order, then throws ScriptExhausted. Thread-safe cursor.
class ScriptedClient : public ChatClient {
public:
    struct Request {
        std::vector<ChatMessage> messages;
        std::vector<ToolSchema> tools;
        std::string model;
    };

    ScriptedClient() = default;
    explicit ScriptedClient(std::vector<ModelResponse> script);

    void push(ModelResponse response);
    void push_text(std::string text);

    ModelResponse complete(const std::vector<ChatMessage>& messages,
                           const std::vector<ToolSchema>& tools,
                           const std::string& model) override;

    const std::vector<Request>& requests() const { return requests_; }
    size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::vector<ModelResponse> script_;
    std::vector<Request> requests_;
    size_t cursor_ = 0;
};

// Serializes messages/tools into the OpenAI-compatible request body.
// Exposed so tests can pin the wire shape without a server.
Value build_chat_request(const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSchema>& tools, const std::string& model);

} // namespace npcsh
