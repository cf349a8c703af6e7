#include "npcsh/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>

#include <httplib.h>

#include "npcsh/error.hpp"

namespace npcsh {

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

const char* to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "user";
}

ChatMessage ChatMessage::make_system(std::string text) {
    return {Role::system, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::make_user(std::string text) {
    return {Role::user, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::make_assistant(std::string text) {
    return {Role::assistant, std::move(text), std::nullopt, std::nullopt};
}
ChatMessage ChatMessage::make_tool_result(std::string text) {
    ChatMessage msg;
    msg.role = Role::tool;
    msg.content = text;
    msg.tool_result = std::move(text);
    return msg;
}

// ---------------------------------------------------------------------------
// Provider table
// ---------------------------------------------------------------------------

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

std::string env_or(const std::string& name, const std::string& fallback) {
    const char* value = std::getenv(name.c_str());
    return (value && *value) ? value : fallback;
}

} // namespace

ProviderConfig resolve_provider(const std::string& id) {
    ProviderConfig config;
    config.id = id;
    if (id == "ollama") {
        config.base_url = "http://localhost:11434/v1";
        config.supports_native_tools = true;
    } else if (id == "openai") {
        config.base_url = "https://api.openai.com/v1";
        config.api_key = env_or("OPENAI_API_KEY", "");
        config.supports_native_tools = true;
    } else if (id == "scripted") {
        config.base_url = "scripted://";
    }
    const std::string prefix = "NPCSH_" + upper(id) + "_";
    config.base_url = env_or(prefix + "BASE_URL", config.base_url);
    config.api_key = env_or(prefix + "API_KEY", config.api_key);
    std::string native = env_or(prefix + "NATIVE_TOOLS", "");
    if (native == "1" || native == "true") config.supports_native_tools = true;
    if (native == "0" || native == "false") config.supports_native_tools = false;
    if (config.base_url.empty()) {
        throw Error(ErrorKind::ProviderError,
                    "provider '" + id + "' has no base URL; set " + prefix + "BASE_URL");
    }
    return config;
}

// ---------------------------------------------------------------------------
// Request/response wire shape
// ---------------------------------------------------------------------------

Value build_chat_request(const std::vector<ChatMessage>& messages,
                         const std::vector<ToolSchema>& tools, const std::string& model) {
    Value body = Value::object();
    body["model"] = model;
    Value list = Value::array();
    for (const auto& msg : messages) {
        Value m = Value::object();
        m["role"] = to_string(msg.role);
        m["content"] = msg.content;
        list.push_back(std::move(m));
    }
    body["messages"] = std::move(list);
    if (!tools.empty()) body["tools"] = schemas_to_openai_tools(tools);
    body["stream"] = false;
    return body;
}

namespace {

ModelResponse parse_chat_response(const std::string& body) {
    Value json = Value::parse(body, nullptr, false);
    if (json.is_discarded()) {
        throw Error(ErrorKind::ProviderError,
                    "response is not JSON: " + body.substr(0, 200));
    }
    if (json.contains("error")) {
        const Value& err = json["error"];
        std::string detail = err.is_object() && err.contains("message")
                                 ? err["message"].get<std::string>()
                                 : err.dump();
        throw Error(ErrorKind::ProviderError, detail);
    }
    if (!json.contains("choices") || !json["choices"].is_array() ||
        json["choices"].empty()) {
        throw Error(ErrorKind::ProviderError,
                    "response has no choices: " + body.substr(0, 200));
    }
    const Value& message = json["choices"][0].contains("message")
                               ? json["choices"][0]["message"]
                               : Value::object();
    ModelResponse response;
    if (message.contains("content") && message["content"].is_string()) {
        response.text = message["content"].get<std::string>();
    }
    if (message.contains("tool_calls") && message["tool_calls"].is_array()) {
        for (const auto& call : message["tool_calls"]) response.native_calls.push_back(call);
    }
    if (json.contains("usage") && json["usage"].is_object()) {
        TokenUsage usage;
        usage.prompt_tokens = json["usage"].value("prompt_tokens", 0LL);
        usage.completion_tokens = json["usage"].value("completion_tokens", 0LL);
        response.usage = usage;
    }
    return response;
}

} // namespace

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

HttpChatClient::HttpChatClient(ProviderConfig config) : config_(std::move(config)) {}

ModelResponse HttpChatClient::complete(const std::vector<ChatMessage>& messages,
                                       const std::vector<ToolSchema>& tools,
                                       const std::string& model) {
    if (messages.empty()) {
        throw Error(ErrorKind::ProviderError, "empty message list");
    }

    // Split base_url into host part and path prefix.
    std::string url = config_.base_url;
    std::string prefix;
    size_t scheme = url.find("://");
    size_t path_start = (scheme == std::string::npos) ? url.find('/')
                                                      : url.find('/', scheme + 3);
    if (path_start != std::string::npos) {
        prefix = url.substr(path_start);
        url = url.substr(0, path_start);
        while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    }

    httplib::Client client(url);
    client.set_connection_timeout(static_cast<time_t>(config_.request_timeout_s), 0);
    client.set_read_timeout(static_cast<time_t>(config_.request_timeout_s), 0);
    client.set_write_timeout(static_cast<time_t>(config_.request_timeout_s), 0);

    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    Value body = build_chat_request(messages, tools, model);
    auto started = std::chrono::steady_clock::now();
    httplib::Result result = client.Post(prefix + "/chat/completions", headers,
                                         body.dump(), "application/json");
    double latency =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (!result) {
        auto err = result.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
            err == httplib::Error::Write) {
            throw Error(ErrorKind::Timeout,
                        "no response from " + config_.base_url + " within " +
                            std::to_string(config_.request_timeout_s) + "s");
        }
        throw Error(ErrorKind::ProviderError,
                    "cannot reach " + config_.base_url + ": " + httplib::to_string(err));
    }
    if (result->status == 401 || result->status == 403) {
        throw Error(ErrorKind::AuthError, "provider '" + config_.id + "' rejected the key (" +
                                              std::to_string(result->status) + ")");
    }
    if (result->status < 200 || result->status >= 300) {
        throw Error(ErrorKind::ProviderError,
                    "HTTP " + std::to_string(result->status) + ": " +
                        result->body.substr(0, 300));
    }

    ModelResponse response = parse_chat_response(result->body);
    response.latency_s = latency;
    return response;
}

// ---------------------------------------------------------------------------
// Scripted client
// ---------------------------------------------------------------------------

ScriptedClient::ScriptedClient(std::vector<ModelResponse> script)
    : script_(std::move(script)) {}

void ScriptedClient::push(ModelResponse response) {
    std::lock_guard lock(mutex_);
    script_.push_back(std::move(response));
}

void ScriptedClient::push_text(std::string text) {
    ModelResponse response;
    response.text = std::move(text);
    push(std::move(response));
}

ModelResponse ScriptedClient::complete(const std::vector<ChatMessage>& messages,
                                       const std::vector<ToolSchema>& tools,
                                       const std::string& model) {
    std::lock_guard lock(mutex_);
    requests_.push_back({messages, tools, model});
    if (cursor_ >= script_.size()) {
        throw Error(ErrorKind::ScriptExhausted,
                    "scripted provider has no reply for request #" +
                        std::to_string(requests_.size()));
    }
    return script_[cursor_++];
}

size_t ScriptedClient::remaining() const {
    std::lock_guard lock(mutex_);
    return script_.size() - cursor_;
}

} // namespace npcsh
