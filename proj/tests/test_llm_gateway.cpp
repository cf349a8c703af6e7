#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>

#include "npcsh/error.hpp"
#include "npcsh/llm_gateway.hpp"
#include "npcsh/tool_schema.hpp"

using namespace npcsh;

namespace {

std::optional<ErrorKind> kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return std::nullopt;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

// Sets (or clears, when value is nullptr) one environment variable for the
// current scope and restores the previous state on exit.
struct EnvGuard {
    std::string name;
    std::optional<std::string> saved;

    EnvGuard(std::string n, const char* value) : name(std::move(n)) {
        if (const char* old = std::getenv(name.c_str())) saved = old;
        if (value) {
            ::setenv(name.c_str(), value, 1);
        } else {
            ::unsetenv(name.c_str());
        }
    }
    ~EnvGuard() {
        if (saved) {
            ::setenv(name.c_str(), saved->c_str(), 1);
        } else {
            ::unsetenv(name.c_str());
        }
    }
};

ToolSchema sample_schema() {
    ToolSchema schema;
    schema.name = "lookup";
    schema.description = "Look something up.";
    ParamSpec query;
    query.name = "query";
    query.type = TypeTag::String;
    query.required = true;
    query.description = "What to look for.";
    schema.parameters.push_back(query);
    return schema;
}

std::vector<ChatMessage> sample_messages() {
    return {
        ChatMessage::make_system("Be terse."),
        ChatMessage::make_user("What is 2+2?"),
        ChatMessage::make_assistant("Thinking..."),
        ChatMessage::make_tool_result("4\n"),
    };
}

// Loopback chat-completions endpoint driven by per-case handlers.
struct LoopbackServer {
    httplib::Server server;
    int port = -1;
    std::thread thread;

    LoopbackServer() = default;
    ~LoopbackServer() { stop(); }

    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    void stop() {
        server.stop();
        if (thread.joinable()) thread.join();
    }

    std::string base_url(const std::string& path = "/v1") const {
        return "http://127.0.0.1:" + std::to_string(port) + path;
    }
};

std::string ok_payload(const std::string& text) {
    Value body = Value::object();
    body["choices"] = Value::array();
    Value message = Value::object();
    message["role"] = "assistant";
    message["content"] = text;
    Value choice = Value::object();
    choice["message"] = std::move(message);
    body["choices"].push_back(std::move(choice));
    body["usage"] = Value{{"prompt_tokens", 17}, {"completion_tokens", 5}};
    return body.dump();
}

ProviderConfig local_config(const std::string& base_url, const std::string& api_key = "") {
    ProviderConfig config;
    config.id = "local-test";
    config.base_url = base_url;
    config.api_key = api_key;
    config.request_timeout_s = 5.0;
    return config;
}

} // namespace

// ---------------------------------------------------------------------------
// Messages and wire shape
// ---------------------------------------------------------------------------

TEST_CASE("chat message factories tag roles") {
    CHECK(ChatMessage::make_system("s").role == Role::system);
    CHECK(ChatMessage::make_user("u").role == Role::user);
    CHECK(ChatMessage::make_assistant("a").role == Role::assistant);

    ChatMessage result = ChatMessage::make_tool_result("output");
    CHECK(result.role == Role::tool);
    CHECK(result.content == "output");
    REQUIRE(result.tool_result.has_value());
    CHECK(*result.tool_result == "output");

    CHECK(std::string(to_string(Role::system)) == "system");
    CHECK(std::string(to_string(Role::user)) == "user");
    CHECK(std::string(to_string(Role::assistant)) == "assistant");
    CHECK(std::string(to_string(Role::tool)) == "tool");
}

TEST_CASE("build_chat_request serializes messages in order with role tags") {
    Value body = build_chat_request(sample_messages(), {}, "test-model");

    CHECK(body["model"] == "test-model");
    CHECK(body["stream"] == false);
    CHECK_FALSE(body.contains("tools"));

    REQUIRE(body["messages"].is_array());
    REQUIRE(body["messages"].size() == 4);
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == "Be terse.");
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["messages"][1]["content"] == "What is 2+2?");
    CHECK(body["messages"][2]["role"] == "assistant");
    CHECK(body["messages"][3]["role"] == "tool");
    CHECK(body["messages"][3]["content"] == "4\n");
}

TEST_CASE("build_chat_request attaches tool schemas only when present") {
    std::vector<ToolSchema> tools = {sample_schema()};
    Value body = build_chat_request(sample_messages(), tools, "m");

    REQUIRE(body.contains("tools"));
    CHECK(body["tools"] == schemas_to_openai_tools(tools));
    REQUIRE(body["tools"].is_array());
    REQUIRE(body["tools"].size() == 1);
    CHECK(body["tools"][0]["type"] == "function");
    CHECK(body["tools"][0]["function"]["name"] == "lookup");
}

// ---------------------------------------------------------------------------
// Provider resolution
// ---------------------------------------------------------------------------

TEST_CASE("resolve_provider knows the built-in runtimes") {
    EnvGuard clear_base("NPCSH_OLLAMA_BASE_URL", nullptr);
    EnvGuard clear_key("NPCSH_OLLAMA_API_KEY", nullptr);
    EnvGuard clear_native("NPCSH_OLLAMA_NATIVE_TOOLS", nullptr);

    ProviderConfig ollama = resolve_provider("ollama");
    CHECK(ollama.id == "ollama");
    CHECK(ollama.base_url == "http://localhost:11434/v1");
    CHECK(ollama.api_key.empty());
    CHECK(ollama.supports_native_tools);
    CHECK(ollama.request_timeout_s == doctest::Approx(120.0));

    EnvGuard openai_key("OPENAI_API_KEY", "sk-from-env");
    EnvGuard clear_openai_base("NPCSH_OPENAI_BASE_URL", nullptr);
    EnvGuard clear_openai_key("NPCSH_OPENAI_API_KEY", nullptr);
    ProviderConfig openai = resolve_provider("openai");
    CHECK(openai.base_url == "https://api.openai.com/v1");
    CHECK(openai.api_key == "sk-from-env");
    CHECK(openai.supports_native_tools);

    EnvGuard clear_scripted_base("NPCSH_SCRIPTED_BASE_URL", nullptr);
    EnvGuard clear_scripted_native("NPCSH_SCRIPTED_NATIVE_TOOLS", nullptr);
    ProviderConfig scripted = resolve_provider("scripted");
    CHECK(scripted.base_url == "scripted://");
    CHECK_FALSE(scripted.supports_native_tools);
}

TEST_CASE("resolve_provider applies environment overrides") {
    EnvGuard base("NPCSH_OLLAMA_BASE_URL", "http://10.0.0.5:8080/v1");
    EnvGuard key("NPCSH_OLLAMA_API_KEY", "secret");
    EnvGuard native("NPCSH_OLLAMA_NATIVE_TOOLS", "0");

    ProviderConfig config = resolve_provider("ollama");
    CHECK(config.base_url == "http://10.0.0.5:8080/v1");
    CHECK(config.api_key == "secret");
    CHECK_FALSE(config.supports_native_tools);

    SUBCASE("the toggle also enables native tools") {
        EnvGuard on("NPCSH_SCRIPTED_NATIVE_TOOLS", "true");
        CHECK(resolve_provider("scripted").supports_native_tools);
    }
}

TEST_CASE("resolve_provider handles ids outside the built-in table") {
    SUBCASE("an environment base URL is enough") {
        EnvGuard base("NPCSH_GROQ_BASE_URL", "https://api.groq.example/v1");
        EnvGuard key("NPCSH_GROQ_API_KEY", nullptr);
        ProviderConfig config = resolve_provider("groq");
        CHECK(config.id == "groq");
        CHECK(config.base_url == "https://api.groq.example/v1");
        CHECK_FALSE(config.supports_native_tools);
    }
    SUBCASE("no base URL anywhere is an error that names the fix") {
        EnvGuard base("NPCSH_GROQ_BASE_URL", nullptr);
        auto resolve = [] { resolve_provider("groq"); };
        CHECK(kind_of(resolve) == ErrorKind::ProviderError);
        CHECK(message_of(resolve).find("NPCSH_GROQ_BASE_URL") != std::string::npos);
    }
}

// ---------------------------------------------------------------------------
// Scripted client
// ---------------------------------------------------------------------------

TEST_CASE("scripted client replays responses in order and logs every request") {
    ScriptedClient client;
    client.push_text("first");
    ModelResponse second;
    second.text = "second";
    second.native_calls.push_back(Value{{"id", "call_1"}});
    client.push(second);

    CHECK(client.remaining() == 2);

    std::vector<ToolSchema> tools = {sample_schema()};
    ModelResponse a = client.complete(sample_messages(), tools, "model-a");
    CHECK(a.text == "first");
    CHECK(client.remaining() == 1);

    ModelResponse b = client.complete({ChatMessage::make_user("again")}, {}, "model-b");
    CHECK(b.text == "second");
    REQUIRE(b.native_calls.size() == 1);
    CHECK(b.native_calls[0]["id"] == "call_1");
    CHECK(client.remaining() == 0);

    REQUIRE(client.requests().size() == 2);
    const auto& first_request = client.requests()[0];
    CHECK(first_request.model == "model-a");
    REQUIRE(first_request.messages.size() == 4);
    CHECK(first_request.messages[1].content == "What is 2+2?");
    REQUIRE(first_request.tools.size() == 1);
    CHECK(first_request.tools[0].name == "lookup");
    CHECK(client.requests()[1].model == "model-b");
}

TEST_CASE("scripted client exhaustion names the failing request") {
    ScriptedClient client({[] {
        ModelResponse only;
        only.text = "only";
        return only;
    }()});

    CHECK(client.complete({ChatMessage::make_user("one")}, {}, "m").text == "only");

    try {
        client.complete({ChatMessage::make_user("two")}, {}, "m");
        FAIL("expected the script to be exhausted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ScriptExhausted);
        CHECK(std::string(e.what()).find("request #2") != std::string::npos);
    }
    // The failed request still lands in the log.
    CHECK(client.requests().size() == 2);
}

// ---------------------------------------------------------------------------
// HTTP client against a loopback server
// ---------------------------------------------------------------------------

TEST_CASE("http client round-trips an OpenAI-shaped completion") {
    LoopbackServer loop;
    std::string seen_body;
    std::string seen_auth;
    loop.server.Post("/v1/chat/completions",
                     [&](const httplib::Request& req, httplib::Response& res) {
                         seen_body = req.body;
                         seen_auth = req.get_header_value("Authorization");
                         res.set_content(ok_payload("All done."), "application/json");
                     });
    loop.start();

    HttpChatClient client(local_config(loop.base_url(), "sk-local"));
    std::vector<ToolSchema> tools = {sample_schema()};
    ModelResponse response = client.complete(sample_messages(), tools, "test-model");

    CHECK(response.text == "All done.");
    REQUIRE(response.usage.has_value());
    CHECK(response.usage->prompt_tokens == 17);
    CHECK(response.usage->completion_tokens == 5);
    CHECK(response.latency_s > 0.0);
    CHECK(response.native_calls.empty());

    CHECK(seen_auth == "Bearer sk-local");
    // What went over the wire is exactly the documented request shape.
    CHECK(Value::parse(seen_body) == build_chat_request(sample_messages(), tools, "test-model"));
}

TEST_CASE("http client passes native tool calls through verbatim") {
    LoopbackServer loop;
    loop.server.Post("/v1/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         Value call = Value::object();
                         call["id"] = "call_7";
                         call["type"] = "function";
                         call["function"] =
                             Value{{"name", "lookup"}, {"arguments", "{\"query\": \"x\"}"}};
                         Value message = Value::object();
                         message["tool_calls"] = Value::array({call});
                         Value body = Value::object();
                         body["choices"] = Value::array({Value{{"message", message}}});
                         res.set_content(body.dump(), "application/json");
                     });
    loop.start();

    HttpChatClient client(local_config(loop.base_url()));
    ModelResponse response = client.complete({ChatMessage::make_user("go")}, {}, "m");
    CHECK(response.text.empty());
    REQUIRE(response.native_calls.size() == 1);
    CHECK(response.native_calls[0]["id"] == "call_7");
    CHECK(response.native_calls[0]["function"]["name"] == "lookup");
}

TEST_CASE("http client maps provider failures onto distinct error kinds") {
    LoopbackServer loop;
    loop.server.Post("/v1/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.status = 401;
                         res.set_content("{}", "application/json");
                     });
    loop.server.Post("/forbidden/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.status = 403;
                         res.set_content("{}", "application/json");
                     });
    loop.server.Post("/flaky/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.status = 500;
                         res.set_content("backend exploded", "text/plain");
                     });
    loop.server.Post("/soft/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.set_content(R"({"error": {"message": "quota exceeded"}})",
                                         "application/json");
                     });
    loop.server.Post("/garbled/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.set_content("<html>proxy error</html>", "text/html");
                     });
    loop.server.Post("/hollow/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         res.set_content(R"({"choices": []})", "application/json");
                     });
    loop.start();

    auto ask = [&](const std::string& path) {
        return [&, path] {
            HttpChatClient client(local_config(loop.base_url(path)));
            client.complete({ChatMessage::make_user("hi")}, {}, "m");
        };
    };

    CHECK(kind_of(ask("/v1")) == ErrorKind::AuthError);
    CHECK(kind_of(ask("/forbidden")) == ErrorKind::AuthError);

    CHECK(kind_of(ask("/flaky")) == ErrorKind::ProviderError);
    CHECK(message_of(ask("/flaky")).find("HTTP 500") != std::string::npos);

    CHECK(kind_of(ask("/soft")) == ErrorKind::ProviderError);
    CHECK(message_of(ask("/soft")).find("quota exceeded") != std::string::npos);

    CHECK(kind_of(ask("/garbled")) == ErrorKind::ProviderError);
    CHECK(message_of(ask("/garbled")).find("not JSON") != std::string::npos);

    CHECK(kind_of(ask("/hollow")) == ErrorKind::ProviderError);
    CHECK(message_of(ask("/hollow")).find("no choices") != std::string::npos);
}

TEST_CASE("http client reports a slow provider as a timeout") {
    LoopbackServer loop;
    loop.server.Post("/v1/chat/completions",
                     [](const httplib::Request&, httplib::Response& res) {
                         std::this_thread::sleep_for(std::chrono::milliseconds(1500));
                         res.set_content(ok_payload("late"), "application/json");
                     });
    loop.start();

    ProviderConfig config = local_config(loop.base_url());
    config.request_timeout_s = 1.0;
    HttpChatClient client(config);
    auto slow = [&] { client.complete({ChatMessage::make_user("hi")}, {}, "m"); };
    CHECK(kind_of(slow) == ErrorKind::Timeout);
}

TEST_CASE("http client reports an unreachable endpoint") {
    // Bind a port, then release it so nothing is listening there.
    int freed_port;
    {
        LoopbackServer probe;
        probe.start();
        freed_port = probe.port;
    }

    ProviderConfig config =
        local_config("http://127.0.0.1:" + std::to_string(freed_port) + "/v1");
    config.request_timeout_s = 2.0;
    HttpChatClient client(config);
    auto unreachable = [&] { client.complete({ChatMessage::make_user("hi")}, {}, "m"); };
    CHECK(kind_of(unreachable) == ErrorKind::ProviderError);
    CHECK(message_of(unreachable).find("cannot reach") != std::string::npos);
}

TEST_CASE("http client rejects an empty conversation before touching the network") {
    HttpChatClient client(local_config("http://127.0.0.1:1/v1"));
    auto empty = [&] { client.complete({}, {}, "m"); };
    CHECK(kind_of(empty) == ErrorKind::ProviderError);
    CHECK(message_of(empty).find("empty message list") != std::string::npos);
}

TEST_CASE("http client normalizes the base URL path") {
    LoopbackServer loop;
    int hits_v1 = 0;
    int hits_root = 0;
    loop.server.Post("/v1/chat/completions",
                     [&](const httplib::Request&, httplib::Response& res) {
                         ++hits_v1;
                         res.set_content(ok_payload("v1"), "application/json");
                     });
    loop.server.Post("/chat/completions",
                     [&](const httplib::Request&, httplib::Response& res) {
                         ++hits_root;
                         res.set_content(ok_payload("root"), "application/json");
                     });
    loop.start();

    SUBCASE("a trailing slash is ignored") {
        HttpChatClient client(local_config(loop.base_url() + "/"));
        CHECK(client.complete({ChatMessage::make_user("hi")}, {}, "m").text == "v1");
        CHECK(hits_v1 == 1);
    }
    SUBCASE("a bare host posts at the top level") {
        HttpChatClient client(local_config(loop.base_url("")));
        CHECK(client.complete({ChatMessage::make_user("hi")}, {}, "m").text == "root");
        CHECK(hits_root == 1);
    }
}
