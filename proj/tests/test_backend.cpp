// SPDX-License-Identifier: Apache-2.0
#include <reactod/backend.hpp>
#include <reactod/engine.hpp>
#include <reactod/errors.hpp>

#include "simulated_agent.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdint>
#include <sstream>
#include <thread>

using namespace reactod;
using namespace reactod::testing;
using json = nlohmann::json;

namespace
{
int whitespace_words(std::string const& s)
{
    auto in = std::istringstream(s);
    auto word = std::string {};
    auto n = 0;
    while (in >> word)
        ++n;
    return n;
}

std::string fnv_hex(std::string const& data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto const c: data)
    {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CompletionRequest sample_request()
{
    auto r = CompletionRequest {};
    r.messages = { Message { .role = Role::System, .content = "sys", .tool_calls = {}, .tool_call_id = {} },
                   Message { .role = Role::User, .content = "User utterance: hi", .tool_calls = {}, .tool_call_id = {} } };
    r.tool_signatures = nullptr;
    return r;
}

/// Local chat-completions endpoint answering from a queue of (status, body).
class FakeEndpoint
{
  public:
    explicit FakeEndpoint(std::vector<std::pair<int, std::string>> replies): _replies(std::move(replies))
    {
        _server.Post("/v1/chat/completions", [this](httplib::Request const& req, httplib::Response& res) {
            bodies.push_back(req.body);
            authorization = req.get_header_value("Authorization");
            auto const i = _next++;
            auto const& [status, body] = _replies.at(std::min(i, _replies.size() - 1));
            res.status = status;
            res.set_content(body, "application/json");
        });
        _port = _server.bind_to_any_port("127.0.0.1");
        _thread = std::thread([this] { _server.listen_after_bind(); });
        _server.wait_until_ready();
    }

    ~FakeEndpoint()
    {
        _server.stop();
        _thread.join();
    }

    [[nodiscard]] std::string base() const { return "http://127.0.0.1:" + std::to_string(_port) + "/v1"; }

    std::vector<std::string> bodies;
    std::string authorization;

  private:
    httplib::Server _server;
    std::vector<std::pair<int, std::string>> _replies;
    std::size_t _next = 0;
    int _port = 0;
    std::thread _thread;
};

std::string completion_body(std::string const& content, std::optional<int> tokens = 7)
{
    auto body = json { { "choices", json::array({ { { "message", { { "role", "assistant" }, { "content", content } } } } }) } };
    if (tokens)
        body["usage"] = { { "completion_tokens", *tokens } };
    return body.dump();
}
} // namespace

TEST_SUITE("backend")
{
    TEST_CASE("token estimate matches a whitespace-split oracle")
    {
        auto const samples = std::vector<std::string> {
            "",
            " ",
            "one",
            "two words",
            "  leading and trailing  ",
            "tabs\tand\nnewlines\r\nmixed",
            "Thought: x\nAction: intent_classify\nAction Input: {\"intent\": \"taxi\"}",
            "punctuation, does; not: split!",
            "a  b   c    d",
            "\n\n\n",
            "unicode café naïve",
            "{\"extractions\": []}",
            "17:30 09:15",
            "x\ty\vz\fw",
            "the gandhi",
            "gandhi the",
            "trailing newline\n",
            "   ",
            "multi\n\nparagraph\n\ntext",
            "Thought: The arrival time has to be HH:MM; the train leaves at 17:30.",
        };
        REQUIRE(samples.size() == 20);
        for (auto const& s: samples)
        {
            CAPTURE(s);
            CHECK(estimate_output_tokens(s) == whitespace_words(s));
        }
    }

    TEST_CASE("fingerprint is FNV-1a of the canonical request")
    {
        CHECK(fnv_hex("") == "cbf29ce484222325");
        CHECK(fnv_hex("a") == "af63dc4c8601ec8c");
        auto const request = sample_request();
        CHECK(request_fingerprint(request) == fnv_hex(request_to_json(request).dump()));
        CHECK(request_fingerprint(request).size() == 16);

        auto changed = request;
        changed.temperature = 0.5;
        CHECK(request_fingerprint(changed) != request_fingerprint(request));
        changed = request;
        changed.messages[1].content += "!";
        CHECK(request_fingerprint(changed) != request_fingerprint(request));
    }

    TEST_CASE("fixture format round-trips")
    {
        auto entries = std::vector<FixtureEntry> {
            { .fingerprint = "", .response_text = "Thought: a\nAction: b\nAction Input: {}", .native_calls = {}, .output_tokens = 5 },
            { .fingerprint = "0123456789abcdef",
              .response_text = "",
              .native_calls = std::vector { NativeCall { .id = "c", .name = "slot_resolve", .arguments = { { "extractions", json::array() } } } },
              .output_tokens = {} },
        };
        auto const text = serialize_fixture(entries);
        auto const back = parse_fixture(text);
        REQUIRE(back.size() == 2);
        CHECK(serialize_fixture(back) == text);
        CHECK(back[1].native_calls->front() == entries[1].native_calls->front());
        CHECK_FALSE(back[1].output_tokens);

        CHECK_THROWS_AS(parse_fixture("{\"fingerprint\": \"\"}"), ParseError);
        CHECK_THROWS_WITH_AS(parse_fixture("{\"response_text\": \"x\"}\n{broken"), doctest::Contains("fixture line 2"), ParseError);
        CHECK_THROWS_AS(load_fixture_file("/nonexistent/fixture.jsonl"), ParseError);
    }

    TEST_CASE("scripted backend prefers fingerprints, then positions")
    {
        auto const request = sample_request();
        auto other = request;
        other.messages[1].content = "User utterance: bye";
        auto backend = ScriptedBackend({
            { .fingerprint = "", .response_text = "positional", .native_calls = {}, .output_tokens = {} },
            { .fingerprint = request_fingerprint(request), .response_text = "keyed", .native_calls = {}, .output_tokens = 3 },
        });
        auto const first = backend.complete(request);
        CHECK(first.text == "keyed");
        CHECK(first.output_tokens == 3);
        CHECK_FALSE(first.tokens_estimated);
        auto const second = backend.complete(other);
        CHECK(second.text == "positional");
        CHECK(second.tokens_estimated);
        CHECK(second.output_tokens == 1);
        CHECK(backend.remaining() == 0);
        CHECK_THROWS_AS(backend.complete(request), ScriptExhausted);
    }

    TEST_CASE("record and replay reproduce a session")
    {
        auto const schema = multiwoz_schema();
        auto const scenarios = correction_scenarios();
        auto agent = SimulatedAgent(behaviours(scenarios));
        auto recorder = RecordingBackend(agent);
        auto config = EngineConfig {};
        auto live = std::vector<DialogueResult> {};
        for (auto const& s: scenarios)
            live.push_back(run_dialogue(gold_turns(s), schema, recorder, config));

        auto const fixture = parse_fixture(serialize_fixture(record_and_replay(recorder)));
        auto replay = ScriptedBackend(fixture);
        for (auto i = std::size_t { 0 }; i < scenarios.size(); ++i)
        {
            auto const again = run_dialogue(gold_turns(scenarios[i]), schema, replay, config);
            CHECK(again.predicted == live[i].predicted);
            for (auto t = std::size_t { 0 }; t < again.turns.size(); ++t)
            {
                CHECK(again.turns[t].llm_calls == live[i].turns[t].llm_calls);
                CHECK(again.turns[t].output_tokens == live[i].turns[t].output_tokens);
            }
        }
        CHECK(replay.remaining() == 0);
    }

    TEST_CASE("payload pins temperature and carries tools on the native path")
    {
        auto backend = HttpBackend(HttpBackendConfig { .api_base = "http://localhost:1/v1", .api_key = "k", .model = "m", .timeout = std::chrono::seconds(1) });
        auto request = sample_request();
        auto payload = backend.build_payload(request);
        CHECK(payload["temperature"] == 0.0);
        CHECK(payload["model"] == "m");
        CHECK(payload["messages"].size() == 2);
        CHECK_FALSE(payload.contains("tools"));

        request.tool_signatures = tool_signatures();
        request.messages.push_back(Message { .role = Role::Assistant,
                                             .content = "",
                                             .tool_calls = { NativeCall { .id = "c0", .name = "intent_classify", .arguments = { { "intent", "taxi" } } } },
                                             .tool_call_id = {} });
        request.messages.push_back(Message { .role = Role::Tool, .content = "ok", .tool_calls = {}, .tool_call_id = "c0" });
        payload = backend.build_payload(request);
        CHECK(payload["tools"].size() == 3);
        CHECK(payload["messages"][2]["tool_calls"][0]["function"]["arguments"] == "{\"intent\":\"taxi\"}");
        CHECK(payload["messages"][2]["content"].is_null());
        CHECK(payload["messages"][3]["tool_call_id"] == "c0");
    }

    TEST_CASE("chat completion bodies")
    {
        auto const plain = parse_chat_completion(completion_body("Thought: x"));
        CHECK(plain.text == "Thought: x");
        CHECK(plain.output_tokens == 7);
        CHECK_FALSE(plain.tokens_estimated);

        auto const estimated = parse_chat_completion(completion_body("three word answer", std::nullopt));
        CHECK(estimated.output_tokens == 3);
        CHECK(estimated.tokens_estimated);

        auto const native = parse_chat_completion(R"({"choices": [{"message": {"content": null, "tool_calls": [
            {"id": "t1", "type": "function", "function": {"name": "intent_classify", "arguments": "{\"intent\": \"hotel\"}"}}]}}]})");
        REQUIRE(native.native_calls);
        CHECK(native.native_calls->front().arguments == json { { "intent", "hotel" } });
        CHECK(native.native_calls->front().id == "t1");

        CHECK_THROWS_AS(parse_chat_completion("not json"), ContractError);
        CHECK_THROWS_AS(parse_chat_completion(R"({"choices": []})"), ContractError);
        CHECK_THROWS_AS(parse_chat_completion(R"({"error": "x"})"), ContractError);
    }

    TEST_CASE("HTTP transport errors are retried by the engine")
    {
        auto const answer = "Thought: thanks\nAction: intent_classify\nAction Input: {\"intent\": \"fallback\"}";
        auto endpoint = FakeEndpoint({ { 503, "{}" }, { 429, "{}" }, { 200, completion_body(answer) } });
        auto backend = HttpBackend(HttpBackendConfig { .api_base = endpoint.base(), .api_key = "secret", .model = "m", .timeout = std::chrono::seconds(5) });
        auto config = EngineConfig {};
        config.retry_backoff = std::chrono::milliseconds(1);
        auto ctx = TurnContext {};
        ctx.user_utterance = "thanks";
        auto const outcome = run_turn(ctx, multiwoz_schema(), backend, config);
        CHECK_FALSE(outcome.degraded);
        CHECK(outcome.intent == "fallback");
        CHECK(outcome.llm_calls == 1);
        CHECK(endpoint.bodies.size() == 3);
        CHECK(endpoint.authorization == "Bearer secret");
        CHECK(json::parse(endpoint.bodies.front())["temperature"] == 0.0);
    }

    TEST_CASE("HTTP failures map onto the error taxonomy")
    {
        {
            auto endpoint = FakeEndpoint({ { 400, "{\"error\": \"bad\"}" } });
            auto backend = HttpBackend(HttpBackendConfig { .api_base = endpoint.base(), .api_key = "", .model = "m", .timeout = std::chrono::seconds(5) });
            CHECK_THROWS_AS(backend.complete(sample_request()), ContractError);
            CHECK(endpoint.authorization.empty());
        }
        {
            auto endpoint = FakeEndpoint({ { 500, "{}" } });
            auto backend = HttpBackend(HttpBackendConfig { .api_base = endpoint.base(), .api_key = "", .model = "m", .timeout = std::chrono::seconds(5) });
            CHECK_THROWS_AS(backend.complete(sample_request()), TransportError);
        }
        // Nothing listens on port 9 locally.
        auto backend = HttpBackend(HttpBackendConfig { .api_base = "http://127.0.0.1:9/v1", .api_key = "", .model = "m", .timeout = std::chrono::seconds(2) });
        CHECK_THROWS_AS(backend.complete(sample_request()), TransportError);
    }
}
