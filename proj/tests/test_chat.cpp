// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "factcheck/chat.hpp"
#include "factcheck/util.hpp"
#include "factcheck/wire.hpp"

using namespace factcheck;

namespace {

CompletionRequest basic_request(std::vector<ChatMessage> messages) {
    CompletionRequest req;
    req.model_id = "test-model";
    req.messages = std::move(messages);
    return req;
}

} // namespace

TEST_CASE("truncate_for_model leaves short text unchanged") {
    CHECK(truncate_for_model("abc", 2000) == "abc");
    CHECK(truncate_for_model("", 2000) == "");
}

TEST_CASE("truncate_for_model caps oversized text at exactly the limit") {
    std::string text(2500, 'x');
    std::string out = truncate_for_model(text, 2000);
    CHECK(out.size() == 2000);
    CHECK(out.substr(out.size() - 17) == " [MAXIMUM LENGTH]");
    CHECK(out.substr(0, 1983) == text.substr(0, 1983));
}

TEST_CASE("truncate_for_model rejects caps that cannot hold the marker") {
    CHECK_THROWS_AS(truncate_for_model("abcdef", 17), ChatError);
    CHECK_THROWS_AS(truncate_for_model("abcdef", 5), ChatError);
    CHECK_NOTHROW(truncate_for_model("abcdef", 18));
}

TEST_CASE("truncated length is min(len, cap) over random strings") {
    std::mt19937 rng(20240131);
    const std::size_t cap = 40;
    const char* alphabet[] = {"a", "Z", " ", "\xC3\xA9", "\xE4\xB8\xAD", "!", "0"};
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t len = rng() % (4 * cap);
        std::string text;
        for (std::size_t i = 0; i < len; ++i) text += alphabet[rng() % 7];
        std::string out = truncate_for_model(text, cap);
        CHECK(utf8::length(out) == std::min(utf8::length(text), cap));
        // Idempotence: a second pass is the identity.
        CHECK(truncate_for_model(out, cap) == out);
    }
}

TEST_CASE("scripted backend replays in order and rejects overruns") {
    auto backend = scripted_backend({ChatMessage::assistant("true")});
    auto req = basic_request({ChatMessage::system("s"), ChatMessage::user("u")});

    ChatMessage reply = complete(req, *backend);
    CHECK(reply.role == Role::Assistant);
    CHECK(reply.content == "true");
    REQUIRE_THROWS_MATCHES(
        complete(req, *backend), ChatError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("exhausted")));
}

TEST_CASE("empty scripts are rejected") {
    CHECK_THROWS_AS(scripted_backend({}), ChatError);
}

TEST_CASE("fresh sessions restart the script") {
    auto backend = scripted_backend({ChatMessage::assistant("one"), ChatMessage::assistant("two")});
    auto req = basic_request({ChatMessage::system("s"), ChatMessage::user("u")});

    auto a = backend->fresh_session();
    auto b = backend->fresh_session();
    CHECK(complete(req, *a).content == "one");
    CHECK(complete(req, *a).content == "two");
    CHECK(complete(req, *b).content == "one");
    CHECK(complete(req, *b).content == "two");
}

TEST_CASE("serialized requests always carry temperature 0") {
    auto req = basic_request({ChatMessage::system("sys"), ChatMessage::user("hello")});
    req.temperature = 0.7; // caller input is ignored on the wire
    auto j = wire_request_json(req);
    CHECK(j.at("temperature").get<double>() == 0.0);
    CHECK(j.at("model") == "test-model");
    CHECK(j.at("messages").size() == 2);
}

TEST_CASE("requests must start with exactly one system message") {
    auto backend = scripted_backend({ChatMessage::assistant("x"), ChatMessage::assistant("x")});
    CHECK_THROWS_AS(complete(basic_request({ChatMessage::user("u")}), *backend), ChatError);
    CHECK_THROWS_AS(complete(basic_request({ChatMessage::system("a"), ChatMessage::system("b")}),
                             *backend),
                    ChatError);
}

TEST_CASE("complete() rejects untruncated non-system content") {
    auto backend = scripted_backend({ChatMessage::assistant("x")});
    auto req = basic_request({ChatMessage::system("s"), ChatMessage::user(std::string(2001, 'u'))});
    CHECK_THROWS_AS(complete(req, *backend), ChatError);
    // System prompts are exempt from the cap.
    auto req2 = basic_request({ChatMessage::system(std::string(5000, 's')), ChatMessage::user("u")});
    CHECK_NOTHROW(complete(req2, *backend));
}

TEST_CASE("tool specs serialize as JSON-schema function declarations") {
    ToolSpec spec{"fetch_wikipedia_entity",
                  "Search for a given entity on Wikipedia.",
                  {{"entity", "string", "The entity to search for.", true}}};
    auto j = tool_spec_to_wire(spec);
    CHECK(j.at("type") == "function");
    CHECK(j.at("function").at("name") == "fetch_wikipedia_entity");
    CHECK(j.at("function").at("parameters").at("properties").contains("entity"));
    CHECK(j.at("function").at("parameters").at("required")[0] == "entity");
}

TEST_CASE("wire replies parse content and tool calls") {
    nlohmann::json body = nlohmann::json::parse(R"({
      "choices": [{"message": {
        "role": "assistant",
        "content": null,
        "tool_calls": [{"id": "call_9", "type": "function",
          "function": {"name": "fetch_wikipedia_entity",
                       "arguments": "{\"entity\": \"Biafra\"}"}}]}}]
    })");
    ChatMessage m = parse_wire_reply(body);
    REQUIRE(m.tool_calls.size() == 1);
    CHECK(m.tool_calls[0].id == "call_9");
    CHECK(m.tool_calls[0].name == "fetch_wikipedia_entity");
    CHECK(m.tool_calls[0].arguments.at("entity") == "Biafra");
    CHECK(!m.tool_calls[0].malformed());
}

TEST_CASE("malformed tool arguments are preserved for the agent loop") {
    nlohmann::json body = nlohmann::json::parse(R"({
      "choices": [{"message": {
        "role": "assistant",
        "tool_calls": [{"id": "c", "type": "function",
          "function": {"name": "fetch_wikipedia_entity", "arguments": "{broken"}}]}}]
    })");
    ChatMessage m = parse_wire_reply(body);
    REQUIRE(m.tool_calls.size() == 1);
    CHECK(m.tool_calls[0].malformed());
    CHECK(m.tool_calls[0].malformed_arguments == "{broken");
}

TEST_CASE("replies without choices or content are malformed") {
    CHECK_THROWS_AS(parse_wire_reply(nlohmann::json::object()), ChatError);
    CHECK_THROWS_AS(parse_wire_reply(nlohmann::json::parse(
                        R"({"choices": [{"message": {"role": "assistant", "content": ""}}]})")),
                    ChatError);
}

TEST_CASE("request fingerprints are exact-content sensitive") {
    auto req1 = basic_request({ChatMessage::system("s"), ChatMessage::user("hello")});
    auto req2 = basic_request({ChatMessage::system("s"), ChatMessage::user("hello ")});
    CHECK(request_fingerprint(req1) != request_fingerprint(req2));
    CHECK(request_fingerprint(req1) == request_fingerprint(req1));
}

TEST_CASE("keyed scripts reject mismatched requests") {
    auto expected = basic_request({ChatMessage::system("s"), ChatMessage::user("expected")});
    std::vector<ScriptEntry> script;
    script.push_back({ChatMessage::assistant("ok"), request_fingerprint(expected)});
    auto backend = std::make_shared<ScriptedBackend>(std::move(script));

    auto drifted = basic_request({ChatMessage::system("s"), ChatMessage::user("drifted")});
    CHECK_THROWS_MATCHES(
        complete(drifted, *backend), ChatError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("fingerprint")));
    CHECK(complete(expected, *backend->fresh_session()).content == "ok");
}

TEST_CASE("retry backoff grows exponentially with bounded jitter") {
    RetryPolicy policy; // 1 s base, factor 2
    CHECK(backoff_delay(policy, 0, 0.0).count() == 1000);
    CHECK(backoff_delay(policy, 1, 0.0).count() == 2000);
    CHECK(backoff_delay(policy, 2, 0.0).count() == 4000);
    CHECK(backoff_delay(policy, 2, 1.0).count() == 4400); // full jitter adds 10 %
    for (int attempt = 0; attempt < 4; ++attempt)
        CHECK(backoff_delay(policy, attempt + 1, 0.0) > backoff_delay(policy, attempt, 0.0));
}

TEST_CASE("echo-gold backend answers with the mapped label") {
    EchoGoldBackend backend({{"The sky is blue.", "true"}, {"Cats are reptiles.", "false"}});
    auto req = basic_request(
        {ChatMessage::system("s"),
         ChatMessage::user("Here is the statement: ```Cats are reptiles.```\nPlease rate it.")});
    CHECK(complete(req, backend).content == "false");

    auto unknown = basic_request(
        {ChatMessage::system("s"), ChatMessage::user("Here is the statement: ```Who knows.```")});
    CHECK(complete(unknown, backend).content == "unclear");
}
