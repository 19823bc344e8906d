// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "factcheck/util.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Messages and tool schemas
// -------------------------------------------------------------------------

enum class Role { System, User, Assistant, Tool };

inline std::string_view role_token(Role r) {
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
    }
    return "";
}

inline std::optional<Role> parse_role(std::string_view token) {
    if (token == "system") return Role::System;
    if (token == "user") return Role::User;
    if (token == "assistant") return Role::Assistant;
    if (token == "tool") return Role::Tool;
    return std::nullopt;
}

struct ToolCall {
    std::string id;
    std::string name;
    std::map<std::string, std::string> arguments;
    // Raw argument text when the backend sent something that does not parse
    // as an object; delivered to the agent loop as an error tool result.
    std::string malformed_arguments;

    bool malformed() const { return !malformed_arguments.empty(); }
};

struct ChatMessage {
    Role role = Role::User;
    std::string content;
    std::vector<ToolCall> tool_calls; // Assistant only
    std::string tool_call_id;         // Tool only

    static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}}; }
    static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}}; }
    static ChatMessage assistant(std::string text) {
        return {Role::Assistant, std::move(text), {}, {}};
    }
    static ChatMessage tool(std::string call_id, std::string text) {
        return {Role::Tool, std::move(text), {}, std::move(call_id)};
    }
};

struct ToolParam {
    std::string name;
    std::string type; // JSON-Schema type tag, e.g. "string"
    std::string description;
    bool required = true;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::vector<ToolParam> parameters;
};

struct CompletionRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    std::vector<ToolSpec> tools;
    double temperature = 0.0; // pinned to 0 on the wire regardless
    std::size_t char_cap = 2000;
};

// -------------------------------------------------------------------------
// Truncation
// -------------------------------------------------------------------------

inline constexpr std::string_view kTruncationMarker = " [MAXIMUM LENGTH]";

// Caps `text` at `cap` Unicode scalar values. Oversized input is cut and the
// marker appended so that the result is exactly `cap` scalars long.
inline std::string truncate_for_model(std::string_view text, std::size_t cap,
                                      std::string_view marker = kTruncationMarker) {
    std::size_t marker_len = utf8::length(marker);
    if (cap <= marker_len)
        throw ChatError("truncation cap " + std::to_string(cap) +
                        " does not exceed marker length " + std::to_string(marker_len));
    if (utf8::length(text) <= cap) return std::string(text);
    std::string out(utf8::prefix(text, cap - marker_len));
    out += marker;
    return out;
}

// Applies the cap to every non-System message. System prompts are exempt.
inline std::vector<ChatMessage> prepare_messages(std::vector<ChatMessage> messages,
                                                 std::size_t cap) {
    for (ChatMessage& m : messages)
        if (m.role != Role::System && utf8::length(m.content) > cap)
            m.content = truncate_for_model(m.content, cap);
    return messages;
}

// -------------------------------------------------------------------------
// Request fingerprint (keyed scripts)
// -------------------------------------------------------------------------

// Hash over the (role, content, tool-call names) sequence. Contents are
// matched exactly; whitespace differences change the fingerprint.
inline std::uint64_t request_fingerprint(const CompletionRequest& req) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const ChatMessage& m : req.messages) {
        h = fnv1a(role_token(m.role), h);
        h = fnv1a("\x1f", h);
        h = fnv1a(m.content, h);
        h = fnv1a("\x1f", h);
        for (const ToolCall& c : m.tool_calls) {
            h = fnv1a(c.name, h);
            h = fnv1a(",", h);
        }
        h = fnv1a("\x1e", h);
    }
    return h;
}

// -------------------------------------------------------------------------
// Wire protocol (OpenAI-compatible chat completions subset)
// -------------------------------------------------------------------------

inline nlohmann::ordered_json message_to_wire(const ChatMessage& m) {
    nlohmann::ordered_json j;
    j["role"] = std::string(role_token(m.role));
    j["content"] = m.content;
    if (!m.tool_calls.empty()) {
        auto& calls = j["tool_calls"] = nlohmann::ordered_json::array();
        for (const ToolCall& c : m.tool_calls) {
            nlohmann::ordered_json args = nlohmann::ordered_json::object();
            for (const auto& [k, v] : c.arguments) args[k] = v;
            calls.push_back({{"id", c.id},
                             {"type", "function"},
                             {"function",
                              {{"name", c.name},
                               {"arguments", c.malformed() ? c.malformed_arguments : args.dump()}}}});
        }
    }
    if (m.role == Role::Tool) j["tool_call_id"] = m.tool_call_id;
    return j;
}

inline nlohmann::ordered_json tool_spec_to_wire(const ToolSpec& t) {
    nlohmann::ordered_json props = nlohmann::ordered_json::object();
    auto required = nlohmann::ordered_json::array();
    for (const ToolParam& p : t.parameters) {
        props[p.name] = {{"type", p.type}, {"description", p.description}};
        if (p.required) required.push_back(p.name);
    }
    return {{"type", "function"},
            {"function",
             {{"name", t.name},
              {"description", t.description},
              {"parameters",
               {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

// The serialized request always carries temperature 0.
inline nlohmann::ordered_json wire_request_json(const CompletionRequest& req) {
    nlohmann::ordered_json j;
    j["model"] = req.model_id;
    auto& msgs = j["messages"] = nlohmann::ordered_json::array();
    for (const ChatMessage& m : req.messages) msgs.push_back(message_to_wire(m));
    if (!req.tools.empty()) {
        auto& tools = j["tools"] = nlohmann::ordered_json::array();
        for (const ToolSpec& t : req.tools) tools.push_back(tool_spec_to_wire(t));
    }
    j["temperature"] = 0;
    return j;
}

// Parses `choices[0].message` from a chat-completions response body.
inline ChatMessage parse_wire_reply(const nlohmann::json& body) {
    if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
        throw ChatError("malformed backend reply: missing choices[0]");
    const auto& msg = body["choices"][0].at("message");

    ChatMessage out;
    out.role = Role::Assistant;
    if (msg.contains("content") && msg["content"].is_string())
        out.content = msg["content"].get<std::string>();
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array()) {
        for (const auto& c : msg["tool_calls"]) {
            ToolCall call;
            call.id = c.value("id", "");
            const auto& fn = c.at("function");
            call.name = fn.at("name").get<std::string>();
            std::string raw = fn.value("arguments", "{}");
            auto parsed = nlohmann::json::parse(raw, nullptr, false);
            if (parsed.is_object()) {
                for (const auto& [k, v] : parsed.items())
                    call.arguments[k] = v.is_string() ? v.get<std::string>() : v.dump();
            } else {
                call.malformed_arguments = raw;
            }
            out.tool_calls.push_back(std::move(call));
        }
    }
    if (out.content.empty() && out.tool_calls.empty())
        throw ChatError("malformed backend reply: assistant message has no content and no tool calls");
    return out;
}

// -------------------------------------------------------------------------
// Backends
// -------------------------------------------------------------------------

class Backend {
public:
    virtual ~Backend() = default;

    // Issues one completion. Throws ChatError on failure.
    virtual ChatMessage complete_impl(const CompletionRequest& req) = 0;

    // Per-statement-run view. Scripted backends restart their cursor; wire
    // backends are stateless between conversations and return themselves.
    virtual std::shared_ptr<Backend> fresh_session() = 0;

    // Cheap reachability probe used to fail fast before a batch run.
    virtual bool reachable() { return true; }
};

struct ScriptEntry {
    ChatMessage reply;                          // must be an Assistant message
    std::optional<std::uint64_t> fingerprint{}; // when set, request must match
};

class ScriptedBackend : public Backend,
                        public std::enable_shared_from_this<ScriptedBackend> {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> script)
        : script_(std::make_shared<const std::vector<ScriptEntry>>(std::move(script))) {
        if (script_->empty()) throw ChatError("scripted backend: empty script rejected");
    }

    ChatMessage complete_impl(const CompletionRequest& req) override {
        std::lock_guard lock(mu_);
        if (next_ >= script_->size())
            throw ChatError("scripted backend: script exhausted after " +
                            std::to_string(script_->size()) + " replies");
        const ScriptEntry& entry = (*script_)[next_];
        if (entry.fingerprint && *entry.fingerprint != request_fingerprint(req))
            throw ChatError("scripted backend: request fingerprint mismatch at reply " +
                            std::to_string(next_));
        ++next_;
        return entry.reply;
    }

    std::shared_ptr<Backend> fresh_session() override {
        return std::shared_ptr<ScriptedBackend>(new ScriptedBackend(script_));
    }

private:
    explicit ScriptedBackend(std::shared_ptr<const std::vector<ScriptEntry>> script)
        : script_(std::move(script)) {}

    std::shared_ptr<const std::vector<ScriptEntry>> script_;
    std::size_t next_ = 0;
    std::mutex mu_;
};

inline std::shared_ptr<Backend> scripted_backend(std::vector<ChatMessage> replies) {
    std::vector<ScriptEntry> script;
    script.reserve(replies.size());
    for (ChatMessage& m : replies) script.push_back({std::move(m), std::nullopt});
    return std::make_shared<ScriptedBackend>(std::move(script));
}

// Replies with the gold label of whatever statement appears between the first
// pair of triple backticks in the latest user message. Used as the perfect
// zero-loss reference backend.
class EchoGoldBackend : public Backend, public std::enable_shared_from_this<EchoGoldBackend> {
public:
    explicit EchoGoldBackend(std::map<std::string, std::string> gold_by_text)
        : gold_(std::make_shared<const std::map<std::string, std::string>>(std::move(gold_by_text))) {}

    ChatMessage complete_impl(const CompletionRequest& req) override {
        for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
            if (it->role != Role::User) continue;
            auto open = it->content.find("```");
            if (open == std::string::npos) break;
            auto close = it->content.find("```", open + 3);
            if (close == std::string::npos) break;
            std::string stmt = it->content.substr(open + 3, close - open - 3);
            auto found = gold_->find(stmt);
            if (found != gold_->end()) return ChatMessage::assistant(found->second);
            break;
        }
        return ChatMessage::assistant("unclear");
    }

    // Stateless between conversations; stack-allocated instances hand out a
    // cheap copy instead of a shared reference.
    std::shared_ptr<Backend> fresh_session() override {
        if (auto self = weak_from_this().lock()) return self;
        return std::make_shared<EchoGoldBackend>(*this);
    }

private:
    std::shared_ptr<const std::map<std::string, std::string>> gold_;
};

// -------------------------------------------------------------------------
// complete()
// -------------------------------------------------------------------------

// Single entry point for issuing a completion. Enforces the request shape
// (one leading System message, truncation already applied, temperature 0)
// and validates the reply.
inline ChatMessage complete(const CompletionRequest& req, Backend& backend) {
    if (req.messages.empty() || req.messages.front().role != Role::System)
        throw ChatError("request must begin with a System message");
    for (std::size_t i = 1; i < req.messages.size(); ++i) {
        if (req.messages[i].role == Role::System)
            throw ChatError("request must contain exactly one System message");
        if (utf8::length(req.messages[i].content) > req.char_cap)
            throw ChatError("message " + std::to_string(i) + " exceeds char cap; truncation "
                            "must be applied before complete()");
    }
    CompletionRequest pinned = req;
    pinned.temperature = 0.0;

    ChatMessage reply = backend.complete_impl(pinned);
    if (reply.role != Role::Assistant)
        throw ChatError("malformed backend reply: role is not assistant");
    if (reply.content.empty() && reply.tool_calls.empty())
        throw ChatError("malformed backend reply: assistant message has no content and no tool calls");
    return reply;
}

} // namespace factcheck
