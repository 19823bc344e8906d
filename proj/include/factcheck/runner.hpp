// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "factcheck/chat.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/scenario.hpp"
#include "factcheck/util.hpp"
#include "factcheck/wikitools.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Prompts
// -------------------------------------------------------------------------

namespace prompts {

inline constexpr std::string_view kSystemPrefix =
    "I need you to assume the role of a professional fact checker with an experience of 10+ "
    "years. You will fact-check a statement.\n"
    "\n"
    "Task: For a given statement, delimited by triple backticks, rate it for truthfulness. \n"
    "\n"
    "Format the response as \"false\", \"true\", or \"unclear\".\n"
    "\n";

inline constexpr std::string_view kToolsParagraph =
    "You may use the `fetch_wikipedia_entity` and `fetch_wikipedia_entity_with_header` tool to "
    "help you acquire information.\n"
    "\n";

inline constexpr std::string_view kSystemSuffix =
    "You ***MUST*** only respond with one of these options and provide no context or "
    "explanations.";

inline constexpr std::string_view kUserTemplate =
    "Now, let's get to task. Here is the statement: ```{statement}```\n"
    "Please rate the statement as \"false\", \"true\", or \"unclear\".";

inline constexpr std::string_view kRagUserTemplate =
    "Now, let's get to task. Here is the statement: ```{statement}```\n"
    "\n"
    "To rate the statement, use the following related news articles: ```{full_article}``` \n"
    "\n"
    "Please rate the statement as \"false\", \"true\", or \"unclear\".";

} // namespace prompts

inline constexpr std::string_view kForcedAnswerMessage =
    "You have reached the maximum number of model calls. Please rate the statement as 'false', "
    "'true', or 'unclear' and do not perform any more function calls.";

struct PromptSet {
    std::string system_with_tools;
    std::string system_without_tools;
    std::string user_template;
    std::string rag_user_template;
};

inline PromptSet default_prompts() {
    PromptSet p;
    p.system_with_tools = std::string(prompts::kSystemPrefix) +
                          std::string(prompts::kToolsParagraph) +
                          std::string(prompts::kSystemSuffix);
    // Without tool calling, the wikipedia functions line is dropped.
    p.system_without_tools =
        std::string(prompts::kSystemPrefix) + std::string(prompts::kSystemSuffix);
    p.user_template = std::string(prompts::kUserTemplate);
    p.rag_user_template = std::string(prompts::kRagUserTemplate);
    return p;
}

inline std::string substitute_placeholder(std::string text, std::string_view placeholder,
                                          std::string_view value) {
    auto pos = text.find(placeholder);
    if (pos == std::string::npos)
        throw Error("prompt template is missing placeholder " + std::string(placeholder));
    text.replace(pos, placeholder.size(), value);
    return text;
}

// [System, User] pair for a statement under a scenario. Truncation is not
// applied here; the chat layer caps messages when the request is prepared.
inline std::vector<ChatMessage> build_prompts(const Statement& s, ScenarioKind k,
                                              const PromptSet& prompts = default_prompts()) {
    std::vector<ChatMessage> out;
    const bool with_tools = k == ScenarioKind::AgentWiki;
    out.push_back(
        ChatMessage::system(with_tools ? prompts.system_with_tools : prompts.system_without_tools));

    std::string user;
    if (k == ScenarioKind::RagGold) {
        user = substitute_placeholder(prompts.rag_user_template, "{statement}", s.text);
        user = substitute_placeholder(std::move(user), "{full_article}", s.article_text);
    } else {
        user = substitute_placeholder(prompts.user_template, "{statement}", s.text);
    }
    out.push_back(ChatMessage::user(std::move(user)));
    return out;
}

// -------------------------------------------------------------------------
// Verdict parsing
// -------------------------------------------------------------------------

namespace verdict_detail {

// Quote-ish sequences stripped from the ends of a reply before scanning.
inline constexpr std::string_view kStrippable[] = {
    "\"", "'", "`",
    "\xE2\x80\x9C", "\xE2\x80\x9D", // typographic double quotes
    "\xE2\x80\x98", "\xE2\x80\x99", // typographic single quotes
};

} // namespace verdict_detail

// Total over arbitrary strings: normalizes quoting and punctuation, then
// scans for standalone occurrences of the three labels. Anything other than
// exactly one distinct label maps to Unclear.
inline Verdict parse_verdict(std::string_view raw) {
    std::string s = to_lower(trim(raw));
    bool changed = true;
    while (changed && !s.empty()) {
        changed = false;
        std::string_view v = trim(s);
        if (v.size() != s.size()) {
            s = std::string(v);
            changed = true;
        }
        for (std::string_view q : verdict_detail::kStrippable) {
            if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) {
                s.erase(0, q.size());
                changed = true;
            }
            if (s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0) {
                s.erase(s.size() - q.size());
                changed = true;
            }
        }
        while (!s.empty() && s.back() == '.') {
            s.pop_back();
            changed = true;
        }
    }

    bool saw_true = false, saw_false = false, saw_unclear = false;
    for (const std::string& word : word_tokens(s)) {
        if (word == "true") saw_true = true;
        else if (word == "false") saw_false = true;
        else if (word == "unclear") saw_unclear = true;
    }
    int distinct = int(saw_true) + int(saw_false) + int(saw_unclear);
    if (distinct != 1) return Verdict::Unclear;
    if (saw_true) return Verdict::True;
    if (saw_false) return Verdict::False;
    return Verdict::Unclear;
}

// -------------------------------------------------------------------------
// Run records
// -------------------------------------------------------------------------

struct RunRecord {
    std::string statement_id;
    Region region = Region::Africa;
    std::string model_id;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
    Verdict predicted = Verdict::Unclear;
    Verdict gold = Verdict::False;
    std::string raw_final;
    int n_tool_steps = 0;
    bool hit_step_limit = false;
    std::vector<ChatMessage> trajectory;
    std::chrono::milliseconds wall_time{0}; // in-memory only, never serialized
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
    std::size_t user_chars_pre_truncation = 0;
    std::string error; // empty on clean runs

    bool correct() const { return predicted == gold; }
};

inline nlohmann::ordered_json message_to_json(const ChatMessage& m) {
    nlohmann::ordered_json j;
    j["role"] = std::string(role_token(m.role));
    j["content"] = m.content;
    if (!m.tool_calls.empty()) {
        auto& calls = j["tool_calls"] = nlohmann::ordered_json::array();
        for (const ToolCall& c : m.tool_calls) {
            nlohmann::ordered_json args = nlohmann::ordered_json::object();
            for (const auto& [k, v] : c.arguments) args[k] = v;
            nlohmann::ordered_json call{{"id", c.id}, {"name", c.name}, {"arguments", args}};
            if (c.malformed()) call["malformed_arguments"] = c.malformed_arguments;
            calls.push_back(std::move(call));
        }
    }
    if (m.role == Role::Tool) j["tool_call_id"] = m.tool_call_id;
    return j;
}

inline ChatMessage message_from_json(const nlohmann::json& j) {
    ChatMessage m;
    auto role = parse_role(j.at("role").get<std::string>());
    if (!role) throw Error("unknown message role '" + j.at("role").get<std::string>() + "'");
    m.role = *role;
    m.content = j.value("content", "");
    if (j.contains("tool_calls")) {
        std::size_t k = 0;
        for (const auto& c : j["tool_calls"]) {
            ToolCall call;
            call.id = c.value("id", "call_" + std::to_string(++k));
            call.name = c.at("name").get<std::string>();
            if (c.contains("arguments")) {
                for (const auto& [key, value] : c["arguments"].items())
                    call.arguments[key] = value.is_string() ? value.get<std::string>() : value.dump();
            }
            if (c.contains("malformed_arguments"))
                call.malformed_arguments = c["malformed_arguments"].get<std::string>();
            m.tool_calls.push_back(std::move(call));
        }
    }
    m.tool_call_id = j.value("tool_call_id", "");
    return m;
}

inline nlohmann::ordered_json record_to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["statement_id"] = r.statement_id;
    j["region"] = std::string(region_token(r.region));
    j["model_id"] = r.model_id;
    j["scenario"] = std::string(scenario_token(r.scenario));
    j["predicted"] = std::string(verdict_token(r.predicted));
    j["gold"] = std::string(verdict_token(r.gold));
    j["raw_final"] = r.raw_final;
    j["n_tool_steps"] = r.n_tool_steps;
    j["hit_step_limit"] = r.hit_step_limit;
    j["cache_hits"] = r.cache_hits;
    j["cache_misses"] = r.cache_misses;
    j["user_chars_pre_truncation"] = r.user_chars_pre_truncation;
    j["error"] = r.error;
    auto& msgs = j["trajectory"] = nlohmann::ordered_json::array();
    for (const ChatMessage& m : r.trajectory) msgs.push_back(message_to_json(m));
    return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
    RunRecord r;
    r.statement_id = j.at("statement_id").get<std::string>();
    auto region = parse_region(j.at("region").get<std::string>());
    if (!region) throw Error("unknown region in record");
    r.region = *region;
    r.model_id = j.at("model_id").get<std::string>();
    auto scenario = parse_scenario(j.at("scenario").get<std::string>());
    if (!scenario) throw Error("unknown scenario in record");
    r.scenario = *scenario;
    auto predicted = parse_verdict_token(j.at("predicted").get<std::string>());
    auto gold = parse_verdict_token(j.at("gold").get<std::string>());
    if (!predicted || !gold) throw Error("unknown verdict in record");
    r.predicted = *predicted;
    r.gold = *gold;
    r.raw_final = j.value("raw_final", "");
    r.n_tool_steps = j.value("n_tool_steps", 0);
    r.hit_step_limit = j.value("hit_step_limit", false);
    r.cache_hits = j.value("cache_hits", std::size_t{0});
    r.cache_misses = j.value("cache_misses", std::size_t{0});
    r.user_chars_pre_truncation = j.value("user_chars_pre_truncation", std::size_t{0});
    r.error = j.value("error", "");
    if (j.contains("trajectory"))
        for (const auto& m : j["trajectory"]) r.trajectory.push_back(message_from_json(m));
    return r;
}

inline void write_records(const std::vector<RunRecord>& records, std::ostream& out) {
    for (const RunRecord& r : records) out << record_to_json(r).dump() << '\n';
}

inline std::vector<RunRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open record file: " + path.string());
    std::vector<RunRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": bad record: " + e.what());
        }
    }
    return out;
}

// -------------------------------------------------------------------------
// Trajectory fixtures
// -------------------------------------------------------------------------

inline std::vector<ChatMessage> load_trajectory(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trajectory fixture: " + path.string());
    std::vector<ChatMessage> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(message_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) +
                        ": bad trajectory message: " + e.what());
        }
    }
    return out;
}

// The assistant turns of a recorded trajectory, replayed in order.
inline std::shared_ptr<Backend>
scripted_backend_from_trajectory(const std::filesystem::path& path) {
    std::vector<ChatMessage> script;
    for (ChatMessage& m : load_trajectory(path))
        if (m.role == Role::Assistant) script.push_back(std::move(m));
    if (script.empty())
        throw ChatError("trajectory fixture " + path.string() + " contains no assistant messages");
    return scripted_backend(std::move(script));
}

// -------------------------------------------------------------------------
// Scenario execution
// -------------------------------------------------------------------------

struct RunnerOptions {
    std::size_t char_cap = 2000;
    int step_cap = 15;
    std::chrono::seconds timeout{120};
    PromptSet prompts = default_prompts();
};

namespace runner_detail {

inline ChatMessage execute_tool_call(const ToolCall& call, const Toolset& tools,
                                     WikiStats* stats) {
    if (call.malformed())
        return ChatMessage::tool(call.id,
                                 "Error: malformed tool arguments: " + call.malformed_arguments);
    auto it = tools.executors.find(call.name);
    if (it == tools.executors.end())
        return ChatMessage::tool(call.id, "Error: unknown tool '" + call.name + "'.");
    ToolResult result = it->second(call.arguments, stats);
    return ChatMessage::tool(call.id, result.text);
}

} // namespace runner_detail

// Runs one statement under one scenario against a fresh backend session.
// Backend failures and timeouts degrade to an Unclear record with an error
// annotation; they never abort a batch.
inline RunRecord run_statement(const Statement& s, ScenarioKind kind, const std::string& model_id,
                               Backend& backend_prototype, const Toolset* tools,
                               const RunnerOptions& opt = {}) {
    if (kind == ScenarioKind::AgentWiki) {
        if (!tools || tools->specs.size() != 2 ||
            !tools->executors.count(std::string(kFetchEntityTool)) ||
            !tools->executors.count(std::string(kFetchEntityWithHeaderTool)))
            throw Error("agent scenario requires the two Wikipedia tools");
    }

    const auto started = std::chrono::steady_clock::now();
    const auto deadline = started + opt.timeout;

    RunRecord rec;
    rec.statement_id = s.id;
    rec.region = s.region;
    rec.model_id = model_id;
    rec.scenario = kind;
    rec.gold = s.gold;

    auto session = backend_prototype.fresh_session();
    WikiStats stats;

    std::vector<ChatMessage> raw = build_prompts(s, kind, opt.prompts);
    rec.user_chars_pre_truncation = utf8::length(raw.back().content);
    rec.trajectory = prepare_messages(std::move(raw), opt.char_cap);

    auto make_request = [&]() {
        CompletionRequest req;
        req.model_id = model_id;
        req.messages = rec.trajectory;
        if (kind == ScenarioKind::AgentWiki) req.tools = tools->specs;
        req.char_cap = opt.char_cap;
        return req;
    };

    std::string final_text;
    try {
        for (;;) {
            if (std::chrono::steady_clock::now() > deadline) {
                rec.error = "timeout after " + std::to_string(opt.timeout.count()) + "s";
                break;
            }
            ChatMessage reply = complete(make_request(), *session);
            rec.trajectory.push_back(reply);

            if (kind != ScenarioKind::AgentWiki || reply.tool_calls.empty()) {
                final_text = reply.content;
                break;
            }
            if (rec.n_tool_steps >= opt.step_cap) {
                // The model asked for another step past the cap: inject the
                // forced-answer message and take one last completion.
                rec.hit_step_limit = true;
                rec.trajectory.push_back(ChatMessage::user(std::string(kForcedAnswerMessage)));
                ChatMessage last = complete(make_request(), *session);
                rec.trajectory.push_back(last);
                final_text = last.content;
                break;
            }
            ++rec.n_tool_steps;
            for (const ToolCall& call : reply.tool_calls) {
                ChatMessage obs = runner_detail::execute_tool_call(call, *tools, &stats);
                obs.content = utf8::length(obs.content) > opt.char_cap
                                  ? truncate_for_model(obs.content, opt.char_cap)
                                  : obs.content;
                rec.trajectory.push_back(std::move(obs));
            }
        }
    } catch (const std::exception& e) {
        rec.error = e.what();
    }

    rec.raw_final = final_text;
    rec.predicted = rec.error.empty() ? parse_verdict(final_text) : Verdict::Unclear;
    rec.cache_hits = stats.cache_hits;
    rec.cache_misses = stats.cache_misses;
    rec.wall_time = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return rec;
}

// Runs every statement, `parallelism` at a time. Records are returned (and
// streamed to `sink`) in corpus order regardless of completion order.
inline std::vector<RunRecord>
run_corpus(const Corpus& corpus, ScenarioKind kind, const std::string& model_id,
           Backend& backend_prototype, const Toolset* tools, int parallelism,
           const RunnerOptions& opt = {},
           const std::function<void(const RunRecord&)>& sink = {}) {
    if (parallelism < 1) throw Error("parallelism must be >= 1");

    const std::size_t n = corpus.statements.size();
    std::vector<RunRecord> records(n);
    std::vector<char> done(n, 0);
    std::mutex mu;
    std::size_t next_emit = 0;
    std::atomic<std::size_t> next_index{0};

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next_index.fetch_add(1);
            if (i >= n) return;
            RunRecord rec;
            try {
                rec = run_statement(corpus.statements[i], kind, model_id, backend_prototype,
                                    tools, opt);
            } catch (const std::exception& e) {
                rec.statement_id = corpus.statements[i].id;
                rec.region = corpus.statements[i].region;
                rec.model_id = model_id;
                rec.scenario = kind;
                rec.gold = corpus.statements[i].gold;
                rec.predicted = Verdict::Unclear;
                rec.error = e.what();
            }
            std::lock_guard lock(mu);
            records[i] = std::move(rec);
            done[i] = 1;
            while (next_emit < n && done[next_emit]) {
                if (sink) sink(records[next_emit]);
                ++next_emit;
            }
        }
    };

    std::vector<std::thread> threads;
    const int nthreads = static_cast<int>(std::min<std::size_t>(parallelism, std::max<std::size_t>(n, 1)));
    threads.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return records;
}

} // namespace factcheck
