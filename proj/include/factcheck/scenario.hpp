// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>

namespace factcheck {

enum class ScenarioKind { StatementOnly, RagGold, AgentWiki };

inline std::string_view scenario_token(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::StatementOnly: return "statement";
    case ScenarioKind::RagGold: return "rag";
    case ScenarioKind::AgentWiki: return "agent";
    }
    return "";
}

// Display names as they appear in report tables.
inline std::string_view scenario_name(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::StatementOnly: return "Statement-Only";
    case ScenarioKind::RagGold: return "RAG-based";
    case ScenarioKind::AgentWiki: return "Agent-based";
    }
    return "";
}

inline std::optional<ScenarioKind> parse_scenario(std::string_view token) {
    if (token == "statement") return ScenarioKind::StatementOnly;
    if (token == "rag") return ScenarioKind::RagGold;
    if (token == "agent") return ScenarioKind::AgentWiki;
    return std::nullopt;
}

} // namespace factcheck
