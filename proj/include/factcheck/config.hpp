// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "factcheck/util.hpp"

namespace factcheck {

struct Config {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string model_id = "gpt-4o-2024-08-06";
    int parallelism = 4;
    std::filesystem::path cache_dir = ".wiki_cache";
    std::size_t char_cap = 2000;
    std::size_t page_cap = 2000;
    int step_cap = 15;
    int cache_ttl_days = 90;
    int timeout_seconds = 120;
    std::string wiki_mode = "live"; // live | fixture
    std::filesystem::path wiki_fixture_dir;
    std::string wiki_api_base = "https://en.wikipedia.org";

    void validate() const {
        if (char_cap == 0 || page_cap == 0) throw ConfigError("char_cap and page_cap must be positive");
        if (step_cap <= 0) throw ConfigError("step_cap must be positive");
        if (parallelism <= 0) throw ConfigError("parallelism must be positive");
        if (cache_ttl_days <= 0) throw ConfigError("cache_ttl_days must be positive");
        if (timeout_seconds <= 0) throw ConfigError("timeout_seconds must be positive");
        if (wiki_mode != "live" && wiki_mode != "fixture")
            throw ConfigError("wiki_mode must be 'live' or 'fixture'");
    }
};

// Flat `key = value` lines; '#' starts a comment.
inline Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    Config cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::string_view stripped = trim(line);
        if (stripped.empty()) continue;
        auto eq = stripped.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected 'key = value'");
        std::string key(trim(stripped.substr(0, eq)));
        std::string value(trim(stripped.substr(eq + 1)));
        try {
            if (key == "base_url") cfg.base_url = value;
            else if (key == "api_key_env") cfg.api_key_env = value;
            else if (key == "model") cfg.model_id = value;
            else if (key == "parallelism") cfg.parallelism = std::stoi(value);
            else if (key == "cache_dir") cfg.cache_dir = value;
            else if (key == "char_cap") cfg.char_cap = std::stoul(value);
            else if (key == "page_cap") cfg.page_cap = std::stoul(value);
            else if (key == "step_cap") cfg.step_cap = std::stoi(value);
            else if (key == "cache_ttl_days") cfg.cache_ttl_days = std::stoi(value);
            else if (key == "timeout_seconds") cfg.timeout_seconds = std::stoi(value);
            else if (key == "wiki_mode") cfg.wiki_mode = value;
            else if (key == "wiki_fixture_dir") cfg.wiki_fixture_dir = value;
            else if (key == "wiki_api_base") cfg.wiki_api_base = value;
            else
                throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": bad value for '" +
                              key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

} // namespace factcheck
