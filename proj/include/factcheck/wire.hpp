// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "factcheck/chat.hpp"

namespace factcheck {

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;
    double jitter_fraction = 0.1;
};

// Delay before retry `attempt` (0-based, i.e. after the first failure).
inline std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt,
                                               double jitter_unit) {
    double ms = static_cast<double>(policy.base_delay.count());
    for (int i = 0; i < attempt; ++i) ms *= policy.factor;
    ms += ms * policy.jitter_fraction * jitter_unit;
    return std::chrono::milliseconds(static_cast<long long>(ms));
}

// OpenAI-compatible chat-completions client. The API key is read from the
// environment variable named in the config; it never appears in flags or
// serialized requests.
class WireBackend : public Backend, public std::enable_shared_from_this<WireBackend> {
public:
    WireBackend(std::string base_url, std::string api_key_env, RetryPolicy retry = {})
        : base_url_(std::move(base_url)), api_key_env_(std::move(api_key_env)), retry_(retry) {
        auto scheme_end = base_url_.find("://");
        auto path_start = base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start == std::string::npos) {
            host_ = base_url_;
        } else {
            host_ = base_url_.substr(0, path_start);
            path_prefix_ = base_url_.substr(path_start);
        }
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }

    ChatMessage complete_impl(const CompletionRequest& req) override {
        const std::string body = wire_request_json(req).dump();
        std::string last_error;
        for (int attempt = 0; attempt < retry_.max_attempts; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(backoff_delay(retry_, attempt - 1, jitter()));
            httplib::Client client(host_);
            client.set_read_timeout(120, 0);
            client.set_connection_timeout(10, 0);
            auto res = client.Post(path_prefix_ + "/chat/completions", headers(), body,
                                   "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw ChatError("chat completion failed: HTTP " + std::to_string(res->status) +
                                ": " + res->body);
            auto parsed = nlohmann::json::parse(res->body, nullptr, false);
            if (parsed.is_discarded())
                throw ChatError("malformed backend reply: response body is not JSON");
            return parse_wire_reply(parsed);
        }
        throw ChatError("chat completion failed after " + std::to_string(retry_.max_attempts) +
                        " attempts: " + last_error);
    }

    std::shared_ptr<Backend> fresh_session() override {
        if (auto self = weak_from_this().lock()) return self;
        throw ChatError("WireBackend must be managed by std::shared_ptr");
    }

    bool reachable() override {
        httplib::Client client(host_);
        client.set_connection_timeout(5, 0);
        auto res = client.Get(path_prefix_ + "/models", headers());
        return static_cast<bool>(res); // any HTTP response counts
    }

private:
    httplib::Headers headers() const {
        httplib::Headers h;
        if (!api_key_env_.empty()) {
            const char* key = std::getenv(api_key_env_.c_str());
            if (!key)
                throw ChatError("API key environment variable '" + api_key_env_ + "' is not set");
            h.emplace("Authorization", std::string("Bearer ") + key);
        }
        return h;
    }

    double jitter() {
        std::lock_guard lock(mu_);
        return dist_(rng_);
    }

    std::string base_url_;
    std::string host_;
    std::string path_prefix_;
    std::string api_key_env_;
    RetryPolicy retry_;
    std::mutex mu_;
    std::mt19937 rng_{std::random_device{}()};
    std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

} // namespace factcheck
