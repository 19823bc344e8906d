// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "factcheck/wikitools.hpp"

namespace factcheck {

inline std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

// MediaWiki transport: full-text search for candidate ranking plus the REST
// page-HTML endpoint for article content.
class LiveWikiTransport : public WikiTransport {
public:
    explicit LiveWikiTransport(std::string api_base = "https://en.wikipedia.org",
                               std::size_t search_limit = 10, int max_attempts = 3)
        : api_base_(std::move(api_base)), search_limit_(search_limit),
          max_attempts_(max_attempts) {}

    std::vector<std::string> search(const std::string& query) override {
        std::string path = "/w/api.php?action=query&list=search&format=json&srlimit=" +
                           std::to_string(search_limit_) + "&srsearch=" + url_encode(query);
        std::string body = get_with_retries(path);
        auto parsed = nlohmann::json::parse(body, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("query"))
            throw WikiError("unexpected search response from " + api_base_);
        std::vector<std::string> titles;
        for (const auto& hit : parsed["query"]["search"])
            titles.push_back(hit.at("title").get<std::string>());
        return titles;
    }

    std::string fetch_html(const std::string& title) override {
        std::string encoded = url_encode(title);
        // The REST endpoint wants underscores for spaces.
        std::string underscored;
        for (char c : title) underscored += (c == ' ') ? '_' : c;
        return get_with_retries("/api/rest_v1/page/html/" + url_encode(underscored));
    }

private:
    std::string get_with_retries(const std::string& path) {
        std::string last_error;
        for (int attempt = 0; attempt < max_attempts_; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(500 * attempt));
            httplib::Client client(api_base_);
            client.set_follow_location(true);
            client.set_read_timeout(30, 0);
            auto res = client.Get(path);
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500 || res->status == 429) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw WikiError("HTTP " + std::to_string(res->status) + " for " + path);
            return res->body;
        }
        throw WikiError("request failed after " + std::to_string(max_attempts_) + " attempts: " +
                        last_error);
    }

    std::string api_base_;
    std::size_t search_limit_;
    int max_attempts_;
};

} // namespace factcheck
