// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "factcheck/chat.hpp"
#include "factcheck/util.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Parsed pages and tool results
// -------------------------------------------------------------------------

struct WikiPage {
    std::string title;
    std::vector<std::string> headers;            // document order, 'Contents' first
    std::map<std::string, std::string> sections; // keyed by exact header
    std::string full_text;                       // sections joined in header order
    std::time_t fetched_at = 0;
};

enum class ToolResultKind { Content, TooLong, Disambiguation, NotFound, HeaderError, Error };

struct ToolResult {
    ToolResultKind kind = ToolResultKind::Content;
    std::string text; // the exact string delivered to the model
};

// Python-style list rendering, matching the observation format the model sees.
inline std::string render_title_list(const std::vector<std::string>& items) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ", ";
        out += '\'';
        for (char c : items[i]) {
            if (c == '\'') out += "\\'";
            else out += c;
        }
        out += '\'';
    }
    out += ']';
    return out;
}

// Message templates. These strings are part of the tool contract; tests
// compare them byte for byte.
inline std::string too_long_message(const std::vector<std::string>& headers) {
    return "The page is too long. Use the `fetch_wikipedia_entity_with_header` tool to get "
           "specific information. Headers: " +
           render_title_list(headers);
}

inline std::string header_error_message(const std::string& header,
                                        const std::vector<std::string>& headers) {
    return "Could not find " + header +
           " in the Wikipedia page. Valid headers are: " + render_title_list(headers);
}

inline std::string disambiguation_message(const std::string& entity,
                                          const std::vector<std::string>& titles) {
    return "Multiple pages found for " + entity + ". Candidates: " + render_title_list(titles);
}

inline std::string not_found_message(const std::string& entity) {
    return "No Wikipedia pages found for " + entity + ".";
}

// -------------------------------------------------------------------------
// HTML section parser
// -------------------------------------------------------------------------

inline constexpr std::string_view kLedeHeader = "Contents";

namespace html_detail {

inline bool is_void_tag(std::string_view t) {
    return t == "br" || t == "hr" || t == "img" || t == "input" || t == "meta" || t == "link" ||
           t == "area" || t == "base" || t == "col" || t == "embed" || t == "source" ||
           t == "track" || t == "wbr";
}

inline bool is_skip_tag(std::string_view t) {
    return t == "script" || t == "style" || t == "nav" || t == "footer" || t == "aside" ||
           t == "h1";
}

inline bool is_skip_class(std::string_view classes) {
    std::size_t pos = 0;
    while (pos <= classes.size()) {
        auto end = classes.find(' ', pos);
        if (end == std::string_view::npos) end = classes.size();
        std::string_view token = classes.substr(pos, end - pos);
        for (std::string_view needle : {"navbox", "mw-jump-link", "mw-editsection", "infobox",
                                        "sidebar", "catlinks", "mw-footer", "toc"}) {
            if (token == needle) return true;
        }
        if (token.rfind("navbox-", 0) == 0 || token.rfind("vector-header", 0) == 0) return true;
        pos = end + 1;
    }
    return false;
}

inline bool is_block_tag(std::string_view t) {
    return t == "p" || t == "div" || t == "li" || t == "ul" || t == "ol" || t == "blockquote" ||
           t == "dd" || t == "dt" || t == "dl" || t == "tr" || t == "table" || t == "section" ||
           t == "figcaption" || t == "pre";
}

inline void append_codepoint(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

inline void append_entity(std::string& out, std::string_view name) {
    if (name == "amp") out += '&';
    else if (name == "lt") out += '<';
    else if (name == "gt") out += '>';
    else if (name == "quot") out += '"';
    else if (name == "apos") out += '\'';
    else if (name == "nbsp") out += ' ';
    else if (name.size() > 1 && name[0] == '#') {
        std::uint32_t cp = 0;
        bool hex = name[1] == 'x' || name[1] == 'X';
        for (std::size_t i = hex ? 2 : 1; i < name.size(); ++i) {
            char c = name[i];
            if (hex) cp = cp * 16 + (std::isdigit((unsigned char)c) ? c - '0'
                                                                    : (std::tolower(c) - 'a') + 10);
            else cp = cp * 10 + (c - '0');
        }
        append_codepoint(out, cp);
    } else {
        out += '&';
        out += name;
        out += ';';
    }
}

struct Tag {
    std::string name;
    std::string classes;
    bool closing = false;
    bool self_closing = false;
};

} // namespace html_detail

// Extracts ordered section headers (heading levels 2-4) and per-section text
// from a Wikipedia-style article page. The text before the first heading is
// filed under the 'Contents' pseudo-header. Scripts, styles, navigation and
// footer chrome are dropped; inline markup is flattened to plain text, so
// citation brackets like [571] survive as-is.
inline WikiPage parse_wiki_html(const std::string& html) {
    using namespace html_detail;

    WikiPage page;
    page.headers.emplace_back(kLedeHeader);

    std::string current_header{kLedeHeader};
    std::string text;          // accumulates the current section
    bool pending_space = false;
    bool pending_break = false;

    std::string heading;       // accumulates heading text while inside h2-h4
    int heading_level = 0;     // 0 = not in a heading

    std::string skip_tag;      // non-empty while skipping a subtree
    int skip_depth = 0;

    auto emit_text = [&](std::string& sink, std::string_view chunk) {
        for (char c : chunk) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                pending_space = true;
                continue;
            }
            if (!sink.empty()) {
                if (pending_break) sink += '\n';
                else if (pending_space) sink += ' ';
            }
            pending_break = pending_space = false;
            sink += c;
        }
    };

    auto flush_section = [&]() {
        auto& slot = page.sections[current_header];
        if (!text.empty()) {
            if (!slot.empty()) slot += '\n';
            slot += text;
        }
        text.clear();
        pending_space = pending_break = false;
    };

    std::size_t i = 0;
    const std::size_t n = html.size();
    while (i < n) {
        char c = html[i];
        if (c == '<') {
            if (html.compare(i, 4, "<!--") == 0) {
                auto end = html.find("-->", i + 4);
                if (end == std::string::npos)
                    throw WikiError("unparseable document: unterminated comment at offset " +
                                    std::to_string(i));
                i = end + 3;
                continue;
            }
            if (i + 1 < n && (html[i + 1] == '!' || html[i + 1] == '?')) {
                auto end = html.find('>', i);
                if (end == std::string::npos)
                    throw WikiError("unparseable document: unterminated declaration at offset " +
                                    std::to_string(i));
                i = end + 1;
                continue;
            }
            // Scan the tag, honoring quoted attribute values.
            std::size_t j = i + 1;
            char quote = 0;
            while (j < n) {
                char t = html[j];
                if (quote) {
                    if (t == quote) quote = 0;
                } else if (t == '"' || t == '\'') {
                    quote = t;
                } else if (t == '>') {
                    break;
                }
                ++j;
            }
            if (j >= n)
                throw WikiError("unparseable document: unterminated tag '" +
                                html.substr(i, std::min<std::size_t>(24, n - i)) +
                                "' at offset " + std::to_string(i));

            std::string_view body(html.data() + i + 1, j - i - 1);
            Tag tag;
            if (!body.empty() && body.front() == '/') {
                tag.closing = true;
                body.remove_prefix(1);
            }
            std::size_t k = 0;
            while (k < body.size() && (std::isalnum((unsigned char)body[k]) || body[k] == '-'))
                ++k;
            tag.name = to_lower(body.substr(0, k));
            if (!body.empty() && body.back() == '/') tag.self_closing = true;
            auto cls = body.find("class=");
            if (cls != std::string_view::npos && cls + 6 < body.size()) {
                char q = body[cls + 6];
                if (q == '"' || q == '\'') {
                    auto cend = body.find(q, cls + 7);
                    if (cend != std::string_view::npos)
                        tag.classes = std::string(body.substr(cls + 7, cend - cls - 7));
                }
            }
            i = j + 1;

            if (tag.name.empty()) continue;

            if (!skip_tag.empty()) {
                if (tag.name == skip_tag && !tag.self_closing && !is_void_tag(tag.name)) {
                    if (tag.closing) {
                        if (skip_depth == 0) skip_tag.clear();
                        else --skip_depth;
                    } else {
                        ++skip_depth;
                    }
                }
                continue;
            }

            if (!tag.closing &&
                (is_skip_tag(tag.name) || (!tag.classes.empty() && is_skip_class(tag.classes)))) {
                if (!tag.self_closing && !is_void_tag(tag.name)) {
                    skip_tag = tag.name;
                    skip_depth = 0;
                }
                continue;
            }

            bool is_heading = tag.name.size() == 2 && tag.name[0] == 'h' && tag.name[1] >= '2' &&
                              tag.name[1] <= '4';
            if (is_heading) {
                if (!tag.closing) {
                    flush_section();
                    heading.clear();
                    heading_level = tag.name[1] - '0';
                    pending_space = pending_break = false;
                } else if (heading_level != 0) {
                    std::string name(trim(heading));
                    if (!name.empty()) {
                        if (!page.sections.count(name)) page.headers.push_back(name);
                        current_header = name;
                        page.sections[name]; // ensure the key exists
                    }
                    heading_level = 0;
                    pending_space = pending_break = false;
                }
                continue;
            }

            if (tag.name == "br" || (tag.closing && is_block_tag(tag.name))) {
                if (heading_level == 0 && !text.empty()) pending_break = true;
            }
            continue;
        }

        // Text run up to the next tag.
        std::size_t next = html.find('<', i);
        if (next == std::string::npos) next = n;
        std::string decoded;
        decoded.reserve(next - i);
        std::size_t p = i;
        while (p < next) {
            if (html[p] == '&') {
                auto semi = html.find(';', p + 1);
                if (semi != std::string::npos && semi - p <= 10) {
                    append_entity(decoded, std::string_view(html.data() + p + 1, semi - p - 1));
                    p = semi + 1;
                    continue;
                }
            }
            decoded += html[p++];
        }
        if (!skip_tag.empty()) {
            // dropped
        } else if (heading_level != 0) {
            emit_text(heading, decoded);
        } else {
            emit_text(text, decoded);
        }
        i = next;
    }
    flush_section();
    page.sections[std::string(kLedeHeader)]; // lede key always present

    std::string full;
    for (std::size_t h = 0; h < page.headers.size(); ++h) {
        if (h) full += "\n\n";
        full += page.sections[page.headers[h]];
    }
    page.full_text = std::move(full);
    return page;
}

// -------------------------------------------------------------------------
// Transports
// -------------------------------------------------------------------------

class WikiTransport {
public:
    virtual ~WikiTransport() = default;
    // Ranked candidate page titles for a query. Empty when nothing matches.
    virtual std::vector<std::string> search(const std::string& query) = 0;
    // Raw article HTML for an exact title. Throws WikiError when unavailable.
    virtual std::string fetch_html(const std::string& title) = 0;
};

// Filesystem-safe cache/fixture key.
inline std::string normalize_title(std::string_view title) {
    std::string out;
    bool pending_sep = false;
    for (char ch : trim(title)) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_sep = true;
            continue;
        }
        if (pending_sep && !out.empty()) out += '_';
        pending_sep = false;
        if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
        else if (c == '.' || c == '_' || c == '-') out += static_cast<char>(c);
        else out += '-';
    }
    return out;
}

// Replays recorded search results and page HTML from a directory:
//   <dir>/search/<normalized-query>.json   {"titles": ["...", ...]}
//   <dir>/pages/<normalized-title>.html
class FixtureTransport : public WikiTransport {
public:
    explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

    std::vector<std::string> search(const std::string& query) override {
        auto path = dir_ / "search" / (normalize_title(query) + ".json");
        std::ifstream in(path);
        if (!in) {
            // A page fixture with the query's own title counts as an exact hit.
            if (std::filesystem::exists(page_path(query))) return {query};
            return {};
        }
        nlohmann::json j = nlohmann::json::parse(in);
        return j.at("titles").get<std::vector<std::string>>();
    }

    std::string fetch_html(const std::string& title) override {
        std::ifstream in(page_path(title));
        if (!in) throw WikiError("no fixture page for title '" + title + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

private:
    std::filesystem::path page_path(const std::string& title) const {
        return dir_ / "pages" / (normalize_title(title) + ".html");
    }
    std::filesystem::path dir_;
};

// Counts underlying transport operations; used to verify that cache hits
// perform zero network I/O.
class CountingTransport : public WikiTransport {
public:
    explicit CountingTransport(std::shared_ptr<WikiTransport> inner) : inner_(std::move(inner)) {}

    std::vector<std::string> search(const std::string& query) override {
        ++ops_;
        return inner_->search(query);
    }
    std::string fetch_html(const std::string& title) override {
        ++ops_;
        return inner_->fetch_html(title);
    }
    std::size_t operations() const { return ops_.load(); }

private:
    std::shared_ptr<WikiTransport> inner_;
    std::atomic<std::size_t> ops_{0};
};

// -------------------------------------------------------------------------
// TTL disk cache
// -------------------------------------------------------------------------

struct CacheEntry {
    std::string key;
    WikiPage page;
    std::time_t fetched_at = 0;
};

inline constexpr int kDefaultCacheTtlDays = 90;

// One <key>.html file per page plus a <key>.meta sidecar with the fetch
// timestamp. Entries older than the TTL are ignored; corrupt files degrade
// to a miss with a warning.
class DiskCache {
public:
    DiskCache(std::filesystem::path dir, int ttl_days = kDefaultCacheTtlDays)
        : dir_(std::move(dir)), ttl_days_(ttl_days) {
        std::filesystem::create_directories(dir_);
    }

    std::optional<CacheEntry> lookup(const std::string& key, std::time_t now) const {
        std::lock_guard lock(mu_);
        std::ifstream meta(meta_path(key));
        if (!meta) return std::nullopt;
        long long fetched_at = -1;
        std::string title;
        meta >> fetched_at;
        std::getline(meta >> std::ws, title);
        if (fetched_at < 0) {
            std::cerr << "warning: corrupt cache meta for '" << key << "', treating as miss\n";
            return std::nullopt;
        }
        double age = std::difftime(now, static_cast<std::time_t>(fetched_at));
        if (age > static_cast<double>(ttl_days_) * 86400.0 || age < 0) return std::nullopt;

        std::ifstream html_in(html_path(key));
        if (!html_in) {
            std::cerr << "warning: cache meta without page for '" << key << "', treating as miss\n";
            return std::nullopt;
        }
        std::ostringstream ss;
        ss << html_in.rdbuf();
        try {
            CacheEntry entry;
            entry.key = key;
            entry.page = parse_wiki_html(ss.str());
            entry.page.title = title.empty() ? key : title;
            entry.page.fetched_at = static_cast<std::time_t>(fetched_at);
            entry.fetched_at = entry.page.fetched_at;
            return entry;
        } catch (const WikiError& e) {
            std::cerr << "warning: corrupt cache page for '" << key << "': " << e.what() << "\n";
            return std::nullopt;
        }
    }

    void insert(const std::string& key, const std::string& title, const std::string& html,
                std::time_t now) const {
        std::lock_guard lock(mu_);
        std::ofstream html_out(html_path(key), std::ios::trunc);
        html_out << html;
        std::ofstream meta(meta_path(key), std::ios::trunc);
        meta << static_cast<long long>(now) << '\n' << title << '\n';
    }

    const std::filesystem::path& dir() const { return dir_; }
    int ttl_days() const { return ttl_days_; }

private:
    std::filesystem::path html_path(const std::string& key) const { return dir_ / (key + ".html"); }
    std::filesystem::path meta_path(const std::string& key) const { return dir_ / (key + ".meta"); }

    std::filesystem::path dir_;
    int ttl_days_;
    mutable std::mutex mu_;
};

// -------------------------------------------------------------------------
// Wikipedia tool service
// -------------------------------------------------------------------------

struct WikiStats {
    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

struct WikiConfig {
    std::filesystem::path cache_dir;
    int ttl_days = kDefaultCacheTtlDays;
    std::size_t page_cap = 2000;     // "too long" threshold, in characters
    std::size_t max_candidates = 10; // disambiguation list length
};

class WikiService {
public:
    using Clock = std::function<std::time_t()>;

    WikiService(std::shared_ptr<WikiTransport> transport, WikiConfig config, Clock clock = {})
        : transport_(std::move(transport)), config_(std::move(config)),
          cache_(config_.cache_dir, config_.ttl_days),
          clock_(clock ? std::move(clock) : [] { return std::time(nullptr); }) {}

    ToolResult fetch_entity(const std::string& entity, WikiStats* stats = nullptr) {
        auto resolved = resolve(entity, stats);
        if (resolved.second) return *resolved.second;
        const WikiPage& page = *resolved.first;
        if (utf8::length(page.full_text) > config_.page_cap)
            return {ToolResultKind::TooLong, too_long_message(page.headers)};
        return {ToolResultKind::Content, page.full_text};
    }

    ToolResult fetch_entity_with_header(const std::string& entity, const std::string& header,
                                        WikiStats* stats = nullptr) {
        auto resolved = resolve(entity, stats);
        if (resolved.second) return *resolved.second;
        const WikiPage& page = *resolved.first;
        std::string wanted = to_lower(trim(header));
        for (const std::string& h : page.headers)
            if (to_lower(trim(h)) == wanted)
                return {ToolResultKind::Content, page.sections.at(h)};
        return {ToolResultKind::HeaderError, header_error_message(header, page.headers)};
    }

    const DiskCache& cache() const { return cache_; }
    const WikiConfig& config() const { return config_; }
    std::size_t cache_hits() const { return total_hits_.load(); }
    std::size_t cache_misses() const { return total_misses_.load(); }

private:
    // Either a page or a terminal ToolResult (NotFound/Disambiguation/Error).
    std::pair<std::optional<WikiPage>, std::optional<ToolResult>>
    resolve(const std::string& entity, WikiStats* stats) {
        if (trim(entity).empty())
            return {std::nullopt,
                    ToolResult{ToolResultKind::Error, "Error: entity must not be empty."}};

        const std::string key = normalize_title(entity);
        const std::time_t now = clock_();
        if (auto entry = cache_.lookup(key, now)) {
            note_hit(stats);
            return {std::move(entry->page), std::nullopt};
        }
        note_miss(stats);

        std::vector<std::string> titles;
        try {
            titles = transport_->search(entity);
        } catch (const std::exception& e) {
            return {std::nullopt,
                    ToolResult{ToolResultKind::Error,
                               std::string("Error: Wikipedia search failed: ") + e.what()}};
        }
        if (titles.empty())
            return {std::nullopt, ToolResult{ToolResultKind::NotFound, not_found_message(entity)}};

        std::string chosen;
        for (const std::string& t : titles)
            if (normalize_title(t) == key) {
                chosen = t;
                break;
            }
        if (chosen.empty() && titles.size() == 1) chosen = titles.front();
        if (chosen.empty()) {
            std::vector<std::string> top(titles.begin(),
                                         titles.begin() +
                                             std::min(titles.size(), config_.max_candidates));
            return {std::nullopt,
                    ToolResult{ToolResultKind::Disambiguation, disambiguation_message(entity, top)}};
        }

        try {
            std::string html = transport_->fetch_html(chosen);
            WikiPage page = parse_wiki_html(html);
            page.title = chosen;
            page.fetched_at = now;
            cache_.insert(key, chosen, html, now);
            return {std::move(page), std::nullopt};
        } catch (const std::exception& e) {
            return {std::nullopt,
                    ToolResult{ToolResultKind::Error,
                               std::string("Error: could not fetch Wikipedia page: ") + e.what()}};
        }
    }

    void note_hit(WikiStats* stats) {
        ++total_hits_;
        if (stats) ++stats->cache_hits;
    }
    void note_miss(WikiStats* stats) {
        ++total_misses_;
        if (stats) ++stats->cache_misses;
    }

    std::shared_ptr<WikiTransport> transport_;
    WikiConfig config_;
    DiskCache cache_;
    Clock clock_;
    std::atomic<std::size_t> total_hits_{0};
    std::atomic<std::size_t> total_misses_{0};
};

// -------------------------------------------------------------------------
// Tool registry binding
// -------------------------------------------------------------------------

struct Toolset {
    using Executor =
        std::function<ToolResult(const std::map<std::string, std::string>&, WikiStats*)>;
    std::vector<ToolSpec> specs;
    std::map<std::string, Executor> executors;
};

inline constexpr std::string_view kFetchEntityTool = "fetch_wikipedia_entity";
inline constexpr std::string_view kFetchEntityWithHeaderTool = "fetch_wikipedia_entity_with_header";

// The two agent tools with the docstrings the model sees.
inline Toolset wikipedia_toolset(std::shared_ptr<WikiService> service) {
    Toolset ts;
    ts.specs.push_back(ToolSpec{
        std::string(kFetchEntityTool),
        "Search for a given entity on Wikipedia.\n"
        "Examples Usage: \"fetch_wikipedia_entity('Python')\" will return the content of the "
        "Python Wikipedia page.\n"
        "Use the `fetch_wikipedia_entity_with_header` tool to get specific information.",
        {{"entity", "string", "The entity to search for.", true}}});
    ts.specs.push_back(ToolSpec{
        std::string(kFetchEntityWithHeaderTool),
        "Get the content of a specific header from a Wikipedia page.\n"
        "This function should be used after `fetch_wikipedia_entity`. Examples Usage: "
        "\"fetch_wikipedia_entity_with_header('Python', 'History')\" will return the History "
        "section of the Python Wikipedia page.",
        {{"entity", "string", "The entity to search for.", true},
         {"header", "string", "The header to extract the content from.", true}}});

    ts.executors[std::string(kFetchEntityTool)] =
        [service](const std::map<std::string, std::string>& args, WikiStats* stats) {
            auto it = args.find("entity");
            if (it == args.end())
                return ToolResult{ToolResultKind::Error,
                                  "Error: missing required argument 'entity'."};
            return service->fetch_entity(it->second, stats);
        };
    ts.executors[std::string(kFetchEntityWithHeaderTool)] =
        [service](const std::map<std::string, std::string>& args, WikiStats* stats) {
            auto entity = args.find("entity");
            auto header = args.find("header");
            if (entity == args.end() || header == args.end())
                return ToolResult{ToolResultKind::Error,
                                  "Error: missing required argument 'entity' or 'header'."};
            return service->fetch_entity_with_header(entity->second, header->second, stats);
        };
    return ts;
}

} // namespace factcheck
