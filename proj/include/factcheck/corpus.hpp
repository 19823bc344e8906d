// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "factcheck/util.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Domain enumerations
// -------------------------------------------------------------------------

enum class Region { Africa, AsiaPacific, Europe, LatinAmerica, MiddleEast, NorthAmerica };
enum class Hemisphere { GlobalNorth, GlobalSouth };
enum class Verdict { True, False, Unclear };

inline constexpr std::array<Region, 6> kAllRegions = {
    Region::Africa,       Region::AsiaPacific, Region::Europe,
    Region::LatinAmerica, Region::MiddleEast,  Region::NorthAmerica,
};

inline Hemisphere hemisphere(Region r) {
    switch (r) {
    case Region::Africa:
    case Region::LatinAmerica:
    case Region::MiddleEast:
        return Hemisphere::GlobalSouth;
    case Region::AsiaPacific:
    case Region::Europe:
    case Region::NorthAmerica:
        return Hemisphere::GlobalNorth;
    }
    throw CorpusError("hemisphere: invalid region");
}

// Tokens are the on-disk spelling; display names match report tables.
inline std::string_view region_token(Region r) {
    switch (r) {
    case Region::Africa: return "africa";
    case Region::AsiaPacific: return "asia_pacific";
    case Region::Europe: return "europe";
    case Region::LatinAmerica: return "latin_america";
    case Region::MiddleEast: return "middle_east";
    case Region::NorthAmerica: return "north_america";
    }
    return "";
}

inline std::string_view region_name(Region r) {
    switch (r) {
    case Region::Africa: return "Africa";
    case Region::AsiaPacific: return "Asia-Pacific";
    case Region::Europe: return "Europe";
    case Region::LatinAmerica: return "Latin America";
    case Region::MiddleEast: return "Middle East";
    case Region::NorthAmerica: return "North America";
    }
    return "";
}

inline std::optional<Region> parse_region(std::string_view token) {
    for (Region r : kAllRegions)
        if (region_token(r) == token) return r;
    return std::nullopt;
}

inline std::string_view verdict_token(Verdict v) {
    switch (v) {
    case Verdict::True: return "true";
    case Verdict::False: return "false";
    case Verdict::Unclear: return "unclear";
    }
    return "";
}

inline std::optional<Verdict> parse_verdict_token(std::string_view token) {
    if (token == "true") return Verdict::True;
    if (token == "false") return Verdict::False;
    if (token == "unclear") return Verdict::Unclear;
    return std::nullopt;
}

// -------------------------------------------------------------------------
// Statements and corpora
// -------------------------------------------------------------------------

struct YearMonth {
    int year = 0;
    int month = 0;

    auto operator<=>(const YearMonth&) const = default;

    std::string str() const {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
        return buf;
    }

    static std::optional<YearMonth> parse(std::string_view s) {
        if (s.size() != 7 || s[4] != '-') return std::nullopt;
        for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u})
            if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
        YearMonth ym;
        ym.year = (s[0] - '0') * 1000 + (s[1] - '0') * 100 + (s[2] - '0') * 10 + (s[3] - '0');
        ym.month = (s[5] - '0') * 10 + (s[6] - '0');
        if (ym.month < 1 || ym.month > 12) return std::nullopt;
        return ym;
    }
};

// Statements outside this window are rejected under strict validation.
inline constexpr YearMonth kEarliestPublished{2017, 4};
inline constexpr YearMonth kLatestPublished{2023, 9};

inline constexpr std::size_t kMinArticleChars = 300;

struct Statement {
    std::string id;
    std::string text;
    Region region = Region::Africa;
    Verdict gold = Verdict::False; // never Unclear
    std::string source_url;
    std::string article_text;
    YearMonth published;
};

struct Corpus {
    std::vector<Statement> statements;
    std::map<std::string, std::string> provenance;
};

struct ValidationReport {
    std::array<std::size_t, 6> region_counts{}; // indexed by Region order
    std::size_t n_true = 0;
    std::size_t n_false = 0;
    std::size_t min_article_chars = 0;
    std::size_t max_article_chars = 0;
    std::vector<std::string> violations;

    bool strict_valid() const { return violations.empty(); }
};

// -------------------------------------------------------------------------
// Load / validate / serialize
// -------------------------------------------------------------------------

namespace detail {

inline Statement statement_from_json(const nlohmann::json& j) {
    Statement s;
    s.id = j.at("id").get<std::string>();
    s.text = j.at("text").get<std::string>();

    auto region = parse_region(j.at("region").get<std::string>());
    if (!region) throw CorpusError("unknown region '" + j.at("region").get<std::string>() + "'");
    s.region = *region;

    std::string gold_tok;
    if (j.at("gold").is_boolean())
        gold_tok = j.at("gold").get<bool>() ? "true" : "false";
    else
        gold_tok = j.at("gold").get<std::string>();
    auto gold = parse_verdict_token(gold_tok);
    if (!gold || *gold == Verdict::Unclear)
        throw CorpusError("gold label must be 'true' or 'false', got '" + gold_tok + "'");
    s.gold = *gold;

    s.source_url = j.at("source_url").get<std::string>();
    s.article_text = j.at("article_text").get<std::string>();

    auto published = YearMonth::parse(j.at("published").get<std::string>());
    if (!published) throw CorpusError("published must be YYYY-MM");
    s.published = *published;
    return s;
}

inline nlohmann::ordered_json statement_to_json(const Statement& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["text"] = s.text;
    j["region"] = std::string(region_token(s.region));
    j["gold"] = std::string(verdict_token(s.gold));
    j["source_url"] = s.source_url;
    j["article_text"] = s.article_text;
    j["published"] = s.published.str();
    return j;
}

} // namespace detail

inline ValidationReport validate_corpus(const Corpus& c) {
    ValidationReport rep;
    std::set<std::string> ids;
    bool first = true;
    for (const Statement& s : c.statements) {
        rep.region_counts[static_cast<std::size_t>(s.region)]++;
        if (s.gold == Verdict::True)
            rep.n_true++;
        else if (s.gold == Verdict::False)
            rep.n_false++;
        else
            rep.violations.push_back("statement '" + s.id + "': gold label is 'unclear'");

        std::size_t len = utf8::length(s.article_text);
        if (first) {
            rep.min_article_chars = rep.max_article_chars = len;
            first = false;
        } else {
            rep.min_article_chars = std::min(rep.min_article_chars, len);
            rep.max_article_chars = std::max(rep.max_article_chars, len);
        }
        if (len < kMinArticleChars)
            rep.violations.push_back("statement '" + s.id + "': article_text has " +
                                     std::to_string(len) + " characters, minimum is " +
                                     std::to_string(kMinArticleChars));
        if (s.published < kEarliestPublished || s.published > kLatestPublished)
            rep.violations.push_back("statement '" + s.id + "': published " + s.published.str() +
                                     " outside " + kEarliestPublished.str() + ".." +
                                     kLatestPublished.str());
        if (!ids.insert(s.id).second)
            rep.violations.push_back("duplicate statement id '" + s.id + "'");
    }

    std::size_t per_region = rep.region_counts[0];
    for (std::size_t i = 1; i < rep.region_counts.size(); ++i) {
        if (rep.region_counts[i] != per_region) {
            rep.violations.push_back("region imbalance: counts per region are not all equal");
            break;
        }
    }
    if (rep.n_true != rep.n_false)
        rep.violations.push_back("label imbalance: " + std::to_string(rep.n_true) + " true vs " +
                                 std::to_string(rep.n_false) + " false");
    return rep;
}

// One statement object per line. Per-record invariants always hold on the
// result; strict mode additionally enforces balance and the publication window.
inline Corpus load_corpus(const std::filesystem::path& path, bool strict) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file: " + path.string());

    Corpus corpus;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        Statement s;
        try {
            s = detail::statement_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& e) {
            throw CorpusError(path.string() + ":" + std::to_string(lineno) +
                              ": malformed record: " + e.what());
        }
        if (!ids.insert(s.id).second)
            throw CorpusError(path.string() + ":" + std::to_string(lineno) +
                              ": duplicate statement id '" + s.id + "'");
        std::size_t len = utf8::length(s.article_text);
        if (len < kMinArticleChars)
            throw CorpusError(path.string() + ":" + std::to_string(lineno) + ": statement '" +
                              s.id + "': article_text has " + std::to_string(len) +
                              " characters, minimum is " + std::to_string(kMinArticleChars));
        corpus.statements.push_back(std::move(s));
    }
    corpus.provenance["path"] = path.string();

    if (strict) {
        ValidationReport rep = validate_corpus(corpus);
        if (!rep.strict_valid())
            throw CorpusError("strict validation failed for " + path.string() + ": " +
                              rep.violations.front() +
                              (rep.violations.size() > 1
                                   ? " (+" + std::to_string(rep.violations.size() - 1) + " more)"
                                   : ""));
    }
    return corpus;
}

inline void serialize_corpus(const Corpus& c, std::ostream& out) {
    for (const Statement& s : c.statements)
        out << detail::statement_to_json(s).dump() << '\n';
}

} // namespace factcheck
