// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "factcheck/corpus.hpp"
#include "testutil.hpp"

using namespace factcheck;
using testutil::TempDir;

namespace {

Statement make_statement(std::string id, Region region, Verdict gold) {
    Statement s;
    s.id = std::move(id);
    s.text = "Synthetic claim " + s.id + ".";
    s.region = region;
    s.gold = gold;
    s.source_url = "https://example.org/" + s.id;
    s.article_text = std::string(320, 'a');
    s.published = {2021, 6};
    return s;
}

std::string record_line(const Statement& s) {
    return detail::statement_to_json(s).dump();
}

} // namespace

TEST_CASE("hemisphere mapping is the fixed North/South partition") {
    CHECK(hemisphere(Region::Africa) == Hemisphere::GlobalSouth);
    CHECK(hemisphere(Region::LatinAmerica) == Hemisphere::GlobalSouth);
    CHECK(hemisphere(Region::MiddleEast) == Hemisphere::GlobalSouth);
    CHECK(hemisphere(Region::AsiaPacific) == Hemisphere::GlobalNorth);
    CHECK(hemisphere(Region::Europe) == Hemisphere::GlobalNorth);
    CHECK(hemisphere(Region::NorthAmerica) == Hemisphere::GlobalNorth);

    int north = 0, south = 0;
    for (Region r : kAllRegions)
        (hemisphere(r) == Hemisphere::GlobalNorth ? north : south)++;
    CHECK(north == 3);
    CHECK(south == 3);
}

TEST_CASE("shipped 12-statement fixture loads under strict validation") {
    Corpus c = load_corpus(testutil::fixtures_dir() / "corpus12.jsonl", /*strict=*/true);
    REQUIRE(c.statements.size() == 12);

    ValidationReport rep = validate_corpus(c);
    CHECK(rep.violations.empty());
    CHECK(rep.n_true == 6);
    CHECK(rep.n_false == 6);
    for (std::size_t count : rep.region_counts) CHECK(count == 2);
    CHECK(rep.min_article_chars >= kMinArticleChars);
}

TEST_CASE("article below 300 characters is rejected with the offending id") {
    TempDir tmp;
    Statement bad = make_statement("short-article", Region::Europe, Verdict::True);
    bad.article_text = std::string(250, 'x');
    testutil::spit(tmp / "c.jsonl", record_line(bad) + "\n");

    REQUIRE_THROWS_MATCHES(load_corpus(tmp / "c.jsonl", false), CorpusError,
                           Catch::Matchers::MessageMatches(
                               Catch::Matchers::ContainsSubstring("short-article") &&
                               Catch::Matchers::ContainsSubstring("250")));
}

TEST_CASE("full-scale 600-statement corpus passes strict validation") {
    TempDir tmp;
    std::ostringstream out;
    int serial = 0;
    for (Region r : kAllRegions)
        for (int i = 0; i < 100; ++i) {
            Statement s = make_statement("gen-" + std::to_string(serial++), r,
                                         i % 2 ? Verdict::True : Verdict::False);
            out << record_line(s) << '\n';
        }
    testutil::spit(tmp / "c600.jsonl", out.str());

    Corpus c = load_corpus(tmp / "c600.jsonl", /*strict=*/true);
    CHECK(c.statements.size() == 600);
}

TEST_CASE("malformed record reports its line number") {
    TempDir tmp;
    Statement ok = make_statement("ok-1", Region::Africa, Verdict::True);
    testutil::spit(tmp / "c.jsonl", record_line(ok) + "\nnot json at all\n");
    REQUIRE_THROWS_MATCHES(
        load_corpus(tmp / "c.jsonl", false), CorpusError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(":2:")));
}

TEST_CASE("duplicate ids are rejected") {
    TempDir tmp;
    Statement s = make_statement("dup", Region::Africa, Verdict::True);
    testutil::spit(tmp / "c.jsonl", record_line(s) + "\n" + record_line(s) + "\n");
    REQUIRE_THROWS_MATCHES(
        load_corpus(tmp / "c.jsonl", false), CorpusError,
        Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("duplicate")));
}

TEST_CASE("gold label must be true or false") {
    TempDir tmp;
    Statement s = make_statement("g", Region::Africa, Verdict::True);
    auto j = detail::statement_to_json(s);
    j["gold"] = "unclear";
    testutil::spit(tmp / "c.jsonl", j.dump() + "\n");
    REQUIRE_THROWS_AS(load_corpus(tmp / "c.jsonl", false), CorpusError);
}

TEST_CASE("validate_corpus flags region imbalance") {
    Corpus c;
    c.statements.push_back(make_statement("a1", Region::Africa, Verdict::True));
    c.statements.push_back(make_statement("a2", Region::Africa, Verdict::False));
    c.statements.push_back(make_statement("a3", Region::Africa, Verdict::True));
    c.statements.push_back(make_statement("e1", Region::Europe, Verdict::False));
    ValidationReport rep = validate_corpus(c);
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.find("region imbalance") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("validate_corpus flags label imbalance") {
    Corpus c;
    int serial = 0;
    for (Region r : kAllRegions) {
        c.statements.push_back(make_statement("t" + std::to_string(serial++), r, Verdict::True));
        c.statements.push_back(make_statement("u" + std::to_string(serial++), r, Verdict::True));
    }
    // 12 true, 0 false but perfectly region-balanced
    ValidationReport rep = validate_corpus(c);
    bool found = false;
    for (const auto& v : rep.violations)
        if (v.find("label imbalance") != std::string::npos) found = true;
    CHECK(found);
}

TEST_CASE("published window is enforced only under strict validation") {
    TempDir tmp;
    Statement s = make_statement("old", Region::Africa, Verdict::True);
    s.published = {2016, 12};
    testutil::spit(tmp / "c.jsonl", record_line(s) + "\n");

    Corpus c = load_corpus(tmp / "c.jsonl", /*strict=*/false);
    CHECK(c.statements.size() == 1);
    CHECK(!validate_corpus(c).violations.empty());
    REQUIRE_THROWS_AS(load_corpus(tmp / "c.jsonl", /*strict=*/true), CorpusError);
}

TEST_CASE("serialize/load round-trips a valid corpus") {
    Corpus c = load_corpus(testutil::fixtures_dir() / "corpus12.jsonl", true);
    std::ostringstream first;
    serialize_corpus(c, first);

    TempDir tmp;
    testutil::spit(tmp / "rt.jsonl", first.str());
    Corpus reloaded = load_corpus(tmp / "rt.jsonl", true);
    std::ostringstream second;
    serialize_corpus(reloaded, second);
    CHECK(first.str() == second.str());
    REQUIRE(reloaded.statements.size() == c.statements.size());
    CHECK(reloaded.statements[3].text == c.statements[3].text);
    CHECK(reloaded.statements[7].published == c.statements[7].published);
}

TEST_CASE("zero violations coincides with strict acceptance") {
    TempDir tmp;
    // Balanced pair: strict accepts, report is clean.
    std::ostringstream balanced;
    int serial = 0;
    for (Region r : kAllRegions) {
        balanced << record_line(make_statement("b" + std::to_string(serial++), r, Verdict::True))
                 << '\n';
        balanced << record_line(make_statement("b" + std::to_string(serial++), r, Verdict::False))
                 << '\n';
    }
    testutil::spit(tmp / "balanced.jsonl", balanced.str());
    Corpus good = load_corpus(tmp / "balanced.jsonl", false);
    CHECK(validate_corpus(good).strict_valid());
    REQUIRE_NOTHROW(load_corpus(tmp / "balanced.jsonl", true));

    // Imbalanced: report has violations, strict rejects.
    std::ostringstream imbalanced(balanced.str(), std::ios::app);
    imbalanced << record_line(make_statement("extra", Region::Africa, Verdict::True)) << '\n';
    testutil::spit(tmp / "imbalanced.jsonl", imbalanced.str());
    Corpus bad = load_corpus(tmp / "imbalanced.jsonl", false);
    CHECK(!validate_corpus(bad).strict_valid());
    REQUIRE_THROWS_AS(load_corpus(tmp / "imbalanced.jsonl", true), CorpusError);
}

TEST_CASE("article length is counted in Unicode scalars, not bytes") {
    TempDir tmp;
    Statement s = make_statement("uni", Region::Europe, Verdict::True);
    // 299 two-byte characters: 598 bytes but only 299 scalars -> rejected.
    std::string text;
    for (int i = 0; i < 299; ++i) text += "\xC3\xA9"; // é
    s.article_text = text;
    testutil::spit(tmp / "c.jsonl", record_line(s) + "\n");
    REQUIRE_THROWS_AS(load_corpus(tmp / "c.jsonl", false), CorpusError);

    s.article_text = text + "\xC3\xA9"; // 300 scalars
    testutil::spit(tmp / "c2.jsonl", record_line(s) + "\n");
    REQUIRE_NOTHROW(load_corpus(tmp / "c2.jsonl", false));
}

TEST_CASE("YearMonth parses YYYY-MM only") {
    CHECK(YearMonth::parse("2017-04") == YearMonth{2017, 4});
    CHECK(!YearMonth::parse("2017-13"));
    CHECK(!YearMonth::parse("17-04"));
    CHECK(!YearMonth::parse("2017/04"));
    CHECK(!YearMonth::parse("2017-4"));
}
