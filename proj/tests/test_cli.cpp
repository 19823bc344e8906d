// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "factcheck/corpus.hpp"
#include "factcheck/runner.hpp"
#include "testutil.hpp"

using namespace factcheck;
using testutil::CliResult;
using testutil::TempDir;
using testutil::run_cli;

namespace {

std::string fixture(const std::string& name) {
    return (testutil::fixtures_dir() / name).string();
}

} // namespace

TEST_CASE("validate accepts the balanced fixture") {
    CliResult r = run_cli("validate --corpus " + fixture("corpus12.jsonl"));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("no violations") != std::string::npos);
}

TEST_CASE("validate --strict rejects an imbalanced corpus with exit 1") {
    TempDir tmp;
    Corpus c = load_corpus(testutil::fixtures_dir() / "corpus12.jsonl", true);
    c.statements.pop_back(); // 11 statements: imbalanced both ways
    std::ostringstream out;
    serialize_corpus(c, out);
    testutil::spit(tmp / "imbalanced.jsonl", out.str());

    CliResult strict = run_cli("validate --strict --corpus " + (tmp / "imbalanced.jsonl").string());
    CHECK(strict.exit_code == 1);
    // Without --strict the same file passes with warnings in the report.
    CliResult loose = run_cli("validate --corpus " + (tmp / "imbalanced.jsonl").string());
    CHECK(loose.exit_code == 0);
    CHECK(loose.out.find("violation") != std::string::npos);
}

TEST_CASE("validate reports a missing file with exit 2") {
    CliResult r = run_cli("validate --corpus /nonexistent/corpus.jsonl");
    CHECK(r.exit_code == 2);
    CHECK(!r.err.empty());
}

TEST_CASE("run with the gold-echo backend scores 100 percent and is reproducible") {
    TempDir tmp;
    std::string base = "run --corpus " + fixture("corpus12.jsonl") +
                       " --scenario rag --backend scripted:echo-gold --model echo "
                       "--parallelism 4 --out ";
    CliResult first = run_cli(base + (tmp / "a.jsonl").string());
    REQUIRE(first.exit_code == 0);
    CHECK(first.out.find("accuracy 100.0 %") != std::string::npos);
    CHECK(first.out.find("unclear 0") != std::string::npos);

    CliResult second = run_cli(base + (tmp / "b.jsonl").string());
    REQUIRE(second.exit_code == 0);
    CHECK(testutil::slurp(tmp / "a.jsonl") == testutil::slurp(tmp / "b.jsonl"));

    auto records = load_records(tmp / "a.jsonl");
    CHECK(records.size() == 12);
}

TEST_CASE("run replays the recorded agent trajectory to a false verdict") {
    TempDir tmp;
    std::string cmd = "run --corpus " + fixture("corpus_putin.jsonl") +
                      " --scenario agent --backend scripted:" +
                      fixture("trajectories/listing4_putin.jsonl") + " --model llama-3.3" +
                      " --wiki-fixtures " + (testutil::fixtures_dir() / "wiki").string() +
                      " --cache-dir " + (tmp / "cache").string() + " --out " +
                      (tmp / "records.jsonl").string();
    CliResult r = run_cli(cmd);
    REQUIRE(r.exit_code == 0);

    auto records = load_records(tmp / "records.jsonl");
    REQUIRE(records.size() == 1);
    CHECK(records[0].predicted == Verdict::False);
    CHECK(records[0].n_tool_steps == 3);
    CHECK(!records[0].hit_step_limit);
}

TEST_CASE("run rejects unknown scenarios and backends") {
    TempDir tmp;
    CliResult bad_scenario = run_cli("run --corpus " + fixture("corpus12.jsonl") +
                                     " --scenario wild --backend scripted:echo-gold --out " +
                                     (tmp / "x.jsonl").string());
    CHECK(bad_scenario.exit_code == 2);
    CliResult bad_backend = run_cli("run --corpus " + fixture("corpus12.jsonl") +
                                    " --scenario rag --backend carrier-pigeon --out " +
                                    (tmp / "y.jsonl").string());
    CHECK(bad_backend.exit_code == 2);
}

TEST_CASE("analyze reproduces the published regression from the cell fixture") {
    TempDir tmp;
    CliResult r = run_cli("analyze --input " + (testutil::data_dir() / "table1_cells.csv").string() +
                          " --out-dir " + (tmp / "report").string());
    REQUIRE(r.exit_code == 0);

    std::string summary = testutil::slurp(tmp / "report" / "regression_summary.txt");
    CHECK(summary.find("1.6112") != std::string::npos);
    CHECK(summary.find("Pseudo R-squ.: 0.2991") != std::string::npos);
    CHECK(summary.find("LLR p-value: 0.000") != std::string::npos);
    CHECK(summary.find("No. Observations: 5400") != std::string::npos);
    CHECK(summary.find("Df Model: 9") != std::string::npos);

    std::string gap = testutil::slurp(tmp / "report" / "relative_gap.txt");
    CHECK(gap.find("29.4") != std::string::npos);
    CHECK(std::filesystem::exists(tmp / "report" / "accuracy_table.csv"));
    CHECK(std::filesystem::exists(tmp / "report" / "regression_coefficients.csv"));
}

TEST_CASE("analyze emits confusion matrices for record input") {
    TempDir tmp;
    std::string run_cmd = "run --corpus " + fixture("corpus12.jsonl") +
                          " --scenario statement --backend scripted:echo-gold --model echo "
                          "--out " + (tmp / "records.jsonl").string();
    REQUIRE(run_cli(run_cmd).exit_code == 0);

    CliResult r = run_cli("analyze --input " + (tmp / "records.jsonl").string() + " --out-dir " +
                          (tmp / "report").string());
    // A perfect run has a single-class outcome: the regression is reported
    // as an analysis error, but the tables are still written.
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("analysis error") != std::string::npos);
    CHECK(std::filesystem::exists(tmp / "report" / "confusion_matrices.csv"));
    std::string confusion = testutil::slurp(tmp / "report" / "confusion_matrices.csv");
    CHECK(confusion.find("echo,statement,true,6,0,0") != std::string::npos);
    CHECK(confusion.find("echo,statement,false,0,6,0") != std::string::npos);
}

TEST_CASE("analyze reports empty and missing inputs distinctly") {
    TempDir tmp;
    testutil::spit(tmp / "empty.csv", "");
    CliResult empty = run_cli("analyze --input " + (tmp / "empty.csv").string() + " --out-dir " +
                              (tmp / "r1").string());
    CHECK(empty.exit_code == 1);
    CliResult missing = run_cli("analyze --input /nonexistent/cells.csv --out-dir " +
                                (tmp / "r2").string());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("config files feed the runner and flags override them") {
    TempDir tmp;
    testutil::spit(tmp / "run.conf", "model = from-config\nparallelism = 2\nchar_cap = 2000\n");
    std::string cmd = "run --corpus " + fixture("corpus12.jsonl") +
                      " --scenario rag --backend scripted:echo-gold --config " +
                      (tmp / "run.conf").string() + " --out " + (tmp / "r.jsonl").string();
    REQUIRE(run_cli(cmd).exit_code == 0);
    auto records = load_records(tmp / "r.jsonl");
    REQUIRE(!records.empty());
    CHECK(records[0].model_id == "from-config");

    REQUIRE(run_cli(cmd + " --model flag-wins").exit_code == 0);
    CHECK(load_records(tmp / "r.jsonl")[0].model_id == "flag-wins");

    testutil::spit(tmp / "bad.conf", "char_cap = 0\n");
    CliResult bad = run_cli("run --corpus " + fixture("corpus12.jsonl") +
                            " --scenario rag --backend scripted:echo-gold --config " +
                            (tmp / "bad.conf").string() + " --out " + (tmp / "z.jsonl").string());
    CHECK(bad.exit_code == 2);
}
