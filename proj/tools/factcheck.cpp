// SPDX-License-Identifier: Apache-2.0
//
// factcheck — batch fact-checking harness and analysis CLI.
//
//   factcheck validate --corpus c.jsonl [--strict]
//   factcheck run --corpus c.jsonl --scenario agent --backend scripted:traj.jsonl --out r.jsonl
//   factcheck analyze --input cells.csv --out-dir report/

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "factcheck/analysis.hpp"
#include "factcheck/config.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/runner.hpp"
#include "factcheck/wiki_live.hpp"
#include "factcheck/wikitools.hpp"
#include "factcheck/wire.hpp"

namespace fs = std::filesystem;
using namespace factcheck;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAnalysis = 1; // validation or analysis failure
constexpr int kExitIo = 2;       // I/O or config error

void print_report(const ValidationReport& rep) {
    std::cout << "statements: "
              << (rep.n_true + rep.n_false) << " (" << rep.n_true << " true, " << rep.n_false
              << " false)\n";
    std::cout << "per region:";
    for (Region r : kAllRegions)
        std::cout << ' ' << region_token(r) << '='
                  << rep.region_counts[static_cast<std::size_t>(r)];
    std::cout << '\n';
    std::cout << "article length: min " << rep.min_article_chars << ", max "
              << rep.max_article_chars << " characters\n";
    if (rep.violations.empty()) {
        std::cout << "no violations\n";
    } else {
        std::cout << rep.violations.size() << " violation(s):\n";
        for (const std::string& v : rep.violations) std::cout << "  - " << v << '\n';
    }
}

int cmd_validate(const fs::path& corpus_path, bool strict) {
    if (!fs::exists(corpus_path)) {
        std::cerr << "error: no such file: " << corpus_path << '\n';
        return kExitIo;
    }
    Corpus corpus;
    try {
        corpus = load_corpus(corpus_path, /*strict=*/false);
    } catch (const CorpusError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAnalysis;
    }
    ValidationReport rep = validate_corpus(corpus);
    print_report(rep);
    if (strict && !rep.strict_valid()) return kExitAnalysis;
    return kExitOk;
}

std::shared_ptr<Backend> make_backend(const std::string& selector, const Config& cfg,
                                      const Corpus& corpus) {
    if (selector == "wire")
        return std::make_shared<WireBackend>(cfg.base_url, cfg.api_key_env);
    if (selector == "scripted:echo-gold") {
        std::map<std::string, std::string> gold;
        for (const Statement& s : corpus.statements)
            gold[s.text] = std::string(verdict_token(s.gold));
        return std::make_shared<EchoGoldBackend>(std::move(gold));
    }
    if (selector.rfind("scripted:", 0) == 0)
        return scripted_backend_from_trajectory(selector.substr(9));
    throw ConfigError("unknown backend selector '" + selector +
                      "' (expected wire or scripted:<fixture>)");
}

int cmd_run(const fs::path& corpus_path, const std::string& scenario_token_str, Config cfg,
            const std::string& backend_selector, const fs::path& out_path, bool strict) {
    auto scenario = parse_scenario(scenario_token_str);
    if (!scenario) {
        std::cerr << "error: unknown scenario '" << scenario_token_str << "'\n";
        return kExitIo;
    }
    if (!fs::exists(corpus_path)) {
        std::cerr << "error: no such file: " << corpus_path << '\n';
        return kExitIo;
    }
    Corpus corpus;
    try {
        corpus = load_corpus(corpus_path, strict);
    } catch (const CorpusError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAnalysis;
    }

    std::shared_ptr<Backend> backend;
    try {
        backend = make_backend(backend_selector, cfg, corpus);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    }
    if (!backend->reachable()) {
        std::cerr << "error: backend unreachable at " << cfg.base_url << '\n';
        return kExitIo;
    }

    std::optional<Toolset> tools;
    std::shared_ptr<WikiService> wiki;
    if (*scenario == ScenarioKind::AgentWiki) {
        std::shared_ptr<WikiTransport> transport;
        if (cfg.wiki_mode == "fixture") {
            if (cfg.wiki_fixture_dir.empty()) {
                std::cerr << "error: wiki_mode=fixture requires wiki_fixture_dir\n";
                return kExitIo;
            }
            transport = std::make_shared<FixtureTransport>(cfg.wiki_fixture_dir);
        } else {
            transport = std::make_shared<LiveWikiTransport>(cfg.wiki_api_base);
        }
        WikiConfig wiki_cfg;
        wiki_cfg.cache_dir = cfg.cache_dir;
        wiki_cfg.ttl_days = cfg.cache_ttl_days;
        wiki_cfg.page_cap = cfg.page_cap;
        wiki = std::make_shared<WikiService>(transport, wiki_cfg);
        tools = wikipedia_toolset(wiki);
    }

    std::ofstream out(out_path, std::ios::trunc);
    if (!out) {
        std::cerr << "error: cannot open output file: " << out_path << '\n';
        return kExitIo;
    }

    RunnerOptions opt;
    opt.char_cap = cfg.char_cap;
    opt.step_cap = cfg.step_cap;
    opt.timeout = std::chrono::seconds(cfg.timeout_seconds);

    std::size_t n_correct = 0, n_unclear = 0, n_limit = 0, n_error = 0;
    auto sink = [&](const RunRecord& r) {
        out << record_to_json(r).dump() << '\n';
        if (r.correct()) ++n_correct;
        if (r.predicted == Verdict::Unclear) ++n_unclear;
        if (r.hit_step_limit) ++n_limit;
        if (!r.error.empty()) ++n_error;
    };
    auto records = run_corpus(corpus, *scenario, cfg.model_id, *backend, tools ? &*tools : nullptr,
                              cfg.parallelism, opt, sink);
    out.close();

    double acc = records.empty() ? 0.0 : 100.0 * double(n_correct) / double(records.size());
    std::cout << "ran " << records.size() << " statements: accuracy " << format_double(acc, 1)
              << " % (" << n_correct << '/' << records.size() << "), unclear " << n_unclear
              << ", step-limit hits " << n_limit << ", errors " << n_error << '\n';
    std::cout << "records written to " << out_path.string() << '\n';
    return kExitOk;
}

int cmd_analyze(const fs::path& input_path, const fs::path& out_dir) {
    if (!fs::exists(input_path)) {
        std::cerr << "error: no such file: " << input_path << '\n';
        return kExitIo;
    }
    AnalysisResult result;
    try {
        std::ifstream probe(input_path);
        char first = 0;
        probe >> std::ws;
        probe.get(first);
        if (first == '{')
            result = analyze_records(load_records(input_path));
        else
            result = analyze_cells(load_cells(input_path));
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAnalysis;
    }

    write_analysis(result, out_dir);
    std::cout << format_accuracy_table(result.table) << '\n';
    if (result.gap_available)
        std::cout << "mean North/South relative accuracy gap: "
                  << format_double(result.gap_pct, 2) << " %\n\n";
    if (result.fit) {
        std::cout << format_regression_summary(*result.fit);
    } else {
        std::cerr << "analysis error: " << result.fit_error << '\n';
        return kExitAnalysis;
    }
    std::cout << "\nreport files written to " << out_dir.string() << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fact-checking evaluation harness"};
    app.require_subcommand(1);

    std::string corpus_path, out_path, scenario, backend = "wire", input_path, out_dir;
    std::string config_path, model, cache_dir, wiki_fixtures;
    int parallelism = 0;
    bool strict = false;

    auto* validate = app.add_subcommand("validate", "Validate a corpus file");
    validate->add_option("--corpus", corpus_path, "Corpus file (one JSON record per line)")
        ->required();
    validate->add_flag("--strict", strict, "Fail on balance violations");

    auto* run = app.add_subcommand("run", "Run a fact-checking scenario over a corpus");
    run->add_option("--corpus", corpus_path, "Corpus file")->required();
    run->add_option("--scenario", scenario, "statement | rag | agent")->required();
    run->add_option("--model", model, "Model identifier");
    run->add_option("--backend", backend, "wire | scripted:<fixture> | scripted:echo-gold");
    run->add_option("--parallelism", parallelism, "Concurrent statement runs");
    run->add_option("--out", out_path, "Output record file")->required();
    run->add_option("--config", config_path, "Config file (key = value lines)");
    run->add_option("--cache-dir", cache_dir, "Wikipedia cache directory");
    run->add_option("--wiki-fixtures", wiki_fixtures, "Recorded Wikipedia fixtures directory");
    run->add_flag("--strict", strict, "Require a balanced corpus");

    auto* analyze = app.add_subcommand("analyze", "Aggregate records or cells into reports");
    analyze->add_option("--input", input_path, "Record file (.jsonl) or accuracy-cell file (.csv)")
        ->required();
    analyze->add_option("--out-dir", out_dir, "Report output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(corpus_path, strict);
        if (run->parsed()) {
            Config cfg;
            if (!config_path.empty()) cfg = load_config(config_path);
            if (!model.empty()) cfg.model_id = model;
            if (parallelism > 0) cfg.parallelism = parallelism;
            if (!cache_dir.empty()) cfg.cache_dir = cache_dir;
            if (!wiki_fixtures.empty()) {
                cfg.wiki_fixture_dir = wiki_fixtures;
                cfg.wiki_mode = "fixture";
            }
            cfg.validate();
            return cmd_run(corpus_path, scenario, cfg, backend, out_path, strict);
        }
        if (analyze->parsed()) return cmd_analyze(input_path, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitAnalysis;
    }
    return kExitOk;
}
