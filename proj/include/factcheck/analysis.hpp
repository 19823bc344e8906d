// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "factcheck/runner.hpp"
#include "factcheck/stats.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Accuracy-cell files (delimited): model,scenario,region,n,n_correct
// -------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline std::vector<AccuracyCell> load_cells(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw StatsError("cannot open cell file: " + path.string());
    std::vector<AccuracyCell> cells;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        auto fields = split_csv_line(std::string(stripped));
        if (fields.size() != 5)
            throw StatsError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 5 fields (model,scenario,region,n,n_correct)");
        if (lineno == 1 && fields[0] == "model") continue; // header row
        AccuracyCell cell;
        cell.model_id = std::string(trim(fields[0]));
        auto scenario = parse_scenario(trim(fields[1]));
        auto region = parse_region(trim(fields[2]));
        if (!scenario || !region)
            throw StatsError(path.string() + ":" + std::to_string(lineno) +
                             ": unknown scenario or region token");
        cell.scenario = *scenario;
        cell.region = *region;
        try {
            cell.n = std::stoul(std::string(trim(fields[3])));
            cell.n_correct = std::stoul(std::string(trim(fields[4])));
        } catch (const std::exception&) {
            throw StatsError(path.string() + ":" + std::to_string(lineno) +
                             ": n and n_correct must be non-negative integers");
        }
        if (cell.n_correct > cell.n)
            throw StatsError(path.string() + ":" + std::to_string(lineno) +
                             ": n_correct exceeds n");
        cells.push_back(std::move(cell));
    }
    if (cells.empty()) throw StatsError("cell file is empty: " + path.string());
    return cells;
}

inline void write_cells(const std::vector<AccuracyCell>& cells, std::ostream& out) {
    out << "model,scenario,region,n,n_correct\n";
    for (const AccuracyCell& c : cells)
        out << c.model_id << ',' << scenario_token(c.scenario) << ',' << region_token(c.region)
            << ',' << c.n << ',' << c.n_correct << '\n';
}

// -------------------------------------------------------------------------
// Record/outcome bridging
// -------------------------------------------------------------------------

inline Outcome outcome_from_record(const RunRecord& r) {
    return {r.model_id, r.scenario, r.region, r.gold, r.predicted};
}

inline std::vector<Outcome> outcomes_from_records(const std::vector<RunRecord>& records) {
    std::vector<Outcome> out;
    out.reserve(records.size());
    for (const RunRecord& r : records) out.push_back(outcome_from_record(r));
    return out;
}

inline std::vector<Observation> observations_from_outcomes(const std::vector<Outcome>& outcomes) {
    std::vector<Observation> out;
    out.reserve(outcomes.size());
    for (const Outcome& o : outcomes)
        out.push_back({o.correct(), o.model_id, o.region, o.scenario});
    return out;
}

// Defaults match the published analysis; development subsets fall back to
// the lexicographically first observed level.
inline ReferenceLevels choose_references(const std::vector<Observation>& observations) {
    std::set<std::string> models;
    std::set<Region> regions;
    std::set<ScenarioKind> scenarios;
    for (const Observation& o : observations) {
        models.insert(o.model_id);
        regions.insert(o.region);
        scenarios.insert(o.scenario);
    }
    ReferenceLevels ref;
    if (!models.count(ref.model) && !models.empty()) ref.model = *models.begin();
    if (!regions.count(ref.region) && !regions.empty()) ref.region = *regions.begin();
    if (!scenarios.count(ref.scenario) && !scenarios.empty()) ref.scenario = *scenarios.begin();
    return ref;
}

// -------------------------------------------------------------------------
// Formatting
// -------------------------------------------------------------------------

inline std::string format_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", precision, v);
    return buf;
}

// Sub-threshold p-values render as "0.000", matching the published tables.
inline std::string format_pvalue(double p) {
    if (p < 5e-4) return "0.000";
    return format_double(p, 3);
}

inline std::string pad_left(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

inline std::string format_regression_summary(const LogisticFit& fit) {
    std::ostringstream out;
    out << "Logistic regression results (Method: MLE, Model: Logit)\n";
    out << std::string(96, '=') << '\n';
    out << pad_right("Variable", 30) << pad_left("Coefficient", 12) << pad_left("Std.Err", 10)
        << pad_left("z", 10) << pad_left("P>|z|", 9) << pad_left("[0.025", 10)
        << pad_left("0.975]", 10) << '\n';
    out << std::string(96, '-') << '\n';
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        auto idx = static_cast<std::size_t>(j);
        out << pad_right(fit.columns[idx], 30) << pad_left(format_double(fit.beta(j), 4), 12)
            << pad_left(format_double(fit.se[idx], 3), 10)
            << pad_left(format_double(fit.z[idx], 3), 10)
            << pad_left(format_pvalue(fit.p[idx]), 9)
            << pad_left(format_double(fit.ci_low[idx], 3), 10)
            << pad_left(format_double(fit.ci_high[idx], 3), 10) << '\n';
    }
    out << std::string(96, '-') << '\n';
    out << "No. Observations: " << fit.n_obs << '\n';
    out << "Df Residuals: " << (fit.n_obs - static_cast<std::size_t>(fit.df_model) - 1) << '\n';
    out << "Df Model: " << fit.df_model << '\n';
    out << "Pseudo R-squ.: " << format_double(fit.mcfadden_r2, 4) << '\n';
    out << "Log-Likelihood: " << format_double(fit.loglik, 1) << '\n';
    out << "LL-Null: " << format_double(fit.loglik_null, 1) << '\n';
    out << "LLR p-value: " << format_pvalue(fit.llr_pvalue) << '\n';
    out << "converged: " << (fit.converged ? "True" : "False") << '\n';
    out << "Covariance Type: nonrobust\n";
    return out.str();
}

inline std::string format_accuracy_table(const AccuracyTable& table) {
    std::ostringstream out;
    out << pad_right("Model", 14) << pad_right("Scenario", 16);
    for (Region r : kAllRegions) out << pad_left(std::string(region_name(r)), 15);
    out << pad_left("Global North", 14) << pad_left("Global South", 14) << pad_left("Total", 9)
        << '\n';
    for (const AccuracyGroup& g : table.groups) {
        out << pad_right(g.model_id, 14) << pad_right(std::string(scenario_name(g.scenario)), 16);
        for (Region r : kAllRegions) {
            const Ratio& ratio = g.by_region[static_cast<std::size_t>(r)];
            out << pad_left(ratio.n ? format_double(ratio.pct(), 1) + " %" : "-", 15);
        }
        out << pad_left(format_double(g.global_north.pct(), 1) + " %", 14)
            << pad_left(format_double(g.global_south.pct(), 1) + " %", 14)
            << pad_left(format_double(g.total.pct(), 1) + " %", 9) << '\n';
    }
    return out.str();
}

inline void write_accuracy_csv(const AccuracyTable& table, std::ostream& out) {
    out << "model,scenario,row,n,n_correct,accuracy_pct\n";
    auto emit = [&out](const std::string& model, ScenarioKind scenario, const std::string& row,
                       const Ratio& r) {
        out << model << ',' << scenario_token(scenario) << ',' << row << ',' << r.n << ','
            << r.n_correct << ',' << format_double(r.pct(), 4) << '\n';
    };
    for (const AccuracyGroup& g : table.groups) {
        for (Region r : kAllRegions) {
            const Ratio& ratio = g.by_region[static_cast<std::size_t>(r)];
            if (ratio.n) emit(g.model_id, g.scenario, std::string(region_token(r)), ratio);
        }
        emit(g.model_id, g.scenario, "global_north", g.global_north);
        emit(g.model_id, g.scenario, "global_south", g.global_south);
        emit(g.model_id, g.scenario, "total", g.total);
    }
}

inline void write_confusion_csv(const std::vector<ConfusionMatrix>& matrices, std::ostream& out) {
    out << "model,scenario,actual,predicted_true,predicted_false,predicted_unclear\n";
    for (const ConfusionMatrix& m : matrices) {
        for (std::size_t actual = 0; actual < 2; ++actual) {
            out << m.model_id << ',' << scenario_token(m.scenario) << ','
                << (actual == 0 ? "true" : "false") << ',' << m.counts[actual][0] << ','
                << m.counts[actual][1] << ',' << m.counts[actual][2] << '\n';
        }
    }
}

// -------------------------------------------------------------------------
// End-to-end analysis
// -------------------------------------------------------------------------

struct AnalysisResult {
    std::vector<AccuracyCell> cells;
    AccuracyTable table;
    double gap_pct = 0.0;
    bool gap_available = false;
    std::vector<ConfusionMatrix> matrices; // records input only
    std::optional<LogisticFit> fit;
    std::string fit_error; // set when the regression is not estimable
    bool from_records = false;
};

namespace analysis_detail {

inline void fit_into(AnalysisResult& result, const std::vector<Observation>& observations) {
    try {
        DesignMatrix design = build_design(observations, choose_references(observations));
        result.fit = fit_logit(design);
    } catch (const StatsError& e) {
        result.fit_error = e.what();
    }
    try {
        result.gap_pct = relative_gap(result.table);
        result.gap_available = true;
    } catch (const StatsError&) {
        result.gap_available = false;
    }
}

} // namespace analysis_detail

inline AnalysisResult analyze_cells(const std::vector<AccuracyCell>& cells) {
    AnalysisResult result;
    result.cells = cells;
    result.table = accuracy_table(cells);
    analysis_detail::fit_into(result, reconstruct_observations(cells));
    return result;
}

inline AnalysisResult analyze_records(const std::vector<RunRecord>& records) {
    if (records.empty()) throw StatsError("no records to analyze");
    AnalysisResult result;
    result.from_records = true;
    auto outcomes = outcomes_from_records(records);
    result.cells = cells_from_outcomes(outcomes);
    result.table = accuracy_table(result.cells);
    result.matrices = confusion_matrices(outcomes);
    analysis_detail::fit_into(result, observations_from_outcomes(outcomes));
    return result;
}

// Emits the delimited tables and the plain-text regression summary.
inline void write_analysis(const AnalysisResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "accuracy_table.csv", std::ios::trunc);
        write_accuracy_csv(result.table, out);
    }
    {
        std::ofstream out(out_dir / "cells.csv", std::ios::trunc);
        write_cells(result.cells, out);
    }
    if (result.from_records) {
        std::ofstream out(out_dir / "confusion_matrices.csv", std::ios::trunc);
        write_confusion_csv(result.matrices, out);
    }
    std::ofstream summary(out_dir / "regression_summary.txt", std::ios::trunc);
    if (result.fit) {
        summary << format_regression_summary(*result.fit);
        std::ofstream coef(out_dir / "regression_coefficients.csv", std::ios::trunc);
        coef << "variable,coefficient,std_err,z,p_value,ci_low,ci_high\n";
        for (const WaldRow& row : wald_summary(*result.fit))
            coef << row.label << ',' << format_double(row.coef, 6) << ','
                 << format_double(row.se, 6) << ',' << format_double(row.z, 6) << ','
                 << format_double(row.p, 8) << ',' << format_double(row.ci_low, 6) << ','
                 << format_double(row.ci_high, 6) << '\n';
    } else {
        summary << "Logistic regression unavailable: " << result.fit_error << '\n';
    }
    if (result.gap_available) {
        std::ofstream gap(out_dir / "relative_gap.txt", std::ios::trunc);
        gap << "mean North/South relative accuracy gap: " << format_double(result.gap_pct, 2)
            << " %\n";
    }
}

} // namespace factcheck
