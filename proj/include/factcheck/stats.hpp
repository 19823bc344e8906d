// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "factcheck/corpus.hpp"
#include "factcheck/scenario.hpp"
#include "factcheck/util.hpp"

namespace factcheck {

// -------------------------------------------------------------------------
// Tail probabilities
// -------------------------------------------------------------------------

// Standard normal upper tail.
inline double norm_sf(double z) { return 0.5 * std::erfc(z * M_SQRT1_2); }

namespace gamma_detail {

// Regularized lower incomplete gamma P(a, x) by power series.
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 2000; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    double log_scale = -x + a * std::log(x) - std::lgamma(a);
    return sum * std::exp(log_scale);
}

// Regularized upper incomplete gamma Q(a, x) by continued fraction (Lentz).
inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 2000; ++i) {
        double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    double log_scale = -x + a * std::log(x) - std::lgamma(a);
    return h * std::exp(log_scale);
}

} // namespace gamma_detail

// Chi-squared upper tail, Q(df/2, x/2).
inline double chi2_sf(double x, int df) {
    if (df < 1) throw StatsError("chi2_sf: df must be >= 1");
    if (x < 0) throw StatsError("chi2_sf: x must be >= 0");
    if (x == 0) return 1.0;
    double a = 0.5 * df;
    double half_x = 0.5 * x;
    if (half_x < a + 1.0) return 1.0 - gamma_detail::gamma_p_series(a, half_x);
    return gamma_detail::gamma_q_contfrac(a, half_x);
}

// -------------------------------------------------------------------------
// Aggregation inputs
// -------------------------------------------------------------------------

struct AccuracyCell {
    std::string model_id;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
    Region region = Region::Africa;
    std::size_t n = 0;
    std::size_t n_correct = 0;

    double accuracy() const { return n ? static_cast<double>(n_correct) / n : 0.0; }
};

// One prediction outcome; the minimal slice of a run record that the
// analysis layer consumes.
struct Outcome {
    std::string model_id;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
    Region region = Region::Africa;
    Verdict gold = Verdict::False;
    Verdict predicted = Verdict::Unclear;

    // Unclear predictions count as incorrect.
    bool correct() const { return predicted == gold; }
};

struct Observation {
    bool correct = false;
    std::string model_id;
    Region region = Region::Africa;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
};

// -------------------------------------------------------------------------
// Accuracy tables
// -------------------------------------------------------------------------

struct Ratio {
    std::size_t n = 0;
    std::size_t n_correct = 0;

    double accuracy() const { return n ? static_cast<double>(n_correct) / n : 0.0; }
    double pct() const { return 100.0 * accuracy(); }
    void add(std::size_t total, std::size_t correct) {
        n += total;
        n_correct += correct;
    }
};

struct AccuracyGroup {
    std::string model_id;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
    std::array<Ratio, 6> by_region{}; // indexed by Region order
    Ratio global_north;
    Ratio global_south;
    Ratio total;
};

struct AccuracyTable {
    std::vector<AccuracyGroup> groups; // first-appearance order of (model, scenario)
};

inline std::vector<AccuracyCell> cells_from_outcomes(const std::vector<Outcome>& outcomes) {
    std::vector<AccuracyCell> cells;
    std::map<std::pair<std::string, std::pair<int, int>>, std::size_t> index;
    for (const Outcome& o : outcomes) {
        auto key = std::make_pair(o.model_id, std::make_pair(static_cast<int>(o.scenario),
                                                             static_cast<int>(o.region)));
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, cells.size()).first;
            cells.push_back({o.model_id, o.scenario, o.region, 0, 0});
        }
        AccuracyCell& cell = cells[it->second];
        cell.n++;
        if (o.correct()) cell.n_correct++;
    }
    return cells;
}

// Per-region accuracies with observation-weighted hemisphere and total rows.
// On a balanced corpus these weighted aggregates coincide with simple means.
inline AccuracyTable accuracy_table(const std::vector<AccuracyCell>& cells) {
    AccuracyTable table;
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (const AccuracyCell& cell : cells) {
        if (cell.n == 0)
            throw StatsError("accuracy_table: empty cell for model '" + cell.model_id + "'");
        if (cell.n_correct > cell.n)
            throw StatsError("accuracy_table: n_correct exceeds n");
        auto key = std::make_pair(cell.model_id, static_cast<int>(cell.scenario));
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, table.groups.size()).first;
            AccuracyGroup g;
            g.model_id = cell.model_id;
            g.scenario = cell.scenario;
            table.groups.push_back(std::move(g));
        }
        AccuracyGroup& g = table.groups[it->second];
        g.by_region[static_cast<std::size_t>(cell.region)].add(cell.n, cell.n_correct);
        (hemisphere(cell.region) == Hemisphere::GlobalNorth ? g.global_north : g.global_south)
            .add(cell.n, cell.n_correct);
        g.total.add(cell.n, cell.n_correct);
    }
    if (table.groups.empty()) throw StatsError("accuracy_table: no cells");
    return table;
}

// Mean over (model, scenario) groups of acc_North/acc_South - 1, in percent.
inline double relative_gap(const AccuracyTable& table) {
    if (table.groups.empty()) throw StatsError("relative_gap: empty table");
    double sum = 0.0;
    for (const AccuracyGroup& g : table.groups) {
        if (g.global_south.n == 0 || g.global_south.n_correct == 0)
            throw StatsError("relative_gap: zero Global-South accuracy for model '" + g.model_id +
                             "'");
        sum += g.global_north.accuracy() / g.global_south.accuracy() - 1.0;
    }
    return 100.0 * sum / static_cast<double>(table.groups.size());
}

// -------------------------------------------------------------------------
// Confusion matrices
// -------------------------------------------------------------------------

struct ConfusionMatrix {
    std::string model_id;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
    // counts[actual][predicted]; actual in {True, False}, predicted in
    // {True, False, Unclear}.
    std::array<std::array<std::size_t, 3>, 2> counts{};

    std::array<std::size_t, 3> totals() const {
        return {counts[0][0] + counts[1][0], counts[0][1] + counts[1][1],
                counts[0][2] + counts[1][2]};
    }
    std::size_t row_sum(std::size_t actual) const {
        return counts[actual][0] + counts[actual][1] + counts[actual][2];
    }
};

inline std::size_t verdict_index(Verdict v) {
    switch (v) {
    case Verdict::True: return 0;
    case Verdict::False: return 1;
    case Verdict::Unclear: return 2;
    }
    return 2;
}

inline std::vector<ConfusionMatrix> confusion_matrices(const std::vector<Outcome>& outcomes) {
    std::vector<ConfusionMatrix> out;
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (const Outcome& o : outcomes) {
        if (o.gold == Verdict::Unclear)
            throw StatsError("confusion_matrices: gold label is 'unclear'");
        auto key = std::make_pair(o.model_id, static_cast<int>(o.scenario));
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            ConfusionMatrix m;
            m.model_id = o.model_id;
            m.scenario = o.scenario;
            out.push_back(std::move(m));
        }
        std::size_t actual = o.gold == Verdict::True ? 0 : 1;
        out[it->second].counts[actual][verdict_index(o.predicted)]++;
    }
    return out;
}

// -------------------------------------------------------------------------
// Observation reconstruction and design coding
// -------------------------------------------------------------------------

// Expands aggregate cells into per-observation rows: n_correct ones followed
// by n - n_correct zeros, cells kept in input order. Because every covariate
// is categorical, any fit on the result depends only on the cell counts.
inline std::vector<Observation> reconstruct_observations(const std::vector<AccuracyCell>& cells) {
    std::vector<Observation> out;
    for (const AccuracyCell& cell : cells) {
        if (cell.n_correct > cell.n)
            throw StatsError("reconstruct_observations: n_correct exceeds n");
        for (std::size_t i = 0; i < cell.n; ++i)
            out.push_back({i < cell.n_correct, cell.model_id, cell.region, cell.scenario});
    }
    return out;
}

struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> columns;
};

struct ReferenceLevels {
    std::string model = "Sonnet 3.5";
    Region region = Region::AsiaPacific;
    ScenarioKind scenario = ScenarioKind::StatementOnly;
};

// Treatment (dummy) coding with an intercept. Non-reference levels are
// ordered lexicographically by display name, which reproduces the usual
// summary-table layout.
inline DesignMatrix build_design(const std::vector<Observation>& observations,
                                 const ReferenceLevels& ref = {}) {
    if (observations.empty()) throw StatsError("build_design: no observations");

    std::set<std::string> model_levels;
    std::set<std::string> region_levels;
    std::set<std::string> scenario_levels;
    for (const Observation& o : observations) {
        model_levels.insert(o.model_id);
        region_levels.insert(std::string(region_name(o.region)));
        scenario_levels.insert(std::string(scenario_name(o.scenario)));
    }
    if (!model_levels.count(ref.model))
        throw StatsError("build_design: reference model '" + ref.model + "' not observed");
    if (!region_levels.count(std::string(region_name(ref.region))))
        throw StatsError("build_design: reference region not observed");
    if (!scenario_levels.count(std::string(scenario_name(ref.scenario))))
        throw StatsError("build_design: reference scenario not observed");

    std::vector<std::string> model_dummies(model_levels.begin(), model_levels.end());
    model_dummies.erase(std::find(model_dummies.begin(), model_dummies.end(), ref.model));
    std::vector<std::string> region_dummies(region_levels.begin(), region_levels.end());
    region_dummies.erase(std::find(region_dummies.begin(), region_dummies.end(),
                                   std::string(region_name(ref.region))));
    std::vector<std::string> scenario_dummies(scenario_levels.begin(), scenario_levels.end());
    scenario_dummies.erase(std::find(scenario_dummies.begin(), scenario_dummies.end(),
                                     std::string(scenario_name(ref.scenario))));

    DesignMatrix d;
    d.columns.push_back("Intercept");
    std::map<std::string, Eigen::Index> col_of;
    for (const std::string& m : model_dummies) {
        col_of["m:" + m] = static_cast<Eigen::Index>(d.columns.size());
        d.columns.push_back("Model = " + m);
    }
    for (const std::string& r : region_dummies) {
        col_of["r:" + r] = static_cast<Eigen::Index>(d.columns.size());
        d.columns.push_back("Region = " + r);
    }
    for (const std::string& s : scenario_dummies) {
        col_of["s:" + s] = static_cast<Eigen::Index>(d.columns.size());
        d.columns.push_back("Scenario = " + s);
    }

    const auto n = static_cast<Eigen::Index>(observations.size());
    const auto p = static_cast<Eigen::Index>(d.columns.size());
    d.X = Eigen::MatrixXd::Zero(n, p);
    d.y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Observation& o = observations[static_cast<std::size_t>(i)];
        d.X(i, 0) = 1.0;
        d.y(i) = o.correct ? 1.0 : 0.0;
        if (auto it = col_of.find("m:" + o.model_id); it != col_of.end()) d.X(i, it->second) = 1.0;
        if (auto it = col_of.find("r:" + std::string(region_name(o.region))); it != col_of.end())
            d.X(i, it->second) = 1.0;
        if (auto it = col_of.find("s:" + std::string(scenario_name(o.scenario)));
            it != col_of.end())
            d.X(i, it->second) = 1.0;
    }
    return d;
}

// -------------------------------------------------------------------------
// Logistic regression by IRLS (Fisher scoring)
// -------------------------------------------------------------------------

struct LogisticFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov; // inverse Fisher information at the optimum
    std::vector<double> se, z, p, ci_low, ci_high;
    double loglik = 0.0;
    double loglik_null = 0.0;
    double mcfadden_r2 = 0.0;
    double llr_stat = 0.0;
    double llr_pvalue = 1.0;
    double grad_inf_norm = 0.0;
    std::size_t n_obs = 0;
    int df_model = 0;
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> columns;
};

inline constexpr double kZ975 = 1.959964; // two-sided 95 % normal quantile

// Bernoulli log-likelihood at linear predictor eta, computed stably.
inline double bernoulli_loglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double e = eta(i);
        // log(1 + exp(e)) without overflow
        double log1pexp = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y(i) * e - log1pexp;
    }
    return ll;
}

// Log-likelihood of the intercept-only model.
inline double null_loglik(const Eigen::VectorXd& y) {
    const auto n = static_cast<double>(y.size());
    double ones = y.sum();
    if (ones <= 0.0 || ones >= n)
        throw StatsError("null_loglik: outcome contains a single class");
    double pbar = ones / n;
    return ones * std::log(pbar) + (n - ones) * std::log(1.0 - pbar);
}

inline constexpr double kIrlsBetaTol = 1e-8;
inline constexpr double kIrlsLoglikTol = 1e-10;
inline constexpr int kIrlsMaxIter = 100;
inline constexpr double kSeparationBetaLimit = 30.0;
inline constexpr double kGradInfTol = 1e-6;

// Maximum-likelihood fit via iteratively reweighted least squares, solving
// the weighted normal equations with a rank-revealing QR factorization each
// step. Diverging coefficients are reported as quasi-complete separation.
inline LogisticFit fit_logit(const DesignMatrix& d) {
    const Eigen::Index n = d.X.rows();
    const Eigen::Index p = d.X.cols();
    if (n == 0 || p == 0) throw StatsError("fit_logit: empty design");

    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.X);
        if (qr.rank() < p)
            throw StatsError("fit_logit: design matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
    }

    LogisticFit fit;
    fit.columns = d.columns;
    fit.n_obs = static_cast<std::size_t>(n);
    fit.df_model = static_cast<int>(p) - 1;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd eta = d.X * beta;
    double ll = bernoulli_loglik(d.y, eta);

    Eigen::VectorXd mu(n), w(n);
    const double mu_floor = 1e-10;
    for (int iter = 1; iter <= kIrlsMaxIter; ++iter) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double m = 1.0 / (1.0 + std::exp(-eta(i)));
            m = std::min(1.0 - mu_floor, std::max(mu_floor, m));
            mu(i) = m;
            w(i) = m * (1.0 - m);
        }
        Eigen::VectorXd sqrt_w = w.cwiseSqrt();
        Eigen::VectorXd working = eta + (d.y - mu).cwiseQuotient(w);
        Eigen::MatrixXd xw = sqrt_w.asDiagonal() * d.X;
        Eigen::VectorXd zw = sqrt_w.asDiagonal() * working;
        Eigen::VectorXd beta_new = xw.colPivHouseholderQr().solve(zw);

        Eigen::Index worst = 0;
        double worst_abs = beta_new.cwiseAbs().maxCoeff(&worst);
        if (worst_abs > kSeparationBetaLimit)
            throw StatsError("fit_logit: quasi-complete separation suspected; coefficient '" +
                             d.columns[static_cast<std::size_t>(worst)] +
                             "' diverged (|beta| > " + std::to_string(int(kSeparationBetaLimit)) +
                             ")");

        Eigen::VectorXd eta_new = d.X * beta_new;
        double ll_new = bernoulli_loglik(d.y, eta_new);
        double dbeta = (beta_new - beta).cwiseAbs().maxCoeff();
        double dll = std::abs(ll_new - ll);

        beta = std::move(beta_new);
        eta = std::move(eta_new);
        ll = ll_new;
        fit.iterations = iter;
        // Under separation the likelihood flattens while coefficients still
        // drift toward infinity, so the loglik criterion alone must not stop
        // the iteration away from a stationary point.
        if (dbeta < kIrlsBetaTol || (dll < kIrlsLoglikTol && dbeta < 1e-3)) {
            fit.converged = true;
            break;
        }
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        double m = 1.0 / (1.0 + std::exp(-eta(i)));
        mu(i) = m;
        w(i) = std::max(m * (1.0 - m), mu_floor);
    }
    fit.grad_inf_norm = (d.X.transpose() * (d.y - mu)).cwiseAbs().maxCoeff();
    if (fit.grad_inf_norm >= kGradInfTol) fit.converged = false;

    Eigen::MatrixXd info = d.X.transpose() * w.asDiagonal() * d.X;
    fit.cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    fit.beta = beta;
    fit.loglik = ll;
    fit.loglik_null = null_loglik(d.y);
    fit.mcfadden_r2 = 1.0 - fit.loglik / fit.loglik_null;
    fit.llr_stat = 2.0 * (fit.loglik - fit.loglik_null);
    fit.llr_pvalue = fit.df_model >= 1 ? chi2_sf(std::max(fit.llr_stat, 0.0), fit.df_model) : 1.0;

    fit.se.resize(p);
    fit.z.resize(p);
    fit.p.resize(p);
    fit.ci_low.resize(p);
    fit.ci_high.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double se = std::sqrt(fit.cov(j, j));
        fit.se[j] = se;
        fit.z[j] = se > 0 ? fit.beta(j) / se : 0.0;
        fit.p[j] = 2.0 * norm_sf(std::abs(fit.z[j]));
        fit.ci_low[j] = fit.beta(j) - kZ975 * se;
        fit.ci_high[j] = fit.beta(j) + kZ975 * se;
    }
    return fit;
}

// -------------------------------------------------------------------------
// Wald summary
// -------------------------------------------------------------------------

struct WaldRow {
    std::string label;
    double coef = 0.0;
    double se = 0.0;
    double z = 0.0;
    double p = 1.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

inline std::vector<WaldRow> wald_summary(const LogisticFit& fit) {
    if (!fit.converged) throw StatsError("wald_summary: fit did not converge");
    std::vector<WaldRow> rows;
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
        auto idx = static_cast<std::size_t>(j);
        rows.push_back({fit.columns.size() > idx ? fit.columns[idx] : "b" + std::to_string(j),
                        fit.beta(j), fit.se[idx], fit.z[idx], fit.p[idx], fit.ci_low[idx],
                        fit.ci_high[idx]});
    }
    return rows;
}

} // namespace factcheck
