#pragma once
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/error.hpp>
#include <dpam/model.hpp>
#include <dpam/parallel.hpp>
#include <dpam/random.hpp>

namespace dpam {

// Component functions of the ANOVA test function on [0, 1].
inline double g1(double z) { return z; }
inline double g2(double z) { return (2.0 * z - 1.0) * (2.0 * z - 1.0); }
inline double g3(double z)
{
    const double s = std::sin(2.0 * std::numbers::pi * z);
    return s / (2.0 - s);
}
inline double g4(double z)
{
    const double a = 2.0 * std::numbers::pi * z;
    const double s = std::sin(a), c = std::cos(a);
    return 0.1 * s + 0.2 * c + 0.3 * s * s + 0.4 * c * c * c + 0.5 * s * s * s;
}

// Exact means over [0, 1]: 1/2, 1/3, 2/sqrt(3) - 1, 0.15.
inline constexpr double g1_mean = 0.5;
inline constexpr double g2_mean = 1.0 / 3.0;
inline const double g3_mean = 2.0 / std::sqrt(3.0) - 1.0;
inline constexpr double g4_mean = 0.15;

/// f(x) = g1(x1) + g2(x2) + g3(x3) + g4(x4) + g1(x3 x4) + g2((x1 + x3)/2) + g3(x1 x2).
inline double anova_truth(std::span<const double> x)
{
    return g1(x[0]) + g2(x[1]) + g3(x[2]) + g4(x[3]) + g1(x[2] * x[3]) + g2((x[0] + x[2]) / 2.0) + g3(x[0] * x[1]);
}

/// Same structure with every g replaced by g - mean(g).
inline double centered_anova_truth(std::span<const double> x)
{
    auto c1 = [](double z) { return g1(z) - g1_mean; };
    auto c2 = [](double z) { return g2(z) - g2_mean; };
    auto c3 = [](double z) { return g3(z) - g3_mean; };
    auto c4 = [](double z) { return g4(z) - g4_mean; };
    return c1(x[0]) + c2(x[1]) + c3(x[2]) + c4(x[3]) + c1(x[2] * x[3]) + c2((x[0] + x[2]) / 2.0) + c3(x[0] * x[1]);
}

inline double lattice_truth(std::span<const double> x) { return 1.0 - std::abs(x[0] - x[1]); }

enum class ScenarioKind { linear, logistic, lattice };

/**
 * Simulation setting. Training and validation sets both have n rows;
 * test points are N = test_size uniform draws (a 101 x 101 grid for
 * the lattice scenario).
 */
struct Scenario
{
    ScenarioKind kind = ScenarioKind::linear;
    std::size_t n = 200;
    std::size_t p = 10;
    std::uint64_t seed = 1;
    double noise_sd = 0.2546;
    std::size_t test_size = 10000;
    std::size_t reps = 20;

    std::string name() const
    {
        switch (kind) {
            case ScenarioKind::linear:   return "linear-anova";
            case ScenarioKind::logistic: return "logistic-anova";
            case ScenarioKind::lattice:  return "lattice-2d";
        }
        return "unknown";
    }
};

/// Defaults for a named scenario; unknown names raise ValidationError.
inline Scenario make_scenario(const std::string& name)
{
    Scenario s;
    if (name == "linear-anova" || name == "linear") {
        s.kind = ScenarioKind::linear;
    } else if (name == "logistic-anova" || name == "logistic") {
        s.kind = ScenarioKind::logistic;
        s.n = 500;
        s.noise_sd = 0.0;
    } else if (name == "lattice-2d" || name == "lattice") {
        s.kind = ScenarioKind::lattice;
        s.n = 100;
        s.p = 2;
        s.noise_sd = 0.1;
        s.reps = 100;
    } else {
        throw ValidationError("unknown scenario '" + name + "' (expected linear-anova, logistic-anova or lattice-2d)");
    }
    return s;
}

struct SimSet
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

struct SimData
{
    SimSet train;
    SimSet validation;
    Eigen::MatrixXd test_X;
    Eigen::VectorXd test_f;     // true f at the test points
    Eigen::VectorXd test_y;     // labels drawn at the test points (logistic only)
};

inline double scenario_truth(const Scenario& s, std::span<const double> x)
{
    switch (s.kind) {
        case ScenarioKind::linear:   return anova_truth(x);
        case ScenarioKind::logistic: return centered_anova_truth(x);
        case ScenarioKind::lattice:  return lattice_truth(x);
    }
    return 0.0;
}

namespace detail {

inline void check_scenario(const Scenario& s)
{
    const std::size_t need = s.kind == ScenarioKind::lattice ? 2 : 4;
    if (s.kind == ScenarioKind::lattice && s.p != 2) throw ValidationError("lattice-2d scenario has p = 2");
    if (s.p < need) throw ValidationError("scenario needs at least " + std::to_string(need) + " covariates");
    if (s.n < 1 || s.test_size < 1) throw ValidationError("scenario sizes must be positive");
    if (!(s.noise_sd >= 0.0)) throw ValidationError("noise sd must be nonnegative");
}

inline SimSet draw_set(const Scenario& s, std::size_t rows, Philox4x32& rng, Eigen::VectorXd* truth = nullptr)
{
    SimSet d;
    d.X.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(s.p));
    d.y.resize(static_cast<Eigen::Index>(rows));
    if (truth != nullptr) truth->resize(static_cast<Eigen::Index>(rows));
    std::vector<double> x(s.p);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < s.p; ++j) {
            x[j] = rng.uniform();
            d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x[j];
        }
        const double f = scenario_truth(s, x);
        if (truth != nullptr) (*truth)[static_cast<Eigen::Index>(i)] = f;
        if (s.kind == ScenarioKind::logistic) {
            d.y[static_cast<Eigen::Index>(i)] = rng.uniform() < detail::expit(f) ? 1.0 : 0.0;
        } else {
            d.y[static_cast<Eigen::Index>(i)] = f + s.noise_sd * rng.normal();
        }
    }
    return d;
}

} // namespace detail

/**
 * Draw one replication. Training, validation and test data come from
 * separate Philox streams (0, 1, 2) keyed by the scenario seed.
 */
inline SimData gen_scenario(const Scenario& s)
{
    detail::check_scenario(s);
    SimData out;
    Philox4x32 tr(s.seed, 0), va(s.seed, 1), te(s.seed, 2);
    out.train = detail::draw_set(s, s.n, tr);
    out.validation = detail::draw_set(s, s.n, va);
    if (s.kind == ScenarioKind::lattice) {
        const int g = 101;
        out.test_X.resize(g * g, 2);
        out.test_f.resize(g * g);
        for (int a = 0; a < g; ++a) {
            for (int b = 0; b < g; ++b) {
                const double x[2] = {a / 100.0, b / 100.0};
                out.test_X(a * g + b, 0) = x[0];
                out.test_X(a * g + b, 1) = x[1];
                out.test_f[a * g + b] = lattice_truth(x);
            }
        }
    } else {
        SimSet t = detail::draw_set(s, s.test_size, te, &out.test_f);
        out.test_X = std::move(t.X);
        if (s.kind == ScenarioKind::logistic) out.test_y = std::move(t.y);
    }
    return out;
}

/// (1/N) sum (f - fhat)^2.
inline double mise(const Eigen::VectorXd& fhat, const Eigen::VectorXd& f)
{
    if (fhat.size() != f.size() || f.size() == 0) throw ValidationError("mise needs two vectors of equal positive length");
    return (f - fhat).squaredNorm() / static_cast<double>(f.size());
}

struct ClassificationMetrics
{
    double log_loss = 0.0;
    double error_rate = 0.0;
    double auc = 0.0;
};

/// Area under the ROC curve by the rank statistic, tied scores counting 1/2.
inline double auc(const Eigen::VectorXd& score, const Eigen::VectorXd& y)
{
    const auto n = static_cast<std::size_t>(y.size());
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return score[static_cast<Eigen::Index>(a)] < score[static_cast<Eigen::Index>(b)];
    });
    double pos_rank = 0.0, n_pos = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && score[static_cast<Eigen::Index>(idx[j])] == score[static_cast<Eigen::Index>(idx[i])]) ++j;
        const double mid = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;   // 1-based average rank
        for (std::size_t k = i; k < j; ++k) {
            if (y[static_cast<Eigen::Index>(idx[k])] == 1.0) {
                pos_rank += mid;
                n_pos += 1.0;
            }
        }
        i = j;
    }
    const double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) throw ValidationError("AUC is undefined when only one class is present");
    return (pos_rank - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline ClassificationMetrics classification_metrics(const Eigen::VectorXd& phat, const Eigen::VectorXd& y)
{
    if (phat.size() != y.size() || y.size() == 0) throw ValidationError("metrics need equal positive lengths");
    ClassificationMetrics m;
    double loss = 0.0, err = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = std::clamp(phat[i], 1e-12, 1.0 - 1e-12);
        if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("labels must be 0/1");
        loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
        err += ((phat[i] > 0.5 ? 1.0 : 0.0) != y[i]) ? 1.0 : 0.0;
    }
    m.log_loss = loss / static_cast<double>(y.size());
    m.error_rate = err / static_cast<double>(y.size());
    m.auc = auc(phat, y);
    return m;
}

/// Error rate of the rule phat > 1/2 averaged over Y | x with P(Y = 1 | x) = p.
inline double expected_error_rate(const Eigen::VectorXd& phat, const Eigen::VectorXd& p)
{
    double e = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) e += phat[i] > 0.5 ? 1.0 - p[i] : p[i];
    return e / static_cast<double>(p.size());
}

/// Named model configuration compared in a simulation.
struct Method
{
    std::string label;
    ModelSpec spec;
};

/// ATV/FTV x m in {1, 2} with K = 2, 11 knots and validation-set tuning.
inline std::vector<Method> standard_methods(const Scenario& s)
{
    std::vector<Method> out;
    for (int m : {1, 2}) {
        for (bool averaging : {true, false}) {
            Method me;
            me.label = std::string(averaging ? "ATV" : "FTV") + " m=" + std::to_string(m);
            me.spec.order = m;
            me.spec.max_order = 2;
            me.spec.n_knots = {11};
            me.spec.projection = averaging ? ProjectionChoice::averaging() : ProjectionChoice::fixed_point();
            me.spec.loss = s.kind == ScenarioKind::logistic ? Loss::logistic : Loss::squared;
            me.spec.tuning = TuningMode::validation;
            me.spec.solver.record_trace = false;
            out.push_back(std::move(me));
        }
    }
    return out;
}

/// Metric names reported for a scenario, in column order.
inline std::vector<std::string> metric_names(const Scenario& s)
{
    if (s.kind == ScenarioKind::logistic) return {"error_rate", "excess_error", "log_loss", "auc", "oracle_error"};
    return {"mise"};
}

struct RepRecord
{
    std::size_t rep = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::vector<double> metrics;
    double rho = 0.0;
    double lambda = 0.0;
    std::size_t active_blocks = 0;
    double seconds = 0.0;
};

struct SummaryRow
{
    std::string method;
    std::vector<double> mean;
    std::vector<double> se;
};

struct SimulationResult
{
    Scenario scenario;
    std::vector<std::string> metrics;
    std::vector<RepRecord> reps;      // rep-major, methods in order
    std::vector<SummaryRow> summary;
};

/// Metrics of one fitted model on one replication's test data.
inline std::vector<double> evaluate_fit(const Scenario& s, const FittedModel& model, const SimData& d)
{
    const Eigen::VectorXd eta = model.predict(d.test_X);
    if (s.kind != ScenarioKind::logistic) return {mise(eta, d.test_f)};
    Eigen::VectorXd phat(eta.size()), p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        phat[i] = detail::expit(eta[i]);
        p[i] = detail::expit(d.test_f[i]);
    }
    const auto cm = classification_metrics(phat, d.test_y);
    const double err = expected_error_rate(phat, p);
    const double oracle = expected_error_rate(p, p);
    return {err, err - oracle, cm.log_loss, cm.auc, oracle};
}

inline SummaryRow summarize(const std::string& method, const std::vector<std::vector<double>>& values)
{
    SummaryRow r;
    r.method = method;
    const std::size_t k = values.empty() ? 0 : values[0].size();
    const double reps = static_cast<double>(values.size());
    r.mean.assign(k, 0.0);
    r.se.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (const auto& v : values) r.mean[c] += v[c] / reps;
        double ss = 0.0;
        for (const auto& v : values) ss += (v[c] - r.mean[c]) * (v[c] - r.mean[c]);
        r.se[c] = reps > 1 ? std::sqrt(ss / (reps - 1.0) / reps) : 0.0;
    }
    return r;
}

/**
 * Fit every method on `reps` replications (seed = s.seed + rep) and
 * summarize each metric by its mean and standard error. Replications
 * run in parallel, one worker each.
 */
inline SimulationResult run_replications(const Scenario& s, const std::vector<Method>& methods,
                                         std::size_t reps, std::size_t threads = 0)
{
    if (reps < 2) throw ValidationError("at least 2 replications are required");
    if (methods.empty()) throw ValidationError("no methods to run");
    detail::check_scenario(s);
    SimulationResult res;
    res.scenario = s;
    res.scenario.reps = reps;
    res.metrics = metric_names(s);
    res.reps.resize(reps * methods.size());
    parallel_for(reps, threads, [&](std::size_t r) {
        Scenario sr = s;
        sr.seed = s.seed + r;
        const SimData d = gen_scenario(sr);
        ValidationData val{d.validation.X, d.validation.y};
        for (std::size_t k = 0; k < methods.size(); ++k) {
            ModelSpec spec = methods[k].spec;
            spec.threads = 1;
            spec.seed = sr.seed;
            const auto t0 = std::chrono::steady_clock::now();
            const FittedModel model = fit(d.train.X, d.train.y, spec, &val);
            const auto t1 = std::chrono::steady_clock::now();
            RepRecord& rec = res.reps[r * methods.size() + k];
            rec.rep = r;
            rec.seed = sr.seed;
            rec.method = methods[k].label;
            rec.metrics = evaluate_fit(sr, model, d);
            rec.rho = model.rho;
            rec.lambda = model.lambda;
            rec.active_blocks = model.active_blocks().size();
            rec.seconds = std::chrono::duration<double>(t1 - t0).count();
        }
    });
    for (std::size_t k = 0; k < methods.size(); ++k) {
        std::vector<std::vector<double>> vals;
        for (std::size_t r = 0; r < reps; ++r) vals.push_back(res.reps[r * methods.size() + k].metrics);
        res.summary.push_back(summarize(methods[k].label, vals));
    }
    return res;
}

namespace detail {

inline std::string fmt(double v)
{
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

} // namespace detail

/// Per-replication table: rep,seed,method,<metrics>,rho,lambda,active_blocks.
inline void write_replications_csv(std::ostream& os, const SimulationResult& r)
{
    os << "rep,seed,method";
    for (const auto& m : r.metrics) os << ',' << m;
    os << ",rho,lambda,active_blocks\n";
    for (const auto& rec : r.reps) {
        os << rec.rep << ',' << rec.seed << ',' << rec.method;
        for (double v : rec.metrics) os << ',' << detail::fmt(v);
        os << ',' << detail::fmt(rec.rho) << ',' << detail::fmt(rec.lambda) << ',' << rec.active_blocks << '\n';
    }
}

/// Summary table: one row per method, each metric as "mean (se)".
inline void write_summary_csv(std::ostream& os, const SimulationResult& r)
{
    os << "scenario,n,reps,method";
    for (const auto& m : r.metrics) os << ',' << m;
    os << '\n';
    for (const auto& row : r.summary) {
        os << r.scenario.name() << ',' << r.scenario.n << ',' << r.scenario.reps << ',' << row.method;
        for (std::size_t c = 0; c < row.mean.size(); ++c) {
            std::ostringstream cell;
            cell << std::setprecision(4) << row.mean[c] << " (" << std::setprecision(2) << row.se[c] << ')';
            os << ",\"" << cell.str() << '"';
        }
        os << '\n';
    }
}

} // namespace dpam
