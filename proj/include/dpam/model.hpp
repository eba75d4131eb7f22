#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/bdt.hpp>
#include <dpam/design.hpp>
#include <dpam/error.hpp>
#include <dpam/parallel.hpp>
#include <dpam/random.hpp>

namespace dpam {

enum class TuningMode { validation, kfold, fixed };

inline const char* to_string(TuningMode t)
{
    switch (t) {
        case TuningMode::validation: return "validation";
        case TuningMode::kfold:      return "kfold";
        case TuningMode::fixed:      return "fixed";
    }
    return "unknown";
}

/**
 * Estimator settings. Penalties are tied across interaction orders
 * (rho_k = rho * rho_factors[k-1], lambda_k = lambda * lambda_factors[k-1],
 * factors default to 1) and tuned over a rho x lambda grid. Empty grids are
 * filled automatically: rho on a log grid below the largest null-fit
 * correlation, lambda on a log grid below the smallest value that zeroes
 * every block.
 */
struct ModelSpec
{
    int order = 2;
    std::size_t max_order = 2;
    std::vector<std::size_t> n_knots{11};
    ProjectionChoice projection = ProjectionChoice::averaging();
    Loss loss = Loss::squared;

    std::vector<double> rho_grid;
    std::vector<double> lambda_grid;
    std::size_t grid_points = 8;
    double rho_high = 0.1;        // automatic rho grid spans rho_max * [rho_low, rho_high]
    double rho_low = 1e-3;
    double lambda_low = 1e-2;     // automatic lambda grid spans lambda_max * [lambda_low, 1]
    std::vector<double> rho_factors;
    std::vector<double> lambda_factors;

    TuningMode tuning = TuningMode::validation;
    std::size_t folds = 5;
    double holdout_fraction = 0.25;   // validation mode without a validation set
    std::uint64_t seed = 1;

    BdtOptions solver;
    std::size_t threads = 0;

    double rho_factor(std::size_t k) const { return k <= rho_factors.size() ? rho_factors[k - 1] : 1.0; }
    double lambda_factor(std::size_t k) const { return k <= lambda_factors.size() ? lambda_factors[k - 1] : 1.0; }

    PenaltyConfig penalty(double rho, double lambda) const
    {
        PenaltyConfig p;
        for (std::size_t k = 1; k <= max_order; ++k) {
            p.rho.push_back(rho * rho_factor(k));
            p.lambda.push_back(lambda * lambda_factor(k));
        }
        p.projection = projection;
        p.order = order;
        return p;
    }

    void validate() const
    {
        if (order < 1 || order > 3) throw UnsupportedError("order m must be 1, 2 or 3");
        if (order == 3) throw UnsupportedError("fitting supports order m = 1 or 2 (m = 3 is basis-only)");
        if (max_order < 1) throw ValidationError("maximum interaction order K must be at least 1");
        if (max_order > 2) throw UnsupportedError("fitting supports K <= 2; higher-order blocks are too many to fit");
        if (n_knots.empty()) throw ValidationError("knot count missing");
        for (std::size_t k : n_knots) {
            if (k <= static_cast<std::size_t>(order)) throw ValidationError("knot count must exceed the order m");
        }
        auto positive = [](const std::vector<double>& g, const char* name) {
            for (double v : g) {
                if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(std::string(name) + " values must be finite and nonnegative");
            }
        };
        positive(rho_grid, "rho grid");
        positive(lambda_grid, "lambda grid");
        positive(rho_factors, "rho factors");
        positive(lambda_factors, "lambda factors");
        if ((rho_grid.empty() || lambda_grid.empty()) && grid_points == 0) {
            throw ValidationError("grid size must be positive");
        }
        if (!(rho_low > 0.0) || !(rho_high >= rho_low) || !(lambda_low > 0.0) || lambda_low > 1.0) {
            throw ValidationError("automatic grid ranges must satisfy 0 < low <= high");
        }
        if (tuning == TuningMode::kfold && folds < 2) throw ValidationError("k-fold tuning needs at least 2 folds");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
            throw ValidationError("holdout fraction must lie in (0, 1)");
        }
        if (tuning == TuningMode::fixed && (rho_grid.size() != 1 || lambda_grid.size() != 1)) {
            throw ValidationError("fixed tuning needs exactly one rho and one lambda value");
        }
        if (!(solver.max_cycles > 0)) throw ValidationError("max cycles must be positive");
    }
};

struct TuneRow
{
    double rho = 0.0;
    double lambda = 0.0;
    double metric = 0.0;
    std::size_t active_blocks = 0;
    std::size_t nonzero = 0;
};

struct BlockFit
{
    Subset covariates;            // training column indices
    Eigen::VectorXd means;        // training column means of the raw block
    Eigen::VectorXd coefficients;
};

struct FittedModel
{
    ModelSpec spec;
    std::size_t n_features = 0;
    std::vector<std::string> feature_names;
    std::vector<std::size_t> used;        // training columns entering the model
    KnotSystem knots;                     // one entry per used column
    double intercept = 0.0;
    double rho = 0.0;
    double lambda = 0.0;
    std::vector<BlockFit> blocks;

    Eigen::VectorXd fitted;               // training linear predictor
    double objective = 0.0;
    std::size_t cycles = 0;
    bool converged = false;
    std::vector<std::string> warnings;

    std::string metric_name;
    std::vector<TuneRow> tuning;          // grid order: rho as listed, lambda descending

    // rebuilt from the knots, never serialized
    std::vector<UnivariatePsiBasis> bases;
    std::vector<BasisBlock> basis_blocks;

    ProjectionChoice internal_projection() const
    {
        if (spec.projection.is_averaging() || spec.projection.fixed_index.empty()) return spec.projection;
        std::vector<std::size_t> idx;
        for (std::size_t j : used) idx.push_back(spec.projection.fixed_at(j));
        return ProjectionChoice::fixed_point(idx);
    }

    void rebuild()
    {
        bases = build_psi_bases(knots, internal_projection());
        basis_blocks.clear();
        for (const auto& b : blocks) {
            Subset internal;
            for (std::size_t j : b.covariates) {
                const auto it = std::find(used.begin(), used.end(), j);
                if (it == used.end()) throw ValidationError("block refers to an unused covariate");
                internal.push_back(static_cast<std::size_t>(it - used.begin()));
            }
            basis_blocks.push_back(make_block(internal, bases));
            if (static_cast<std::size_t>(b.coefficients.size()) != basis_blocks.back().size() ||
                b.means.size() != b.coefficients.size()) {
                throw ValidationError("block " + subset_name(b.covariates) + " has inconsistent sizes");
            }
        }
    }

    PsiEvaluations evaluate(const Eigen::MatrixXd& X) const
    {
        if (static_cast<std::size_t>(X.cols()) != n_features) {
            throw ValidationError("data has " + std::to_string(X.cols()) + " columns, model expects " +
                                  std::to_string(n_features));
        }
        Eigen::MatrixXd sub(X.rows(), static_cast<Eigen::Index>(used.size()));
        for (std::size_t j = 0; j < used.size(); ++j) {
            sub.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(used[j]));
        }
        return evaluate_bases(bases, sub);
    }

    /// Per-block centered contributions, one column per block.
    Eigen::MatrixXd component_matrix(const Eigen::MatrixXd& X) const
    {
        const PsiEvaluations ev = evaluate(X);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(X.rows(), static_cast<Eigen::Index>(blocks.size()));
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (blocks[b].coefficients.isZero(0.0)) continue;
            const Eigen::MatrixXd raw = block_matrix(basis_blocks[b], ev);
            out.col(static_cast<Eigen::Index>(b)) =
                raw * blocks[b].coefficients - Eigen::VectorXd::Constant(X.rows(), blocks[b].means.dot(blocks[b].coefficients));
        }
        return out;
    }

    /// Linear predictor beta_0 + sum_b (Psi_b(x) - mean_b)^T beta_b.
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const
    {
        const Eigen::MatrixXd comp = component_matrix(X);
        Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), intercept);
        for (Eigen::Index b = 0; b < comp.cols(); ++b) out += comp.col(b);
        return out;
    }

    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const
    {
        Eigen::VectorXd eta = predict(X);
        for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = detail::expit(eta[i]);
        return eta;
    }

    std::vector<std::size_t> active_blocks() const
    {
        std::vector<std::size_t> a;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (!blocks[b].coefficients.isZero(0.0)) a.push_back(b);
        }
        return a;
    }

    PenaltyConfig penalty() const { return spec.penalty(rho, lambda); }
};

struct Component
{
    Subset covariates;
    double value = 0.0;
};

/// Centered component values at one point; they sum to predict(x) - intercept.
inline std::vector<Component> anova_components(const FittedModel& model, std::span<const double> x)
{
    Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
    const Eigen::MatrixXd comp = model.component_matrix(row);
    std::vector<Component> out;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        out.push_back({model.blocks[b].covariates, comp(0, static_cast<Eigen::Index>(b))});
    }
    return out;
}

/**
 * Partial dependence: for each query point q (one value per covariate in
 * S), the average of the fitted predictor over the training rows with
 * the S columns replaced by q.
 */
inline std::vector<double> partial_dependence(const FittedModel& model,
                                              const Subset& S,
                                              const std::vector<std::vector<double>>& points,
                                              const Eigen::MatrixXd& Xtrain)
{
    if (S.empty() || S.size() > 2) throw UnsupportedError("partial dependence supports 1 or 2 covariates");
    for (std::size_t j : S) {
        if (j >= model.n_features) throw ValidationError("covariate " + std::to_string(j + 1) + " out of range");
    }
    if (static_cast<std::size_t>(Xtrain.cols()) != model.n_features) {
        throw ValidationError("training matrix has the wrong number of columns");
    }
    std::vector<double> out;
    out.reserve(points.size());
    Eigen::MatrixXd work = Xtrain;
    for (const auto& q : points) {
        if (q.size() != S.size()) throw ValidationError("query point dimension does not match the subset");
        for (std::size_t l = 0; l < S.size(); ++l) work.col(static_cast<Eigen::Index>(S[l])).setConstant(q[l]);
        out.push_back(model.predict(work).mean());
    }
    return out;
}

/// Evenly spaced values between the training min and max of each covariate
/// in S, combined as a product grid (last covariate fastest).
inline std::vector<std::vector<double>> pdp_grid(const Eigen::MatrixXd& Xtrain, const Subset& S, std::size_t points)
{
    if (points < 2) throw ValidationError("partial dependence grid needs at least 2 points per axis");
    std::vector<std::vector<double>> axes;
    for (std::size_t j : S) {
        if (j >= static_cast<std::size_t>(Xtrain.cols())) throw ValidationError("covariate out of range");
        const double lo = Xtrain.col(static_cast<Eigen::Index>(j)).minCoeff();
        const double hi = Xtrain.col(static_cast<Eigen::Index>(j)).maxCoeff();
        std::vector<double> a(points);
        for (std::size_t i = 0; i < points; ++i) {
            a[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
        }
        axes.push_back(std::move(a));
    }
    std::vector<std::vector<double>> grid{{}};
    for (const auto& a : axes) {
        std::vector<std::vector<double>> next;
        for (const auto& g : grid) {
            for (double v : a) {
                auto h = g;
                h.push_back(v);
                next.push_back(std::move(h));
            }
        }
        grid = std::move(next);
    }
    return grid;
}

/// Tuning rows ordered by validation metric (ties keep grid order).
inline std::vector<TuneRow> tune_report(const FittedModel& model)
{
    std::vector<TuneRow> rows = model.tuning;
    std::stable_sort(rows.begin(), rows.end(), [](const TuneRow& a, const TuneRow& b) { return a.metric < b.metric; });
    return rows;
}

inline double mean_squared_error(const Eigen::VectorXd& y, const Eigen::VectorXd& pred)
{
    return (y - pred).squaredNorm() / static_cast<double>(y.size());
}

/// Mean logistic loss of linear predictors, probabilities clipped at 1e-12.
inline double mean_log_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& eta)
{
    double v = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double p = std::clamp(detail::expit(eta[i]), 1e-12, 1.0 - 1e-12);
        v -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    return v / static_cast<double>(y.size());
}

namespace detail {

inline void check_response(const Eigen::VectorXd& y, Loss loss, const char* what)
{
    if (!y.allFinite()) throw ValidationError(std::string(what) + " response contains non-finite values");
    if (loss == Loss::squared) {
        if (y.size() > 0 && (y.array() == y[0]).all()) throw ValidationError(std::string(what) + " response is constant");
        return;
    }
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] == 0.0) has0 = true;
        else if (y[i] == 1.0) has1 = true;
        else throw ValidationError(std::string(what) + " response must be 0/1 for the logistic loss (row " + std::to_string(i + 1) + ")");
    }
    if (!has0 || !has1) throw ValidationError(std::string(what) + " response needs both classes");
}

inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<std::size_t>& rows)
{
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

inline Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows)
{
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(rows[i])];
    return out;
}

inline Eigen::MatrixXd take_cols(const Eigen::MatrixXd& X, const std::vector<std::size_t>& cols)
{
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(cols[j]));
    return out;
}

// One training set (plus optional held-out rows) ready for the solver.
struct Problem
{
    DesignSystem sys;
    Eigen::VectorXd y;
    std::vector<Eigen::MatrixXd> val_blocks;   // held-out rows centered with training means
    Eigen::VectorXd yval;

    bool has_validation() const { return yval.size() > 0; }
};

inline Problem make_problem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const Eigen::MatrixXd* Xval, const Eigen::VectorXd* yval,
                            const ModelSpec& spec, const ProjectionChoice& proj)
{
    Problem p;
    p.sys = build_design(X, spec.n_knots, spec.order, spec.max_order, proj);
    p.y = y;
    if (Xval != nullptr) {
        const PsiEvaluations ev = evaluate_bases(p.sys.bases, *Xval);
        for (std::size_t b = 0; b < p.sys.blocks.size(); ++b) {
            p.val_blocks.push_back(centered_block_matrix(p.sys.blocks[b], ev, p.sys.designs[b].means));
        }
        p.yval = *yval;
    }
    return p;
}

inline double validation_metric(const Problem& p, const FitState& st, Loss loss, double* total = nullptr)
{
    Eigen::VectorXd eta = Eigen::VectorXd::Constant(p.yval.size(), st.intercept);
    for (std::size_t b = 0; b < p.val_blocks.size(); ++b) {
        if (!st.coefficients[b].isZero(0.0)) eta.noalias() += p.val_blocks[b] * st.coefficients[b];
    }
    const double m = loss == Loss::squared ? mean_squared_error(p.yval, eta) : mean_log_loss(p.yval, eta);
    if (total != nullptr) *total = m * static_cast<double>(p.yval.size());
    return m;
}

inline double training_metric(const Problem& p, const FitState& st, Loss loss)
{
    const Eigen::VectorXd eta = (st.fitted.array() + st.intercept).matrix();
    return loss == Loss::squared ? mean_squared_error(p.y, eta) : mean_log_loss(p.y, eta);
}

struct PathResult
{
    std::vector<double> metric;         // per lambda (validation total or mean)
    std::vector<std::size_t> active;
    std::vector<std::size_t> nonzero;
    std::size_t best = 0;
    FitState best_state;
};

// Fits along the lambda path (descending) at one rho, warm-starting each
// point from the previous one.
inline PathResult run_path(const Problem& p, const ModelSpec& spec, double rho,
                           const std::vector<double>& lambdas, bool keep_best)
{
    PathResult r;
    std::optional<FitState> prev;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
        const auto blocks = penalize(p.sys.designs, p.sys.blocks, spec.penalty(rho, lambdas[l]));
        BdtOptions opt = spec.solver;
        opt.record_trace = false;
        FitState st = fit_blocks(spec.loss, p.y, blocks, opt, prev ? &*prev : nullptr);
        double total = 0.0;
        const double m = p.has_validation() ? validation_metric(p, st, spec.loss, &total)
                                            : training_metric(p, st, spec.loss);
        r.metric.push_back(p.has_validation() ? total : m);
        r.active.push_back(st.active_blocks().size());
        r.nonzero.push_back(st.nonzero_coefficients());
        if (m < best) {
            best = m;
            r.best = l;
            if (keep_best) r.best_state = st;
        }
        prev = std::move(st);
    }
    return r;
}

inline std::vector<double> geometric(double hi, double lo, std::size_t count)
{
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        g[i] = hi * std::pow(lo / hi, t);
    }
    return g;
}

struct Grid
{
    std::vector<double> rho;
    std::vector<double> lambda;   // descending
};

inline Grid make_grid(const Problem& p, const ModelSpec& spec)
{
    Grid g;
    if (!spec.rho_grid.empty()) {
        g.rho = spec.rho_grid;
    } else {
        const double rmax = rho_max(p.y, p.sys.designs, p.sys.blocks);
        if (!(rmax > 0.0)) throw ValidationError("response is not correlated with any basis column");
        g.rho = geometric(rmax * spec.rho_high, rmax * spec.rho_low, spec.grid_points);
    }
    if (!spec.lambda_grid.empty()) {
        g.lambda = spec.lambda_grid;
    } else {
        const double rho_mid = g.rho[g.rho.size() / 2];
        const auto blocks = penalize(p.sys.designs, p.sys.blocks, spec.penalty(rho_mid, 0.0));
        double lmax = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const std::size_t k = p.sys.blocks[b].order();
            const double f = spec.lambda_factor(k);
            if (f <= 0.0) continue;
            lmax = std::max(lmax, lambda_max(spec.loss, p.y, std::span<const SolverBlock>(&blocks[b], 1)) / f);
        }
        if (!(lmax > 0.0)) lmax = 1e-8;
        g.lambda = geometric(lmax, lmax * spec.lambda_low, spec.grid_points);
    }
    std::sort(g.lambda.begin(), g.lambda.end(), std::greater<>());
    return g;
}

inline FittedModel assemble(const Problem& p, const FitState& st, const ModelSpec& spec,
                            std::size_t n_features, const std::vector<std::size_t>& used,
                            double rho, double lambda, std::vector<std::string> warnings)
{
    FittedModel m;
    m.spec = spec;
    m.n_features = n_features;
    m.used = used;
    m.knots = p.sys.knots;
    m.intercept = st.intercept;
    m.rho = rho;
    m.lambda = lambda;
    for (std::size_t b = 0; b < p.sys.blocks.size(); ++b) {
        BlockFit bf;
        for (std::size_t j : p.sys.blocks[b].covariates) bf.covariates.push_back(used[j]);
        bf.means = p.sys.designs[b].means;
        bf.coefficients = st.coefficients[b];
        m.blocks.push_back(std::move(bf));
    }
    m.fitted = (st.fitted.array() + st.intercept).matrix();
    m.objective = st.objective;
    m.cycles = st.cycles;
    m.converged = st.converged;
    m.warnings = std::move(warnings);
    for (const auto& w : st.warnings) m.warnings.push_back(w);
    m.rebuild();
    return m;
}

// Final fit on `p` at (rho, lambda) by following the lambda path down to it.
inline FitState refit(const Problem& p, const ModelSpec& spec, double rho, const std::vector<double>& lambdas, std::size_t upto)
{
    std::optional<FitState> prev;
    for (std::size_t l = 0; l <= upto; ++l) {
        const auto blocks = penalize(p.sys.designs, p.sys.blocks, spec.penalty(rho, lambdas[l]));
        BdtOptions opt = spec.solver;
        opt.record_trace = l == upto && spec.solver.record_trace;
        prev = fit_blocks(spec.loss, p.y, blocks, opt, prev ? &*prev : nullptr);
    }
    return std::move(*prev);
}

} // namespace detail

/// Optional separate validation data for validation-set tuning.
struct ValidationData
{
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

/**
 * Fit the doubly penalized ANOVA model, selecting (rho, lambda) on the
 * grid by validation-set or k-fold tuning. Covariates with too few
 * distinct values for the requested order are dropped with a warning.
 */
inline FittedModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ModelSpec& spec,
                       const ValidationData* validation = nullptr)
{
    spec.validate();
    const auto n = static_cast<std::size_t>(X.rows());
    const auto p = static_cast<std::size_t>(X.cols());
    if (n < 10) throw ValidationError("at least 10 observations are required");
    if (p < 1) throw ValidationError("at least one covariate is required");
    if (static_cast<std::size_t>(y.size()) != n) throw ValidationError("response length does not match the data");
    if (spec.n_knots.size() != 1 && spec.n_knots.size() != p) {
        throw ValidationError("knot counts: expected 1 or " + std::to_string(p) + " values");
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (!std::isfinite(X(i, j))) {
                throw ValidationError("non-finite value at row " + std::to_string(i + 1) + ", column " + std::to_string(j + 1));
            }
        }
    }
    detail::check_response(y, spec.loss, "training");
    if (validation != nullptr) {
        if (validation->X.cols() != X.cols() || validation->X.rows() != validation->y.size() || validation->y.size() == 0) {
            throw ValidationError("validation data does not match the training layout");
        }
        if (!validation->X.allFinite() || !validation->y.allFinite()) throw ValidationError("validation data contains non-finite values");
    }

    // covariates with too few distinct values are excluded
    std::vector<std::size_t> used;
    std::vector<std::string> warnings;
    for (std::size_t j = 0; j < p; ++j) {
        const Eigen::VectorXd col = X.col(static_cast<Eigen::Index>(j));
        try {
            build_knots(std::span<const double>(col.data(), n), spec.n_knots.size() == 1 ? spec.n_knots[0] : spec.n_knots[j],
                        spec.order, j + 1);
            used.push_back(j);
        } catch (const ValidationError& e) {
            warnings.push_back(std::string(e.what()) + "; excluded");
        }
    }
    if (used.empty()) throw ValidationError("no usable covariates");
    if (spec.max_order > used.size()) {
        throw ValidationError("interaction order K = " + std::to_string(spec.max_order) + " exceeds the " +
                              std::to_string(used.size()) + " usable covariates");
    }
    ModelSpec sp = spec;
    if (sp.n_knots.size() == p) {
        std::vector<std::size_t> k;
        for (std::size_t j : used) k.push_back(spec.n_knots[j]);
        sp.n_knots = k;
    }
    FittedModel shell;
    shell.spec = spec;
    shell.used = used;
    const ProjectionChoice proj = shell.internal_projection();
    const Eigen::MatrixXd Xu = detail::take_cols(X, used);

    // full-data problem (also the final fit's design)
    std::optional<Eigen::MatrixXd> Xval;
    if (validation != nullptr && spec.tuning == TuningMode::validation) Xval = detail::take_cols(validation->X, used);
    const detail::Problem full = detail::make_problem(Xu, y, Xval ? &*Xval : nullptr,
                                                      Xval ? &validation->y : nullptr, sp, proj);
    const detail::Grid grid = detail::make_grid(full, sp);
    const std::size_t R = grid.rho.size(), L = grid.lambda.size();

    std::vector<TuneRow> rows(R * L);
    std::size_t best_r = 0, best_l = 0;
    std::optional<FitState> final_state;

    auto pick = [&](const std::vector<double>& metric) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t l = 0; l < L; ++l) {
                if (metric[r * L + l] < best) {
                    best = metric[r * L + l];
                    best_r = r;
                    best_l = l;
                }
            }
        }
    };

    std::string metric_name = spec.loss == Loss::squared ? "mse" : "logloss";
    if (spec.tuning == TuningMode::fixed) {
        metric_name = "training-" + metric_name;
        const auto res = detail::run_path(full, sp, grid.rho[0], grid.lambda, true);
        rows[0] = {grid.rho[0], grid.lambda[0], res.metric[0], res.active[0], res.nonzero[0]};
        final_state = detail::refit(full, sp, grid.rho[0], grid.lambda, 0);
    } else if (spec.tuning == TuningMode::validation && Xval) {
        std::vector<detail::PathResult> paths(R);
        parallel_for(R, spec.threads, [&](std::size_t r) { paths[r] = detail::run_path(full, sp, grid.rho[r], grid.lambda, true); });
        std::vector<double> metric(R * L);
        const double nv = static_cast<double>(full.yval.size());
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t l = 0; l < L; ++l) {
                metric[r * L + l] = paths[r].metric[l] / nv;
                rows[r * L + l] = {grid.rho[r], grid.lambda[l], metric[r * L + l], paths[r].active[l], paths[r].nonzero[l]};
            }
        }
        pick(metric);
        if (spec.solver.record_trace) {
            final_state = detail::refit(full, sp, grid.rho[best_r], grid.lambda, best_l);
        } else {
            final_state = std::move(paths[best_r].best_state);
        }
    } else {
        // held-out rows from the training data: one split or k folds
        Philox4x32 rng(spec.seed, 0x5eed);
        const auto perm = permutation(n, rng);
        std::vector<std::vector<std::size_t>> held;
        if (spec.tuning == TuningMode::kfold) {
            if (spec.folds > n) throw ValidationError("more folds than observations");
            held.resize(spec.folds);
            for (std::size_t i = 0; i < n; ++i) held[i % spec.folds].push_back(perm[i]);
        } else {
            const auto h = static_cast<std::size_t>(std::llround(spec.holdout_fraction * static_cast<double>(n)));
            if (h < 1 || h >= n) throw ValidationError("holdout fraction leaves an empty training or validation set");
            held.emplace_back(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(h));
        }
        std::vector<detail::Problem> problems(held.size());
        for (std::size_t f = 0; f < held.size(); ++f) {
            std::vector<bool> out(n, false);
            for (std::size_t i : held[f]) out[i] = true;
            std::vector<std::size_t> keep, hold;
            for (std::size_t i = 0; i < n; ++i) (out[i] ? hold : keep).push_back(i);
            std::sort(hold.begin(), hold.end());
            const Eigen::MatrixXd xt = detail::take_rows(Xu, keep), xh = detail::take_rows(Xu, hold);
            const Eigen::VectorXd yt = detail::take_rows(y, keep), yh = detail::take_rows(y, hold);
            try {
                detail::check_response(yt, spec.loss, "fold training");
                problems[f] = detail::make_problem(xt, yt, &xh, &yh, sp, proj);
            } catch (const ValidationError& e) {
                throw ValidationError(std::string("tuning split ") + std::to_string(f + 1) + ": " + e.what());
            }
        }
        std::vector<detail::PathResult> paths(held.size() * R);
        parallel_for(paths.size(), spec.threads, [&](std::size_t t) {
            paths[t] = detail::run_path(problems[t / R], sp, grid.rho[t % R], grid.lambda, false);
        });
        std::vector<double> metric(R * L, 0.0);
        std::vector<std::size_t> active(R * L, 0), nonzero(R * L, 0);
        double count = 0.0;
        for (const auto& pr : problems) count += static_cast<double>(pr.yval.size());
        for (std::size_t t = 0; t < paths.size(); ++t) {
            const std::size_t r = t % R;
            for (std::size_t l = 0; l < L; ++l) metric[r * L + l] += paths[t].metric[l] / count;
        }
        // sparsity summaries come from the full-data path
        std::vector<detail::PathResult> fullpaths(R);
        parallel_for(R, spec.threads, [&](std::size_t r) { fullpaths[r] = detail::run_path(full, sp, grid.rho[r], grid.lambda, false); });
        for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t l = 0; l < L; ++l) {
                rows[r * L + l] = {grid.rho[r], grid.lambda[l], metric[r * L + l], fullpaths[r].active[l], fullpaths[r].nonzero[l]};
            }
        }
        pick(metric);
        final_state = detail::refit(full, sp, grid.rho[best_r], grid.lambda, best_l);
    }

    FittedModel m = detail::assemble(full, *final_state, sp, p, used, grid.rho[best_r], grid.lambda[best_l], std::move(warnings));
    m.spec = spec;
    m.metric_name = metric_name;
    m.tuning = std::move(rows);
    return m;
}

/// The penalized training objective recomputed from a fitted model.
inline double training_objective(const FittedModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y)
{
    const PsiEvaluations ev = model.evaluate(X);
    const PenaltyConfig pen = model.penalty();
    std::vector<DesignBlock> designs;
    for (std::size_t b = 0; b < model.blocks.size(); ++b) {
        DesignBlock d;
        d.id = b;
        d.means = model.blocks[b].means;
        d.centered = centered_block_matrix(model.basis_blocks[b], ev, d.means);
        d.gram = d.centered.transpose() * d.centered / static_cast<double>(X.rows());
        designs.push_back(std::move(d));
    }
    const auto blocks = penalize(designs, model.basis_blocks, pen);
    std::vector<Eigen::VectorXd> coefs;
    for (const auto& b : model.blocks) coefs.push_back(b.coefficients);
    if (model.spec.loss == Loss::squared) {
        return squared_objective((y.array() - y.mean()).matrix(), blocks, coefs);
    }
    return logistic_objective(y, model.intercept, blocks, coefs);
}

} // namespace dpam
