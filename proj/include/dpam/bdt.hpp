#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/blocks.hpp>
#include <dpam/error.hpp>
#include <dpam/knots.hpp>
#include <dpam/lasso.hpp>

namespace dpam {

enum class Loss { squared, logistic };

inline const char* to_string(Loss l) { return l == Loss::squared ? "squared" : "logistic"; }

/**
 * Penalty levels indexed by interaction order: rho[l-1] weighs columns of
 * non-differentiation degree l, lambda[k-1] scales the empirical norm of
 * an order-k block.
 */
struct PenaltyConfig
{
    std::vector<double> rho;
    std::vector<double> lambda;
    ProjectionChoice projection = ProjectionChoice::averaging();
    int order = 2;

    static PenaltyConfig tied(std::size_t K, double rho, double lambda)
    {
        PenaltyConfig p;
        p.rho.assign(K, rho);
        p.lambda.assign(K, lambda);
        return p;
    }

    void validate(std::size_t K) const
    {
        if (rho.size() < K || lambda.size() < K) {
            throw ValidationError("penalty needs " + std::to_string(K) + " rho and lambda values");
        }
        for (double r : rho) {
            if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("rho must be finite and nonnegative");
        }
        for (double l : lambda) {
            if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("lambda must be finite and nonnegative");
        }
    }
};

/// One block as the solver sees it: centered design, l1 weights, norm weight.
struct SolverBlock
{
    const DesignBlock* design = nullptr;
    Eigen::VectorXd weights;
    double lambda = 0.0;
};

inline std::vector<SolverBlock> penalize(const std::vector<DesignBlock>& designs,
                                         const std::vector<BasisBlock>& blocks,
                                         const PenaltyConfig& pen)
{
    if (designs.size() != blocks.size()) throw ValidationError("design/basis block count mismatch");
    std::size_t K = 0;
    for (const auto& b : blocks) K = std::max(K, b.order());
    pen.validate(K);
    std::vector<SolverBlock> out(designs.size());
    for (std::size_t b = 0; b < designs.size(); ++b) {
        out[b].design = &designs[b];
        out[b].weights = blocks[b].weights(pen.rho);
        out[b].lambda = pen.lambda[blocks[b].order() - 1];
    }
    return out;
}

struct BdtOptions
{
    double tol = -1.0;            // relative objective change; <0 picks the loss default
    std::size_t max_cycles = 200;
    double lasso_tol = 1e-9;      // inner KKT tolerance, relative to sqrt(G_jj) ||r||_n
    bool record_trace = true;

    double tolerance(Loss loss) const { return tol > 0.0 ? tol : (loss == Loss::squared ? 1e-7 : 1e-6); }
};

struct FitState
{
    double intercept = 0.0;                  // Y-bar, or mu for the logistic loss
    std::vector<Eigen::VectorXd> coefficients;
    std::vector<Eigen::VectorXd> lasso;      // last unthresholded solutions (warm starts)
    Eigen::VectorXd fitted;                  // sum of centered block contributions
    std::vector<double> trace;               // objective after every block update
    double objective = 0.0;
    std::size_t cycles = 0;
    bool converged = false;
    std::vector<std::string> warnings;

    std::vector<std::size_t> active_blocks() const
    {
        std::vector<std::size_t> a;
        for (std::size_t b = 0; b < coefficients.size(); ++b) {
            if (coefficients[b].size() > 0 && (coefficients[b].array() != 0.0).any()) a.push_back(b);
        }
        return a;
    }

    std::size_t nonzero_coefficients() const
    {
        std::size_t n = 0;
        for (const auto& c : coefficients) n += static_cast<std::size_t>((c.array() != 0.0).count());
        return n;
    }
};

namespace detail {

inline double softplus(double t)
{
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double expit(double t)
{
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

inline double block_penalty(const SolverBlock& b, const Eigen::VectorXd& beta)
{
    if (beta.size() == 0) return 0.0;
    return b.weights.dot(beta.cwiseAbs()) + b.lambda * empirical_norm(b.design->gram, beta);
}

inline void check_blocks(std::span<const SolverBlock> blocks, Eigen::Index n)
{
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& s = blocks[b];
        if (s.design == nullptr) throw ValidationError("solver block " + std::to_string(b) + " has no design");
        if (s.design->rows() != n) throw ValidationError("solver block " + std::to_string(b) + " row mismatch");
        if (s.weights.size() != s.design->cols()) {
            throw ValidationError("solver block " + std::to_string(b) + " weight length mismatch");
        }
        if ((s.weights.array() < 0.0).any() || !(s.lambda >= 0.0)) {
            throw ValidationError("solver block " + std::to_string(b) + " has a negative penalty");
        }
    }
}

inline Eigen::VectorXd sum_contributions(std::span<const SolverBlock> blocks,
                                         const std::vector<Eigen::VectorXd>& coefs,
                                         Eigen::Index n)
{
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if ((coefs[b].array() != 0.0).any()) f.noalias() += blocks[b].design->centered * coefs[b];
    }
    return f;
}

// Exact update of one block for the working response r = X beta_old + e:
// Lasso with weights `scale * w`, then thresholding at `scale * lambda`.
// The previous coefficients are kept if the new ones do not lower the
// block objective (guards against round-off in the inner solve).
inline Eigen::VectorXd update_block(const SolverBlock& blk,
                                    const Eigen::VectorXd& corr,
                                    const Eigen::VectorXd& current,
                                    Eigen::VectorXd& lasso_warm,
                                    double scale,
                                    double lasso_tol,
                                    double residual_norm,
                                    std::vector<std::string>& warnings,
                                    std::size_t id)
{
    const DesignBlock& d = *blk.design;
    const Eigen::VectorXd w = scale * blk.weights;
    const double lam = scale * blk.lambda;
    LassoOptions opt;
    opt.tol = std::max(lasso_tol * std::sqrt(d.gram.diagonal().maxCoeff()) * residual_norm,
                       std::numeric_limits<double>::min());
    Eigen::VectorXd tilde;
    try {
        tilde = solve_lasso(d.gram, corr, w, lasso_warm, opt).beta;
    } catch (const LassoNotConverged& e) {
        warnings.push_back("block " + std::to_string(id) + ": " + e.what());
        tilde = e.best();
    }
    lasso_warm = tilde;
    Eigen::VectorXd next = threshold_block(tilde, d, lam);
    auto h = [&](const Eigen::VectorXd& b) {
        return lasso_objective(d.gram, corr, w, b) + lam * empirical_norm(d.gram, b);
    };
    if (h(next) > h(current)) return current;
    return next;
}

struct CycleControl
{
    std::vector<std::size_t> all;
    std::vector<bool> usable;
};

inline CycleControl usable_blocks(std::span<const SolverBlock> blocks, FitState& st)
{
    CycleControl c;
    c.usable.assign(blocks.size(), false);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        if (blocks[b].design->degenerate()) {
            st.warnings.push_back("block " + std::to_string(b) + " is degenerate and stays inactive");
            continue;
        }
        c.usable[b] = true;
        c.all.push_back(b);
    }
    return c;
}

inline void init_state(FitState& st, std::span<const SolverBlock> blocks, Eigen::Index n, const FitState* warm)
{
    st.coefficients.resize(blocks.size());
    st.lasso.resize(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const Eigen::Index q = blocks[b].design->cols();
        const bool ok = warm != nullptr && warm->coefficients.size() == blocks.size() &&
                        warm->coefficients[b].size() == q && !blocks[b].design->degenerate();
        st.coefficients[b] = ok ? warm->coefficients[b] : Eigen::VectorXd::Zero(q);
        st.lasso[b] = ok && warm->lasso.size() == blocks.size() && warm->lasso[b].size() == q
                          ? warm->lasso[b]
                          : st.coefficients[b];
    }
    st.fitted = sum_contributions(blocks, st.coefficients, n);
}

// Full cycle, then cycles over the active blocks until stable, then another
// full cycle; converged once a full cycle leaves the active set unchanged
// and moves the objective by less than tol (relative).
template <class UpdateFn, class ObjectiveFn>
void run_cycles(FitState& st, const CycleControl& ctl, const BdtOptions& opt, double tol,
                UpdateFn&& update, ObjectiveFn&& objective, std::span<const SolverBlock> blocks)
{
    auto rel = [](double before, double after) {
        return (before - after) / std::max(std::abs(before), std::numeric_limits<double>::min());
    };
    auto sweep = [&](const std::vector<std::size_t>& order) {
        for (std::size_t b : order) update(b);
        ++st.cycles;
    };
    const Eigen::Index n = st.fitted.size();
    st.objective = objective();
    while (st.cycles < opt.max_cycles) {
        const auto before_active = st.active_blocks();
        const double before = st.objective;
        sweep(ctl.all);
        st.fitted = sum_contributions(blocks, st.coefficients, n);
        st.objective = objective();
        const auto after_active = st.active_blocks();
        if (std::abs(rel(before, st.objective)) < tol && after_active == before_active) {
            st.converged = true;
            return;
        }
        while (st.cycles < opt.max_cycles) {
            const auto act = st.active_blocks();
            if (act.empty()) break;
            const double b0 = st.objective;
            sweep(act);
            st.objective = objective();
            if (std::abs(rel(b0, st.objective)) < tol) break;
        }
    }
    st.warnings.push_back("maximum number of cycles (" + std::to_string(opt.max_cycles) + ") reached");
}

} // namespace detail

/// (1/2)||Yc - f||_n^2 + sum_b (||R_b beta_b||_1 + lambda_b ||X_b beta_b||_n).
inline double squared_objective(const Eigen::VectorXd& centered_response,
                                std::span<const SolverBlock> blocks,
                                const std::vector<Eigen::VectorXd>& coefs)
{
    const Eigen::Index n = centered_response.size();
    const Eigen::VectorXd f = detail::sum_contributions(blocks, coefs, n);
    double v = 0.5 * (centered_response - f).squaredNorm() / static_cast<double>(n);
    for (std::size_t b = 0; b < blocks.size(); ++b) v += detail::block_penalty(blocks[b], coefs[b]);
    return v;
}

/// (1/n) sum_i [log(1 + e^{mu + f_i}) - y_i (mu + f_i)] + penalties.
inline double logistic_objective(const Eigen::VectorXd& y,
                                 double mu,
                                 std::span<const SolverBlock> blocks,
                                 const std::vector<Eigen::VectorXd>& coefs)
{
    const Eigen::Index n = y.size();
    const Eigen::VectorXd f = detail::sum_contributions(blocks, coefs, n);
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += detail::softplus(mu + f[i]) - y[i] * (mu + f[i]);
    v /= static_cast<double>(n);
    for (std::size_t b = 0; b < blocks.size(); ++b) v += detail::block_penalty(blocks[b], coefs[b]);
    return v;
}

/**
 * Backfitting with block descent and thresholding for the squared loss.
 * `warm` (optional) seeds coefficients and inner warm starts, e.g. from a
 * neighbouring point of a tuning path.
 */
inline FitState bdt_fit(const Eigen::VectorXd& Y,
                        std::span<const SolverBlock> blocks,
                        const BdtOptions& opt = {},
                        const FitState* warm = nullptr)
{
    const Eigen::Index n = Y.size();
    if (n == 0) throw ValidationError("empty response");
    if (!Y.allFinite()) throw ValidationError("response contains non-finite values");
    detail::check_blocks(blocks, n);

    FitState st;
    st.intercept = Y.mean();
    const Eigen::VectorXd yc = Y.array() - st.intercept;
    detail::init_state(st, blocks, n, warm);
    const auto ctl = detail::usable_blocks(blocks, st);
    const double dn = static_cast<double>(n);

    std::vector<double> pen(blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) pen[b] = detail::block_penalty(blocks[b], st.coefficients[b]);
    double pen_total = 0.0;
    for (double p : pen) pen_total += p;

    auto objective = [&]() { return 0.5 * (yc - st.fitted).squaredNorm() / dn + pen_total; };
    auto update = [&](std::size_t b) {
        const DesignBlock& d = *blocks[b].design;
        Eigen::VectorXd& beta = st.coefficients[b];
        const Eigen::VectorXd e = yc - st.fitted;     // residual excluding nothing
        const Eigen::VectorXd corr = d.centered.transpose() * e / dn + d.gram * beta;
        const double rnorm = std::sqrt((e + d.centered * beta).squaredNorm() / dn);
        Eigen::VectorXd next = detail::update_block(blocks[b], corr, beta, st.lasso[b], 1.0,
                                                    opt.lasso_tol, rnorm, st.warnings, b);
        const Eigen::VectorXd delta = next - beta;
        if ((delta.array() != 0.0).any()) {
            st.fitted.noalias() += d.centered * delta;
            beta = std::move(next);
            pen_total -= pen[b];
            pen[b] = detail::block_penalty(blocks[b], beta);
            pen_total += pen[b];
        }
        if (opt.record_trace) st.trace.push_back(objective());
    };
    auto full_objective = [&]() {
        pen_total = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            pen[b] = detail::block_penalty(blocks[b], st.coefficients[b]);
            pen_total += pen[b];
        }
        return objective();
    };
    detail::run_cycles(st, ctl, opt, opt.tolerance(Loss::squared), update, full_objective, blocks);
    return st;
}

/**
 * Logistic variant: each block update majorizes the log-likelihood with
 * curvature 1/4, moves the intercept to the working-response mean and
 * solves the rescaled subproblem (weights and threshold multiplied by 4).
 */
inline FitState bdt_logit_fit(const Eigen::VectorXd& y,
                              std::span<const SolverBlock> blocks,
                              const BdtOptions& opt = {},
                              const FitState* warm = nullptr)
{
    const Eigen::Index n = y.size();
    if (n == 0) throw ValidationError("empty response");
    bool has0 = false, has1 = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (y[i] == 0.0) has0 = true;
        else if (y[i] == 1.0) has1 = true;
        else throw ValidationError("binary response must be 0/1 (row " + std::to_string(i) + ")");
    }
    if (!has0 || !has1) throw ValidationError("binary response needs both classes");
    detail::check_blocks(blocks, n);

    FitState st;
    st.intercept = warm != nullptr ? warm->intercept : 0.0;
    detail::init_state(st, blocks, n, warm);
    const auto ctl = detail::usable_blocks(blocks, st);
    const double dn = static_cast<double>(n);
    constexpr double scale = 4.0;   // inverse of the curvature bound 1/4
    bool warned = false;

    std::vector<double> pen(blocks.size());
    double pen_total = 0.0;
    auto loss = [&]() {
        double v = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double t = st.intercept + st.fitted[i];
            v += detail::softplus(t) - y[i] * t;
        }
        return v / dn;
    };
    auto objective = [&]() { return loss() + pen_total; };
    auto update = [&](std::size_t b) {
        if (!warned && ((st.fitted.array() + st.intercept).abs() > 30.0).any()) {
            st.warnings.push_back("linear predictor exceeds 30 in magnitude (near separation)");
            warned = true;
        }
        Eigen::VectorXd u(n);
        for (Eigen::Index i = 0; i < n; ++i) u[i] = y[i] - detail::expit(st.intercept + st.fitted[i]);
        const double ubar = u.mean();
        st.intercept += scale * ubar;
        if (ctl.usable[b]) {
            const DesignBlock& d = *blocks[b].design;
            Eigen::VectorXd& beta = st.coefficients[b];
            const Eigen::VectorXd e = scale * (u.array() - ubar).matrix();
            const Eigen::VectorXd corr = d.centered.transpose() * e / dn + d.gram * beta;
            const double rnorm = std::sqrt((e + d.centered * beta).squaredNorm() / dn);
            Eigen::VectorXd next = detail::update_block(blocks[b], corr, beta, st.lasso[b], scale,
                                                        opt.lasso_tol, rnorm, st.warnings, b);
            const Eigen::VectorXd delta = next - beta;
            if ((delta.array() != 0.0).any()) {
                st.fitted.noalias() += d.centered * delta;
                beta = std::move(next);
                pen_total -= pen[b];
                pen[b] = detail::block_penalty(blocks[b], beta);
                pen_total += pen[b];
            }
        }
        if (opt.record_trace) st.trace.push_back(objective());
    };
    auto full_objective = [&]() {
        pen_total = 0.0;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            pen[b] = detail::block_penalty(blocks[b], st.coefficients[b]);
            pen_total += pen[b];
        }
        return objective();
    };
    // degenerate blocks still take part in the intercept updates
    detail::CycleControl all = ctl;
    all.all.clear();
    for (std::size_t b = 0; b < blocks.size(); ++b) all.all.push_back(b);
    detail::run_cycles(st, all, opt, opt.tolerance(Loss::logistic), update, full_objective, blocks);
    return st;
}

inline FitState fit_blocks(Loss loss,
                           const Eigen::VectorXd& y,
                           std::span<const SolverBlock> blocks,
                           const BdtOptions& opt = {},
                           const FitState* warm = nullptr)
{
    return loss == Loss::squared ? bdt_fit(y, blocks, opt, warm) : bdt_logit_fit(y, blocks, opt, warm);
}

/**
 * Smallest common lambda for which the all-zero fit is a fixed point of
 * the backfitting cycle: every block's thresholded Lasso solution at the
 * null residual vanishes. The l1 weights are taken from `blocks`.
 */
inline double lambda_max(Loss loss, const Eigen::VectorXd& y, std::span<const SolverBlock> blocks)
{
    const Eigen::Index n = y.size();
    const double dn = static_cast<double>(n);
    const double scale = loss == Loss::squared ? 1.0 : 4.0;
    const Eigen::VectorXd r = scale * (y.array() - y.mean()).matrix();
    const double rnorm = r.norm() / std::sqrt(dn);
    double best = 0.0;
    for (const auto& blk : blocks) {
        const DesignBlock& d = *blk.design;
        if (d.degenerate()) continue;
        const Eigen::VectorXd corr = d.centered.transpose() * r / dn;
        LassoOptions opt;
        opt.tol = std::max(1e-10 * std::sqrt(d.gram.diagonal().maxCoeff()) * rnorm,
                           std::numeric_limits<double>::min());
        const Eigen::VectorXd beta = solve_lasso(d.gram, corr, scale * blk.weights, Eigen::VectorXd(), opt).beta;
        best = std::max(best, empirical_norm(d.gram, beta) / scale);
    }
    return best;
}

/// Largest |X_j^T (y - y-bar)| / n over penalized columns: the l1 weight
/// above which every penalized coefficient is zero at the null fit (for
/// either loss, since the logistic working problem scales both sides by 4).
inline double rho_max(const Eigen::VectorXd& y,
                      const std::vector<DesignBlock>& designs,
                      const std::vector<BasisBlock>& blocks)
{
    const Eigen::VectorXd r = (y.array() - y.mean()).matrix();
    double best = 0.0;
    for (std::size_t b = 0; b < designs.size(); ++b) {
        const Eigen::VectorXd c = designs[b].centered.transpose() * r / static_cast<double>(r.size());
        for (std::size_t j = 0; j < blocks[b].size(); ++j) {
            if (blocks[b].degree[j] > 0) best = std::max(best, std::abs(c[static_cast<Eigen::Index>(j)]));
        }
    }
    return best;
}

} // namespace dpam
