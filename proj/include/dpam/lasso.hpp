#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/blocks.hpp>
#include <dpam/error.hpp>

namespace dpam {

struct LassoOptions
{
    double tol = 1e-10;               // absolute KKT tolerance on the gradient
    std::size_t max_passes = 200000;  // coordinate-descent passes
    bool polish = true;               // exact solve on the final active set
};

struct LassoResult
{
    Eigen::VectorXd beta;
    double kkt_gap = 0.0;
    std::size_t passes = 0;
    bool polished = false;
};

class LassoNotConverged : public NumericalError
{
public:
    LassoNotConverged(Eigen::VectorXd best, double gap, std::size_t passes)
        : NumericalError("weighted Lasso did not converge after " + std::to_string(passes) +
                         " passes (KKT gap " + std::to_string(gap) + ")"),
          best_(std::move(best)), gap_(gap) {}

    const Eigen::VectorXd& best() const noexcept { return best_; }
    double gap() const noexcept { return gap_; }

private:
    Eigen::VectorXd best_;
    double gap_;
};

namespace detail {

inline double soft_threshold(double z, double t)
{
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline double diag_floor(const Eigen::MatrixXd& gram)
{
    return 1e-14 * std::max(1.0, gram.diagonal().maxCoeff());
}

} // namespace detail

/**
 * Smooth part of the block objective written through the Gram matrix:
 * (1/2) b^T G b - c^T b + sum_j w_j |b_j|. Adding (1/2)||r||_n^2 gives
 * (1/2)||r - X b||_n^2 + ||R b||_1 when G = X^T X / n and c = X^T r / n.
 */
inline double lasso_objective(const Eigen::MatrixXd& gram,
                              const Eigen::VectorXd& corr,
                              const Eigen::VectorXd& weights,
                              const Eigen::VectorXd& beta)
{
    return 0.5 * beta.dot(gram * beta) - corr.dot(beta) + weights.dot(beta.cwiseAbs());
}

/**
 * Largest KKT violation: for b_j != 0 the gradient must equal
 * -w_j sign(b_j); for b_j = 0 its magnitude must not exceed w_j.
 * Columns with a vanishing diagonal are ignored.
 */
inline double kkt_gap(const Eigen::MatrixXd& gram,
                      const Eigen::VectorXd& corr,
                      const Eigen::VectorXd& weights,
                      const Eigen::VectorXd& beta)
{
    const Eigen::VectorXd grad = gram * beta - corr;
    const double floor = detail::diag_floor(gram);
    double gap = 0.0;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (gram(j, j) <= floor) continue;
        const double v = beta[j] != 0.0 ? std::abs(grad[j] + weights[j] * (beta[j] > 0 ? 1.0 : -1.0))
                                        : std::max(0.0, std::abs(grad[j]) - weights[j]);
        gap = std::max(gap, v);
    }
    return gap;
}

namespace detail {

// Solve the sign-fixed stationarity equations on the active set. Returns
// false when the solution flips a sign or does not improve the KKT gap.
inline bool polish_active_set(const Eigen::MatrixXd& gram,
                              const Eigen::VectorXd& corr,
                              const Eigen::VectorXd& weights,
                              Eigen::VectorXd& beta,
                              double& gap)
{
    const double floor = diag_floor(gram);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        if (gram(j, j) <= floor) continue;
        if (beta[j] != 0.0 || weights[j] == 0.0) active.push_back(j);
    }
    if (active.empty()) return false;
    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd g(a, a);
    Eigen::VectorXd rhs(a);
    for (Eigen::Index u = 0; u < a; ++u) {
        const Eigen::Index j = active[static_cast<std::size_t>(u)];
        const double s = beta[j] > 0 ? 1.0 : (beta[j] < 0 ? -1.0 : 0.0);
        rhs[u] = corr[j] - weights[j] * s;
        for (Eigen::Index v = 0; v < a; ++v) g(u, v) = gram(j, active[static_cast<std::size_t>(v)]);
    }
    Eigen::VectorXd x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    const Eigen::VectorXd piv = ldlt.vectorD();
    const bool well_posed = ldlt.info() == Eigen::Success &&
                            piv.minCoeff() > 1e-10 * std::max(1.0, piv.maxCoeff());
    if (well_posed) {
        x = ldlt.solve(rhs);
    } else {
        // rank-deficient active set: minimum-norm stationary point
        x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(g).solve(rhs);
    }
    Eigen::VectorXd cand = Eigen::VectorXd::Zero(beta.size());
    for (Eigen::Index u = 0; u < a; ++u) {
        const Eigen::Index j = active[static_cast<std::size_t>(u)];
        if (weights[j] != 0.0 && x[u] * beta[j] <= 0.0) return false;
        cand[j] = x[u];
    }
    const double cand_gap = kkt_gap(gram, corr, weights, cand);
    if (!(cand_gap <= gap)) return false;
    beta = std::move(cand);
    gap = cand_gap;
    return true;
}

} // namespace detail

/**
 * Minimize (1/2) b^T G b - c^T b + sum_j w_j |b_j| by cyclic coordinate
 * descent with covariance updates, alternating full sweeps with sweeps
 * over the current nonzero set, then an exact solve on the final active
 * set. Zero-weight columns are always active. Stops once the KKT gap is
 * below `opt.tol`.
 */
inline LassoResult solve_lasso(const Eigen::MatrixXd& gram,
                               const Eigen::VectorXd& corr,
                               const Eigen::VectorXd& weights,
                               const Eigen::VectorXd& warm,
                               const LassoOptions& opt = {})
{
    const Eigen::Index q = corr.size();
    if (gram.rows() != q || gram.cols() != q || weights.size() != q) {
        throw ValidationError("weighted Lasso: dimension mismatch");
    }
    if (!(opt.tol > 0.0)) throw ValidationError("weighted Lasso: tolerance must be positive");
    if ((weights.array() < 0.0).any()) throw ValidationError("weighted Lasso: negative weight");

    const double floor = detail::diag_floor(gram);
    LassoResult res;
    res.beta = warm.size() == q ? warm : Eigen::VectorXd::Zero(q);
    for (Eigen::Index j = 0; j < q; ++j) {
        if (gram(j, j) <= floor) res.beta[j] = 0.0;
    }
    if ((weights.array() == 0.0).all()) {
        // plain least squares: minimum-norm solution of G b = c
        res.beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(gram).solve(corr);
        res.kkt_gap = kkt_gap(gram, corr, weights, res.beta);
        res.polished = true;
        return res;
    }
    Eigen::VectorXd grad = gram * res.beta - corr;

    auto update = [&](Eigen::Index j) {
        const double gjj = gram(j, j);
        if (gjj <= floor) return 0.0;
        const double old = res.beta[j];
        const double nb = detail::soft_threshold(old - grad[j] / gjj, weights[j] / gjj);
        const double delta = nb - old;
        if (delta == 0.0) return 0.0;
        res.beta[j] = nb;
        grad.noalias() += gram.col(j) * delta;
        return gjj * delta * delta;
    };

    std::vector<Eigen::Index> active;
    double gap = kkt_gap(gram, corr, weights, res.beta);
    while (gap > opt.tol) {
        if (res.passes >= opt.max_passes) throw LassoNotConverged(res.beta, gap, res.passes);
        for (Eigen::Index j = 0; j < q; ++j) update(j);
        ++res.passes;
        active.clear();
        for (Eigen::Index j = 0; j < q; ++j) {
            if (res.beta[j] != 0.0 || (weights[j] == 0.0 && gram(j, j) > floor)) active.push_back(j);
        }
        // sweep the nonzero set until its changes are negligible
        const double small = opt.tol * opt.tol;
        for (std::size_t inner = 0; inner < 10000 && res.passes < opt.max_passes; ++inner) {
            double change = 0.0;
            for (Eigen::Index j : active) change = std::max(change, update(j));
            ++res.passes;
            if (change <= small) break;
        }
        grad = gram * res.beta - corr;
        gap = kkt_gap(gram, corr, weights, res.beta);
        if (opt.polish && gap > opt.tol) {
            Eigen::VectorXd trial = res.beta;
            double tgap = gap;
            if (detail::polish_active_set(gram, corr, weights, trial, tgap)) {
                res.beta = std::move(trial);
                gap = tgap;
                grad = gram * res.beta - corr;
                res.polished = true;
            }
        }
    }
    res.kkt_gap = gap;
    return res;
}

/// Block form: G = X^T X / n and c = X^T r / n from the centered design.
inline LassoResult solve_lasso_block(const Eigen::VectorXd& residual,
                                     const DesignBlock& block,
                                     const Eigen::VectorXd& weights,
                                     const Eigen::VectorXd& warm,
                                     double tol)
{
    if (residual.size() != block.rows()) throw ValidationError("residual length mismatch");
    const Eigen::VectorXd corr = block.centered.transpose() * residual / static_cast<double>(block.rows());
    LassoOptions opt;
    opt.tol = tol;
    return solve_lasso(block.gram, corr, weights, warm, opt);
}

/// ||X b||_n computed through the Gram matrix.
inline double empirical_norm(const Eigen::MatrixXd& gram, const Eigen::VectorXd& beta)
{
    return std::sqrt(std::max(0.0, beta.dot(gram * beta)));
}

/// Vector soft threshold: (1 - lambda / ||X b||_n)_+ b.
inline Eigen::VectorXd threshold_block(const Eigen::VectorXd& beta,
                                       const DesignBlock& block,
                                       double lambda)
{
    if (lambda < 0.0) throw ValidationError("threshold must be nonnegative");
    const double norm = empirical_norm(block.gram, beta);
    if (norm <= lambda || norm == 0.0) return Eigen::VectorXd::Zero(beta.size());
    return (1.0 - lambda / norm) * beta;
}

} // namespace dpam
