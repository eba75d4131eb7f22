#pragma once
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/basis.hpp>
#include <dpam/error.hpp>

namespace dpam {

using Subset = std::vector<std::size_t>;

inline std::string subset_name(const Subset& s)
{
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ':';
        out += std::to_string(s[i] + 1);
    }
    return out;
}

/**
 * All subsets of {0..p-1} with 1 <= size <= K, ordered by size and then
 * lexicographically.
 */
inline std::vector<Subset> enumerate_blocks(std::size_t p, std::size_t max_order)
{
    if (max_order < 1) throw ValidationError("maximum interaction order must be at least 1");
    if (max_order > p) {
        throw ValidationError("maximum interaction order " + std::to_string(max_order) +
                              " exceeds the number of covariates " + std::to_string(p));
    }
    std::vector<Subset> out;
    for (std::size_t k = 1; k <= max_order; ++k) {
        Subset s(k);
        for (std::size_t i = 0; i < k; ++i) s[i] = i;
        while (true) {
            out.push_back(s);
            // advance to the next k-combination in lexicographic order
            std::size_t i = k;
            while (i > 0 && s[i - 1] == p - k + (i - 1)) --i;
            if (i == 0) break;
            ++s[i - 1];
            for (std::size_t l = i; l < k; ++l) s[l] = s[l - 1] + 1;
        }
    }
    return out;
}

/**
 * Tensor-product Psi block for a covariate subset. Columns enumerate the
 * multi-index (nu_1, ..., nu_k) with the last covariate varying fastest;
 * `index(c, l)` is the 0-based position (nu - 2) in the l-th univariate basis.
 */
struct BasisBlock
{
    Subset covariates;
    std::vector<std::size_t> extents;   // n_{j_l} - 1
    std::vector<std::size_t> flat_index;
    std::vector<int> degree;            // non-differentiation degree per column

    std::size_t size() const noexcept { return degree.size(); }
    std::size_t order() const noexcept { return covariates.size(); }

    std::size_t index(std::size_t col, std::size_t l) const
    {
        return flat_index[col * covariates.size() + l];
    }

    /// Diagonal of R: rho_l for a column of non-differentiation degree l, 0 for l = 0.
    Eigen::VectorXd weights(const std::vector<double>& rho) const
    {
        Eigen::VectorXd w(size());
        for (std::size_t c = 0; c < size(); ++c) {
            const int l = degree[c];
            if (l == 0) {
                w[c] = 0.0;
            } else {
                if (static_cast<std::size_t>(l) > rho.size()) {
                    throw ValidationError("penalty weights missing for interaction order " +
                                          std::to_string(l));
                }
                w[c] = rho[static_cast<std::size_t>(l) - 1];
            }
        }
        return w;
    }

    std::size_t unpenalized_count() const
    {
        std::size_t n = 0;
        for (int l : degree) n += (l == 0);
        return n;
    }

    double evaluate(std::size_t col,
                    const std::vector<UnivariatePsiBasis>& bases,
                    std::span<const double> x) const
    {
        double v = 1.0;
        for (std::size_t l = 0; l < covariates.size(); ++l) {
            const std::size_t j = covariates[l];
            v *= bases[j](index(col, l), x[j]);
        }
        return v;
    }
};

inline BasisBlock make_block(const Subset& covariates,
                             const std::vector<UnivariatePsiBasis>& bases)
{
    BasisBlock b;
    b.covariates = covariates;
    std::size_t total = 1;
    for (std::size_t j : covariates) {
        if (j >= bases.size()) throw ValidationError("block references unknown covariate");
        b.extents.push_back(bases[j].size());
        total *= bases[j].size();
    }
    const std::size_t k = covariates.size();
    b.flat_index.resize(total * k);
    b.degree.resize(total);
    std::vector<std::size_t> idx(k, 0);
    for (std::size_t c = 0; c < total; ++c) {
        int deg = 0;
        for (std::size_t l = 0; l < k; ++l) {
            b.flat_index[c * k + l] = idx[l];
            deg += bases[covariates[l]].truncated[idx[l]] ? 1 : 0;
        }
        b.degree[c] = deg;
        for (std::size_t l = k; l-- > 0;) {
            if (++idx[l] < b.extents[l]) break;
            idx[l] = 0;
        }
    }
    return b;
}

/// Evaluations psi_{nu,j}(X_{ij}) of every univariate basis at every row.
struct PsiEvaluations
{
    std::vector<Eigen::MatrixXd> per_covariate;   // n x (n_j - 1)

    std::size_t rows() const { return per_covariate.empty() ? 0 : per_covariate[0].rows(); }
};

inline PsiEvaluations evaluate_bases(const std::vector<UnivariatePsiBasis>& bases,
                                     const Eigen::MatrixXd& X)
{
    if (static_cast<std::size_t>(X.cols()) != bases.size()) {
        throw ValidationError("data has " + std::to_string(X.cols()) + " columns, expected " +
                              std::to_string(bases.size()));
    }
    PsiEvaluations out;
    out.per_covariate.reserve(bases.size());
    for (std::size_t j = 0; j < bases.size(); ++j) {
        Eigen::MatrixXd m(X.rows(), static_cast<Eigen::Index>(bases[j].size()));
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double x = X(i, static_cast<Eigen::Index>(j));
            if (!std::isfinite(x)) {
                throw ValidationError("non-finite value at row " + std::to_string(i) +
                                      ", column " + std::to_string(j));
            }
            for (std::size_t c = 0; c < bases[j].size(); ++c) {
                m(i, static_cast<Eigen::Index>(c)) = bases[j](c, x);
            }
        }
        out.per_covariate.push_back(std::move(m));
    }
    return out;
}

/// Raw (uncentered) block matrix Psi^dag: entry (i, c) = prod_l psi_{nu_l, j_l}(X_{i, j_l}).
inline Eigen::MatrixXd block_matrix(const BasisBlock& block, const PsiEvaluations& evals)
{
    const auto n = static_cast<Eigen::Index>(evals.rows());
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(block.size()));
    for (std::size_t c = 0; c < block.size(); ++c) {
        auto col = out.col(static_cast<Eigen::Index>(c));
        col.setOnes();
        for (std::size_t l = 0; l < block.order(); ++l) {
            const auto& m = evals.per_covariate[block.covariates[l]];
            col.array() *= m.col(static_cast<Eigen::Index>(block.index(c, l))).array();
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(col[i])) {
                throw NumericalError("non-finite basis evaluation at row " + std::to_string(i) +
                                     ", block column " + std::to_string(c));
            }
        }
    }
    return out;
}

/**
 * Centered data matrix of one block on the training rows, the column
 * means used for centering, and the scaled Gram matrix X^T X / n that the
 * inner Lasso solver works with.
 */
struct DesignBlock
{
    std::size_t id = 0;
    Eigen::VectorXd means;
    Eigen::MatrixXd centered;
    Eigen::MatrixXd gram;

    Eigen::Index rows() const { return centered.rows(); }
    Eigen::Index cols() const { return centered.cols(); }
    Eigen::MatrixXd raw() const { return centered.rowwise() + means.transpose(); }

    /// True when every centered column vanishes (e.g. a constant covariate).
    bool degenerate() const { return gram.size() == 0 || gram.trace() <= 1e-24; }
};

inline DesignBlock materialize_block(std::size_t id,
                                     const BasisBlock& block,
                                     const PsiEvaluations& evals)
{
    DesignBlock d;
    d.id = id;
    Eigen::MatrixXd raw = block_matrix(block, evals);
    const double n = static_cast<double>(raw.rows());
    d.means = raw.colwise().mean().transpose();
    d.centered = raw.rowwise() - d.means.transpose();
    d.gram = (d.centered.transpose() * d.centered) / n;
    return d;
}

inline DesignBlock materialize_block(std::size_t id,
                                     const BasisBlock& block,
                                     const std::vector<UnivariatePsiBasis>& bases,
                                     const Eigen::MatrixXd& X)
{
    return materialize_block(id, block, evaluate_bases(bases, X));
}

/// New data centered with the training column means of the block.
inline Eigen::MatrixXd centered_block_matrix(const BasisBlock& block,
                                             const PsiEvaluations& evals,
                                             const Eigen::VectorXd& train_means)
{
    Eigen::MatrixXd raw = block_matrix(block, evals);
    return raw.rowwise() - train_means.transpose();
}

} // namespace dpam
