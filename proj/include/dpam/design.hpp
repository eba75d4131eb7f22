#pragma once
#include <cstddef>
#include <vector>
#include <Eigen/Dense>
#include <dpam/basis.hpp>
#include <dpam/blocks.hpp>
#include <dpam/knots.hpp>

namespace dpam {

/// Knots for every column of X; `n_knots` holds one count or one per column.
inline KnotSystem build_knot_system(const Eigen::MatrixXd& X,
                                    const std::vector<std::size_t>& n_knots,
                                    int order)
{
    const auto p = static_cast<std::size_t>(X.cols());
    if (n_knots.size() != 1 && n_knots.size() != p) {
        throw ValidationError("knot counts: expected 1 or " + std::to_string(p) + " values");
    }
    KnotSystem ks;
    ks.order = order;
    for (std::size_t j = 0; j < p; ++j) {
        const Eigen::VectorXd col = X.col(static_cast<Eigen::Index>(j));
        ks.covariates.push_back(build_knots(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                            n_knots.size() == 1 ? n_knots[0] : n_knots[j], order, j));
    }
    return ks;
}

/// Everything the solver needs for one training matrix.
struct DesignSystem
{
    KnotSystem knots;
    ProjectionChoice projection;
    std::vector<UnivariatePsiBasis> bases;
    std::vector<BasisBlock> blocks;
    std::vector<DesignBlock> designs;
};

inline DesignSystem build_design(const Eigen::MatrixXd& X,
                                 KnotSystem knots,
                                 std::size_t max_order,
                                 const ProjectionChoice& proj)
{
    DesignSystem s;
    s.knots = std::move(knots);
    s.projection = proj;
    s.bases = build_psi_bases(s.knots, proj);
    const PsiEvaluations evals = evaluate_bases(s.bases, X);
    const auto subsets = enumerate_blocks(s.knots.dimension(), max_order);
    s.blocks.reserve(subsets.size());
    s.designs.reserve(subsets.size());
    for (std::size_t b = 0; b < subsets.size(); ++b) {
        s.blocks.push_back(make_block(subsets[b], s.bases));
        s.designs.push_back(materialize_block(b, s.blocks.back(), evals));
    }
    return s;
}

inline DesignSystem build_design(const Eigen::MatrixXd& X,
                                 const std::vector<std::size_t>& n_knots,
                                 int order,
                                 std::size_t max_order,
                                 const ProjectionChoice& proj)
{
    return build_design(X, build_knot_system(X, n_knots, order), max_order, proj);
}

} // namespace dpam
