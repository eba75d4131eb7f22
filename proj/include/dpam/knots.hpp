#pragma once
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>
#include <dpam/error.hpp>

namespace dpam {

/**
 * Projection operator H_j used to define the side conditions of the
 * ANOVA decomposition. Averaging takes the mean over the marginal knots
 * of a coordinate; fixed-point evaluates at one marginal knot.
 */
struct ProjectionChoice
{
    enum class Kind { averaging, fixed_point };

    Kind kind = Kind::averaging;
    // 0-based marginal knot index per covariate; empty means the minimum
    // corner (index 0) for every covariate.
    std::vector<std::size_t> fixed_index;

    static ProjectionChoice averaging() { return {}; }

    static ProjectionChoice fixed_point(std::vector<std::size_t> index = {})
    {
        return {Kind::fixed_point, std::move(index)};
    }

    bool is_averaging() const noexcept { return kind == Kind::averaging; }

    std::size_t fixed_at(std::size_t covariate) const
    {
        return fixed_index.empty() ? 0 : fixed_index.at(covariate);
    }

    bool operator==(const ProjectionChoice&) const = default;
};

/// Apply H_j to a univariate function given its values at the marginal knots.
inline double project_values(std::span<const double> values_at_knots,
                             const ProjectionChoice& proj,
                             std::size_t covariate)
{
    if (proj.is_averaging()) {
        double s = 0;
        for (double v : values_at_knots) s += v;
        return s / static_cast<double>(values_at_knots.size());
    }
    return values_at_knots[proj.fixed_at(covariate)];
}

/**
 * Marginal knots z_1 < ... < z_n of one covariate together with the
 * order-m knot superset t_1, ..., t_{n-m} at which truncated powers sit.
 */
struct CovariateKnots
{
    std::vector<double> marginal;
    std::vector<double> superset;

    std::size_t size() const noexcept { return marginal.size(); }
};

/// Odd m keeps z_{(m-1)/2+2} .. z_{n-(m-1)/2}; even m keeps z_{m/2+1} .. z_{n-m/2}.
inline std::vector<double> knot_superset(std::span<const double> marginal, int order)
{
    const std::size_t n = marginal.size();
    const std::size_t m = static_cast<std::size_t>(order);
    if (n <= m) {
        throw ValidationError("knot superset needs more than " + std::to_string(m) +
                              " marginal knots, got " + std::to_string(n));
    }
    // 1-based inclusive bounds
    const std::size_t first = (m % 2 == 1) ? (m - 1) / 2 + 2 : m / 2 + 1;
    const std::size_t last = (m % 2 == 1) ? n - (m - 1) / 2 : n - m / 2;
    return {marginal.begin() + static_cast<std::ptrdiff_t>(first - 1),
            marginal.begin() + static_cast<std::ptrdiff_t>(last)};
}

/// Type-7 sample quantile (linear interpolation of order statistics) of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double prob)
{
    const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline void check_order(int order)
{
    if (order < 1 || order > 3) {
        throw UnsupportedError("cross-order m must be 1, 2 or 3, got " + std::to_string(order));
    }
}

/**
 * Build the knots of one covariate from its data column: n_knots evenly
 * spaced quantiles (probabilities 0, 1/(n_knots-1), ..., 1) with tied
 * values collapsed, followed by the order-m superset.
 */
inline CovariateKnots build_knots(std::span<const double> column,
                                  std::size_t n_knots,
                                  int order,
                                  std::size_t covariate = 0)
{
    check_order(order);
    if (n_knots < 2 || n_knots <= static_cast<std::size_t>(order)) {
        throw ValidationError("number of knots must exceed the order m");
    }
    std::vector<double> sorted(column.begin(), column.end());
    for (double v : sorted) {
        if (!std::isfinite(v)) {
            throw ValidationError("covariate " + std::to_string(covariate) +
                                  " contains non-finite values");
        }
    }
    if (sorted.empty()) {
        throw ValidationError("covariate " + std::to_string(covariate) + " has no data");
    }
    std::sort(sorted.begin(), sorted.end());

    CovariateKnots out;
    out.marginal.reserve(n_knots);
    for (std::size_t k = 0; k < n_knots; ++k) {
        const double prob = static_cast<double>(k) / static_cast<double>(n_knots - 1);
        const double q = quantile_sorted(sorted, prob);
        if (out.marginal.empty() || q > out.marginal.back()) out.marginal.push_back(q);
    }
    if (out.marginal.size() <= static_cast<std::size_t>(order)) {
        throw ValidationError("covariate " + std::to_string(covariate) +
                              " has too few distinct values: " +
                              std::to_string(out.marginal.size()) +
                              " distinct knots for order " + std::to_string(order));
    }
    out.superset = knot_superset(out.marginal, order);
    return out;
}

/// Build directly from given marginal knots (must be strictly increasing).
inline CovariateKnots knots_from_marginal(std::vector<double> marginal, int order)
{
    check_order(order);
    for (std::size_t i = 1; i < marginal.size(); ++i) {
        if (!(marginal[i] > marginal[i - 1])) {
            throw ValidationError("marginal knots must be strictly increasing");
        }
    }
    CovariateKnots out;
    out.superset = knot_superset(marginal, order);
    out.marginal = std::move(marginal);
    return out;
}

/// Per-covariate knots sharing one cross-order m.
struct KnotSystem
{
    int order = 2;
    std::vector<CovariateKnots> covariates;

    std::size_t dimension() const noexcept { return covariates.size(); }
    const CovariateKnots& operator[](std::size_t j) const { return covariates[j]; }
};

} // namespace dpam
