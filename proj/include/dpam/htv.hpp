#pragma once
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>
#include <dpam/error.hpp>
#include <dpam/knots.hpp>

// Definition-level total variations on knot grids. Everything here works
// directly on grid values and never touches the Psi basis, so it can serve
// as an independent check of the Lasso form of the penalty.

namespace dpam {

/// Values of a d-variate function on the full product grid, last coordinate fastest.
struct GridFunction
{
    std::vector<std::vector<double>> knots;
    std::vector<double> values;

    std::size_t dimension() const noexcept { return knots.size(); }

    std::size_t extent(std::size_t axis) const { return knots[axis].size(); }

    std::size_t grid_size() const
    {
        std::size_t s = 1;
        for (const auto& k : knots) s *= k.size();
        return s;
    }

    std::vector<std::size_t> strides() const
    {
        std::vector<std::size_t> s(dimension(), 1);
        for (std::size_t a = dimension(); a-- > 1;) s[a - 1] = s[a] * knots[a].size();
        return s;
    }

    void validate() const
    {
        if (knots.empty() || grid_size() == 0) throw ValidationError("empty grid");
        if (values.size() != grid_size()) {
            throw ValidationError("grid function has " + std::to_string(values.size()) +
                                  " values, grid size is " + std::to_string(grid_size()));
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw ValidationError("grid function has non-finite values");
        }
    }

    /// Evaluate a callable at every grid point.
    static GridFunction sample(std::vector<std::vector<double>> knots,
                               const std::function<double(std::span<const double>)>& f)
    {
        GridFunction g;
        g.knots = std::move(knots);
        const std::size_t d = g.dimension();
        const std::size_t total = g.grid_size();
        g.values.resize(total);
        std::vector<std::size_t> idx(d, 0);
        std::vector<double> z(d);
        for (std::size_t flat = 0; flat < total; ++flat) {
            for (std::size_t a = 0; a < d; ++a) z[a] = g.knots[a][idx[a]];
            g.values[flat] = f(z);
            for (std::size_t a = d; a-- > 0;) {
                if (++idx[a] < g.knots[a].size()) break;
                idx[a] = 0;
            }
        }
        return g;
    }

    GridFunction operator+(const GridFunction& o) const
    {
        GridFunction r = *this;
        for (std::size_t i = 0; i < values.size(); ++i) r.values[i] += o.values[i];
        return r;
    }

    GridFunction operator-(const GridFunction& o) const
    {
        GridFunction r = *this;
        for (std::size_t i = 0; i < values.size(); ++i) r.values[i] -= o.values[i];
        return r;
    }

    GridFunction scaled(double c) const
    {
        GridFunction r = *this;
        for (double& v : r.values) v *= c;
        return r;
    }
};

namespace detail {

// Calls f(base offset) for every index combination over `axes`, holding all
// other coordinates at index 0 and each listed axis below `limit[a]`.
template <class F>
void for_each_index(const GridFunction& g,
                    const std::vector<std::size_t>& axes,
                    const std::vector<std::size_t>& limit,
                    F&& f)
{
    const auto strides = g.strides();
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t l = 0; l < axes.size(); ++l) {
        if (limit[l] == 0) return;
    }
    while (true) {
        std::size_t off = 0;
        for (std::size_t l = 0; l < axes.size(); ++l) off += idx[l] * strides[axes[l]];
        f(off);
        std::size_t l = axes.size();
        while (l > 0) {
            --l;
            if (++idx[l] < limit[l]) break;
            idx[l] = 0;
            if (l == 0) return;
        }
        if (axes.empty()) return;
    }
}

inline std::vector<std::size_t> axes_of(std::uint32_t mask, std::size_t d)
{
    std::vector<std::size_t> out;
    for (std::size_t a = 0; a < d; ++a) {
        if (mask & (1u << a)) out.push_back(a);
    }
    return out;
}

} // namespace detail

/**
 * Raw total variation over the coordinates in `axes`: the sum over grid
 * cells of |alternating-sign sum of the 2^k corner values|. Coordinates
 * outside `axes` are held at their first knot.
 */
inline double raw_tv_over(const GridFunction& g, const std::vector<std::size_t>& axes)
{
    g.validate();
    const auto strides = g.strides();
    const std::size_t k = axes.size();
    if (k == 0) return 0.0;
    std::vector<std::size_t> limit(k);
    for (std::size_t l = 0; l < k; ++l) {
        if (g.extent(axes[l]) < 2) return 0.0;
        limit[l] = g.extent(axes[l]) - 1;
    }
    const std::uint32_t corners = 1u << k;
    double total = 0.0;
    detail::for_each_index(g, axes, limit, [&](std::size_t base) {
        double s = 0.0;
        for (std::uint32_t c = 0; c < corners; ++c) {
            std::size_t off = base;
            for (std::size_t l = 0; l < k; ++l) {
                if (c & (1u << l)) off += strides[axes[l]];
            }
            // corner with all upper indices gets +, each lowered index flips sign
            const int lowered = static_cast<int>(k) - std::popcount(c);
            s += (lowered % 2 == 0 ? 1.0 : -1.0) * g.values[off];
        }
        total += std::abs(s);
    });
    return total;
}

inline double raw_tv(const GridFunction& g)
{
    if (g.dimension() == 0) throw ValidationError("empty grid");
    std::vector<std::size_t> all(g.dimension());
    for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
    return raw_tv_over(g, all);
}

/// H_j along one axis: the result is constant in that coordinate.
inline GridFunction apply_projection(const GridFunction& g,
                                     std::size_t axis,
                                     const ProjectionChoice& proj)
{
    const auto strides = g.strides();
    const std::size_t n = g.extent(axis);
    const std::size_t step = strides[axis];
    GridFunction out = g;
    std::vector<double> line(n);
    for (std::size_t flat = 0; flat < g.values.size(); ++flat) {
        if ((flat / step) % n != 0) continue;
        for (std::size_t i = 0; i < n; ++i) line[i] = g.values[flat + i * step];
        const double h = project_values(line, proj, axis);
        for (std::size_t i = 0; i < n; ++i) out.values[flat + i * step] = h;
    }
    return out;
}

/**
 * D_j of a grid function that is piecewise linear in coordinate j between
 * knots. The value at knot i is the slope of the cell to its right
 * (right derivative, matching (0)_+^0 = 1); the last knot repeats the
 * slope of the last cell, as the spline extends linearly.
 */
inline GridFunction differentiate(const GridFunction& g, std::size_t axis)
{
    const auto strides = g.strides();
    const std::size_t n = g.extent(axis);
    if (n < 2) throw ValidationError("differentiation needs at least two knots");
    const std::size_t step = strides[axis];
    const auto& z = g.knots[axis];
    GridFunction out = g;
    for (std::size_t flat = 0; flat < g.values.size(); ++flat) {
        const std::size_t i = (flat / step) % n;
        const std::size_t lo = (i + 1 < n) ? i : n - 2;
        const std::size_t base = flat - i * step;
        out.values[flat] = (g.values[base + (lo + 1) * step] - g.values[base + lo * step]) /
                           (z[lo + 1] - z[lo]);
    }
    return out;
}

/// ANOVA components g_S, indexed by bitmask of S, each stored on the full grid.
struct AnovaDecomposition
{
    std::size_t dimension = 0;
    std::vector<GridFunction> components;

    const GridFunction& component(std::uint32_t mask) const { return components.at(mask); }

    const GridFunction& component(const std::vector<std::size_t>& subset) const
    {
        std::uint32_t mask = 0;
        for (std::size_t a : subset) mask |= 1u << a;
        return components.at(mask);
    }

    GridFunction sum() const
    {
        GridFunction s = components.at(0);
        for (std::size_t m = 1; m < components.size(); ++m) s = s + components[m];
        return s;
    }
};

/// g_S = prod_{j in S} (I - H_j) prod_{j not in S} H_j g for every subset S.
inline AnovaDecomposition anova_decompose(const GridFunction& g, const ProjectionChoice& proj)
{
    g.validate();
    const std::size_t d = g.dimension();
    if (d > 16) throw UnsupportedError("ANOVA decomposition limited to 16 coordinates");
    AnovaDecomposition out;
    out.dimension = d;
    const std::uint32_t count = 1u << d;
    out.components.reserve(count);
    for (std::uint32_t mask = 0; mask < count; ++mask) {
        GridFunction c = g;
        for (std::size_t a = 0; a < d; ++a) {
            const GridFunction h = apply_projection(c, a, proj);
            c = (mask & (1u << a)) ? c - h : h;
        }
        out.components.push_back(std::move(c));
    }
    return out;
}

namespace detail {

inline void check_weights(const std::vector<double>& rho, std::size_t d)
{
    if (rho.size() < d) {
        throw ValidationError("need " + std::to_string(d) + " total-variation weights, got " +
                              std::to_string(rho.size()));
    }
}

// HTV of order m of `g` restricted to the coordinates in `mask` (g is
// constant in every other coordinate).
inline double htv_recursive(const GridFunction& g,
                            std::uint32_t mask,
                            int order,
                            const std::vector<double>& rho,
                            const ProjectionChoice& proj)
{
    const std::size_t d = g.dimension();
    double total = 0.0;
    // iterate over nonempty submasks s of mask
    for (std::uint32_t s = mask; s != 0; s = (s - 1) & mask) {
        GridFunction f = g;
        for (std::size_t a = 0; a < d; ++a) {
            const std::uint32_t bit = 1u << a;
            if (!(mask & bit)) continue;
            f = (s & bit) ? (order >= 2 ? differentiate(f, a) : f) : apply_projection(f, a, proj);
        }
        if (order == 1) {
            total += rho[static_cast<std::size_t>(std::popcount(s)) - 1] * raw_tv_over(f, axes_of(s, d));
        } else {
            total += htv_recursive(f, s, order - 1, rho, proj);
        }
    }
    return total;
}

} // namespace detail

/**
 * Hierarchical total variation computed from its inductive definition.
 * For m = 2 the grid values must come from a cross-order-2 spline with
 * knots among the grid knots, so that divided differences are exact.
 * Supported: m = 1 with d <= 3, m = 2 with d <= 2.
 */
inline double htv(const GridFunction& g,
                  int order,
                  const std::vector<double>& rho,
                  const ProjectionChoice& proj)
{
    g.validate();
    const std::size_t d = g.dimension();
    const bool supported = (order == 1 && d >= 1 && d <= 3) || (order == 2 && d >= 1 && d <= 2);
    if (!supported) {
        throw UnsupportedError("hierarchical TV oracle supports (m=1, d<=3) and (m=2, d<=2); got m=" +
                               std::to_string(order) + ", d=" + std::to_string(d));
    }
    detail::check_weights(rho, d);
    return detail::htv_recursive(g, (1u << d) - 1, order, rho, proj);
}

/// sum_S rho_|S| TV_|S|(g_S) over the ANOVA components; m = 1 only.
inline double htv_via_components(const GridFunction& g,
                                 int order,
                                 const std::vector<double>& rho,
                                 const ProjectionChoice& proj)
{
    if (order != 1) {
        throw UnsupportedError("component form of the hierarchical TV is only provided for m=1");
    }
    g.validate();
    const std::size_t d = g.dimension();
    if (d > 3) throw UnsupportedError("component form supports d <= 3");
    detail::check_weights(rho, d);
    const AnovaDecomposition dec = anova_decompose(g, proj);
    double total = 0.0;
    for (std::uint32_t mask = 1; mask < (1u << d); ++mask) {
        total += rho[static_cast<std::size_t>(std::popcount(mask)) - 1] *
                 raw_tv_over(dec.component(mask), detail::axes_of(mask, d));
    }
    return total;
}

} // namespace dpam
