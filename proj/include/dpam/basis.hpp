#pragma once
#include <cmath>
#include <cstddef>
#include <vector>
#include <dpam/error.hpp>
#include <dpam/knots.hpp>

namespace dpam {

/**
 * A univariate function of the form
 *
 *     sum_k poly[k] z^k  +  trunc_coef (z - knot)_+^d / d!
 *
 * with d = trunc_degree (no truncated part when d < 0) and the convention
 * (c)_+^0 = 1 for c >= 0. Closed under differentiation (for d >= 1),
 * integration from the origin, and subtraction of polynomials, which is
 * all the basis transform needs.
 */
struct SplineTerm
{
    std::vector<double> poly;
    double trunc_coef = 0.0;
    double knot = 0.0;
    int trunc_degree = -1;

    bool has_truncation() const noexcept { return trunc_degree >= 0 && trunc_coef != 0.0; }

    double operator()(double z) const
    {
        double v = 0.0;
        for (std::size_t k = poly.size(); k-- > 0;) v = v * z + poly[k];
        if (trunc_degree >= 0 && z >= knot) {
            double t = trunc_coef;
            const double u = z - knot;
            for (int k = 1; k <= trunc_degree; ++k) t *= u / k;
            v += t;
        }
        return v;
    }

    SplineTerm derivative() const
    {
        SplineTerm out;
        for (std::size_t k = 1; k < poly.size(); ++k) {
            out.poly.push_back(poly[k] * static_cast<double>(k));
        }
        if (trunc_degree == 0 && trunc_coef != 0.0) {
            throw NumericalError("derivative of a step function is not a spline term");
        }
        if (trunc_degree >= 1) {
            out.trunc_coef = trunc_coef;
            out.knot = knot;
            out.trunc_degree = trunc_degree - 1;
        }
        return out;
    }

    /// Integral from 0; (z - t)_+^d / d! maps to (z - t)_+^{d+1} / (d+1)!.
    SplineTerm antiderivative() const
    {
        SplineTerm out;
        out.poly.assign(poly.size() + 1, 0.0);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            out.poly[k + 1] = poly[k] / static_cast<double>(k + 1);
        }
        if (trunc_degree >= 0) {
            out.trunc_coef = trunc_coef;
            out.knot = knot;
            out.trunc_degree = trunc_degree + 1;
        }
        return out;
    }

    SplineTerm& add_poly(std::size_t power, double coef)
    {
        if (poly.size() <= power) poly.resize(power + 1, 0.0);
        poly[power] += coef;
        return *this;
    }
};

/// Values of f at the marginal knots of one coordinate followed by H_j.
inline double project(const SplineTerm& f,
                      const CovariateKnots& knots,
                      const ProjectionChoice& proj,
                      std::size_t covariate)
{
    std::vector<double> vals(knots.marginal.size());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = f(knots.marginal[i]);
    return project_values(vals, proj, covariate);
}

/**
 * An element of the truncated power basis: either z^d / d! or
 * (z - knot)_+^d / d!.
 */
struct PhiElement
{
    bool truncated = false;
    int degree = 0;
    double knot = 0.0;

    SplineTerm term() const
    {
        SplineTerm t;
        if (truncated) {
            t.trunc_coef = 1.0;
            t.knot = knot;
            t.trunc_degree = degree;
        } else {
            double f = 1.0;
            for (int k = 2; k <= degree; ++k) f *= k;
            t.add_poly(static_cast<std::size_t>(degree), 1.0 / f);
        }
        return t;
    }

    PhiElement derivative() const
    {
        if (degree == 0) throw NumericalError("derivative of a degree-0 basis element");
        return {truncated, degree - 1, knot};
    }

    double operator()(double z) const { return term()(z); }
};

/**
 * phi_{nu}^{(m)} for nu = 1..n: powers z^{nu-1}/(nu-1)! for nu <= m, then
 * truncated powers at the superset knots.
 */
inline PhiElement phi_element(const CovariateKnots& knots, int order, std::size_t nu)
{
    const auto m = static_cast<std::size_t>(order);
    if (nu < 1 || nu > knots.size()) throw ValidationError("basis index out of range");
    if (nu <= m) return {false, static_cast<int>(nu) - 1, 0.0};
    return {true, order - 1, knots.superset[nu - m - 1]};
}

/**
 * The operator T^{(m)} applied to a basis element:
 *   T^{(1)} = I,  T^{(m)} z = z,
 *   T^{(m)} phi = (1 - z H D) D^- T^{(m-1)} D phi   otherwise.
 */
inline SplineTerm transform_element(const PhiElement& e,
                                    int order,
                                    const CovariateKnots& knots,
                                    const ProjectionChoice& proj,
                                    std::size_t covariate)
{
    if (order == 1) return e.term();
    if (!e.truncated && e.degree == 1) return e.term();
    const SplineTerm inner = transform_element(e.derivative(), order - 1, knots, proj, covariate);
    SplineTerm out = inner.antiderivative();
    // D of the antiderivative is `inner` itself
    const double slope = project(inner, knots, proj, covariate);
    out.add_poly(1, -slope);
    return out;
}

/**
 * psi_{nu,j} = (1 - H_j) T_j^{(m)} phi_{nu,j} for nu = 2..n_j, stored as the
 * truncated part of phi plus an explicit polynomial of degree <= m-1.
 */
struct UnivariatePsiBasis
{
    std::size_t covariate = 0;
    int order = 1;
    std::vector<PhiElement> phi;    // phi[i] is nu = i + 2
    std::vector<SplineTerm> psi;
    std::vector<bool> truncated;    // nu >= m + 1

    std::size_t size() const noexcept { return psi.size(); }
    double operator()(std::size_t i, double z) const { return psi[i](z); }
};

inline UnivariatePsiBasis build_psi_basis(const KnotSystem& knots,
                                          const ProjectionChoice& proj,
                                          std::size_t j)
{
    if (j >= knots.dimension()) throw ValidationError("covariate index out of range");
    const CovariateKnots& kj = knots[j];
    if (!proj.is_averaging() && proj.fixed_at(j) >= kj.size()) {
        throw ValidationError("fixed point index " + std::to_string(proj.fixed_at(j)) +
                              " is not a marginal knot of covariate " + std::to_string(j));
    }
    UnivariatePsiBasis out;
    out.covariate = j;
    out.order = knots.order;
    for (std::size_t nu = 2; nu <= kj.size(); ++nu) {
        PhiElement e = phi_element(kj, knots.order, nu);
        SplineTerm t = transform_element(e, knots.order, kj, proj, j);
        const double h = project(t, kj, proj, j);
        t.add_poly(0, -h);
        out.phi.push_back(e);
        out.psi.push_back(std::move(t));
        out.truncated.push_back(nu >= static_cast<std::size_t>(knots.order) + 1);
    }
    return out;
}

inline std::vector<UnivariatePsiBasis> build_psi_bases(const KnotSystem& knots,
                                                       const ProjectionChoice& proj)
{
    std::vector<UnivariatePsiBasis> out;
    out.reserve(knots.dimension());
    for (std::size_t j = 0; j < knots.dimension(); ++j) {
        out.push_back(build_psi_basis(knots, proj, j));
    }
    return out;
}

} // namespace dpam
