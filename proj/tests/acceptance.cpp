// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>
#include <Eigen/Dense>
#include <dpam/bdt.hpp>
#include <dpam/design.hpp>
#include <dpam/htv.hpp>
#include <dpam/lasso.hpp>
#include <dpam/simulation.hpp>
#include "support/grid_spline.hpp"
#include "support/random_design.hpp"
#include "support/reference_solver.hpp"

namespace {

using namespace dpam;
using Grid = std::vector<std::vector<double>>;

struct Outcome
{
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// 1. Lasso form of the hierarchical TV on random d = 2 splines.
Outcome criterion1()
{
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> size(3, 5);
    std::uniform_real_distribution<double> w(0.2, 2.0);
    std::normal_distribution<double> nd;
    std::bernoulli_distribution sparse(0.25);
    double worst = 0.0;
    int count = 0;
    for (int m = 1; m <= 2; ++m) {
        for (bool averaging : {true, false}) {
            for (int trial = 0; trial < 200; ++trial) {
                const std::size_t n1 = size(rng), n2 = size(rng);
                const auto proj = averaging ? ProjectionChoice::averaging()
                                            : ProjectionChoice::fixed_point({trial % n1, (trial / 2) % n2});
                const auto sys = testing::full_system({testing::random_knots(n1, rng), testing::random_knots(n2, rng)}, m, proj);
                std::vector<Eigen::VectorXd> coefs;
                for (const auto& b : sys.blocks) {
                    Eigen::VectorXd v(static_cast<Eigen::Index>(b.size()));
                    for (auto& x : v) x = sparse(rng) ? 0.0 : nd(rng);
                    coefs.push_back(v);
                }
                const std::vector<double> rho{w(rng), w(rng)};
                const auto g = testing::spline_on_grid(sys, coefs, nd(rng));
                worst = std::max(worst, std::abs(htv(g, m, rho, proj) - testing::weighted_l1(sys, coefs, rho)));
                ++count;
            }
        }
    }
    return {worst <= 1e-8, fmt("%.0f coefficient vectors, max |HTV - sum ||R beta||_1| = %.2e", count, worst)};
}

// 2. Component form of the m = 1 hierarchical TV.
Outcome criterion2()
{
    std::mt19937_64 rng(202);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> w(0.1, 2.0);
    std::uniform_int_distribution<std::size_t> size(2, 5);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 2 + trial % 2;
        Grid k;
        std::vector<std::size_t> fixed;
        for (std::size_t a = 0; a < d; ++a) {
            k.push_back(testing::random_knots(size(rng), rng));
            fixed.push_back(static_cast<std::size_t>(trial) % k.back().size());
        }
        const auto g = GridFunction::sample(k, [&](std::span<const double>) { return nd(rng); });
        const std::vector<double> rho{w(rng), w(rng), w(rng)};
        const auto proj = trial % 4 < 2 ? ProjectionChoice::averaging() : ProjectionChoice::fixed_point(fixed);
        worst = std::max(worst, std::abs(htv_via_components(g, 1, rho, proj) - htv(g, 1, rho, proj)));
    }
    return {worst <= 1e-9, fmt("100 grid functions (d = 2, 3), max difference = %.2e", worst)};
}

// 3. TV_k of a piecewise-constant truncated-power expansion is ||beta||_1.
Outcome criterion3()
{
    std::mt19937_64 rng(303);
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        for (std::size_t k = 1; k <= 3; ++k) {
            Grid knots;
            std::vector<CovariateKnots> ck;
            for (std::size_t a = 0; a < k; ++a) {
                knots.push_back(testing::random_knots(3 + (trial + a) % 3, rng));
                ck.push_back(knots_from_marginal(knots.back(), 1));
            }
            std::size_t ncoef = 1;
            for (const auto& c : ck) ncoef *= c.size() - 1;
            std::vector<double> beta(ncoef);
            for (auto& b : beta) b = nd(rng);
            const auto g = GridFunction::sample(knots, [&](std::span<const double> z) {
                double v = 0.0;
                std::vector<std::size_t> idx(k, 0);
                for (std::size_t c = 0; c < ncoef; ++c) {
                    double prod = 1.0;
                    for (std::size_t a = 0; a < k; ++a) prod *= phi_element(ck[a], 1, idx[a] + 2)(z[a]);
                    v += beta[c] * prod;
                    for (std::size_t a = k; a-- > 0;) {
                        if (++idx[a] < ck[a].size() - 1) break;
                        idx[a] = 0;
                    }
                }
                return v;
            });
            double l1 = 0.0;
            for (double b : beta) l1 += std::abs(b);
            worst = std::max(worst, std::abs(raw_tv(g) - l1));
        }
    }
    return {worst <= 1e-12, fmt("k = 1, 2, 3 over 20 draws each, max |TV_k - ||beta||_1| = %.2e", worst)};
}

// 4. Raw TV of an additive function and of a single-step interaction.
Outcome criterion4()
{
    const Grid k{{0.0, 0.3, 0.5, 1.0}, {0.0, 0.2, 1.0}};
    const auto additive = GridFunction::sample(k, [](std::span<const double> z) { return z[0] + z[1]; });
    const Grid k2{{0.0, 1.0}, {0.0, 1.0}};
    const auto interaction = GridFunction::sample(k2, [](std::span<const double> z) {
        return (z[0] >= 1.0 && z[1] >= 1.0) ? 1.0 : 0.0;
    });
    const double a = raw_tv(additive), b = raw_tv(interaction);
    return {a == 0.0 && b == 1.0, fmt("additive panel TV = %g, interaction panel TV = %g", a, b)};
}

// 5. BDT against an independent ADMM solver on single-block problems.
Outcome criterion5()
{
    std::mt19937_64 rng(505);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> e(0.0, 0.2);
    double worst = 0.0;
    bool monotone = true;
    for (int trial = 0; trial < 50; ++trial) {
        const bool interaction = trial % 2 == 1;
        Eigen::MatrixXd X(40, interaction ? 2 : 1);
        for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
        Eigen::VectorXd y(40);
        for (Eigen::Index i = 0; i < 40; ++i) {
            y[i] = interaction ? (X(i, 0) - 0.5) * (X(i, 1) > 0.4 ? 2.0 : -1.0) : std::sin(5.0 * X(i, 0));
            y[i] += e(rng);
        }
        // one block of 12 columns: 13 knots (m = 2, main effect) or 5 x 4 knots (m = 1, pair)
        const auto sys = interaction
                             ? build_design(X, std::vector<std::size_t>{5, 4}, 1, 2, ProjectionChoice::averaging())
                             : build_design(X, std::vector<std::size_t>{13}, 2, 1, ProjectionChoice::averaging());
        const std::size_t b = interaction ? 2 : 0;
        if (sys.blocks[b].size() != 12) return {false, "block does not have 12 columns"};
        PenaltyConfig pen = PenaltyConfig::tied(interaction ? 2 : 1, 0.002 + 0.01 * u(rng), 0.02 + 0.1 * u(rng));
        pen.order = interaction ? 1 : 2;
        const auto all = penalize(sys.designs, sys.blocks, pen);
        const std::vector<SolverBlock> one{all[b]};
        BdtOptions opt;
        opt.tol = 1e-12;
        opt.max_cycles = 1000;
        const auto st = bdt_fit(y, one, opt);
        for (std::size_t t = 1; t < st.trace.size(); ++t) {
            if (st.trace[t] > st.trace[t - 1] + 1e-12 * (1.0 + std::abs(st.trace[t - 1]))) monotone = false;
        }
        const auto ref = testing::admm_reference({{one[0].design->centered, one[0].weights, one[0].lambda}}, y, false, 400000);
        worst = std::max(worst, std::abs(st.objective - ref.objective) / ref.objective);
    }
    return {worst <= 1e-5 && monotone,
            fmt("50 instances, max relative objective gap = %.2e, trace nonincreasing: ", worst) +
                (monotone ? "yes" : "no")};
}

SimulationResult simulate(const std::string& name, std::size_t reps, const std::vector<std::string>& labels)
{
    const Scenario s = make_scenario(name);
    std::vector<Method> methods;
    for (const auto& m : standard_methods(s)) {
        for (const auto& l : labels) {
            if (m.label == l) methods.push_back(m);
        }
    }
    return run_replications(s, methods, reps, 0);
}

// 6. Linear ANOVA simulation, n = 200, 20 replications.
Outcome criterion6()
{
    const auto r = simulate("linear-anova", 20, {"ATV m=1", "ATV m=2"});
    const double m1 = r.summary[0].mean[0], m2 = r.summary[1].mean[0];
    const bool ok = m2 >= 0.040 && m2 <= 0.075 && m1 >= 0.095 && m1 <= 0.145 && m2 < m1;
    return {ok, fmt("ATV m=2 MISE %.4f in [0.040, 0.075], ATV m=1 MISE %.4f in [0.095, 0.145]", m2, m1) +
                    fmt(", SEs %.4f / %.4f", r.summary[1].se[0], r.summary[0].se[0])};
}

// 7. Two-dimensional smoothing, n = 100, 100 replications.
Outcome criterion7()
{
    const auto r = simulate("lattice-2d", 100, {"ATV m=2"});
    const double v = r.summary[0].mean[0];
    return {v >= 0.003 && v <= 0.006, fmt("ATV m=2 MISE %.5f (SE %.5f) in [0.003, 0.006]", v, r.summary[0].se[0])};
}

// 8. Logistic ANOVA simulation, n = 500, 20 replications, plus the oracle error rate.
Outcome criterion8()
{
    Scenario s = make_scenario("logistic-anova");
    s.n = 1;
    s.test_size = 100000;
    s.seed = 8;
    const auto d = gen_scenario(s);
    Eigen::VectorXd p(d.test_f.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-d.test_f[i]));
    const double oracle = classification_metrics(p, d.test_y).error_rate;

    const auto r = simulate("logistic-anova", 20, {"ATV m=2"});
    const double excess = r.summary[0].mean[1];
    const bool ok = excess >= 0.035 && excess <= 0.060 && std::abs(oracle - 0.3535) <= 0.005;
    return {ok, fmt("ATV m=2 excess error %.2f%% (SE %.2f%%) in [3.5%%, 6.0%%]", 100 * excess, 100 * r.summary[0].se[1]) +
                    fmt(", oracle error %.2f%% (N = 1e5) within 35.35%% +/- 0.5%%", 100 * oracle)};
}

// 9. Block thresholding minimizes the doubly penalized block objective over scalings.
Outcome criterion9()
{
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int failures = 0, strict = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index n = 30 + trial % 20, q = 3 + trial % 8;
        const auto d = testing::design_from(testing::gaussian(n, q, rng));
        const Eigen::VectorXd r = testing::gaussian(n, 1, rng);
        const Eigen::VectorXd c = d.centered.transpose() * r / static_cast<double>(n);
        const Eigen::VectorXd w = Eigen::VectorXd::Constant(q, 0.2 * u(rng) * c.cwiseAbs().maxCoeff());
        const Eigen::VectorXd tilde = solve_lasso(d.gram, c, w, Eigen::VectorXd()).beta;
        const double norm = empirical_norm(d.gram, tilde);
        const double lambda = trial % 10 == 0 ? 0.0 : 1.2 * u(rng) * norm;
        auto objective = [&](const Eigen::VectorXd& b) {
            const Eigen::VectorXd xb = d.centered * b;
            return 0.5 * (r - xb).squaredNorm() / static_cast<double>(n) + w.dot(b.cwiseAbs()) +
                   lambda * xb.norm() / std::sqrt(static_cast<double>(n));
        };
        const double best = objective(threshold_block(tilde, d, lambda));
        for (int s = 0; s < 100; ++s) {
            if (best > objective((2.0 * s / 99.0) * tilde) + 1e-12) ++failures;
        }
        if (lambda > 0.0 && lambda < norm) {
            if (!(best < objective(tilde))) ++failures;
            ++strict;
        }
    }
    return {failures == 0, fmt("100 blocks x 100 scalings, %.0f violations, %.0f strict-improvement cases", failures, strict)};
}

} // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> all{
        {1, "HTV equals the weighted l1 norm of Psi coefficients", criterion1, 10},
        {2, "m=1 HTV equals its ANOVA component form", criterion2, 5},
        {3, "TV_k of the piecewise-constant basis expansion is ||beta||_1", criterion3, 60},
        {4, "raw TV of the additive and interaction example functions", criterion4, 60},
        {5, "BDT matches a reference convex solver; monotone trace", criterion5, 600},
        {6, "linear ANOVA simulation MISE (n=200, 20 reps)", criterion6, 1800},
        {7, "2-d smoothing MISE (n=100, 100 reps)", criterion7, 600},
        {8, "logistic ANOVA excess error and oracle error (n=500, 20 reps)", criterion8, 2700},
        {9, "block thresholding is optimal over the scaling family", criterion9, 60},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_seconds) {
            o.pass = false;
            o.detail += fmt(" (over the %.0f s budget)", c.budget_seconds);
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s criterion %d: %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
    return failed == 0 ? 0 : 1;
}
