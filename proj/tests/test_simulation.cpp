#include <gtest/gtest.h>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <Eigen/Dense>
#include <dpam/simulation.hpp>

namespace dpam {
namespace {

TEST(Scenario, ComponentFunctionValues)
{
    EXPECT_EQ(g2(0.5), 0.0);
    EXPECT_EQ(g1(0.0 * 0.0), 0.0);
    const double x[4] = {0.0, 0.0, 0.0, 0.0};
    // g1(x3 x4) and g3(x1 x2) vanish at the origin: f(0) = g2(0) + g4(0) + g2(0)
    EXPECT_NEAR(anova_truth(x), 1.0 + 0.6 + 1.0, 1e-15);
}

TEST(Scenario, ComponentMeansAreExact)
{
    const int n = 200000;
    double m[4] = {0, 0, 0, 0};
    for (int i = 0; i < n; ++i) {
        const double z = (i + 0.5) / n;   // midpoint rule
        m[0] += g1(z) / n;
        m[1] += g2(z) / n;
        m[2] += g3(z) / n;
        m[3] += g4(z) / n;
    }
    EXPECT_NEAR(m[0], g1_mean, 1e-9);
    EXPECT_NEAR(m[1], g2_mean, 1e-9);
    EXPECT_NEAR(m[2], g3_mean, 1e-9);
    EXPECT_NEAR(m[3], g4_mean, 1e-9);
}

TEST(Scenario, SignalToNoiseIsAboutThreeToOne)
{
    Scenario s = make_scenario("linear-anova");
    s.n = 1;
    s.test_size = 1000000;
    const auto d = gen_scenario(s);
    const double mean = d.test_f.mean();
    const double var = (d.test_f.array() - mean).square().mean();
    EXPECT_NEAR(var / (0.2546 * 0.2546), 9.0, 0.15);
}

TEST(Scenario, CovariatesPassKolmogorovSmirnovUniformity)
{
    Scenario s = make_scenario("linear-anova");
    s.n = 100000;
    s.test_size = 1;
    const auto d = gen_scenario(s);
    const double n = static_cast<double>(s.n);
    const double critical = 1.9495 / std::sqrt(n);   // alpha = 0.001
    for (Eigen::Index j = 0; j < d.train.X.cols(); ++j) {
        std::vector<double> v(d.train.X.col(j).data(), d.train.X.col(j).data() + s.n);
        std::sort(v.begin(), v.end());
        double D = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            D = std::max({D, (static_cast<double>(i) + 1.0) / n - v[i], v[i] - static_cast<double>(i) / n});
        }
        EXPECT_LT(D, critical) << "covariate " << j + 1;
    }
}

TEST(Scenario, IdenticalSeedsGiveIdenticalData)
{
    for (const char* name : {"linear-anova", "logistic-anova", "lattice-2d"}) {
        Scenario s = make_scenario(name);
        s.test_size = 500;
        const auto a = gen_scenario(s), b = gen_scenario(s);
        EXPECT_EQ(a.train.X, b.train.X);
        EXPECT_EQ(a.train.y, b.train.y);
        EXPECT_EQ(a.validation.y, b.validation.y);
        EXPECT_EQ(a.test_X, b.test_X);
        s.seed += 1;
        EXPECT_NE(gen_scenario(s).train.X, a.train.X);
    }
}

TEST(Scenario, ShapesFollowTheSetting)
{
    const auto lat = gen_scenario(make_scenario("lattice-2d"));
    EXPECT_EQ(lat.train.X.rows(), 100);
    EXPECT_EQ(lat.train.X.cols(), 2);
    EXPECT_EQ(lat.test_X.rows(), 101 * 101);
    EXPECT_EQ(lat.test_f[0], 1.0);
    Scenario lg = make_scenario("logistic-anova");
    lg.test_size = 1000;
    const auto d = gen_scenario(lg);
    EXPECT_EQ(d.train.X.rows(), 500);
    EXPECT_EQ(d.test_y.size(), 1000);
    EXPECT_TRUE(((d.train.y.array() == 0.0) || (d.train.y.array() == 1.0)).all());
    EXPECT_THROW(make_scenario("friedman"), ValidationError);
}

TEST(Scenario, LogisticOracleErrorRate)
{
    Scenario s = make_scenario("logistic-anova");
    s.n = 1;
    s.test_size = 100000;
    const auto d = gen_scenario(s);
    Eigen::VectorXd p(d.test_f.size());
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-d.test_f[i]));
    EXPECT_NEAR(expected_error_rate(p, p), 0.3535, 0.005);
    EXPECT_NEAR(classification_metrics(p, d.test_y).error_rate, 0.3535, 0.005);
}

TEST(Metrics, Mise)
{
    const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(10, -1.0, 2.0);
    EXPECT_EQ(mise(f, f), 0.0);
    EXPECT_DOUBLE_EQ(mise((f.array() + 1.0).matrix(), f), 1.0);
    Eigen::VectorXd a(3), b(3);
    a << 1.0, 2.0, 4.0;
    b << 0.5, 2.0, 1.0;
    EXPECT_DOUBLE_EQ(mise(a, b), (0.25 + 0.0 + 9.0) / 3.0);
    EXPECT_THROW(mise(a, Eigen::VectorXd(2)), ValidationError);
}

TEST(Metrics, PerfectSeparation)
{
    Eigen::VectorXd p(4), y(4);
    p << 0.01, 0.99, 0.01, 0.99;
    y << 0, 1, 0, 1;
    const auto m = classification_metrics(p, y);
    EXPECT_EQ(m.error_rate, 0.0);
    EXPECT_EQ(m.auc, 1.0);
    EXPECT_NEAR(m.log_loss, -std::log(0.99), 1e-12);
}

TEST(Metrics, ConstantScoresGiveHalfAuc)
{
    Eigen::VectorXd p = Eigen::VectorXd::Constant(6, 0.5), y(6);
    y << 0, 1, 1, 0, 1, 0;
    EXPECT_EQ(classification_metrics(p, y).auc, 0.5);
}

TEST(Metrics, HandComputedAucWithTies)
{
    Eigen::VectorXd p(4), y(4);
    p << 0.2, 0.6, 0.6, 0.9;
    y << 0, 1, 0, 1;
    // positive/negative pairs: (0.6,0.2)=1, (0.6,0.6)=1/2, (0.9,0.2)=1, (0.9,0.6)=1
    EXPECT_DOUBLE_EQ(auc(p, y), 3.5 / 4.0);
    const auto m = classification_metrics(p, y);
    EXPECT_DOUBLE_EQ(m.error_rate, 0.25);
}

TEST(Metrics, SingleClassAucIsAnError)
{
    const Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 0.3);
    EXPECT_THROW(classification_metrics(p, Eigen::VectorXd::Ones(3)), ValidationError);
}

TEST(Replications, IdenticalValuesHaveZeroStandardError)
{
    const auto row = summarize("m", {{0.2, 3.0}, {0.2, 3.0}});
    EXPECT_EQ(row.mean, (std::vector<double>{0.2, 3.0}));
    EXPECT_EQ(row.se, (std::vector<double>{0.0, 0.0}));
}

std::vector<Method> quick_methods(const Scenario& s)
{
    auto ms = standard_methods(s);
    for (auto& m : ms) {
        m.spec.grid_points = 2;
        m.spec.n_knots = {5};
    }
    return {ms[0], ms[2]};
}

TEST(Replications, SummaryIsMeanOfPerRepColumn)
{
    Scenario s = make_scenario("lattice-2d");
    s.n = 40;
    const auto r = run_replications(s, quick_methods(s), 3, 1);
    ASSERT_EQ(r.reps.size(), 6u);
    ASSERT_EQ(r.summary.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
        double m = 0.0;
        for (std::size_t rep = 0; rep < 3; ++rep) {
            EXPECT_EQ(r.reps[rep * 2 + k].seed, s.seed + rep);
            m += r.reps[rep * 2 + k].metrics[0] / 3.0;
        }
        EXPECT_NEAR(r.summary[k].mean[0], m, 1e-15);
        EXPECT_GT(r.summary[k].se[0], 0.0);
    }
    std::ostringstream a, b;
    write_replications_csv(a, r);
    write_summary_csv(b, r);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "rep,seed,method,mise,rho,lambda,active_blocks");
    EXPECT_NE(b.str().find("\"" ), std::string::npos);
    EXPECT_NE(b.str().find(" ("), std::string::npos);
    EXPECT_THROW(run_replications(s, quick_methods(s), 1), ValidationError);
}

TEST(Replications, ParallelRunMatchesSerial)
{
    Scenario s = make_scenario("lattice-2d");
    s.n = 30;
    const auto a = run_replications(s, quick_methods(s), 2, 1);
    const auto b = run_replications(s, quick_methods(s), 2, 2);
    for (std::size_t i = 0; i < a.reps.size(); ++i) EXPECT_EQ(a.reps[i].metrics, b.reps[i].metrics);
}

// Weak sparsity monotonicity: at fixed rho, warm-started paths are sparser
// at a large lambda than at one ten times smaller, in at least 18 of 20 runs.
TEST(Replications, ActiveBlocksShrinkAlongTheLambdaPath)
{
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Scenario s = make_scenario("linear-anova");
        s.n = 100;
        s.seed = seed;
        s.test_size = 1;
        const auto d = gen_scenario(s);
        ModelSpec spec;
        spec.n_knots = {6};
        spec.threads = 1;
        spec.solver.record_trace = false;
        const auto sys = build_design(d.train.X, spec.n_knots, 2, 2, ProjectionChoice::averaging());
        detail::Problem pr{sys, d.train.y, {}, {}};
        const double rho = 0.01 * rho_max(pr.y, sys.designs, sys.blocks);
        const auto zero = penalize(sys.designs, sys.blocks, spec.penalty(rho, 0.0));
        const double lmax = lambda_max(Loss::squared, pr.y, zero);
        const auto path = detail::run_path(pr, spec, rho, {0.2 * lmax, 0.02 * lmax}, false);
        ok += path.active[0] <= path.active[1];
    }
    EXPECT_GE(ok, 18);
}

} // namespace
} // namespace dpam
