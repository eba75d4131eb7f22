#include <gtest/gtest.h>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>
#include <dpam/knots.hpp>

namespace dpam {
namespace {

std::vector<double> range(std::size_t n)
{
    std::vector<double> v(n);
    std::iota(v.begin(), v.end(), 0.0);
    return v;
}

TEST(Knots, EvenOrderSupersetDropsOneKnotEachSide)
{
    // 101 equally spaced values: the 11 quantiles are exactly 0, 0.1, ..., 1
    std::vector<double> col(101);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = static_cast<double>(i) / 100.0;
    const auto k = build_knots(col, 11, 2);
    ASSERT_EQ(k.marginal.size(), 11u);
    ASSERT_EQ(k.superset.size(), 9u);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(k.superset[i], k.marginal[i + 1]);
}

TEST(Knots, OddOrderSupersetRules)
{
    const auto m1 = knots_from_marginal(range(5), 1);
    EXPECT_EQ(m1.superset, (std::vector<double>{1, 2, 3, 4}));
    const auto m3 = knots_from_marginal(range(5), 3);
    EXPECT_EQ(m3.superset, (std::vector<double>{2, 3}));
}

TEST(Knots, SupersetSizeIsKnotsMinusOrder)
{
    for (int m = 1; m <= 3; ++m) {
        for (std::size_t n = static_cast<std::size_t>(m) + 1; n < 15; ++n) {
            EXPECT_EQ(knots_from_marginal(range(n), m).superset.size(), n - static_cast<std::size_t>(m));
        }
    }
}

TEST(Knots, Type7Quantiles)
{
    std::vector<double> col{3.0, 1.0, 2.0, 4.0};
    const auto k = build_knots(col, 3, 1);
    // probabilities 0, 0.5, 1 -> 1, 2.5, 4
    EXPECT_EQ(k.marginal, (std::vector<double>{1.0, 2.5, 4.0}));
}

TEST(Knots, TiesAreCollapsed)
{
    std::vector<double> col{0, 0, 0, 0, 0, 0, 1, 1, 2, 3};
    const auto k = build_knots(col, 11, 1);
    for (std::size_t i = 1; i < k.marginal.size(); ++i) EXPECT_LT(k.marginal[i - 1], k.marginal[i]);
    EXPECT_LT(k.marginal.size(), 11u);
    EXPECT_EQ(k.superset.size(), k.marginal.size() - 1);
}

TEST(Knots, TooFewDistinctValuesNamesCovariate)
{
    std::vector<double> col(20, 1.5);
    try {
        build_knots(col, 11, 2, 7);
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("covariate 7"), std::string::npos);
    }
}

TEST(Knots, NonFiniteRejected)
{
    std::vector<double> col{0.0, 1.0, std::numeric_limits<double>::quiet_NaN(), 2.0};
    EXPECT_THROW(build_knots(col, 3, 1), ValidationError);
}

TEST(Knots, UnsupportedOrder)
{
    EXPECT_THROW(build_knots(range(20), 11, 4), UnsupportedError);
    EXPECT_THROW(build_knots(range(20), 11, 0), UnsupportedError);
}

TEST(Projection, AveragingAndFixedPoint)
{
    std::vector<double> v{1.0, 2.0, 6.0};
    EXPECT_DOUBLE_EQ(project_values(v, ProjectionChoice::averaging(), 0), 3.0);
    EXPECT_DOUBLE_EQ(project_values(v, ProjectionChoice::fixed_point(), 0), 1.0);
    EXPECT_DOUBLE_EQ(project_values(v, ProjectionChoice::fixed_point({0, 2}), 1), 6.0);
}

} // namespace
} // namespace dpam
