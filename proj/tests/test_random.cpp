#include <gtest/gtest.h>
#include <algorithm>
#include <cmath>
#include <dpam/random.hpp>

namespace dpam {
namespace {

// Known-answer vectors published with the Random123 library (Philox4x32-10).
TEST(Philox, KnownAnswerVectors)
{
    using B = Philox4x32::block;
    using K = Philox4x32::key_type;
    EXPECT_EQ(Philox4x32::generate(B{0, 0, 0, 0}, K{0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::generate(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}),
              (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::generate(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}),
              (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, StreamsAreReproducibleAndDistinct)
{
    Philox4x32 a(7, 1), b(7, 1), c(7, 2), d(8, 1);
    int same_c = 0, same_d = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto va = a(), vb = b(), vc = c(), vd = d();
        EXPECT_EQ(va, vb);
        same_c += va == vc;
        same_d += va == vd;
    }
    EXPECT_LT(same_c, 3);
    EXPECT_LT(same_d, 3);
}

TEST(Philox, UniformAndNormalMoments)
{
    Philox4x32 r(3);
    const int n = 200000;
    double su = 0, su2 = 0, sz = 0, sz2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        su2 += u * u;
        const double z = r.normal();
        sz += z;
        sz2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(su2 / n - 0.25, 1.0 / 12.0, 0.002);
    EXPECT_NEAR(sz / n, 0.0, 0.01);
    EXPECT_NEAR(sz2 / n, 1.0, 0.01);
}

TEST(Philox, PermutationIsAPermutation)
{
    Philox4x32 r(5);
    auto p = permutation(100, r);
    auto s = p;
    std::sort(s.begin(), s.end());
    for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(s[i], i);
    Philox4x32 r2(5);
    EXPECT_EQ(permutation(100, r2), p);
    EXPECT_TRUE(permutation(0, r).empty());
}

TEST(Philox, BelowIsUnbiasedOnSmallRange)
{
    Philox4x32 r(9);
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < 30000; ++i) ++counts[r.below(3)];
    for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

} // namespace
} // namespace dpam
