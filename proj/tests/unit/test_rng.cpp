#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "tpca/rng.hpp"

using namespace tpca;

TEST(Philox, KnownAnswerVectors) {
    using B = Philox4x32::Block;
    EXPECT_EQ(Philox4x32::encrypt({0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::encrypt({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::encrypt({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RandomStream, SameKeyAndStreamRepeat) {
    RandomStream a(42, 3);
    RandomStream b(42, 3);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(RandomStream, StreamsDiffer) {
    RandomStream a(42, 0);
    RandomStream b(42, 1);
    RandomStream c(43, 0);
    int same_ab = 0;
    int same_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const auto x = a();
        same_ab += x == b();
        same_ac += x == c();
    }
    EXPECT_EQ(same_ab, 0);
    EXPECT_EQ(same_ac, 0);
}

TEST(RandomStream, JumpMatchesSequentialDraws) {
    RandomStream seq(7, 2);
    for (int i = 0; i < 10; ++i) seq();  // 5 blocks of two 64-bit outputs
    RandomStream jumped(7, 2);
    jumped.jump(5);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(seq(), jumped());
}

TEST(RandomStream, UniformInOpenUnitInterval) {
    RandomStream rng(1);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
}

TEST(RandomStream, NormalMoments) {
    RandomStream rng(2, 5);
    const int n = 400000;
    double s1 = 0.0;
    double s2 = 0.0;
    double s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s1 += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    EXPECT_NEAR(s1 / n, 0.0, 5 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 5 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(Seeds, DeriveSeedSeparatesChildren) {
    EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
    EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
    EXPECT_EQ(derive_seed(9, 4, 5), derive_seed(9, 4, 5));
}
