#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "trnood/rng.hpp"

using trnood::Rng;

TEST(Rng, SameSeedAndStreamReproduce) {
    Rng a(42, "x"), b(42, "x");
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsAreIndependent) {
    Rng a(42, "x"), b(42, "y"), c(43, "x");
    int same_b = 0, same_c = 0;
    for (int i = 0; i < 100; ++i) {
        const auto v = a.next_u64();
        same_b += v == b.next_u64();
        same_c += v == c.next_u64();
    }
    EXPECT_EQ(same_b, 0);
    EXPECT_EQ(same_c, 0);
}

TEST(Rng, ChildDependsOnlyOnPath) {
    Rng a(7, "root");
    a.uniform();
    Rng b(7, "root");
    EXPECT_EQ(a.child("k").next_u64(), b.child("k").next_u64());
    EXPECT_EQ(Rng(7, "root/k").next_u64(), b.child("k").next_u64());
}

TEST(Rng, BelowStaysInRangeAndHitsEveryValue) {
    Rng r(1, "below");
    std::vector<int> hist(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        ++hist[v];
    }
    for (int h : hist) EXPECT_GT(h, 800);
    EXPECT_THROW(r.below(0), std::invalid_argument);
}

TEST(Rng, UniformMoments) {
    Rng r(3, "u");
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12, 0.002);
}

TEST(Rng, NormalMoments) {
    Rng r(4, "n");
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, GeometricMean) {
    Rng r(5, "g");
    const double p = 0.2;
    double sum = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += double(r.geometric(p));
    EXPECT_NEAR(sum / n, (1 - p) / p, 0.08);
    EXPECT_EQ(r.geometric(1.0), 0u);
}

TEST(Rng, PermutationAndSample) {
    Rng r(6, "p");
    auto p = r.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(p[i], i);
    const auto s = r.sample_indices(30, 12);
    EXPECT_EQ(s.size(), 12u);
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 12u);
    for (auto v : s) EXPECT_LT(v, 30u);
    EXPECT_THROW(r.sample_indices(3, 4), std::invalid_argument);
}
