#include "support.hpp"

#include <cmath>
#include <set>

using namespace halsub;

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswerZero)
{
    const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (PhiloxBlock{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (PhiloxBlock{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi)
{
    const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (PhiloxBlock{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(CounterRng, StreamLayoutMatchesRawBlocks)
{
    CounterRng rng(0, 0);
    const auto b0 = philox4x32_10({0, 0, 0, 0}, {0, 0});
    const auto b1 = philox4x32_10({1, 0, 0, 0}, {0, 0});
    EXPECT_EQ(rng.next_u64(), (std::uint64_t{b0[1]} << 32) | b0[0]);
    EXPECT_EQ(rng.next_u64(), (std::uint64_t{b0[3]} << 32) | b0[2]);
    EXPECT_EQ(rng.next_u64(), (std::uint64_t{b1[1]} << 32) | b1[0]);
}

TEST(CounterRng, SeedAndStreamSelectIndependentSequences)
{
    std::set<std::uint64_t> firsts;
    for (std::uint64_t seed : {0u, 1u, 2u})
        for (std::uint64_t stream : {0u, 1u, 17u}) firsts.insert(CounterRng(seed, stream).next_u64());
    EXPECT_EQ(firsts.size(), 9u);
}

TEST(CounterRng, Deterministic)
{
    CounterRng a(42, 3), b(42, 3);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.gaussian(), b.gaussian());
}

TEST(CounterRng, UniformInHalfOpenUnitInterval)
{
    CounterRng rng(7);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LE(u, 1.0);
    }
}

TEST(CounterRng, GaussianMoments)
{
    CounterRng rng(11);
    const int n = 200000;
    double sum = 0.0, sq = 0.0, quart = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        sum += g;
        sq += g * g;
        quart += g * g * g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    // 5 standard errors: se(mean) = 1/sqrt(n), se(var) = sqrt(2/n), se(m4) = sqrt(96/n).
    EXPECT_NEAR(mean, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(var, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(quart / n, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(CounterRng, GaussianMatrixScalesByStddev)
{
    CounterRng a(5), b(5);
    const Matrix m1 = a.gaussian_matrix(3, 4);
    const Matrix m2 = b.gaussian_matrix(3, 4, 2.5);
    EXPECT_TRUE((m2 - 2.5 * m1).cwiseAbs().maxCoeff() == 0.0);
}
