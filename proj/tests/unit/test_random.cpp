#include "fixtures.hpp"
#include "oracles.hpp"

using namespace wavecouple;

TEST(Philox, KnownAnswerVectors)
{
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::apply(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::apply(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::apply(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Philox, MatchesReferenceRounds)
{
    for (std::uint32_t i = 0; i < 50; ++i) {
        const Philox4x32::Counter c{i, 3 * i + 1, ~i, i * 2654435761u};
        const Philox4x32::Key k{i ^ 0x1234u, 77u + i};
        EXPECT_EQ(Philox4x32::apply(c, k), oracle::philox(c, k));
    }
}

TEST(NormalStream, PureFunctionOfCoordinates)
{
    const NormalStream a(42, 0, 9), b(42, 0, 9), c(42, 1, 9), d(43, 0, 9);
    std::vector<double> va(5), vb(5), vc(5), vd(5);
    a.fill(11, va);
    b.fill(11, vb);
    c.fill(11, vc);
    d.fill(11, vd);
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
    EXPECT_NE(va, vd);
    // a prefix of modes does not depend on how many are requested
    std::vector<double> v3(3);
    a.fill(11, v3);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(v3[i], va[i]);
}

TEST(NormalStream, Moments)
{
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0, cross = 0;
    std::vector<double> v(2);
    for (int t = 0; t < n / 2; ++t) {
        NormalStream(5, 0, static_cast<std::uint64_t>(t)).fill(0, v);
        for (double x : v) {
            s1 += x;
            s2 += x * x;
            s4 += x * x * x * x;
        }
        cross += v[0] * v[1];
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
    EXPECT_NEAR(cross / (n / 2), 0.0, 4.0 / std::sqrt(n / 2));
}
