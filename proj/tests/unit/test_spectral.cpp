#include "fixtures.hpp"
#include "oracles.hpp"

using namespace wavecouple;

TEST(Spectral, EigenvaluesAreSquaredFrequencies)
{
    const SpectralSpace s(5, 2.0);
    for (std::size_t j = 0; j < 5; ++j) {
        const double w = static_cast<double>(j + 1) * M_PI / 2.0;
        EXPECT_NEAR(s.frequencies()[j], w, 1e-14);
        EXPECT_NEAR(s.eigenvalues()[j], w * w, 1e-12);
    }
    EXPECT_NEAR(s.embedding_constant(), std::sqrt(2.0) / 2.0, 1e-15);
}

TEST(Spectral, GridRoundTrip)
{
    const SpectralSpace s(16);
    Field u(16);
    for (std::size_t j = 0; j < 16; ++j) u[j] = std::cos(0.3 * static_cast<double>(j)) / (1.0 + j);
    const Field back = from_grid(s, to_grid(s, u));
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(back[j], u[j], 1e-13);
}

TEST(Spectral, FromGridMatchesQuadratureForSmoothFunction)
{
    const SpectralSpace s(6, M_PI, 256);
    auto u = [](double xi) { return xi * (M_PI - xi) * std::exp(0.2 * xi); };
    std::vector<double> vals(s.grid_size());
    for (std::size_t m = 0; m < vals.size(); ++m) vals[m] = u(s.grid_points()[m]);
    const Field c = from_grid(s, vals);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(c[j], oracle::sine_coefficient(s, j + 1, u), 1e-4);
}

TEST(Spectral, SingleModeNorms)
{
    const SpectralSpace s(4);
    const Field e3 = Field::mode(4, 3);
    EXPECT_NEAR(sobolev_norm(s, e3, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(sobolev_norm(s, e3, 1.0), 3.0, 1e-14); // |A^{1/2} e_3| = 3 on (0, pi)
    EXPECT_NEAR(sobolev_norm(s, e3, -1.0), 1.0 / 3.0, 1e-15);
    EXPECT_THROW(sobolev_norm(s, e3, 3.0), DomainError);
}

TEST(Spectral, GroupActionIsEnergyIsometry)
{
    const SpectralSpace s(8);
    const Field h1 = fx::field(8, {0.2, -0.1, 0.05});
    const Field h2 = fx::field(8, {0.0, 0.3, 0.0, 0.1});
    for (double t : {0.0, 0.4, 1.3}) {
        const auto [x, y] = group_action(s, t, h1, h2);
        EXPECT_NEAR(energy_norm_sq(s, State(x, y)), energy_norm_sq(s, State(h1, h2)), 1e-13);
    }
    const auto [x0, y0] = group_action(s, 0.0, h1, h2);
    for (std::size_t j = 0; j < 8; ++j) {
        EXPECT_DOUBLE_EQ(x0[j], h1[j]);
        EXPECT_DOUBLE_EQ(y0[j], h2[j]);
    }
}

TEST(Spectral, SupNormBoundedByEmbedding)
{
    const SpectralSpace s(12);
    Field u(12);
    for (std::size_t j = 0; j < 12; ++j) u[j] = 1.0 / ((j + 1.0) * (j + 1.0));
    EXPECT_LE(sup_norm(s, u), s.embedding_constant() * sobolev_norm(s, u, 1.0) + 1e-12);
}

TEST(Spectral, RejectsWrongLengthAndNonFinite)
{
    const SpectralSpace s(4);
    EXPECT_THROW(sobolev_norm(s, Field(3), 0.0), InvalidField);
    Field bad(4);
    bad[1] = std::nan("");
    EXPECT_THROW(sobolev_norm(s, bad, 0.0), InvalidField);
}
