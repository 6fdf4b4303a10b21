#include "fixtures.hpp"

#include <cmath>
#include <limits>

using namespace wavecouple;

namespace {

struct Ctx {
    SpectralSpace space;
    NonlinearityParams nl;
    NoiseModel noise;
    BoundContext ctx() const { return {&space, &nl, &noise, 16.0}; }
};

Ctx make(std::size_t n, NonlinearityParams nl) { return {SpectralSpace(n), nl, NoiseModel::inv_sqrt_lambda(SpectralSpace(n))}; }

} // namespace

TEST(Bounds, DirectionNormsByHand)
{
    const SpectralSpace s(2); // lambda = 1, 4
    const auto noise = NoiseModel::diagonal(s, {2.0, 1.0}, {2.0, 0.5});
    const auto d = direction_norms(s, noise, fx::field(2, {2.0, 1.0}), fx::field(2, {0.0, 1.0}));
    // sigma0^{-1} h1 = (1, 2), sigma0^{-1} h2 = (0, 2)
    EXPECT_NEAR(d.n_sigma0, std::sqrt(5.0) + std::sqrt(4.0 / 4.0), 1e-14);
    EXPECT_NEAR(d.n_sigma0_half, std::sqrt(1.0 + 16.0) + 2.0, 1e-14);
    EXPECT_NEAR(d.n_half, std::sqrt(4.0 + 4.0) + 1.0, 1e-14);
}

TEST(Bounds, NoiseConstants)
{
    const SpectralSpace s(3);
    const auto noise = NoiseModel::inv_sqrt_lambda(s); // sigma = 1, 1/2, 1/3
    const double hs = 1.0 + 0.25 + 1.0 / 9.0;
    EXPECT_NEAR(noise.hs_norm_sq, hs, 1e-14);
    EXPECT_NEAR(noise.op_norm, 1.0, 1e-15);
    EXPECT_NEAR(e_sigma(noise, 1.0), hs, 1e-14);
    EXPECT_NEAR(e_sigma(noise, 3.0), hs + 4.0, 1e-14);
    EXPECT_NEAR(e_sigma(noise, 0.5), hs, 1e-14);
    EXPECT_EQ(e_t(noise, 1.0, 2.0), 1.0);
    const double a = 2.0 * (hs + 4.0) * 0.5;
    EXPECT_NEAR(e_t(noise, 3.0, 0.5), std::expm1(a) / a, 1e-12);
    EXPECT_THROW(e_sigma(noise, -1.0), DomainError);
}

TEST(Bounds, HorizonCapRhoOne)
{
    auto c = make(4, NonlinearityParams::klein_gordon(1.0));
    c.nl.k.C5 = 1.0;
    const Field h1 = fx::field(4, {0.3}), h2(4);
    EXPECT_DOUBLE_EQ(harnack_horizon_cap(c.ctx(), h1, h2, 2.0), 1.0 / 8.0);
    EXPECT_NEAR(harnack_horizon_cap(c.ctx(), h1, h2, 4.0), 3.0 / (4.0 * std::sqrt(8.0)), 1e-15);
    c.nl.k.C5 = 2.0;
    EXPECT_NEAR(harnack_horizon_cap(c.ctx(), h1, h2, 2.0), 1.0 / 32.0, 1e-15);
    c.nl.k.C5 = 0.0;
    EXPECT_TRUE(std::isinf(harnack_horizon_cap(c.ctx(), h1, h2, 2.0)));
    EXPECT_THROW(harnack_horizon_cap(c.ctx(), h1, h2, 1.0), DomainError);
}

TEST(Bounds, HorizonCapRoughRho)
{
    const auto c = make(4, NonlinearityParams::klein_gordon(1.5));
    const Field h1 = fx::field(4, {0.6, 0.2}), h2 = fx::field(4, {0.1});
    const double nh = std::sqrt(0.36 + 4 * 0.04) + 0.1;
    const double K = 1.5 * 1.5 * 0.5 * nh * nh + 1.5 * 1.5 * std::pow(nh, 1.0);
    const double CO = std::sqrt(M_PI) / 2.0;
    const double expect = (std::sqrt(2.0) - 1.0) / (4.0 * std::sqrt(3.0) * std::sqrt(CO) * std::max(std::sqrt(K), 1.0));
    EXPECT_NEAR(harnack_horizon_cap(c.ctx(), h1, h2, 2.0), expect, 1e-14);
    EXPECT_NEAR(k_direction(c.ctx(), nh), K, 1e-14);
    const auto c3 = make(4, NonlinearityParams::klein_gordon(3.0));
    EXPECT_THROW(harnack_horizon_cap(c3.ctx(), h1, h2, 2.0), DomainError);
}

TEST(Bounds, PsiLinearBranchByHand)
{
    const auto c = make(4, NonlinearityParams::klein_gordon(1.0)); // K3 = 1, K4 = C5 = 0, K1 = 1
    const Field h1 = fx::field(4, {0.3, 0.1}), h2 = fx::field(4, {0.2});
    const State zt = fx::state(4, {0.5});
    const auto p = psi_bound(c.ctx(), zt, h1, h2, 2.0);
    const auto d = direction_norms(c.space, c.noise, h1, h2);
    EXPECT_DOUBLE_EQ(p.T_used, 1.0);
    EXPECT_NEAR(p.phi, d.n_half * d.n_half, 1e-14);
    EXPECT_NEAR(p.remainder, 16.0 * (2.0 * d.n_sigma0 * d.n_sigma0 + 2.0 * d.n_sigma0_half * d.n_sigma0_half), 1e-12);
    EXPECT_NEAR(p.psi, p.phi + p.remainder, 1e-12);
    EXPECT_FALSE(p.K1_substituted);
    EXPECT_NEAR(p.energy, 2 * 0.25, 1e-14);
}

TEST(Bounds, PsiSubstitutesVanishingK1)
{
    const auto c = make(4, NonlinearityParams::linear_zero());
    const auto p = psi_bound(c.ctx(), State(4), fx::field(4, {0.3}), Field(4), 0.5);
    EXPECT_TRUE(p.K1_substituted);
    EXPECT_EQ(p.K1_used, 1.0);
    EXPECT_EQ(p.phi, 0.0);
    EXPECT_GT(p.remainder, 0.0);
}

TEST(Bounds, PsiGrowsWithEnergyAndShrinksWithHorizon)
{
    for (double rho : {1.5, 2.0, 2.5, 3.0}) {
        const auto c = make(6, NonlinearityParams::klein_gordon(rho));
        const Field h1 = fx::field(6, {0.2, 0.1}), h2 = fx::field(6, {0.1});
        const auto a = psi_bound(c.ctx(), fx::state(6, {0.2}), h1, h2, 1.0);
        const auto b = psi_bound(c.ctx(), fx::state(6, {1.0}), h1, h2, 1.0);
        EXPECT_GT(a.psi, 0.0);
        EXPECT_TRUE(std::isfinite(a.psi));
        EXPECT_GT(b.phi, a.phi) << rho;
        EXPECT_GT(psi_bound(c.ctx(), fx::state(6, {0.2}), h1, h2, 0.1).remainder, a.remainder) << rho;
    }
}

TEST(Bounds, GammaBranches)
{
    const Field h1 = fx::field(4, {0.3}), h2 = fx::field(4, {0.1});
    const State zt = fx::state(4, {0.4});
    {
        const auto c = make(4, NonlinearityParams::klein_gordon(1.0));
        const auto g = gamma_bound(c.ctx(), zt, h1, h2, 0.5, 2.0);
        const auto d = direction_norms(c.space, c.noise, h1, h2);
        const double expect = 16.0 * 2.0 * (1.25 / 0.5 * d.n_sigma0_half * d.n_sigma0_half +
                                            1.25 / 0.125 * d.n_sigma0 * d.n_sigma0);
        EXPECT_EQ(g.branch, "rho=1, C5=0");
        EXPECT_NEAR(g.log_gamma, expect, 1e-10);
        EXPECT_NEAR(g.gamma, std::exp(expect), 1e-8 * g.gamma);
    }
    {
        auto c = make(4, NonlinearityParams::klein_gordon(1.0));
        c.nl.k.C5 = 1.0;
        const auto g = gamma_bound(c.ctx(), zt, h1, h2, 1.0, 2.0);
        EXPECT_EQ(g.branch, "rho=1, C5>0");
        EXPECT_DOUBLE_EQ(g.T_used, 0.125);
    }
    {
        const auto c = make(4, NonlinearityParams::klein_gordon(2.0));
        const auto g = gamma_bound(c.ctx(), zt, h1, h2, 10.0, 2.0);
        EXPECT_EQ(g.branch, "rho in (1,2]");
        EXPECT_DOUBLE_EQ(g.T_used, g.T0);
        EXPECT_LE(g.c_tilde_sq, (std::sqrt(2.0) - 1) * (std::sqrt(2.0) - 1) * (1 + 1e-12));
        EXPECT_TRUE(std::isfinite(g.log_gamma));
        EXPECT_GT(g.log_gamma, 0.0);
    }
}
