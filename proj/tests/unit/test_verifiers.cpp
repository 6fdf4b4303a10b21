#include "fixtures.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace wavecouple;

namespace {
const Field kH1 = fx::field(4, {0.2, 0.1});
const Field kH2 = fx::field(4, {0.1});
} // namespace

TEST(LogHarnack, EntropyRouteHolds)
{
    for (double rho : {1.0, 1.5, 3.0}) {
        const auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(rho), 1.0, 100, 4000);
        const auto g = TestFunctional::exp_linear(fx::state(4, {0.3, 0.1}, {0.1}));
        const auto v = check_log_harnack(g, fx::state(4, {0.5}), kH1, kH2, ex);
        EXPECT_TRUE(v.pass_entropy) << rho << ": " << v.lhs << " vs " << v.rhs_entropy;
        EXPECT_TRUE(v.pass_closed_form) << rho;
        EXPECT_GE(v.entropy, -4 * v.rhs_entropy_se);
        EXPECT_LE(v.rhs_entropy, v.rhs_closed_form);
    }
}

TEST(LogHarnack, NeedsPositiveFunctional)
{
    const auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(1.0), 1.0, 100, 200);
    EXPECT_THROW(check_log_harnack(TestFunctional::quadratic(State(4)), State(4), kH1, kH2, ex), DomainError);
}

TEST(PowerHarnack, HoldsBelowTheCap)
{
    for (double rho : {1.0, 2.0}) {
        auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(rho), 1.0, 200, 4000);
        const auto g = TestFunctional::bounded_smooth(ex.space(), fx::state(4, {0.1}));
        // T0 is tiny for rho = 2, and the weight's quadratic variation grows like |h|^2 / T^3:
        // keep h small enough that E R^2 is still estimable.
        const Field h1 = fx::field(4, {0.01, 0.005}), h2 = fx::field(4, {0.005});
        const auto v = check_harnack_power(g, fx::state(4, {0.3}), h1, h2, 2.0, ex);
        EXPECT_TRUE(v.pass) << rho;
        EXPECT_TRUE(v.pass_weight) << rho;
        EXPECT_LE(v.T_used, ex.grid.T);
        EXPECT_LE(v.weight_power, v.gamma.gamma * (1 + 4 * v.weight_power_se));
    }
    const auto ex3 = fx::experiment(4, NonlinearityParams::klein_gordon(3.0), 1.0, 100, 200);
    EXPECT_THROW(check_harnack_power(TestFunctional::constant(1.0), State(4), kH1, kH2, 2.0, ex3), DomainError);
}

TEST(ShiftHarnack, LogAndPowerModes)
{
    const auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(1.0), 1.0, 100, 4000);
    const auto g = TestFunctional::indicator_smooth(fx::state(4, {0.5}, {0.2}), 0.0, 0.5);
    const auto a = check_shift_harnack(g, fx::state(4, {0.3}), kH1, kH2, ex, ShiftMode::log);
    EXPECT_TRUE(a.pass);
    EXPECT_TRUE(a.pass_closed_form);
    const auto b = check_shift_harnack(g, fx::state(4, {0.3}), kH1, kH2, ex, ShiftMode::power, 2.0);
    EXPECT_TRUE(b.pass);
    const auto ex2 = fx::experiment(4, NonlinearityParams::klein_gordon(2.0), 1.0, 100, 200);
    EXPECT_THROW(check_shift_harnack(g, State(4), kH1, kH2, ex2, ShiftMode::power), DomainError);
}

TEST(EnergyMoment, BoundFormula)
{
    const auto noise = NoiseModel::inv_sqrt_lambda(SpectralSpace(3));
    const double es1 = e_sigma(noise, 1.0), es2 = e_sigma(noise, 2.0);
    EXPECT_NEAR(energy_moment_bound(noise, 2.0, 1.0, 0.5), (2.0 + es1 * 0.5) * 0.5, 1e-14);
    EXPECT_NEAR(energy_moment_bound(noise, 2.0, 2.0, 0.5), (4.0 + es2 * 0.5) * std::expm1(es2 * 0.5) / es2, 1e-12);
}

// sigma = 0: the energy is a deterministic non-increasing function, so the left side is at most E0 s.
TEST(EnergyMoment, DeterministicCase)
{
    auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(1.0), 1.0, 200, 100);
    ex.model.noise = NoiseModel::silent_model(ex.space());
    const State z = fx::state(4, {std::sqrt(0.5)}); // energy (1 + 1) / 2 = 1
    ASSERT_NEAR(energy(ex.space(), ex.model.nonlinearity, z), 1.0, 1e-14);
    const CouplingControls cc(ex.space(), ProfileKind::forward, 1.0, kH1, kH2);
    const auto v = check_energy_moment(z, cc, 1.0, 0.5, ex);
    EXPECT_TRUE(v.pass);
    EXPECT_LE(v.lhs, 0.5);
    EXPECT_NEAR(v.lhs_se, 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(v.rhs, 0.5);
}

TEST(EnergyMoment, StochasticCases)
{
    for (double rho : {1.0, 3.0})
        for (double p : {1.0, 2.0}) {
            const auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(rho), 1.0, 100, 2000);
            const CouplingControls cc(ex.space(), ProfileKind::forward, 1.0, kH1, kH2);
            const auto v = check_energy_moment(fx::state(4, {0.5}), cc, p, 1.0, ex);
            EXPECT_TRUE(v.pass) << rho << " " << p << ": " << v.lhs << " vs " << v.rhs;
        }
}

// l = 0: under the reweighted measure the second path is the chain from z~,
// so the weighted exponential moment is a Gaussian integral.
TEST(ExpMoment, CameronMartinOracle)
{
    const auto ex = fx::experiment(4, NonlinearityParams::linear_zero(), 1.0, 100, 20000);
    const CouplingControls cc(ex.space(), ProfileKind::forward, 1.0, kH1, kH2);
    const State zt = fx::state(4, {0.3}, {0.1});
    const auto v = check_exp_moment(zt, cc, ex);
    EXPECT_TRUE(v.pass) << v.lhs << " vs " << v.rhs << " tail " << v.tail_share;
    const double ref = oracle::exp_energy_moment(ex.model, ex.grid, ex.scheme, zt, 0.0, v.theta);
    EXPECT_TRUE(fx::within(v.lhs, ref, v.lhs_se));
    EXPECT_NEAR(gaussian_exp_energy_moment(ex.model, ex.grid, ex.scheme, zt, v.theta), ref, 1e-10 * ref);
}

TEST(GradientReport, BasketAndRatios)
{
    const auto ex = fx::experiment(4, NonlinearityParams::klein_gordon(2.0), 1.0, 100, 2000);
    const auto basket = unit_direction_basket(ex.space(), ex.model.noise, 2);
    ASSERT_EQ(basket.size(), 4u);
    for (const auto& [label, h] : basket) {
        const auto d = direction_norms(ex.space(), ex.model.noise, h.x, h.y);
        EXPECT_NEAR(d.n_sigma0_half, 1.0, 1e-14) << label;
    }
    const auto r = gradient_estimate_report(TestFunctional::exp_linear(fx::state(4, {0.3}, {0.2})), fx::state(4, {0.2}),
                                            ex, 2);
    EXPECT_EQ(r.entries.size(), 4u);
    EXPECT_GT(r.variance, 0.0);
    EXPECT_GT(r.max_ratio, 0.0);
    EXPECT_NEAR(r.normalizer, (r.energy + 1.0) * r.variance, 1e-12 * r.normalizer);
}
