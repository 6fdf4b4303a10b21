#include "fixtures.hpp"

#include <cmath>

using namespace wavecouple;

TEST(Profile, EndpointsAndDerivatives)
{
    const ControlProfile v{ProfileKind::forward, 2.0};
    const ControlProfile u{ProfileKind::shift, 2.0};
    EXPECT_DOUBLE_EQ(v.value(0.0), 1.0);
    EXPECT_DOUBLE_EQ(v.value(2.0), 0.0);
    EXPECT_DOUBLE_EQ(u.value(0.0), 0.0);
    EXPECT_DOUBLE_EQ(u.value(2.0), 1.0);
    for (double t : {0.0, 2.0}) {
        EXPECT_NEAR(v.d1(t), 0.0, 1e-15);
        EXPECT_NEAR(u.d1(t), 0.0, 1e-15);
    }
    const double d = 1e-6;
    for (double t : {0.3, 1.0, 1.7}) {
        EXPECT_NEAR((v.value(t + d) - v.value(t - d)) / (2 * d), v.d1(t), 1e-8);
        EXPECT_NEAR((u.d1(t + d) - u.d1(t - d)) / (2 * d), u.d2(t), 1e-7);
        EXPECT_NEAR(v.value(t) + u.value(t), 1.0, 1e-15);
    }
}

class Controls : public ::testing::TestWithParam<ProfileKind> {};

TEST_P(Controls, EndpointsHitTheDirection)
{
    const SpectralSpace s(6);
    const Field h1 = fx::field(6, {0.4, -0.2, 0.1});
    const Field h2 = fx::field(6, {0.1, 0.3, 0.0, -0.2});
    const CouplingControls cc(s, GetParam(), 1.3, h1, h2);
    const auto a = cc.eval(0.0);
    const auto b = cc.eval(1.3);
    const bool fwd = GetParam() == ProfileKind::forward;
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_NEAR(a.psi[i], fwd ? h1[i] : 0.0, 1e-12);
        EXPECT_NEAR(a.phi[i], fwd ? h2[i] : 0.0, 1e-12);
        EXPECT_NEAR(b.psi[i], fwd ? 0.0 : h1[i], 1e-12);
        EXPECT_NEAR(b.phi[i], fwd ? 0.0 : h2[i], 1e-12);
    }
}

TEST_P(Controls, SolveTheForcedWaveEquation)
{
    const SpectralSpace s(5);
    const Field h1 = fx::field(5, {0.3, 0.2, -0.1, 0.05, 0.02});
    const Field h2 = fx::field(5, {-0.1, 0.2});
    const CouplingControls cc(s, GetParam(), 0.9, h1, h2);
    const double d = 1e-6;
    for (double t : {0.1, 0.45, 0.8}) {
        const auto m = cc.eval(t), p = cc.eval(t + d), q = cc.eval(t - d);
        for (std::size_t i = 0; i < 5; ++i) {
            EXPECT_NEAR((p.psi[i] - q.psi[i]) / (2 * d), m.phi[i], 1e-6);
            EXPECT_NEAR((p.phi[i] - q.phi[i]) / (2 * d), -s.eigenvalues()[i] * m.psi[i] + m.f[i], 1e-5);
        }
    }
}

TEST_P(Controls, CorruptFlagOnlyNegatesPhi)
{
    const SpectralSpace s(3);
    CouplingControls cc(s, GetParam(), 1.0, fx::field(3, {0.3, 0.1}), fx::field(3, {0.2}));
    const auto a = cc.eval(0.4);
    cc.set_corrupt_phi_sign(true);
    const auto b = cc.eval(0.4);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.psi[i], b.psi[i]);
        EXPECT_EQ(a.f[i], b.f[i]);
        EXPECT_EQ(a.phi[i], -b.phi[i]);
    }
}

INSTANTIATE_TEST_SUITE_P(Kinds, Controls, ::testing::Values(ProfileKind::forward, ProfileKind::shift),
                         [](const auto& i) { return std::string(to_string(i.param)); });

TEST(Controls, RejectBadArguments)
{
    const SpectralSpace s(3);
    EXPECT_THROW(CouplingControls(s, ProfileKind::forward, 0.0, Field(3), Field(3)), DomainError);
    EXPECT_THROW(CouplingControls(s, ProfileKind::forward, 1.0, Field(3), Field(3), 1.5), DomainError);
    EXPECT_THROW(CouplingControls(s, ProfileKind::forward, 1.0, Field(2), Field(3)), Error);
    const CouplingControls cc(s, ProfileKind::forward, 1.0, Field(3), Field(3));
    EXPECT_THROW(cc.eval(1.5), DomainError);
    EXPECT_THROW(DiscreteControls(cc, s, TimeGrid{2.0, 100}, Scheme::exp_euler), DomainError);
}

struct CoupledCase {
    double rho;
    Scheme scheme;
    ProfileKind kind;
};

class Coupled : public ::testing::TestWithParam<CoupledCase> {};

// The realized difference is eps D_k step for step, whatever the noise does.
TEST_P(Coupled, DifferenceIsTheDiscreteControl)
{
    const auto c = GetParam();
    const auto m = fx::model(6, NonlinearityParams::klein_gordon(c.rho));
    const TimeGrid grid{1.0, 400};
    const Field h1 = fx::field(6, {0.2, 0.1, -0.05});
    const Field h2 = fx::field(6, {0.1, 0.0, 0.05});
    const CouplingControls cc(m.space, c.kind, 1.0, h1, h2, 0.7);
    const DiscreteControls dc(cc, m.space, grid, c.scheme);
    const auto z0 = fx::state(6, {0.5, 0.2}, {0.1});
    for (std::uint64_t idx : {0u, 5u}) {
        const auto cp = coupled_simulate(m, grid, c.scheme, z0, cc, 11, idx, 1e8);
        ASSERT_FALSE(cp.blown_up);
        for (std::size_t k = 0; k <= grid.n_steps; k += 50) {
            for (std::size_t i = 0; i < 6; ++i) {
                EXPECT_NEAR(cp.coupled.states[k].x[i] - cp.path.states[k].x[i], 0.7 * dc.psi(k)[i], 1e-12);
                EXPECT_NEAR(cp.coupled.states[k].y[i] - cp.path.states[k].y[i], 0.7 * dc.phi(k)[i], 1e-12);
            }
        }
    }
}

TEST_P(Coupled, IdentityErrorIsFirstOrder)
{
    const auto c = GetParam();
    const auto m = fx::model(6, NonlinearityParams::klein_gordon(c.rho));
    const Field h1 = fx::field(6, {0.2, 0.1, -0.05});
    const Field h2 = fx::field(6, {0.1, 0.0, 0.05});
    const CouplingControls cc(m.space, c.kind, 1.0, h1, h2);
    const auto z0 = fx::state(6, {0.5});
    double prev = 0.0;
    for (std::size_t n : {200u, 400u, 800u}) {
        const TimeGrid grid{1.0, n};
        const auto e = coupling_identity_error(m, grid, c.scheme, z0, cc, 3);
        EXPECT_LE(e.sup_error, 50.0 * grid.dt());
        EXPECT_LE(e.terminal_mismatch, 50.0 * grid.dt());
        if (prev > 0.0) {
            EXPECT_NEAR(prev / e.sup_error, 2.0, 0.3);
        }
        prev = e.sup_error;
    }
}

INSTANTIATE_TEST_SUITE_P(
    Cases, Coupled,
    ::testing::Values(CoupledCase{1.0, Scheme::exp_euler, ProfileKind::forward},
                      CoupledCase{3.0, Scheme::exp_euler, ProfileKind::shift},
                      CoupledCase{2.0, Scheme::euler_maruyama, ProfileKind::forward},
                      CoupledCase{3.0, Scheme::euler_maruyama, ProfileKind::shift}),
    [](const auto& i) {
        return std::string(to_string(i.param.kind)) + "_" + to_string(i.param.scheme) + "_rho" +
               std::to_string(static_cast<int>(i.param.rho));
    });

TEST(Coupled, CorruptPhiBreaksTheIdentity)
{
    const auto m = fx::model(6, NonlinearityParams::klein_gordon(1.0));
    CouplingControls cc(m.space, ProfileKind::forward, 1.0, fx::field(6, {0.2, 0.1}), fx::field(6, {0.1}));
    cc.set_corrupt_phi_sign(true);
    const auto a = coupling_identity_error(m, TimeGrid{1.0, 200}, Scheme::exp_euler, fx::state(6, {0.5}), cc, 3);
    const auto b = coupling_identity_error(m, TimeGrid{1.0, 400}, Scheme::exp_euler, fx::state(6, {0.5}), cc, 3);
    EXPECT_GT(b.sup_error, 0.1);
    EXPECT_LT(a.sup_error / b.sup_error, 1.2);
}

TEST(Coupled, ShiftTerminalLandsOnTheDirection)
{
    const SpectralSpace s(4);
    const Field h1 = fx::field(4, {0.3, -0.1});
    const Field h2 = fx::field(4, {0.2});
    const CouplingControls cc(s, ProfileKind::shift, 1.0, h1, h2);
    const DiscreteControls dc(cc, s, TimeGrid{1.0, 2000}, Scheme::exp_euler);
    const State d = dc.terminal();
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(d.x[i], h1[i], 5e-3);
        EXPECT_NEAR(d.y[i], h2[i], 5e-3);
    }
}

// l = 0: eta is deterministic, so log R is exactly Gaussian with variance Q.
TEST(Weight, LinearCaseIsLogNormal)
{
    const auto m = fx::model(4, NonlinearityParams::linear_zero());
    const TimeGrid grid{1.0, 200};
    const CouplingControls cc(m.space, ProfileKind::forward, 1.0, fx::field(4, {0.3, 0.1}), fx::field(4, {0.2}));
    const auto z0 = fx::state(4, {0.1});
    const auto first = coupled_simulate(m, grid, Scheme::exp_euler, z0, cc, 5, 0, 1e8);
    const double Q = first.acc.quadratic;
    ASSERT_GT(Q, 0.0);
    long double s = 0, s2 = 0;
    const std::size_t n = 4000;
    for (std::size_t i = 0; i < n; ++i) {
        const auto cp = coupled_simulate(m, grid, Scheme::exp_euler, z0, cc, 5, i, 1e8);
        EXPECT_NEAR(cp.acc.quadratic, Q, 1e-9 * Q);
        s += cp.acc.log_weight;
        s2 += cp.acc.log_weight * cp.acc.log_weight;
    }
    const double mean = static_cast<double>(s / n);
    const double var = static_cast<double>(s2 / n) - mean * mean;
    EXPECT_TRUE(fx::within(mean, -0.5 * Q, std::sqrt(Q / n)));
    EXPECT_NEAR(var / Q, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Weight, MartingaleForNonlinearModels)
{
    for (double rho : {1.0, 2.0, 3.0}) {
        const auto ex = fx::experiment(6, NonlinearityParams::klein_gordon(rho), 1.0, 200, 4000);
        const CouplingControls cc(ex.space(), ProfileKind::forward, 1.0, fx::field(6, {0.2, 0.1}), fx::field(6, {0.1}));
        const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
        SampleOptions o;
        o.coupling = &dc;
        const auto s = ex.engine().run(fx::state(6, {0.5}), o, ex.n_traj, 0);
        std::vector<double> r;
        for (const auto& t : s) r.push_back(std::exp(t.log_weight));
        const auto m = summarize(r);
        EXPECT_TRUE(fx::within(m.mean, 1.0, m.std_error)) << "rho " << rho;
    }
}

TEST(Weight, BlownUpPathsAreRefused)
{
    GirsanovAccumulator acc;
    acc.add_weight_term(0.5, 0.2);
    EXPECT_NEAR(acc.log_weight, -0.6, 1e-15);
    EXPECT_NEAR(weight(acc), std::exp(-0.6), 1e-15);
    EXPECT_THROW(weight(acc, true), EstimationFailure);
    const auto m = fx::model(4, NonlinearityParams::klein_gordon(3.0));
    const CouplingControls cc(m.space, ProfileKind::forward, 1.0, fx::field(4, {0.1}), Field(4));
    EXPECT_THROW(coupling_identity_error(m, TimeGrid{1.0, 100}, Scheme::exp_euler, fx::state(4, {1.0}), cc, 1, 0, 0.0),
                 EstimationFailure);
}
