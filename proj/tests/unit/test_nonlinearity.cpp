#include "fixtures.hpp"

using namespace wavecouple;

TEST(Nonlinearity, PointwiseValues)
{
    const auto p3 = NonlinearityParams::klein_gordon(3.0);
    EXPECT_DOUBLE_EQ(l_eval(p3, 2.0), 8.0);
    EXPECT_DOUBLE_EQ(l_prime(p3, -2.0), 12.0);
    EXPECT_DOUBLE_EQ(j_eval(p3, 2.0), 4.0);
    const auto p1 = NonlinearityParams::klein_gordon(1.0);
    EXPECT_DOUBLE_EQ(l_eval(p1, -1.5), -1.5);
    EXPECT_DOUBLE_EQ(l_prime(p1, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(j_eval(p1, 2.0), 2.0);
    const auto z = NonlinearityParams::linear_zero();
    for (double r : {-3.0, 0.0, 2.5}) {
        EXPECT_EQ(l_eval(z, r), 0.0);
        EXPECT_EQ(l_prime(z, r), 0.0);
        EXPECT_EQ(j_eval(z, r), 0.0);
    }
    EXPECT_EQ(l_prime(NonlinearityParams::klein_gordon(1.5), 0.0), 0.0);
    EXPECT_THROW(NonlinearityParams::klein_gordon(0.5), DomainError);
}

TEST(Nonlinearity, DefaultConstants)
{
    const auto p = NonlinearityParams::klein_gordon(3.0);
    EXPECT_EQ(p.k.K1, 1.0);
    EXPECT_EQ(p.k.K2, 0.0);
    EXPECT_EQ(p.k.K3, 3.0);
    EXPECT_EQ(p.k.K4, 0.0);
    EXPECT_DOUBLE_EQ(p.k.K5, 0.25);
    EXPECT_EQ(p.k.C1, 6.0);
    EXPECT_EQ(p.k.C2 + p.k.C3 + p.k.C5, 0.0);
}

class KleinGordonRho : public ::testing::TestWithParam<double> {};

TEST_P(KleinGordonRho, StructuralProperties)
{
    const auto p = NonlinearityParams::klein_gordon(GetParam());
    for (double r : default_condition_grid(1e-3, 1e2, 6)) {
        EXPECT_GE(l_prime(p, r), 0.0);
        EXPECT_GE(j_eval(p, r), p.k.K5 * std::pow(std::abs(r), p.rho + 1.0) - 1e-12);
        const double h = 1e-5 * (1.0 + std::abs(r));
        const double dj = (j_eval(p, r + h) - j_eval(p, r - h)) / (2 * h);
        EXPECT_NEAR(dj, l_eval(p, r), 1e-6 * (1.0 + std::abs(l_eval(p, r))));
    }
}

TEST_P(KleinGordonRho, DefaultsPassConditionCheck)
{
    const auto p = NonlinearityParams::klein_gordon(GetParam());
    const auto grid = default_condition_grid();
    const auto rep = check_conditions(p, grid);
    EXPECT_TRUE(rep.passed) << (rep.worst_violations.empty() ? "" : rep.worst_violations.front().condition);
    EXPECT_GT(rep.evaluations, grid.size());
}

INSTANTIATE_TEST_SUITE_P(Rho, KleinGordonRho, ::testing::Values(1.0, 1.5, 2.0, 2.5, 3.0));

TEST(Nonlinearity, ZeroC1FailsAtRhoThree)
{
    auto p = NonlinearityParams::klein_gordon(3.0);
    p.k.C1 = 0.0;
    const auto rep = check_conditions(p, default_condition_grid());
    ASSERT_FALSE(rep.passed);
    const auto& w = rep.worst_violations.front();
    EXPECT_NE(w.condition.find("3"), std::string::npos);
    EXPECT_GT(std::max(std::abs(w.r1), std::abs(w.r2)), 10.0);
}

TEST(Nonlinearity, RhoTwoWithC4TwoPasses)
{
    auto p = NonlinearityParams::klein_gordon(2.0);
    EXPECT_EQ(p.k.C4, 2.0);
    EXPECT_TRUE(check_conditions(p, default_condition_grid()).passed);
    p.k.C4 = 1.5;
    EXPECT_FALSE(check_conditions(p, default_condition_grid()).passed);
}

TEST(Nonlinearity, LiteralMinimumFormRejectsRhoThree)
{
    // |l'(r) - l'(0)| = 3 r^2 cannot be bounded by C1 min(|r|, 0) |r| with C2 = C3 = 0.
    const auto p = NonlinearityParams::klein_gordon(3.0);
    EXPECT_FALSE(check_conditions(p, default_condition_grid(), HoelderForm::min_literal).passed);
}

TEST(Nonlinearity, CertifiedConstantsAreAdmissible)
{
    for (double rho : {1.0, 1.5, 2.0, 2.5, 3.0}) {
        auto p = NonlinearityParams::klein_gordon(rho);
        const auto grid = default_condition_grid();
        const auto c = certify_constants(p, grid);
        EXPECT_NEAR(c.K1, 1.0, 1e-12);
        EXPECT_NEAR(c.K3, rho, 1e-12);
        EXPECT_NEAR(c.K5, 1.0 / (rho + 1.0), 1e-12);
        if (rho > 2.0) EXPECT_LE(c.C1, p.k.C1);
        if (rho > 1.0 && rho <= 2.0) EXPECT_LE(c.C4, p.k.C4 + 1e-12);
        p.k = c;
        EXPECT_TRUE(check_conditions(p, grid).passed) << rho;
    }
    EXPECT_THROW(check_conditions(NonlinearityParams::klein_gordon(2.0), std::vector<double>{}), DomainError);
}

TEST(Nonlinearity, JFunctionalAndEnergy)
{
    const SpectralSpace s(6);
    const Field e1 = Field::mode(6, 1);
    const auto p1 = NonlinearityParams::klein_gordon(1.0);
    EXPECT_NEAR(J_functional(s, p1, e1), 0.5, 1e-12);
    EXPECT_EQ(J_functional(s, p1, Field(6)), 0.0);
    EXPECT_EQ(J_functional(s, NonlinearityParams::linear_zero(), e1), 0.0);
    EXPECT_NEAR(energy(s, NonlinearityParams::linear_zero(), State(e1, Field(6))), 1.0, 1e-14);
    EXPECT_NEAR(energy(s, p1, State(e1, Field(6))), 2.0, 1e-12);
    EXPECT_NEAR(energy(s, NonlinearityParams::klein_gordon(3.0), State(Field(6), e1)), 1.0, 1e-14);
    // rho = 3: J(e1) = int (2/pi)^2 sin^4 / 4 = 3/(8 pi)
    EXPECT_NEAR(J_functional(s, NonlinearityParams::klein_gordon(3.0), e1), 3.0 / (8.0 * M_PI), 1e-12);
}

TEST(Nonlinearity, CustomFamilyNeedsValidConstants)
{
    GrowthConstants k;
    k.K1 = 1;
    k.K3 = 1;
    k.K5 = 0.5;
    auto p = make_custom_nonlinearity([](double r) { return r; }, [](double) { return 1.0; },
                                      [](double r) { return 0.5 * r * r; }, 1.0, k);
    EXPECT_DOUBLE_EQ(l_eval(p, 3.0), 3.0);
    k.K5 = 0.9;
    EXPECT_THROW(make_custom_nonlinearity([](double r) { return r; }, [](double) { return 1.0; },
                                          [](double r) { return 0.5 * r * r; }, 1.0, k),
                 DomainError);
}
