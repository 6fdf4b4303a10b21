#pragma once

// Closed-form Gaussian laws for linear drifts (l = 0 or l(r) = r). Each mode
// is an independent 2x2 linear system, handled here with plain 2x2 matrix
// arithmetic and no use of the time-stepper, so the results can serve as
// oracles for the Monte-Carlo code.

#include <wavecouple/dynamics.hpp>
#include <wavecouple/functionals.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace wavecouple {

using Mat2 = std::array<std::array<double, 2>, 2>;
using Vec2 = std::array<double, 2>;

namespace mat2 {

inline Mat2 identity() { return {{{1.0, 0.0}, {0.0, 1.0}}}; }
inline Mat2 zero() { return {{{0.0, 0.0}, {0.0, 0.0}}}; }

inline Mat2 mul(const Mat2& a, const Mat2& b)
{
    Mat2 c = zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}
inline Vec2 mul(const Mat2& a, const Vec2& v) { return {a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]}; }
inline Mat2 transpose(const Mat2& a) { return {{{a[0][0], a[1][0]}, {a[0][1], a[1][1]}}}; }
inline Mat2 add(const Mat2& a, const Mat2& b)
{
    return {{{a[0][0] + b[0][0], a[0][1] + b[0][1]}, {a[1][0] + b[1][0], a[1][1] + b[1][1]}}};
}
inline Mat2 scale(const Mat2& a, double s) { return {{{a[0][0] * s, a[0][1] * s}, {a[1][0] * s, a[1][1] * s}}}; }
inline double quad(const Mat2& a, const Vec2& v)
{
    return v[0] * (a[0][0] * v[0] + a[0][1] * v[1]) + v[1] * (a[1][0] * v[0] + a[1][1] * v[1]);
}
inline double trace(const Mat2& a) { return a[0][0] + a[1][1]; }

/// exp(A) by scaling and squaring with a degree-12 Taylor polynomial.
inline Mat2 expm(const Mat2& a)
{
    const double norm = std::abs(a[0][0]) + std::abs(a[0][1]) + std::abs(a[1][0]) + std::abs(a[1][1]);
    int squarings = 0;
    double s = 1.0;
    while (norm * s > 0.25) {
        s *= 0.5;
        ++squarings;
    }
    const Mat2 as = scale(a, s);
    Mat2 term = identity();
    Mat2 sum = identity();
    for (int k = 1; k <= 12; ++k) {
        term = scale(mul(term, as), 1.0 / k);
        sum = add(sum, term);
    }
    for (int i = 0; i < squarings; ++i) sum = mul(sum, sum);
    return sum;
}

} // namespace mat2

/// Per-mode Gaussian law of (X_j, Y_j).
struct GaussianLaw {
    std::vector<Vec2> mean;
    std::vector<Mat2> cov;
};

/// Drift description: l(r) = kappa r with kappa in {0, 1}.
struct LinearDrift {
    double kappa = 0.0;
    double damping = 1.0;

    static LinearDrift of(const Model& model)
    {
        const auto& nl = model.nonlinearity;
        if (nl.is_zero()) return {0.0, model.damping};
        if (nl.family == NonlinearityFamily::klein_gordon && nl.rho == 1.0) return {1.0, model.damping};
        throw DomainError("Gaussian oracle: needs l = 0 or l(r) = r");
    }
};

/// One-step matrix of the chosen scheme for mode j (lambda = eigenvalue).
inline Mat2 scheme_matrix(Scheme scheme, double lambda, const LinearDrift& d, double dt)
{
    const double w = std::sqrt(lambda);
    Mat2 lin;
    if (scheme == Scheme::euler_maruyama) {
        lin = {{{1.0, dt}, {-lambda * dt, 1.0}}};
    } else {
        lin = {{{std::cos(w * dt), std::sin(w * dt) / w}, {-w * std::sin(w * dt), std::cos(w * dt)}}};
    }
    lin[1][0] -= d.kappa * dt;
    lin[1][1] -= d.damping * dt;
    return lin;
}

/// Exact law of the discrete chain after n steps: mean B^n z0, covariance
/// sum_k B^k G G^T B^kT with G = (0, sigma_j sqrt(dt)).
inline GaussianLaw discrete_law(const Model& model, const TimeGrid& grid, Scheme scheme, const State& z0,
                                std::size_t steps = std::numeric_limits<std::size_t>::max())
{
    const LinearDrift d = LinearDrift::of(model);
    const std::size_t n = model.space.modes();
    const std::size_t ns = std::min(steps, grid.n_steps);
    const double dt = grid.dt();
    GaussianLaw law;
    law.mean.resize(n);
    law.cov.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const Mat2 B = scheme_matrix(scheme, model.space.eigenvalues()[j], d, dt);
        const double s2 = model.noise.sigma[j] * model.noise.sigma[j] * dt;
        Vec2 m{z0.x[j], z0.y[j]};
        Mat2 C = mat2::zero();
        for (std::size_t k = 0; k < ns; ++k) {
            m = mat2::mul(B, m);
            C = mat2::mul(mat2::mul(B, C), mat2::transpose(B));
            C[1][1] += s2;
        }
        law.mean[j] = m;
        law.cov[j] = C;
    }
    return law;
}

/// Law of the continuous-time solution at T: mean exp(AT) z0, covariance
/// int_0^T exp(As) G G^T exp(As)^T ds by composite Simpson quadrature.
inline GaussianLaw continuous_law(const Model& model, double T, const State& z0, std::size_t panels = 4000)
{
    const LinearDrift d = LinearDrift::of(model);
    const std::size_t n = model.space.modes();
    if (panels % 2) ++panels;
    GaussianLaw law;
    law.mean.resize(n);
    law.cov.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double lam = model.space.eigenvalues()[j];
        const Mat2 A{{{0.0, 1.0}, {-(lam + d.kappa), -d.damping}}};
        law.mean[j] = mat2::mul(mat2::expm(mat2::scale(A, T)), Vec2{z0.x[j], z0.y[j]});
        const double s2 = model.noise.sigma[j] * model.noise.sigma[j];
        const double h = T / static_cast<double>(panels);
        const Mat2 step = mat2::expm(mat2::scale(A, h));
        Mat2 E = mat2::identity();
        Mat2 acc = mat2::zero();
        for (std::size_t k = 0; k <= panels; ++k) {
            const double wgt = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            // E G G^T E^T with G = (0, sigma): outer product of E's second column.
            const Vec2 c{E[0][1], E[1][1]};
            Mat2 o{{{c[0] * c[0], c[0] * c[1]}, {c[1] * c[0], c[1] * c[1]}}};
            acc = mat2::add(acc, mat2::scale(o, wgt * s2));
            E = mat2::mul(step, E);
        }
        law.cov[j] = mat2::scale(acc, h / 3.0);
    }
    return law;
}

/// B^n applied to a direction, per mode (how a perturbation of z0 moves the mean).
inline State propagate_direction(const Model& model, const TimeGrid& grid, Scheme scheme, const State& h)
{
    const LinearDrift d = LinearDrift::of(model);
    State out(model.space.modes());
    for (std::size_t j = 0; j < model.space.modes(); ++j) {
        const Mat2 B = scheme_matrix(scheme, model.space.eigenvalues()[j], d, grid.dt());
        Vec2 v{h.x[j], h.y[j]};
        for (std::size_t k = 0; k < grid.n_steps; ++k) v = mat2::mul(B, v);
        out.x[j] = v[0];
        out.y[j] = v[1];
    }
    return out;
}

namespace detail {

inline State law_mean_state(const GaussianLaw& law)
{
    State m(law.mean.size());
    for (std::size_t j = 0; j < law.mean.size(); ++j) {
        m.x[j] = law.mean[j][0];
        m.y[j] = law.mean[j][1];
    }
    return m;
}

/// a^T C a summed over modes for a linear form a.
inline double linear_variance(const GaussianLaw& law, const State& a)
{
    double v = 0.0;
    for (std::size_t j = 0; j < law.mean.size(); ++j) v += mat2::quad(law.cov[j], Vec2{a.x[j], a.y[j]});
    return v;
}

} // namespace detail

/// E g(Z) under the law; exp_linear, quadratic and constant only.
inline double gaussian_expectation(const GaussianLaw& law, const TestFunctional& g)
{
    switch (g.kind()) {
    case FunctionalKind::constant: return g.c();
    case FunctionalKind::exp_linear: {
        const State m = detail::law_mean_state(law);
        const double c = g.c();
        return std::exp(c * coeff_dot(g.vector(), m) + 0.5 * c * c * detail::linear_variance(law, g.vector()));
    }
    case FunctionalKind::quadratic: {
        double s = 0.0;
        for (std::size_t j = 0; j < law.mean.size(); ++j) {
            const auto& m = law.mean[j];
            const auto& C = law.cov[j];
            s += g.vector().x[j] * (m[0] * m[0] + C[0][0]) + g.vector().y[j] * (m[1] * m[1] + C[1][1]);
        }
        return s;
    }
    default: throw UnsupportedFunctional("gaussian_expectation: no closed form for " + g.describe());
    }
}

/// Var g(Z) under the law; exp_linear, quadratic and constant only.
inline double gaussian_variance(const GaussianLaw& law, const TestFunctional& g)
{
    switch (g.kind()) {
    case FunctionalKind::constant: return 0.0;
    case FunctionalKind::exp_linear: {
        const double v = detail::linear_variance(law, g.vector()) * g.c() * g.c();
        const double m = gaussian_expectation(law, g);
        return m * m * (std::exp(v) - 1.0);
    }
    case FunctionalKind::quadratic: {
        // Independent modes; Var(Z^T D Z) = 2 tr(DCDC) + 4 m^T D C D m.
        double v = 0.0;
        for (std::size_t j = 0; j < law.mean.size(); ++j) {
            const Mat2 D{{{g.vector().x[j], 0.0}, {0.0, g.vector().y[j]}}};
            const Mat2 DC = mat2::mul(D, law.cov[j]);
            const Vec2 Dm = mat2::mul(D, law.mean[j]);
            v += 2.0 * mat2::trace(mat2::mul(DC, DC)) + 4.0 * mat2::quad(law.cov[j], Dm);
        }
        return v;
    }
    default: throw UnsupportedFunctional("gaussian_variance: no closed form for " + g.describe());
    }
}

/// d/de E g(Z_T(z0 + e h)) at e = 0 for the discrete chain.
inline double gaussian_directional_derivative(const Model& model, const TimeGrid& grid, Scheme scheme,
                                              const State& z0, const State& h, const TestFunctional& g)
{
    const GaussianLaw law = discrete_law(model, grid, scheme, z0);
    const State dm = propagate_direction(model, grid, scheme, h);
    switch (g.kind()) {
    case FunctionalKind::constant: return 0.0;
    case FunctionalKind::exp_linear: return gaussian_expectation(law, g) * g.c() * coeff_dot(g.vector(), dm);
    case FunctionalKind::quadratic: {
        double s = 0.0;
        for (std::size_t j = 0; j < law.mean.size(); ++j) {
            s += 2.0 * g.vector().x[j] * law.mean[j][0] * dm.x[j] + 2.0 * g.vector().y[j] * law.mean[j][1] * dm.y[j];
        }
        return s;
    }
    default: throw UnsupportedFunctional("gaussian_directional_derivative: no closed form for " + g.describe());
    }
}

/// E[(grad_h g)(Z)] under the law (the left side of the integration by parts formula).
inline double gaussian_expected_gradient(const GaussianLaw& law, const State& h, const TestFunctional& g)
{
    switch (g.kind()) {
    case FunctionalKind::constant: return 0.0;
    case FunctionalKind::exp_linear: return gaussian_expectation(law, g) * g.c() * coeff_dot(g.vector(), h);
    case FunctionalKind::quadratic: {
        double s = 0.0;
        for (std::size_t j = 0; j < law.mean.size(); ++j) {
            s += 2.0 * g.vector().x[j] * law.mean[j][0] * h.x[j] + 2.0 * g.vector().y[j] * law.mean[j][1] * h.y[j];
        }
        return s;
    }
    default: throw UnsupportedFunctional("gaussian_expected_gradient: no closed form for " + g.describe());
    }
}

/// E exp(theta sum_{k<n} E(Z_k) dt) for the chain, E(z) = sum (lambda_j + kappa) x_j^2 + y_j^2,
/// by the backward Riccati recursion for exp(z^T P z + c). Returns +inf when
/// the moment does not exist.
inline double gaussian_exp_energy_moment(const Model& model, const TimeGrid& grid, Scheme scheme, const State& z0,
                                         double theta)
{
    const LinearDrift d = LinearDrift::of(model);
    const double dt = grid.dt();
    double log_total = 0.0;
    for (std::size_t j = 0; j < model.space.modes(); ++j) {
        const double lam = model.space.eigenvalues()[j];
        const Mat2 B = scheme_matrix(scheme, lam, d, dt);
        const Mat2 Q{{{theta * dt * (lam + d.kappa), 0.0}, {0.0, theta * dt}}};
        const double s2 = model.noise.sigma[j] * model.noise.sigma[j] * dt;
        Mat2 P = mat2::zero();
        double c = 0.0;
        for (std::size_t k = grid.n_steps; k-- > 0;) {
            const double den = 1.0 - 2.0 * s2 * P[1][1];
            if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
            const Vec2 Pe{P[0][1], P[1][1]};
            Mat2 inner = P;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) inner[a][b] += 2.0 * s2 * Pe[a] * Pe[b] / den;
            c -= 0.5 * std::log(den);
            P = mat2::add(Q, mat2::mul(mat2::mul(mat2::transpose(B), inner), B));
        }
        log_total += mat2::quad(P, Vec2{z0.x[j], z0.y[j]}) + c;
    }
    return std::exp(log_total);
}

/// sum_{k<steps} E[E(Z_k)^p] dt for p in {1, 2}, E as above.
inline double gaussian_energy_moment(const Model& model, const TimeGrid& grid, Scheme scheme, const State& z0,
                                     double p, std::size_t steps)
{
    if (p != 1.0 && p != 2.0) throw DomainError("gaussian_energy_moment: p must be 1 or 2");
    const LinearDrift d = LinearDrift::of(model);
    const double dt = grid.dt();
    const std::size_t n = model.space.modes();
    std::vector<Mat2> B(n);
    std::vector<Vec2> m(n);
    std::vector<Mat2> C(n, mat2::zero());
    for (std::size_t j = 0; j < n; ++j) {
        B[j] = scheme_matrix(scheme, model.space.eigenvalues()[j], d, dt);
        m[j] = {z0.x[j], z0.y[j]};
    }
    double total = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double lam = model.space.eigenvalues()[j] + d.kappa;
            const Mat2 D{{{lam, 0.0}, {0.0, 1.0}}};
            mean += lam * (m[j][0] * m[j][0] + C[j][0][0]) + m[j][1] * m[j][1] + C[j][1][1];
            const Mat2 DC = mat2::mul(D, C[j]);
            const Vec2 Dm = mat2::mul(D, m[j]);
            var += 2.0 * mat2::trace(mat2::mul(DC, DC)) + 4.0 * mat2::quad(C[j], Dm);
        }
        total += (p == 1.0 ? mean : var + mean * mean) * dt;
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = mat2::mul(B[j], m[j]);
            C[j] = mat2::mul(mat2::mul(B[j], C[j]), mat2::transpose(B[j]));
            C[j][1][1] += model.noise.sigma[j] * model.noise.sigma[j] * dt;
        }
    }
    return total;
}

} // namespace wavecouple
