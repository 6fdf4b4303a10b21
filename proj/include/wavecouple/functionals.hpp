#pragma once

// Test functionals g on the state space with closed-form gradients.

#include <wavecouple/error.hpp>
#include <wavecouple/spectral.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace wavecouple {

enum class FunctionalKind { constant, exp_linear, bounded_smooth, quadratic, indicator_smooth };

inline const char* to_string(FunctionalKind k)
{
    switch (k) {
    case FunctionalKind::constant: return "constant";
    case FunctionalKind::exp_linear: return "exp_linear";
    case FunctionalKind::bounded_smooth: return "bounded_smooth";
    case FunctionalKind::quadratic: return "quadratic";
    case FunctionalKind::indicator_smooth: return "indicator_smooth";
    }
    return "?";
}

/// <a, z> = sum_j a.x_j x_j + a.y_j y_j on coefficients.
inline double coeff_dot(const State& a, const State& z)
{
    double s = 0.0;
    for (std::size_t i = 0; i < z.modes(); ++i) s += a.x[i] * z.x[i] + a.y[i] * z.y[i];
    return s;
}

/// - constant:         g = c
/// - exp_linear:       g = exp(c <a, z>)
/// - bounded_smooth:   g = 1 / (1 + |z - z*|^2), |z|^2 = sum lambda_j x_j^2 + y_j^2
/// - quadratic:        g = sum a.x_j x_j^2 + a.y_j y_j^2
/// - indicator_smooth: g = 1 / (1 + exp(-(<a, z> - b) / kappa))
class TestFunctional {
public:
    static TestFunctional constant(double c)
    {
        TestFunctional g;
        g.kind_ = FunctionalKind::constant;
        g.c_ = c;
        return g;
    }

    static TestFunctional exp_linear(State a, double c = 1.0)
    {
        TestFunctional g;
        g.kind_ = FunctionalKind::exp_linear;
        g.a_ = std::move(a);
        g.c_ = c;
        return g;
    }

    static TestFunctional bounded_smooth(const SpectralSpace& space, State center)
    {
        if (center.modes() != space.modes()) throw InvalidField("bounded_smooth: center has wrong mode count");
        TestFunctional g;
        g.kind_ = FunctionalKind::bounded_smooth;
        g.a_ = std::move(center);
        g.lambdas_.assign(space.eigenvalues().begin(), space.eigenvalues().end());
        return g;
    }

    /// Diagonal weights are stored in a.x (positions) and a.y (velocities).
    static TestFunctional quadratic(State weights)
    {
        TestFunctional g;
        g.kind_ = FunctionalKind::quadratic;
        g.a_ = std::move(weights);
        return g;
    }

    static TestFunctional indicator_smooth(State a, double b, double kappa)
    {
        if (!(kappa > 0.0)) throw DomainError("indicator_smooth: kappa must be positive");
        TestFunctional g;
        g.kind_ = FunctionalKind::indicator_smooth;
        g.a_ = std::move(a);
        g.b_ = b;
        g.kappa_ = kappa;
        return g;
    }

    FunctionalKind kind() const noexcept { return kind_; }
    const State& vector() const noexcept { return a_; }
    double c() const noexcept { return c_; }
    double b() const noexcept { return b_; }
    double kappa() const noexcept { return kappa_; }

    bool strictly_positive() const noexcept
    {
        switch (kind_) {
        case FunctionalKind::constant: return c_ > 0.0;
        case FunctionalKind::quadratic: return false;
        default: return true;
        }
    }

    bool has_gradient() const noexcept { return true; }

    double operator()(const State& z) const
    {
        switch (kind_) {
        case FunctionalKind::constant: return c_;
        case FunctionalKind::exp_linear: return std::exp(c_ * coeff_dot(a_, z));
        case FunctionalKind::bounded_smooth: return 1.0 / (1.0 + dist_sq(z));
        case FunctionalKind::quadratic: {
            double s = 0.0;
            for (std::size_t i = 0; i < z.modes(); ++i) s += a_.x[i] * z.x[i] * z.x[i] + a_.y[i] * z.y[i] * z.y[i];
            return s;
        }
        case FunctionalKind::indicator_smooth: return sigmoid((coeff_dot(a_, z) - b_) / kappa_);
        }
        return 0.0;
    }

    /// Coefficient gradient (dg/dx_j, dg/dy_j).
    State gradient(const State& z) const
    {
        State gr(z.modes());
        switch (kind_) {
        case FunctionalKind::constant: break;
        case FunctionalKind::exp_linear: {
            const double g = (*this)(z);
            gr = a_;
            gr *= c_ * g;
            break;
        }
        case FunctionalKind::bounded_smooth: {
            const double g = (*this)(z);
            for (std::size_t i = 0; i < z.modes(); ++i) {
                gr.x[i] = -2.0 * g * g * lambdas_[i] * (z.x[i] - a_.x[i]);
                gr.y[i] = -2.0 * g * g * (z.y[i] - a_.y[i]);
            }
            break;
        }
        case FunctionalKind::quadratic:
            for (std::size_t i = 0; i < z.modes(); ++i) {
                gr.x[i] = 2.0 * a_.x[i] * z.x[i];
                gr.y[i] = 2.0 * a_.y[i] * z.y[i];
            }
            break;
        case FunctionalKind::indicator_smooth: {
            const double s = (*this)(z);
            gr = a_;
            gr *= s * (1.0 - s) / kappa_;
            break;
        }
        }
        return gr;
    }

    /// Directional derivative along (h1, h2).
    double directional(const State& z, const State& h) const { return coeff_dot(gradient(z), h); }

    std::string describe() const { return to_string(kind_); }

private:
    static double sigmoid(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

    double dist_sq(const State& z) const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < z.modes(); ++i) {
            const double dx = z.x[i] - a_.x[i];
            const double dy = z.y[i] - a_.y[i];
            s += lambdas_[i] * dx * dx + dy * dy;
        }
        return s;
    }

    FunctionalKind kind_ = FunctionalKind::constant;
    State a_;
    double c_ = 1.0;
    double b_ = 0.0;
    double kappa_ = 1.0;
    std::vector<double> lambdas_;
};

} // namespace wavecouple
