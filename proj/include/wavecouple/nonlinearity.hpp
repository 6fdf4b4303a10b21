#pragma once

// Drift nonlinearity l, its derivative and antiderivative, the potential
// energy J, and a grid checker for the structural growth/regularity
// conditions used by every bound in the library.

#include <wavecouple/error.hpp>
#include <wavecouple/spectral.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace wavecouple {

enum class NonlinearityFamily { klein_gordon, linear_zero, custom };

inline const char* to_string(NonlinearityFamily f)
{
    switch (f) {
    case NonlinearityFamily::klein_gordon: return "klein_gordon";
    case NonlinearityFamily::linear_zero: return "linear_zero";
    case NonlinearityFamily::custom: return "custom";
    }
    return "?";
}

/// Constants of the growth conditions
///   (1) l' >= 0, |l(r)| <= K1|r|^rho + K2, |l'(r)| <= K3|r|^(rho-1) + K4
///   (2) j(r) >= K5 |r|^(rho+1)
///   (3) Hoelder/Lipschitz control of l' with C1..C5, w, gamma (branch by rho).
struct GrowthConstants {
    double K1 = 0, K2 = 0, K3 = 0, K4 = 0, K5 = 0;
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0, C5 = 0;
    double w = 0.5;
    double gamma = 1.0;
};

struct NonlinearityParams {
    NonlinearityFamily family = NonlinearityFamily::klein_gordon;
    double rho = 1.0;
    GrowthConstants k;
    // Pointwise callables, used only by the custom family.
    std::function<double(double)> custom_l;
    std::function<double(double)> custom_lp;
    std::function<double(double)> custom_j;

    /// l(r) = |r|^(rho-1) r with the analytic constants
    /// K1=1, K3=rho, K5=1/(rho+1), C1=rho(rho-1) (rho>2), C4=rho (rho in (1,2]).
    static NonlinearityParams klein_gordon(double rho)
    {
        if (!(rho >= 1.0) || !std::isfinite(rho)) throw DomainError("klein_gordon: rho must be >= 1");
        NonlinearityParams p;
        p.family = NonlinearityFamily::klein_gordon;
        p.rho = rho;
        p.k.K1 = 1.0;
        p.k.K3 = rho;
        p.k.K5 = 1.0 / (rho + 1.0);
        if (rho > 2.0) p.k.C1 = rho * (rho - 1.0);
        if (rho > 1.0 && rho <= 2.0) p.k.C4 = rho;
        return p;
    }

    /// l == 0. rho only selects the bound branch; defaults to 1.
    static NonlinearityParams linear_zero(double rho = 1.0)
    {
        NonlinearityParams p;
        p.family = NonlinearityFamily::linear_zero;
        p.rho = rho;
        return p;
    }

    bool is_zero() const noexcept { return family == NonlinearityFamily::linear_zero; }
    bool is_linear() const noexcept
    {
        return family == NonlinearityFamily::linear_zero ||
               (family == NonlinearityFamily::klein_gordon && rho == 1.0);
    }
};

namespace detail {

/// |r|^e for e >= 0 with fast paths for the exponents that occur in practice.
inline double abs_pow(double r, double e)
{
    const double a = std::abs(r);
    if (e == 0.0) return 1.0;
    if (e == 1.0) return a;
    if (e == 2.0) return a * a;
    if (e == 0.5) return std::sqrt(a);
    if (e == 1.5) return a * std::sqrt(a);
    if (e == 3.0) return a * a * a;
    if (e == 4.0) return (a * a) * (a * a);
    return std::pow(a, e);
}

} // namespace detail

inline double l_eval(const NonlinearityParams& p, double r)
{
    switch (p.family) {
    case NonlinearityFamily::linear_zero: return 0.0;
    case NonlinearityFamily::klein_gordon: return detail::abs_pow(r, p.rho - 1.0) * r;
    case NonlinearityFamily::custom: return p.custom_l(r);
    }
    return 0.0;
}

/// l'(r); for klein_gordon l'(0) = 0 when rho > 1 and 1 when rho = 1.
inline double l_prime(const NonlinearityParams& p, double r)
{
    switch (p.family) {
    case NonlinearityFamily::linear_zero: return 0.0;
    case NonlinearityFamily::klein_gordon:
        if (p.rho == 1.0) return 1.0;
        return p.rho * detail::abs_pow(r, p.rho - 1.0);
    case NonlinearityFamily::custom: return p.custom_lp(r);
    }
    return 0.0;
}

/// j(r) = int_0^r l.
inline double j_eval(const NonlinearityParams& p, double r)
{
    switch (p.family) {
    case NonlinearityFamily::linear_zero: return 0.0;
    case NonlinearityFamily::klein_gordon: return detail::abs_pow(r, p.rho + 1.0) / (p.rho + 1.0);
    case NonlinearityFamily::custom: return p.custom_j(r);
    }
    return 0.0;
}

/// Vectorised l / l' / j over grid values.
inline void apply_l(const NonlinearityParams& p, std::span<const double> in, std::span<double> out)
{
    const std::size_t n = in.size();
    if (p.family == NonlinearityFamily::klein_gordon) {
        const double e = p.rho - 1.0;
        if (e == 0.0) {
            std::copy(in.begin(), in.end(), out.begin());
        } else if (e == 2.0) {
            for (std::size_t i = 0; i < n; ++i) out[i] = in[i] * in[i] * in[i];
        } else if (e == 1.0) {
            for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(in[i]) * in[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) out[i] = detail::abs_pow(in[i], e) * in[i];
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = l_eval(p, in[i]);
}

inline void apply_l_prime(const NonlinearityParams& p, std::span<const double> in, std::span<double> out)
{
    const std::size_t n = in.size();
    if (p.family == NonlinearityFamily::klein_gordon) {
        if (p.rho == 3.0) {
            for (std::size_t i = 0; i < n; ++i) out[i] = 3.0 * in[i] * in[i];
            return;
        }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = l_prime(p, in[i]);
}

/// J(u) = int j(u(xi)) dxi by grid quadrature.
inline double J_functional(const SpectralSpace& space, const NonlinearityParams& p, const Field& u)
{
    if (p.is_zero()) return 0.0;
    const auto values = to_grid(space, u);
    double acc = 0.0;
    for (double v : values) acc += j_eval(p, v);
    return acc * space.quad_weight();
}

/// E(x, y) = ||x||_{1/2}^2 + ||y||^2 + 2 J(x).
inline double energy(const SpectralSpace& space, const NonlinearityParams& p, const State& z)
{
    detail::require_field(space, z.x, "energy");
    detail::require_field(space, z.y, "energy");
    return energy_norm_sq(space, z) + 2.0 * J_functional(space, p, z.x);
}

/// Which reading of condition (3) to certify for rho > 2. The literal
/// statement uses min(|r1|,|r2|)^(rho-2); the potential-energy estimates
/// expand max(|r1|,|r2|)^(rho-2). Klein-Gordon with C2 = C3 = 0 satisfies
/// only the max form.
enum class HoelderForm { max_form, min_literal };

struct ConditionViolation {
    std::string condition;
    double r1 = 0;
    double r2 = 0;
    double lhs = 0;
    double rhs = 0;
    double excess = 0;
};

struct ConditionReport {
    bool passed = true;
    std::size_t evaluations = 0;
    /// Worst violation of each failing condition, largest excess first.
    std::vector<ConditionViolation> worst_violations;
};

/// Symmetric logarithmic grid on [lo, hi] with `per_decade` points per decade,
/// both signs, plus 0.
inline std::vector<double> default_condition_grid(double lo = 1e-6, double hi = 1e3, int per_decade = 8)
{
    std::vector<double> g{0.0};
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    const int n = static_cast<int>(std::ceil((b - a) * per_decade));
    for (int i = 0; i <= n; ++i) {
        const double r = std::pow(10.0, a + (b - a) * i / n);
        g.push_back(r);
        g.push_back(-r);
    }
    std::sort(g.begin(), g.end());
    return g;
}

/// Evaluates conditions (1)-(3) on `r_grid` (pairwise for (3)). A point fails
/// when lhs exceeds rhs by more than 1e-12 relative to the magnitudes involved.
inline ConditionReport check_conditions(const NonlinearityParams& p, std::span<const double> r_grid,
                                        HoelderForm form = HoelderForm::max_form)
{
    if (r_grid.empty()) throw DomainError("check_conditions: empty grid");
    const auto& k = p.k;
    const double rho = p.rho;
    ConditionReport rep;
    std::vector<ConditionViolation> worst;

    auto consider = [&](const char* name, double r1, double r2, double lhs, double rhs, double scale) {
        ++rep.evaluations;
        const double excess = lhs - rhs;
        if (!(excess > 1e-12 * (1.0 + scale))) return;
        rep.passed = false;
        auto it = std::find_if(worst.begin(), worst.end(), [&](const auto& v) { return v.condition == name; });
        if (it == worst.end()) {
            worst.push_back({name, r1, r2, lhs, rhs, excess});
        } else if (excess > it->excess) {
            *it = {name, r1, r2, lhs, rhs, excess};
        }
    };

    for (double r : r_grid) {
        const double l = l_eval(p, r);
        const double lp = l_prime(p, r);
        const double j = j_eval(p, r);
        consider("(1) l' >= 0", r, r, -lp, 0.0, std::abs(lp));
        const double b1 = k.K1 * detail::abs_pow(r, rho) + k.K2;
        consider("(1) |l| <= K1|r|^rho + K2", r, r, std::abs(l), b1, std::abs(l) + b1);
        const double b2 = k.K3 * detail::abs_pow(r, rho - 1.0) + k.K4;
        consider("(1) |l'| <= K3|r|^(rho-1) + K4", r, r, std::abs(lp), b2, std::abs(lp) + b2);
        const double b3 = k.K5 * detail::abs_pow(r, rho + 1.0);
        consider("(2) j >= K5|r|^(rho+1)", r, r, b3, j, std::abs(j) + b3);
    }

    std::vector<double> lp(r_grid.size());
    for (std::size_t i = 0; i < r_grid.size(); ++i) lp[i] = l_prime(p, r_grid[i]);
    for (std::size_t a = 0; a < r_grid.size(); ++a) {
        for (std::size_t b = a + 1; b < r_grid.size(); ++b) {
            const double r1 = r_grid[a];
            const double r2 = r_grid[b];
            const double d = std::abs(r1 - r2);
            const double lhs = std::abs(lp[a] - lp[b]);
            const double scale = std::abs(lp[a]) + std::abs(lp[b]);
            double rhs = 0.0;
            const char* name = nullptr;
            if (rho > 2.0) {
                const double base = form == HoelderForm::max_form ? std::max(std::abs(r1), std::abs(r2))
                                                                  : std::min(std::abs(r1), std::abs(r2));
                rhs = (k.C1 * detail::abs_pow(base, rho - 2.0) + k.C2) * d + k.C3 * std::pow(d, k.w);
                name = form == HoelderForm::max_form ? "(3) rho>2 [max form]" : "(3) rho>2 [min form]";
            } else if (rho > 1.0) {
                rhs = k.C4 * std::pow(d, rho - 1.0);
                name = "(3) rho in (1,2]";
            } else {
                rhs = k.C5 * std::min(std::pow(d, k.gamma), 1.0);
                name = "(3) rho = 1";
            }
            consider(name, r1, r2, lhs, rhs, scale + rhs);
        }
    }
    std::sort(worst.begin(), worst.end(), [](const auto& x, const auto& y) { return x.excess > y.excess; });
    rep.worst_violations = std::move(worst);
    return rep;
}

/// Smallest constants consistent with the sampled grid (K2=K4=C2=C3=0
/// assumed): an empirical lower bound on the sharp values.
inline GrowthConstants certify_constants(const NonlinearityParams& p, std::span<const double> r_grid)
{
    GrowthConstants c = p.k;
    const double rho = p.rho;
    double k1 = 0, k3 = 0, k5 = std::numeric_limits<double>::infinity();
    double c1 = 0, c4 = 0, c5 = 0;
    for (double r : r_grid) {
        if (r == 0.0) continue;
        k1 = std::max(k1, std::abs(l_eval(p, r)) / detail::abs_pow(r, rho));
        k3 = std::max(k3, std::abs(l_prime(p, r)) / detail::abs_pow(r, rho - 1.0));
        k5 = std::min(k5, j_eval(p, r) / detail::abs_pow(r, rho + 1.0));
    }
    for (std::size_t a = 0; a < r_grid.size(); ++a) {
        for (std::size_t b = a + 1; b < r_grid.size(); ++b) {
            const double r1 = r_grid[a];
            const double r2 = r_grid[b];
            const double d = std::abs(r1 - r2);
            const double dl = std::abs(l_prime(p, r1) - l_prime(p, r2));
            if (rho > 2.0) {
                const double base = std::max(std::abs(r1), std::abs(r2));
                c1 = std::max(c1, dl / (detail::abs_pow(base, rho - 2.0) * d));
            } else if (rho > 1.0) {
                c4 = std::max(c4, dl / std::pow(d, rho - 1.0));
            } else {
                c5 = std::max(c5, dl / std::min(std::pow(d, p.k.gamma), 1.0));
            }
        }
    }
    c.K1 = k1;
    c.K2 = 0;
    c.K3 = k3;
    c.K4 = 0;
    c.K5 = std::isfinite(k5) ? k5 : 0.0;
    c.C1 = c1;
    c.C2 = 0;
    c.C3 = 0;
    c.C4 = c4;
    c.C5 = c5;
    return c;
}

/// Custom pointwise nonlinearity. Rejected unless (1)-(3) hold on the default
/// grid with the supplied constants.
inline NonlinearityParams make_custom_nonlinearity(std::function<double(double)> l, std::function<double(double)> lp,
                                                   std::function<double(double)> j, double rho,
                                                   const GrowthConstants& constants)
{
    if (!(rho >= 1.0)) throw DomainError("custom nonlinearity: rho must be >= 1");
    NonlinearityParams p;
    p.family = NonlinearityFamily::custom;
    p.rho = rho;
    p.k = constants;
    p.custom_l = std::move(l);
    p.custom_lp = std::move(lp);
    p.custom_j = std::move(j);
    const auto grid = default_condition_grid();
    const auto rep = check_conditions(p, grid);
    if (!rep.passed) {
        throw DomainError("custom nonlinearity violates " + rep.worst_violations.front().condition);
    }
    return p;
}

} // namespace wavecouple
