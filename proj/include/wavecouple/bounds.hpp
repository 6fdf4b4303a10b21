#pragma once

// Closed-form constants of the Harnack-type inequalities: direction norms,
// E_sigma(p), E_T(p), the entropy bound Psi_rho and the power-Harnack factor
// Gamma with its horizon cap T0.

#include <wavecouple/dynamics.hpp>
#include <wavecouple/nonlinearity.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace wavecouple {

struct DirectionNorms {
    double n_sigma0 = 0.0;      // |sigma0^{-1} h1| + |A^{-1/2} sigma0^{-1} h2|
    double n_sigma0_half = 0.0; // |A^{1/2} sigma0^{-1} h1| + |sigma0^{-1} h2|
    double n_half = 0.0;        // |A^{1/2} h1| + |h2|
};

inline DirectionNorms direction_norms(const SpectralSpace& space, const NoiseModel& noise, const Field& h1,
                                      const Field& h2)
{
    detail::require_field(space, h1, "direction_norms");
    detail::require_field(space, h2, "direction_norms");
    const auto lam = space.eigenvalues();
    double a = 0, b = 0, c = 0, d = 0, e = 0, f = 0;
    for (std::size_t i = 0; i < space.modes(); ++i) {
        const double s0 = noise.sigma0[i];
        const double u = h1[i] / s0;
        const double v = h2[i] / s0;
        a += u * u;
        b += v * v / lam[i];
        c += lam[i] * u * u;
        d += v * v;
        e += lam[i] * h1[i] * h1[i];
        f += h2[i] * h2[i];
    }
    return {std::sqrt(a) + std::sqrt(b), std::sqrt(c) + std::sqrt(d), std::sqrt(e) + std::sqrt(f)};
}

/// E_sigma(p) = |sigma|_HS^2 + 2 (p-1)^+ |sigma|^2.
inline double e_sigma(const NoiseModel& noise, double p)
{
    if (!(p >= 0.0)) throw DomainError("e_sigma: p must be >= 0");
    return noise.hs_norm_sq + 2.0 * std::max(p - 1.0, 0.0) * noise.op_norm * noise.op_norm;
}

/// E_T(p) = (exp(a) - 1) / a with a = (p-1)^+ E_sigma(p) T; 1 when a = 0.
inline double e_t(const NoiseModel& noise, double p, double T)
{
    const double a = std::max(p - 1.0, 0.0) * e_sigma(noise, p) * T;
    if (a == 0.0) return 1.0;
    return std::expm1(a) / a;
}

struct BoundContext {
    const SpectralSpace* space;
    const NonlinearityParams* params;
    const NoiseModel* noise;
    double C_abs = 16.0;
};

struct PsiBreakdown {
    double psi = 0.0;
    double phi = 0.0;
    double remainder = 0.0; // C K1^2 [...]
    double T_used = 0.0;    // T ^ 1
    double energy = 0.0;    // E(x~, y~)
    double K1_used = 0.0;
    bool K1_substituted = false; // K1 = 0 replaced by 1 in the remainder
    DirectionNorms norms;
};

/// Psi_rho(x~, y~, h1, h2, T ^ 1).
inline PsiBreakdown psi_bound(const BoundContext& ctx, const State& z_tilde, const Field& h1, const Field& h2, double T)
{
    const auto& k = ctx.params->k;
    const double rho = ctx.params->rho;
    if (!(rho >= 1.0)) throw DomainError("psi_bound: rho must be >= 1");
    if (!(T > 0.0)) throw DomainError("psi_bound: T must be positive");
    PsiBreakdown out;
    out.norms = direction_norms(*ctx.space, *ctx.noise, h1, h2);
    const double nh = out.norms.n_half;
    const double Tm = std::min(T, 1.0);
    const double E = energy(*ctx.space, *ctx.params, z_tilde);
    const double lam = ctx.noise->lambda;
    const double CO = ctx.space->embedding_constant();
    const double CO2 = std::pow(CO, 2.0 * rho - 2.0);
    out.T_used = Tm;
    out.energy = E;

    double phi = 0.0;
    if (rho == 1.0) {
        phi = lam * lam * Tm *
              ((k.K3 + k.K4) * (k.K3 + k.K4) * nh * nh +
               k.C5 * k.C5 * std::min(std::pow(CO, 2 * k.gamma) * std::pow(nh, 2 * k.gamma), 1.0) *
                   (nh * nh + E + e_sigma(*ctx.noise, 1.0) * Tm));
    } else if (rho <= 2.0) {
        phi = lam * lam * Tm *
              (nh * nh * (k.K3 * k.K3 * CO2 * std::pow(E + e_sigma(*ctx.noise, rho - 1.0) * Tm, rho - 1.0) + k.K4 * k.K4) +
               CO2 * k.C4 * k.C4 *
                   (std::pow(nh, 2 * rho) + std::pow(nh, 2 * rho - 2) * (E + e_sigma(*ctx.noise, 1.0) * Tm)));
    } else {
        const double es1 = e_sigma(*ctx.noise, 1.0);
        const double line1 = lam * lam * CO2 * (k.C1 * k.C1 + k.K3 * k.K3) * Tm * nh * nh *
                             std::pow(E + std::pow(e_sigma(*ctx.noise, rho - 1.0) * Tm, 1.0 / (rho - 1.0)), rho - 1.0) *
                             e_t(*ctx.noise, rho - 1.0, Tm);
        const double expo = (1.0 - std::max(3.0 - rho, 0.0)) / (rho - 2.0);
        const double bracket =
            k.C3 * k.C3 * std::pow(nh, 2 * k.w + 2) +
            k.C1 * k.C1 * std::pow(nh, 2 * rho - 2) * (E + es1 * Tm) + k.C1 * k.C1 * std::pow(nh, 2 * rho) +
            k.C2 * k.C2 * std::pow(nh, 4) * std::pow(E + std::pow(e_sigma(*ctx.noise, rho - 2.0) * Tm, expo), rho - 2.0) *
                e_t(*ctx.noise, rho - 2.0, Tm);
        const double line2 = std::pow(2.0, std::max(rho - 1.0, 2.0)) * lam * lam * CO2 * Tm * bracket;
        const double line3 = Tm * (k.K4 * k.K4 * nh * nh + k.C3 * k.C3 * std::pow(nh, 2 * k.w) * (E + es1 * Tm));
        phi = line1 + line2 + line3;
    }
    out.phi = phi;
    out.K1_used = k.K1 == 0.0 ? 1.0 : k.K1;
    out.K1_substituted = k.K1 == 0.0;
    const double ns0 = out.norms.n_sigma0;
    const double ns0h = out.norms.n_sigma0_half;
    out.remainder = ctx.C_abs * out.K1_used * out.K1_used *
                    ((1.0 + Tm * Tm) / (Tm * Tm * Tm) * ns0 * ns0 + (1.0 + Tm) / Tm * ns0h * ns0h);
    out.psi = out.phi + out.remainder;
    return out;
}

struct GammaBreakdown {
    double T0 = std::numeric_limits<double>::infinity(); // no cap when infinite
    double T_used = 0.0;                                 // T ^ T0
    double log_gamma = 0.0;
    double gamma = 1.0;
    double K = 0.0;
    double c_tilde_sq = 0.0;
    double energy = 0.0;
    std::string branch;
    DirectionNorms norms;
};

/// K(h1, h2) = K3^2 (rho-1) |h|_{1/2}^2 + C4^2 |h|_{1/2}^{2 rho - 2}.
inline double k_direction(const BoundContext& ctx, double n_half)
{
    const auto& k = ctx.params->k;
    const double rho = ctx.params->rho;
    return k.K3 * k.K3 * (rho - 1.0) * n_half * n_half + k.C4 * k.C4 * std::pow(n_half, 2 * rho - 2);
}

/// T0 for the power Harnack inequality (infinite for rho = 1, C5 = 0).
inline double harnack_horizon_cap(const BoundContext& ctx, const Field& h1, const Field& h2, double p)
{
    const double rho = ctx.params->rho;
    const auto& k = ctx.params->k;
    if (!(p > 1.0)) throw DomainError("harnack_horizon_cap: p must exceed 1");
    if (rho < 1.0 || rho > 2.0) throw DomainError("harnack_horizon_cap: rho must lie in [1, 2]");
    const double s = ctx.noise->op_norm;
    if (rho == 1.0) {
        if (k.C5 == 0.0) return std::numeric_limits<double>::infinity();
        return (p - 1.0) / (4.0 * std::max(k.C5 * k.C5, 1.0) * std::sqrt(2.0 * p) * s);
    }
    const double nh = direction_norms(*ctx.space, *ctx.noise, h1, h2).n_half;
    const double K = k_direction(ctx, nh);
    const double CO = ctx.space->embedding_constant();
    return (std::sqrt(p) - 1.0) /
           (4.0 * std::sqrt(3.0) * s * ctx.noise->lambda * std::pow(CO, rho - 1.0) * std::max(std::sqrt(K), 1.0));
}

/// Gamma(x~, y~, h1, h2) evaluated at T ^ T0, branch by (rho, C5).
inline GammaBreakdown gamma_bound(const BoundContext& ctx, const State& z_tilde, const Field& h1, const Field& h2,
                                  double T, double p)
{
    const double rho = ctx.params->rho;
    const auto& k = ctx.params->k;
    if (rho < 1.0 || rho > 2.0) throw DomainError("gamma_bound: rho must lie in [1, 2]");
    if (!(p > 1.0)) throw DomainError("gamma_bound: p must exceed 1");
    if (!(T > 0.0)) throw DomainError("gamma_bound: T must be positive");
    GammaBreakdown out;
    out.norms = direction_norms(*ctx.space, *ctx.noise, h1, h2);
    const double nh = out.norms.n_half;
    const double ns0 = out.norms.n_sigma0;
    const double ns0h = out.norms.n_sigma0_half;
    const double C = ctx.C_abs;
    const double s = ctx.noise->op_norm;
    const double hs = ctx.noise->hs_norm_sq;
    const double E = energy(*ctx.space, *ctx.params, z_tilde);
    const double CO = ctx.space->embedding_constant();
    out.energy = E;
    out.T0 = harnack_horizon_cap(ctx, h1, h2, p);
    const double Tc = std::min(T, out.T0);
    out.T_used = Tc;

    if (rho == 1.0 && k.C5 == 0.0) {
        out.branch = "rho=1, C5=0";
        const double T2 = std::min(T * T, 1.0);
        out.log_gamma = C * p / ((p - 1.0) * (p - 1.0)) *
                        ((1.0 + T2) / std::min(T, 1.0) * ns0h * ns0h +
                         (1.0 + T2) / std::min(T * T * T, 1.0) * ns0 * ns0);
    } else if (rho == 1.0) {
        out.branch = "rho=1, C5>0";
        const double first = C * p / ((p - 1.0) * (p - 1.0)) *
                             ((1.0 + Tc * Tc) / Tc * ns0h * ns0h + (1.0 + Tc * Tc) / (Tc * Tc * Tc) * ns0 * ns0);
        const double cap = std::min(k.C5 * k.C5 * std::pow(CO, 2 * k.gamma) * std::pow(nh, 2 * k.gamma), 1.0);
        const double second = (p - 1.0) * cap * (E / (2.0 * s * s * Tc) + hs * std::log(2.0) / (s * s));
        out.log_gamma = first + second;
    } else {
        out.branch = "rho in (1,2]";
        const double lam = ctx.noise->lambda;
        const double CO2 = std::pow(CO, 2 * rho - 2);
        const double K = k_direction(ctx, nh);
        out.K = K;
        out.c_tilde_sq = 48.0 * s * s * Tc * Tc * lam * lam * CO2 * std::max(K, 1.0);
        const double sp = std::sqrt(p);
        if (out.c_tilde_sq > (sp - 1.0) * (sp - 1.0) * (1.0 + 1e-12)) {
            throw DomainError("gamma_bound: c~^2 exceeds (sqrt(p)-1)^2; the horizon must not exceed T0");
        }
        const double f1 = (p - 1.0) *
                          (((2.0 - rho) * k.K3 * k.K3 + k.K4 * k.K4 / CO2) * nh * nh + k.C4 * k.C4 * std::pow(nh, 2 * rho)) /
                          (8.0 * s * s * Tc * std::max(K, 1.0));
        const double f2 = C * p / (2.0 * (p - 1.0)) *
                          ((1.0 + Tc * Tc) / Tc * ns0h * ns0h + (1.0 + Tc * Tc) / (Tc * Tc * Tc) * ns0 * ns0);
        const double f3 = 2.0 * sp * (sp + 1.0) * out.c_tilde_sq / (sp - 1.0) * std::min(K, 1.0) *
                          (E / (s * s * Tc) + hs * std::log(4.0) / (s * s));
        out.log_gamma = f1 + f2 + f3;
    }
    out.gamma = std::exp(out.log_gamma);
    return out;
}

} // namespace wavecouple
