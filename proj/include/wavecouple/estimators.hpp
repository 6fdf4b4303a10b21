#pragma once

// Monte-Carlo estimators: P_T g, the Bismut derivative formula, central
// finite differences with common random numbers, the integration by parts
// formula and moments of the Girsanov weight.

#include <wavecouple/bounds.hpp>
#include <wavecouple/functionals.hpp>
#include <wavecouple/sampling.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace wavecouple {

/// Everything an estimator needs besides the functional and the points.
struct Experiment {
    Model model;
    TimeGrid grid;
    Scheme scheme = Scheme::euler_maruyama;
    std::size_t n_traj = 10000;
    std::uint64_t seed = 1;
    double guard = 1e8;
    unsigned threads = 1;
    /// Let the derivative and IBP estimators run for rho in (1, 2).
    bool allow_rough_rho = false;

    SamplingEngine engine() const { return SamplingEngine(model, grid, scheme, guard, seed, threads); }
    const SpectralSpace& space() const noexcept { return model.space; }
};

/// Independent noise streams used by the estimators.
namespace streams {
inline constexpr std::uint32_t main = 0;
inline constexpr std::uint32_t shifted = 1; // direct simulation at the shifted point
inline constexpr std::uint32_t resample = 2;
} // namespace streams

namespace detail {

inline void require_traj(const Experiment& ex)
{
    if (ex.n_traj < 100) throw DomainError("estimators need n_traj >= 100");
}

inline void require_derivative_rho(const Experiment& ex, const char* who)
{
    const double rho = ex.model.nonlinearity.rho;
    if (rho > 1.0 && rho < 2.0 && !ex.allow_rough_rho && !ex.model.nonlinearity.is_zero()) {
        throw DomainError(std::string(who) + ": rho in (1,2) is outside the derivative formula's range");
    }
}

template <class Fn>
McEstimate summarize_samples(const std::vector<TrajectorySample>& s, Fn&& fn)
{
    std::vector<double> v(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!s[i].excluded) v[i] = fn(s[i]);
    return summarize(v, keep_mask(s));
}

inline State direction(const Field& h1, const Field& h2) { return State(h1, h2); }

} // namespace detail

/// P_T g(z0) = E g(Z_T).
inline McEstimate estimate_pt(const TestFunctional& g, const State& z0, const Experiment& ex,
                              std::uint32_t stream = streams::main)
{
    detail::require_traj(ex);
    const auto s = ex.engine().run(z0, SampleOptions{}, ex.n_traj, stream);
    return detail::summarize_samples(s, [&](const TrajectorySample& t) { return g(t.terminal); });
}

struct GradientEstimate {
    McEstimate estimate; // sign applied
    McEstimate raw;      // E[g(Z_T) M] before the sign
    int sign = -1;
};

/// Bismut formula s E[g(Z_T) M], M = sum <sigma^{-1}(l'(X_k) psi_k + phi_k + f_k), dW_k>
/// along the uncoupled path. The Girsanov derivation gives s = -1.
inline GradientEstimate bismut_gradient(const TestFunctional& g, const State& z0, const Field& h1, const Field& h2,
                                        const Experiment& ex, int sign = -1)
{
    detail::require_traj(ex);
    detail::require_derivative_rho(ex, "bismut_gradient");
    if (ex.model.noise.silent()) throw DomainError("bismut_gradient: needs non-degenerate noise");
    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, h1, h2);
    const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.score = &dc;
    const auto s = ex.engine().run(z0, opts, ex.n_traj, streams::main);
    GradientEstimate out;
    out.raw = detail::summarize_samples(s, [&](const TrajectorySample& t) { return g(t.terminal) * t.ito; });
    out.sign = sign;
    out.estimate = out.raw;
    out.estimate.mean *= sign;
    return out;
}

/// [P_T g(z0 + e h) - P_T g(z0 - e h)] / (2e) with common random numbers.
inline McEstimate fd_gradient(const TestFunctional& g, const State& z0, const Field& h1, const Field& h2,
                              const Experiment& ex, double fd_eps = 1e-3)
{
    detail::require_traj(ex);
    if (!(fd_eps > 0.0)) throw DomainError("fd_gradient: fd_eps must be positive");
    State h = detail::direction(h1, h2);
    const State plus = z0 + h * fd_eps;
    const State minus = z0 - h * fd_eps;
    const auto eng = ex.engine();
    const auto sp = eng.run(plus, SampleOptions{}, ex.n_traj, streams::main);
    const auto sm = eng.run(minus, SampleOptions{}, ex.n_traj, streams::main);
    std::vector<double> v(ex.n_traj, 0.0);
    std::vector<char> keep(ex.n_traj, 1);
    for (std::size_t i = 0; i < ex.n_traj; ++i) {
        if (sp[i].excluded || sm[i].excluded) {
            keep[i] = 0;
            continue;
        }
        v[i] = (g(sp[i].terminal) - g(sm[i].terminal)) / (2.0 * fd_eps);
    }
    return summarize(v, keep);
}

struct SignResolution {
    int sign = 1;
    bool decisive = false; // both estimates clear of zero by kSigmaBand standard errors
};

/// The sign in {+1, -1} that brings s * raw closest to the reference. Only
/// decisive evidence overrides the fallback: when either side is within noise
/// of zero the comparison is a coin flip.
inline SignResolution resolve_sign(const McEstimate& raw, const McEstimate& reference, int fallback)
{
    SignResolution r{fallback, false};
    r.decisive = std::abs(raw.mean) > kSigmaBand * raw.std_error &&
                 std::abs(reference.mean) > kSigmaBand * reference.std_error;
    if (r.decisive) r.sign = (raw.mean > 0) == (reference.mean > 0) ? 1 : -1;
    return r;
}

struct DerivativeComparison {
    GradientEstimate bismut; // sign resolved against fd
    McEstimate fd;
    int derived_sign = -1;
    bool sign_decisive = false;
    double combined_stderr = 0.0;
    double difference = 0.0;
};

/// Runs Bismut and FD, resolves the sign of the Bismut formula against FD.
inline DerivativeComparison compare_derivatives(const TestFunctional& g, const State& z0, const Field& h1,
                                                const Field& h2, const Experiment& ex, double fd_eps = 1e-3)
{
    DerivativeComparison out;
    out.bismut = bismut_gradient(g, z0, h1, h2, ex, -1);
    out.fd = fd_gradient(g, z0, h1, h2, ex, fd_eps);
    const auto sr = resolve_sign(out.bismut.raw, out.fd, out.derived_sign);
    out.bismut.sign = sr.sign;
    out.sign_decisive = sr.decisive;
    out.bismut.estimate = out.bismut.raw;
    out.bismut.estimate.mean *= out.bismut.sign;
    out.combined_stderr = std::hypot(out.bismut.estimate.std_error, out.fd.std_error);
    out.difference = out.bismut.estimate.mean - out.fd.mean;
    return out;
}

struct IbpResult {
    McEstimate lhs;     // E[(grad_h g)(Z_T)]
    McEstimate rhs;     // s E[g(Z_T) M^]
    McEstimate rhs_raw; // E[g(Z_T) M^]
    int sign = 1;
    int derived_sign = 1;
    bool sign_decisive = false;
    double combined_stderr = 0.0;
};

/// Integration by parts: E[(grad_h g)(Z_T)] = s E[g(Z_T) M^] with M^ the Ito sum
/// of the shift controls. The derivation gives s = +1; the sign is resolved
/// against the left side and recorded.
inline IbpResult ibp_estimator(const TestFunctional& g, const State& z0, const Field& h1, const Field& h2,
                               const Experiment& ex)
{
    detail::require_traj(ex);
    detail::require_derivative_rho(ex, "ibp_estimator");
    if (!g.has_gradient()) throw UnsupportedFunctional("ibp_estimator: functional has no gradient");
    if (ex.model.noise.silent()) throw DomainError("ibp_estimator: needs non-degenerate noise");
    const CouplingControls cc(ex.space(), ProfileKind::shift, ex.grid.T, h1, h2);
    const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.score = &dc;
    const auto s = ex.engine().run(z0, opts, ex.n_traj, streams::main);
    const State h = detail::direction(h1, h2);
    IbpResult out;
    out.lhs = detail::summarize_samples(s, [&](const TrajectorySample& t) { return g.directional(t.terminal, h); });
    out.rhs_raw = detail::summarize_samples(s, [&](const TrajectorySample& t) { return g(t.terminal) * t.ito; });
    const auto sr = resolve_sign(out.rhs_raw, out.lhs, out.derived_sign);
    out.sign = sr.sign;
    out.sign_decisive = sr.decisive;
    out.rhs = out.rhs_raw;
    out.rhs.mean *= out.sign;
    // lhs and rhs come from the same paths: use the paired difference for the error.
    std::vector<double> diff(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!s[i].excluded) diff[i] = g.directional(s[i].terminal, h) - out.sign * g(s[i].terminal) * s[i].ito;
    out.combined_stderr = summarize(diff, keep_mask(s)).std_error;
    return out;
}

/// E[R_T log R_T] for the forward coupling with epsilon = 1, started at z0
/// (the second path at z0 + h).
inline McEstimate entropy_of_weight(const State& z0, const CouplingControls& controls, const Experiment& ex)
{
    detail::require_traj(ex);
    if (controls.epsilon() != 1.0) throw DomainError("entropy_of_weight: the Harnack coupling uses epsilon = 1");
    const DiscreteControls dc(controls, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    opts.epsilon = 1.0;
    const auto s = ex.engine().run(z0, opts, ex.n_traj, streams::main);
    return detail::summarize_samples(s, [](const TrajectorySample& t) { return std::exp(t.log_weight) * t.log_weight; });
}

struct PowerEstimate {
    double value = 1.0;     // (E R^{p/(p-1)})^{p-1}
    double std_error = 0.0; // delta method
    McEstimate moment;      // E R^{p/(p-1)}
    double kurtosis = 0.0;  // of R^{p/(p-1)}
    double T0 = 0.0;
};

/// (E R_T^{p/(p-1)})^{p-1}. Requires rho in [1, 2] and T <= T0.
inline PowerEstimate power_of_weight(const State& z0, const CouplingControls& controls, double p, const Experiment& ex,
                                     double C_abs = 16.0)
{
    detail::require_traj(ex);
    const double rho = ex.model.nonlinearity.rho;
    if (rho < 1.0 || rho > 2.0) throw DomainError("power_of_weight: rho must lie in [1, 2]");
    if (!(p > 1.0)) throw DomainError("power_of_weight: p must exceed 1");
    const BoundContext ctx{&ex.model.space, &ex.model.nonlinearity, &ex.model.noise, C_abs};
    PowerEstimate out;
    out.T0 = harnack_horizon_cap(ctx, controls.h1(), controls.h2(), p);
    if (ex.grid.T > out.T0 * (1.0 + 1e-12)) {
        throw DomainError("power_of_weight: T=" + std::to_string(ex.grid.T) + " exceeds T0=" + std::to_string(out.T0));
    }
    const DiscreteControls dc(controls, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    opts.epsilon = controls.epsilon();
    const auto s = ex.engine().run(z0, opts, ex.n_traj, streams::main);
    const double q = p / (p - 1.0);
    std::vector<double> v(s.size(), 0.0);
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!s[i].excluded) v[i] = std::exp(q * s[i].log_weight);
    out.moment = summarize(v, keep_mask(s));
    out.value = std::pow(out.moment.mean, p - 1.0);
    out.std_error = (p - 1.0) * std::pow(out.moment.mean, p - 2.0) * out.moment.std_error;
    double m2 = 0.0, m4 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i].excluded) continue;
        const double d = v[i] - out.moment.mean;
        m2 += d * d;
        m4 += d * d * d * d;
        ++n;
    }
    out.kurtosis = m2 > 0.0 ? static_cast<double>(n) * m4 / (m2 * m2) : 0.0;
    return out;
}

} // namespace wavecouple
