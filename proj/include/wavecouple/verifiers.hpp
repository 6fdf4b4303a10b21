#pragma once

// Monte-Carlo verdicts for the Harnack-type inequalities and the
// moment bounds behind them. Every verdict carries both sides, their standard errors
// and the constants used, so a failure can be audited.

#include <wavecouple/estimators.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace wavecouple {

namespace detail {

inline std::vector<double> kept_column(const std::vector<TrajectorySample>& s,
                                       const std::function<double(const TrajectorySample&)>& fn)
{
    std::vector<double> v;
    v.reserve(s.size());
    for (const auto& t : s)
        if (!t.excluded) v.push_back(fn(t));
    return v;
}

inline std::size_t excluded_count(const std::vector<TrajectorySample>& s)
{
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](const auto& t) { return t.excluded; }));
}

inline void require_some(const std::vector<double>& v)
{
    if (v.empty()) throw EstimationFailure("every trajectory was excluded");
}

inline Experiment with_horizon(const Experiment& ex, double T)
{
    if (T == ex.grid.T) return ex;
    Experiment e = ex;
    e.grid = TimeGrid::covering(T, ex.grid.dt());
    e.grid.T = T;
    return e;
}

} // namespace detail

struct LogHarnackVerdict {
    double lhs = 0, lhs_se = 0;
    double log_pt_g = 0;
    double entropy = 0;
    double rhs_entropy = 0, rhs_entropy_se = 0;
    double rhs_closed_form = 0;
    double combined_se = 0;
    bool pass_entropy = false;
    bool pass_closed_form = false;
    PsiBreakdown psi;
    std::size_t n_excluded = 0;
};

/// P_T log g(z0 + h) <= log P_T g(z0) + E R log R  (and <= ... + Psi).
inline LogHarnackVerdict check_log_harnack(const TestFunctional& g, const State& z0, const Field& h1, const Field& h2,
                                           const Experiment& ex, double C_abs = 16.0)
{
    detail::require_traj(ex);
    if (!g.strictly_positive()) throw DomainError("check_log_harnack: g must be strictly positive");
    const State h(h1, h2);
    const State zt = z0 + h;
    const auto eng = ex.engine();
    LogHarnackVerdict v;

    const auto direct = eng.run(zt, SampleOptions{}, ex.n_traj, streams::shifted);
    const auto lhs = detail::summarize_samples(direct, [&](const TrajectorySample& t) { return std::log(g(t.terminal)); });
    v.lhs = lhs.mean;
    v.lhs_se = lhs.std_error;

    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, h1, h2, 1.0);
    const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    const auto coupled = eng.run(z0, opts, ex.n_traj, streams::main);
    const auto cg = detail::kept_column(coupled, [&](const TrajectorySample& t) { return g(t.terminal); });
    const auto ce = detail::kept_column(coupled, [](const TrajectorySample& t) { return std::exp(t.log_weight) * t.log_weight; });
    detail::require_some(cg);
    const auto jm = joint_moments({cg, ce});
    v.log_pt_g = std::log(jm.mean[0]);
    v.entropy = jm.mean[1];
    v.rhs_entropy = v.log_pt_g + v.entropy;
    const double grad[2] = {1.0 / jm.mean[0], 1.0};
    v.rhs_entropy_se = delta_stderr(jm, grad);
    v.combined_se = std::hypot(v.lhs_se, v.rhs_entropy_se);
    v.pass_entropy = v.lhs <= v.rhs_entropy + kSigmaBand * v.combined_se;

    const BoundContext ctx{&ex.model.space, &ex.model.nonlinearity, &ex.model.noise, C_abs};
    v.psi = psi_bound(ctx, zt, h1, h2, ex.grid.T);
    v.rhs_closed_form = v.log_pt_g + v.psi.psi;
    v.pass_closed_form = v.lhs <= v.rhs_closed_form + kSigmaBand * v.combined_se;
    v.n_excluded = lhs.n_excluded + detail::excluded_count(coupled);
    return v;
}

struct PowerHarnackVerdict {
    double p = 2;
    double T_used = 0;
    double lhs = 0, lhs_se = 0;       // (P_T g(z0 + h))^p
    double pt_gp = 0, pt_gp_se = 0;   // P_T g^p(z0)
    double rhs = 0, rhs_se = 0;       // P_T g^p(z0) Gamma
    double rel_combined_se = 0;
    bool pass = false;
    // Hoelder route with the estimated weight moment in place of Gamma.
    double weight_power = 0, weight_power_se = 0;
    double rhs_weight = 0;
    bool pass_weight = false;
    GammaBreakdown gamma;
    std::size_t n_excluded = 0;
};

/// (P_T g(z0 + h))^p <= P_T g^p(z0) Gamma, at horizon T ^ T0.
inline PowerHarnackVerdict check_harnack_power(const TestFunctional& g, const State& z0, const Field& h1,
                                               const Field& h2, double p, const Experiment& ex0, double C_abs = 16.0)
{
    detail::require_traj(ex0);
    const double rho = ex0.model.nonlinearity.rho;
    if (rho < 1.0 || rho > 2.0) throw DomainError("check_harnack_power: rho must lie in [1, 2]");
    const BoundContext ctx{&ex0.model.space, &ex0.model.nonlinearity, &ex0.model.noise, C_abs};
    const double T0 = harnack_horizon_cap(ctx, h1, h2, p);
    const Experiment ex = detail::with_horizon(ex0, std::min(ex0.grid.T, T0));
    const State h(h1, h2);
    const State zt = z0 + h;
    PowerHarnackVerdict v;
    v.p = p;
    v.T_used = ex.grid.T;
    v.gamma = gamma_bound(ctx, zt, h1, h2, ex.grid.T, p);

    const auto eng = ex.engine();
    const auto direct = eng.run(zt, SampleOptions{}, ex.n_traj, streams::shifted);
    const auto m = detail::summarize_samples(direct, [&](const TrajectorySample& t) { return g(t.terminal); });
    v.lhs = std::pow(m.mean, p);
    v.lhs_se = p * std::pow(m.mean, p - 1.0) * m.std_error;

    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, h1, h2, 1.0);
    const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    const auto coupled = eng.run(z0, opts, ex.n_traj, streams::main);
    const double q = p / (p - 1.0);
    const auto cg = detail::kept_column(coupled, [&](const TrajectorySample& t) { return std::pow(g(t.terminal), p); });
    const auto cw = detail::kept_column(coupled, [&](const TrajectorySample& t) { return std::exp(q * t.log_weight); });
    detail::require_some(cg);
    const auto jm = joint_moments({cg, cw});
    v.pt_gp = jm.mean[0];
    v.pt_gp_se = std::sqrt(jm.cov[0][0]);
    v.rhs = v.pt_gp * v.gamma.gamma;
    v.rhs_se = v.pt_gp_se * v.gamma.gamma;
    v.rel_combined_se = std::hypot(v.lhs > 0 ? v.lhs_se / v.lhs : 0.0, v.pt_gp > 0 ? v.pt_gp_se / v.pt_gp : 0.0);
    v.pass = v.lhs <= v.rhs * (1.0 + kSigmaBand * v.rel_combined_se);

    v.weight_power = std::pow(jm.mean[1], p - 1.0);
    v.rhs_weight = v.pt_gp * v.weight_power;
    const double grad[2] = {v.weight_power, v.pt_gp * (p - 1.0) * std::pow(jm.mean[1], p - 2.0)};
    const double rhs_w_se = delta_stderr(jm, grad);
    v.weight_power_se = (p - 1.0) * std::pow(jm.mean[1], p - 2.0) * std::sqrt(jm.cov[1][1]);
    v.pass_weight = v.lhs <= v.rhs_weight + kSigmaBand * std::hypot(v.lhs_se, rhs_w_se);
    v.n_excluded = m.n_excluded + detail::excluded_count(coupled);
    return v;
}

enum class ShiftMode { log, power };

struct ShiftHarnackVerdict {
    ShiftMode mode = ShiftMode::log;
    double lhs = 0;
    double rhs = 0;          // entropy route (log) or Gamma route (power)
    double rhs_closed_form = 0;
    double entropy = 0;      // E R^ log R^ (log mode)
    double diff_se = 0;      // standard error of rhs - lhs (or relative, power mode)
    bool pass = false;
    bool pass_closed_form = false;
    PsiBreakdown psi;
    GammaBreakdown gamma;
    std::size_t n_excluded = 0;
};

/// log: P_T log g(z0) <= log P_T g(. + h)(z0) + E R^ log R^ (<= ... + Psi).
/// power (rho = 1, C5 = 0): (P_T g(z0))^p <= P_T g^p(. + h)(z0) Gamma.
inline ShiftHarnackVerdict check_shift_harnack(const TestFunctional& g, const State& z0, const Field& h1,
                                               const Field& h2, const Experiment& ex, ShiftMode mode, double p = 2.0,
                                               double C_abs = 16.0)
{
    detail::require_traj(ex);
    const auto& nl = ex.model.nonlinearity;
    if (mode == ShiftMode::power && !(nl.rho == 1.0 && nl.k.C5 == 0.0)) {
        throw DomainError("check_shift_harnack: power mode needs rho = 1 and C5 = 0");
    }
    if (mode == ShiftMode::log && !g.strictly_positive()) throw DomainError("check_shift_harnack: g must be positive");
    const State h(h1, h2);
    const BoundContext ctx{&ex.model.space, &nl, &ex.model.noise, C_abs};
    ShiftHarnackVerdict v;
    v.mode = mode;
    const CouplingControls cc(ex.space(), ProfileKind::shift, ex.grid.T, h1, h2, 1.0);
    const DiscreteControls dc(cc, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    const auto s = ex.engine().run(z0, opts, ex.n_traj, streams::main);
    v.n_excluded = detail::excluded_count(s);
    if (mode == ShiftMode::log) {
        const auto a = detail::kept_column(s, [&](const TrajectorySample& t) { return std::log(g(t.terminal)); });
        const auto b = detail::kept_column(s, [&](const TrajectorySample& t) { return g(t.terminal + h); });
        const auto c = detail::kept_column(s, [](const TrajectorySample& t) { return std::exp(t.log_weight) * t.log_weight; });
        detail::require_some(a);
        const auto jm = joint_moments({a, b, c});
        v.lhs = jm.mean[0];
        v.entropy = jm.mean[2];
        v.rhs = std::log(jm.mean[1]) + v.entropy;
        const double grad[3] = {-1.0, 1.0 / jm.mean[1], 1.0};
        v.diff_se = delta_stderr(jm, grad);
        v.pass = v.lhs <= v.rhs + kSigmaBand * v.diff_se;
        v.psi = psi_bound(ctx, z0, h1, h2, ex.grid.T);
        v.rhs_closed_form = std::log(jm.mean[1]) + v.psi.psi;
        const double grad2[3] = {-1.0, 1.0 / jm.mean[1], 0.0};
        v.pass_closed_form = v.lhs <= v.rhs_closed_form + kSigmaBand * delta_stderr(jm, grad2);
    } else {
        const auto a = detail::kept_column(s, [&](const TrajectorySample& t) { return g(t.terminal); });
        const auto b = detail::kept_column(s, [&](const TrajectorySample& t) { return std::pow(g(t.terminal + h), p); });
        detail::require_some(a);
        const auto jm = joint_moments({a, b});
        v.gamma = gamma_bound(ctx, z0, h1, h2, ex.grid.T, p);
        v.lhs = std::pow(jm.mean[0], p);
        v.rhs = jm.mean[1] * v.gamma.gamma;
        v.rhs_closed_form = v.rhs;
        const double rl = jm.mean[0] > 0 ? p * std::sqrt(jm.cov[0][0]) / jm.mean[0] : 0.0;
        const double rr = jm.mean[1] > 0 ? std::sqrt(jm.cov[1][1]) / jm.mean[1] : 0.0;
        v.diff_se = std::hypot(rl, rr);
        v.pass = v.lhs <= v.rhs * (1.0 + kSigmaBand * v.diff_se);
        v.pass_closed_form = v.pass;
    }
    return v;
}

/// Right side of the energy moment bound:
/// (E(z~)^p + E_sigma(p) s) (exp((p-1) E_sigma(p) s) - 1) / ((p-1) E_sigma(p)), p = 1 by its limit.
inline double energy_moment_bound(const NoiseModel& noise, double E0, double p, double s)
{
    const double es = e_sigma(noise, p);
    const double a = (p - 1.0) * es * s;
    const double factor = a == 0.0 ? s : s * std::expm1(a) / a;
    return (std::pow(E0, p) + es * s) * factor;
}

struct EnergyMomentVerdict {
    double p = 1, s = 0;
    double lhs = 0, lhs_se = 0;
    double rhs = 0;
    bool pass = false;
    std::size_t n_excluded = 0;
};

/// int_0^s E[R_s E(Z~_r)^p] dr <= energy_moment_bound, with Z~ started at
/// z_tilde0 and the first path at z_tilde0 - h. Without noise the integral
/// runs along the deterministic solution from z_tilde0.
inline EnergyMomentVerdict check_energy_moment(const State& z_tilde0, const CouplingControls& controls, double p,
                                               double s, const Experiment& ex)
{
    detail::require_traj(ex);
    if (!(p >= 1.0)) throw DomainError("check_energy_moment: p must be >= 1");
    if (!(s > 0.0 && s <= ex.grid.T * (1.0 + 1e-12))) throw DomainError("check_energy_moment: need 0 < s <= T");
    EnergyMomentVerdict v;
    v.p = p;
    v.s = s;
    const std::size_t ns = std::min<std::size_t>(ex.grid.n_steps, static_cast<std::size_t>(std::llround(s / ex.grid.dt())));
    const State h(controls.h1(), controls.h2());
    const DiscreteControls dc(controls, ex.space(), ex.grid, ex.scheme);
    // sigma = 0 has no weight: the deterministic solution from z~ is the reference path.
    const bool silent = ex.model.noise.silent();
    SampleOptions opts;
    opts.coupling = silent ? nullptr : &dc;
    opts.epsilon = controls.epsilon();
    opts.energy_powers = {p};
    opts.energy_steps = ns;
    const State start =
        !silent && controls.kind() == ProfileKind::forward ? z_tilde0 - h * controls.epsilon() : z_tilde0;
    const auto samples = ex.engine().run(start, opts, ex.n_traj, streams::main);
    const auto est = detail::summarize_samples(
        samples, [](const TrajectorySample& t) { return std::exp(t.log_weight_energy) * t.energy_integrals[0]; });
    v.lhs = est.mean;
    v.lhs_se = est.std_error;
    v.rhs = energy_moment_bound(ex.model.noise, energy(ex.space(), ex.model.nonlinearity, z_tilde0), p,
                                static_cast<double>(ns) * ex.grid.dt());
    v.pass = v.lhs <= v.rhs + kSigmaBand * v.lhs_se;
    v.n_excluded = est.n_excluded;
    return v;
}

/// Largest single-sample share of the weighted exponential sum allowed by check_exp_moment.
inline constexpr double kTailShareThreshold = 0.01;

struct ExpMomentVerdict {
    double theta = 0;
    double lhs = 0, lhs_se = 0;
    double rhs = 0;
    double tail_share = 0;
    bool tail_ok = false;
    bool pass_bound = false;
    bool pass = false;
    std::size_t n_excluded = 0;
};

/// E_Q exp{(1/(8 |sigma|^2 T^2)) int_0^T E(Z~_t) dt} <= exp{E(z~)/(|sigma|^2 T) + |sigma|_HS^2 log 4 / |sigma|^2}.
inline ExpMomentVerdict check_exp_moment(const State& z_tilde0, const CouplingControls& controls, const Experiment& ex)
{
    detail::require_traj(ex);
    if (ex.model.noise.silent()) throw DomainError("check_exp_moment: needs non-degenerate noise");
    ExpMomentVerdict v;
    const double s2 = ex.model.noise.op_norm * ex.model.noise.op_norm;
    const double T = ex.grid.T;
    v.theta = 1.0 / (8.0 * s2 * T * T);
    const State h(controls.h1(), controls.h2());
    const DiscreteControls dc(controls, ex.space(), ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    opts.epsilon = controls.epsilon();
    opts.energy_powers = {1.0};
    opts.energy_steps = ex.grid.n_steps;
    const State start = controls.kind() == ProfileKind::forward ? z_tilde0 - h * controls.epsilon() : z_tilde0;
    const auto samples = ex.engine().run(start, opts, ex.n_traj, streams::main);
    const auto w = detail::kept_column(samples, [&](const TrajectorySample& t) {
        return std::exp(t.log_weight + v.theta * t.energy_integrals[0]);
    });
    detail::require_some(w);
    const auto est = summarize(w);
    v.lhs = est.mean;
    v.lhs_se = est.std_error;
    v.n_excluded = detail::excluded_count(samples);
    const double total = pairwise_sum(w);
    v.tail_share = total > 0 ? *std::max_element(w.begin(), w.end()) / total : 1.0;
    v.tail_ok = v.tail_share <= kTailShareThreshold;
    const double E0 = energy(ex.space(), ex.model.nonlinearity, z_tilde0);
    v.rhs = std::exp(E0 / (s2 * T) + ex.model.noise.hs_norm_sq * std::log(4.0) / s2);
    v.pass_bound = v.lhs <= v.rhs + kSigmaBand * v.lhs_se;
    v.pass = v.pass_bound && v.tail_ok;
    return v;
}

struct GradientReportEntry {
    std::string label;
    State direction;
    McEstimate derivative;
    double ratio = 0;
};

struct GradientReport {
    double pt_g = 0;
    double variance = 0;
    double energy = 0;
    double normalizer = 0; // (1_{rho >= 2} E + 1) Var
    double max_ratio = 0;
    std::vector<GradientReportEntry> entries;
};

/// Unit directions (|h|_{1/2 + sigma0} = 1) along the first `modes` position
/// and velocity modes.
inline std::vector<std::pair<std::string, State>> unit_direction_basket(const SpectralSpace& space,
                                                                        const NoiseModel& noise, std::size_t modes)
{
    std::vector<std::pair<std::string, State>> out;
    modes = std::min(modes, space.modes());
    for (std::size_t j = 0; j < modes; ++j) {
        State a(space.modes());
        a.x[j] = noise.sigma0[j] / space.frequencies()[j];
        out.emplace_back("x" + std::to_string(j + 1), a);
        State b(space.modes());
        b.y[j] = noise.sigma0[j];
        out.emplace_back("y" + std::to_string(j + 1), b);
    }
    return out;
}

/// max over the basket of (grad_h P_T g)^2 / ((1_{rho >= 2} E + 1) Var g(Z_T)).
inline GradientReport gradient_estimate_report(const TestFunctional& g, const State& z0, const Experiment& ex,
                                               std::size_t basket_modes = 3, double fd_eps = 1e-3)
{
    detail::require_traj(ex);
    detail::require_derivative_rho(ex, "gradient_estimate_report");
    GradientReport r;
    const auto base = ex.engine().run(z0, SampleOptions{}, ex.n_traj, streams::main);
    const auto gv = detail::kept_column(base, [&](const TrajectorySample& t) { return g(t.terminal); });
    detail::require_some(gv);
    const auto st = summarize(gv);
    r.pt_g = st.mean;
    r.variance = st.std_error * st.std_error * static_cast<double>(st.n_samples);
    r.energy = energy(ex.space(), ex.model.nonlinearity, z0);
    const double ind = ex.model.nonlinearity.rho >= 2.0 && !ex.model.nonlinearity.is_zero() ? 1.0 : 0.0;
    r.normalizer = (ind * r.energy + 1.0) * r.variance;
    for (auto& [label, dir] : unit_direction_basket(ex.space(), ex.model.noise, basket_modes)) {
        GradientReportEntry e;
        e.label = label;
        e.derivative = fd_gradient(g, z0, dir.x, dir.y, ex, fd_eps);
        e.ratio = r.normalizer > 0 ? e.derivative.mean * e.derivative.mean / r.normalizer : 0.0;
        e.direction = std::move(dir);
        r.max_ratio = std::max(r.max_ratio, e.ratio);
        r.entries.push_back(std::move(e));
    }
    return r;
}

} // namespace wavecouple
