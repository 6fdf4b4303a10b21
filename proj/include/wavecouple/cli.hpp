#pragma once

// Batch driver behind tools/wavecouple. `run` parses arguments, loads the
// config, dispatches the subcommand and writes <out-dir>/<subcommand>.json
// (and CSV files with --format csv|both).
//
// Exit codes: 0 pass/report, 1 verdict fail, 2 config or usage error,
// 3 estimation failure.

#include <wavecouple/config.hpp>
#include <wavecouple/linear_gaussian.hpp>
#include <wavecouple/verifiers.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace wavecouple::cli {

using nlohmann::json;

enum ExitCode { exit_pass = 0, exit_fail = 1, exit_config = 2, exit_estimation = 3 };

inline const std::vector<std::string>& subcommands()
{
    static const std::vector<std::string> s{"simulate", "derivative", "ibp",        "log-harnack",
                                            "harnack",  "shift-harnack", "entropy", "energy",
                                            "expmoment", "gradient-report", "constants", "selftest"};
    return s;
}

struct Outcome {
    json results = json::object();
    std::string verdict = "report"; // pass, fail or report
    std::vector<std::string> table;  // human-readable lines for stdout
    std::map<std::string, std::string> csv; // file name -> contents
};

namespace detail {

inline json mc_json(const McEstimate& m)
{
    return {{"mean", m.mean},
            {"stderr", m.std_error},
            {"n_samples", m.n_samples},
            {"n_excluded", m.n_excluded},
            {"ci95", {m.ci_low(), m.ci_high()}},
            {"flagged", m.flagged()}};
}

inline std::string fmt(double v)
{
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

inline std::string line(const std::string& label, double v, double se = -1.0)
{
    std::ostringstream s;
    s << std::left << std::setw(28) << label << ' ' << std::setw(14) << fmt(v);
    if (se >= 0.0) s << " +- " << fmt(se);
    return s.str();
}

inline std::string csv_num(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

inline void flatten(const json& j, const std::string& prefix, std::ostringstream& out)
{
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else {
        out << prefix << ',' << j.dump() << '\n';
    }
}

inline void set_verdict(Outcome& o, bool pass) { o.verdict = pass ? "pass" : "fail"; }

inline bool linear(const Experiment& ex) { return ex.model.nonlinearity.is_linear(); }

inline bool has_closed_form(const TestFunctional& g)
{
    return g.kind() == FunctionalKind::constant || g.kind() == FunctionalKind::exp_linear ||
           g.kind() == FunctionalKind::quadratic;
}

inline State direction_state(const ResolvedExperiment& r) { return State(r.h1, r.h2); }

inline BoundContext bound_context(const Experiment& ex, double C_abs)
{
    return BoundContext{&ex.model.space, &ex.model.nonlinearity, &ex.model.noise, C_abs};
}

inline json psi_json(const PsiBreakdown& p)
{
    return {{"psi", p.psi},           {"phi", p.phi},       {"remainder", p.remainder},
            {"T_used", p.T_used},     {"energy", p.energy}, {"K1_used", p.K1_used},
            {"K1_substituted", p.K1_substituted},
            {"norm_sigma0", p.norms.n_sigma0}, {"norm_sigma0_half", p.norms.n_sigma0_half}, {"norm_half", p.norms.n_half}};
}

inline json gamma_json(const GammaBreakdown& g)
{
    return {{"T0", std::isfinite(g.T0) ? json(g.T0) : json("inf")},
            {"T_used", g.T_used},
            {"log_gamma", g.log_gamma},
            {"gamma", g.gamma},
            {"K", g.K},
            {"c_tilde_sq", g.c_tilde_sq},
            {"energy", g.energy},
            {"branch", g.branch}};
}

/// 1/2 int_0^T |sigma^{-1}(kappa psi + damping phi + f)|^2 dt by composite Simpson.
inline double continuous_quadratic(const Experiment& ex, const CouplingControls& cc, std::size_t panels = 2000)
{
    const LinearDrift d = LinearDrift::of(ex.model);
    const auto& sigma = ex.model.noise.sigma;
    const double T = cc.horizon();
    auto integrand = [&](double t) {
        const auto c = cc.eval(t);
        double s = 0.0;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            const double e = (d.kappa * c.psi[i] + d.damping * c.phi[i] + c.f[i]) / sigma[i];
            s += e * e;
        }
        return s;
    };
    const double h = T / static_cast<double>(panels);
    double acc = integrand(0.0) + integrand(T);
    for (std::size_t k = 1; k < panels; ++k) acc += (k % 2 ? 4.0 : 2.0) * integrand(static_cast<double>(k) * h);
    return 0.5 * acc * h / 3.0;
}

} // namespace detail

// ---------------------------------------------------------------------------

inline Outcome cmd_simulate(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, r.h1, r.h2, 1.0);
    cc.set_corrupt_phi_sign(cfg.corrupt_phi);
    const auto cp = coupled_simulate(ex.model, ex.grid, ex.scheme, r.z0, cc, ex.seed, 0, ex.guard);
    Outcome o;
    const std::size_t n = ex.space().modes();
    std::ostringstream path, prof;
    path << "t,mode,X,Y,X_tilde,Y_tilde,log_weight\n";
    prof << "t,mode,psi,phi,f\n";
    for (std::size_t k = 0; k < cp.path.states.size(); ++k) {
        const double t = cp.path.times[k];
        const auto c = cc.eval(t);
        for (std::size_t i = 0; i < n; ++i) {
            path << detail::csv_num(t) << ',' << i + 1 << ',' << detail::csv_num(cp.path.states[k].x[i]) << ','
                 << detail::csv_num(cp.path.states[k].y[i]) << ',' << detail::csv_num(cp.coupled.states[k].x[i]) << ','
                 << detail::csv_num(cp.coupled.states[k].y[i]) << ',' << detail::csv_num(cp.acc.log_weight_path[k])
                 << '\n';
            prof << detail::csv_num(t) << ',' << i + 1 << ',' << detail::csv_num(c.psi[i]) << ','
                 << detail::csv_num(c.phi[i]) << ',' << detail::csv_num(c.f[i]) << '\n';
        }
    }
    o.csv["path.csv"] = path.str();
    o.csv["profiles.csv"] = prof.str();
    o.results["blown_up"] = cp.blown_up;
    o.results["blowup_step"] = cp.path.blowup_step;
    o.results["steps_recorded"] = cp.path.states.size();
    o.results["log_weight"] = cp.acc.log_weight;
    o.results["quadratic"] = cp.acc.quadratic;
    if (cp.blown_up) throw EstimationFailure("simulate: path left the guard ball at step " + std::to_string(cp.path.blowup_step));
    const auto err = coupling_identity_error(ex.model, ex.grid, ex.scheme, r.z0, cc, ex.seed, 0, ex.guard);
    o.results["difference_identity_sup_error"] = err.sup_error;
    o.results["terminal_mismatch"] = err.terminal_mismatch;
    o.table.push_back(detail::line("log R_T", cp.acc.log_weight));
    o.table.push_back(detail::line("difference identity error", err.sup_error));
    o.table.push_back(detail::line("terminal mismatch", err.terminal_mismatch));
    return o;
}

inline Outcome cmd_derivative(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const auto cmp = compare_derivatives(r.g, r.z0, r.h1, r.h2, ex, cfg.fd_eps);
    Outcome o;
    o.results["bismut"] = detail::mc_json(cmp.bismut.estimate);
    o.results["bismut_raw"] = detail::mc_json(cmp.bismut.raw);
    o.results["fd"] = detail::mc_json(cmp.fd);
    o.results["sign"] = {{"derived", cmp.derived_sign}, {"resolved", cmp.bismut.sign}, {"decisive", cmp.sign_decisive}};
    const double tol = kSigmaBand * cmp.combined_stderr + cfg.fd_eps * cfg.fd_eps * (1.0 + std::abs(cmp.fd.mean));
    bool pass = std::abs(cmp.difference) <= tol;
    o.results["difference"] = cmp.difference;
    o.results["tolerance"] = tol;
    o.table.push_back(detail::line("bismut", cmp.bismut.estimate.mean, cmp.bismut.estimate.std_error));
    o.table.push_back(detail::line("finite difference", cmp.fd.mean, cmp.fd.std_error));
    if (detail::linear(ex) && detail::has_closed_form(r.g)) {
        const double oracle = gaussian_directional_derivative(ex.model, ex.grid, ex.scheme, r.z0,
                                                              detail::direction_state(r), r.g);
        const bool ob = std::abs(cmp.bismut.estimate.mean - oracle) <= kSigmaBand * cmp.bismut.estimate.std_error;
        const bool of = std::abs(cmp.fd.mean - oracle) <=
                        kSigmaBand * cmp.fd.std_error + cfg.fd_eps * cfg.fd_eps * (1.0 + std::abs(oracle));
        o.results["gaussian_oracle"] = oracle;
        o.results["oracle_agrees_bismut"] = ob;
        o.results["oracle_agrees_fd"] = of;
        o.table.push_back(detail::line("gaussian oracle", oracle));
        pass = pass && ob && of;
    }
    o.table.push_back("sign resolved to " + std::to_string(cmp.bismut.sign) + " (derived " +
                      std::to_string(cmp.derived_sign) + ")");
    detail::set_verdict(o, pass);
    return o;
}

inline Outcome cmd_ibp(const ExperimentConfig&, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const auto res = ibp_estimator(r.g, r.z0, r.h1, r.h2, ex);
    Outcome o;
    o.results["lhs"] = detail::mc_json(res.lhs);
    o.results["rhs"] = detail::mc_json(res.rhs);
    o.results["rhs_raw"] = detail::mc_json(res.rhs_raw);
    o.results["sign"] = {{"derived", res.derived_sign}, {"resolved", res.sign}, {"decisive", res.sign_decisive}};
    o.results["combined_stderr"] = res.combined_stderr;
    bool pass = std::abs(res.lhs.mean - res.rhs.mean) <= kSigmaBand * res.combined_stderr;
    o.table.push_back(detail::line("E grad_h g(Z_T)", res.lhs.mean, res.lhs.std_error));
    o.table.push_back(detail::line("s E g(Z_T) M", res.rhs.mean, res.rhs.std_error));
    if (detail::linear(ex) && detail::has_closed_form(r.g)) {
        const auto law = discrete_law(ex.model, ex.grid, ex.scheme, r.z0);
        const double oracle = gaussian_expected_gradient(law, detail::direction_state(r), r.g);
        const bool a = std::abs(res.lhs.mean - oracle) <= kSigmaBand * res.lhs.std_error;
        const bool b = std::abs(res.rhs.mean - oracle) <= kSigmaBand * res.rhs.std_error;
        o.results["gaussian_oracle"] = oracle;
        o.results["oracle_agrees_lhs"] = a;
        o.results["oracle_agrees_rhs"] = b;
        o.table.push_back(detail::line("gaussian oracle", oracle));
        pass = pass && a && b;
    }
    detail::set_verdict(o, pass);
    return o;
}

inline Outcome cmd_log_harnack(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto v = check_log_harnack(r.g, r.z0, r.h1, r.h2, r.ex, cfg.C_abs);
    Outcome o;
    o.results = {{"lhs", v.lhs},
                 {"lhs_stderr", v.lhs_se},
                 {"log_pt_g", v.log_pt_g},
                 {"entropy", v.entropy},
                 {"rhs_entropy", v.rhs_entropy},
                 {"rhs_entropy_stderr", v.rhs_entropy_se},
                 {"rhs_closed_form", v.rhs_closed_form},
                 {"combined_stderr", v.combined_se},
                 {"pass_entropy", v.pass_entropy},
                 {"pass_closed_form", v.pass_closed_form},
                 {"psi", detail::psi_json(v.psi)},
                 {"n_excluded", v.n_excluded}};
    o.table.push_back(detail::line("P_T log g(z + h)", v.lhs, v.lhs_se));
    o.table.push_back(detail::line("log P_T g + E R log R", v.rhs_entropy, v.rhs_entropy_se));
    o.table.push_back(detail::line("log P_T g + Psi", v.rhs_closed_form));
    detail::set_verdict(o, v.pass_entropy);
    return o;
}

inline Outcome cmd_harnack(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto v = check_harnack_power(r.g, r.z0, r.h1, r.h2, cfg.p, r.ex, cfg.C_abs);
    Outcome o;
    o.results = {{"p", v.p},
                 {"T_used", v.T_used},
                 {"lhs", v.lhs},
                 {"lhs_stderr", v.lhs_se},
                 {"pt_gp", v.pt_gp},
                 {"pt_gp_stderr", v.pt_gp_se},
                 {"rhs", v.rhs},
                 {"rhs_stderr", v.rhs_se},
                 {"rel_combined_stderr", v.rel_combined_se},
                 {"pass", v.pass},
                 {"weight_power", v.weight_power},
                 {"weight_power_stderr", v.weight_power_se},
                 {"rhs_weight", v.rhs_weight},
                 {"pass_weight", v.pass_weight},
                 {"gamma", detail::gamma_json(v.gamma)},
                 {"n_excluded", v.n_excluded}};
    o.table.push_back(detail::line("T used", v.T_used));
    o.table.push_back(detail::line("(P_T g(z + h))^p", v.lhs, v.lhs_se));
    o.table.push_back(detail::line("P_T g^p(z) Gamma", v.rhs, v.rhs_se));
    o.table.push_back(detail::line("P_T g^p(z) (E R^q)^(p-1)", v.rhs_weight));
    detail::set_verdict(o, v.pass);
    return o;
}

inline Outcome cmd_shift_harnack(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const ShiftMode mode = cfg.shift_mode == "power" ? ShiftMode::power : ShiftMode::log;
    const auto v = check_shift_harnack(r.g, r.z0, r.h1, r.h2, r.ex, mode, cfg.p, cfg.C_abs);
    Outcome o;
    o.results = {{"mode", cfg.shift_mode},
                 {"lhs", v.lhs},
                 {"rhs", v.rhs},
                 {"rhs_closed_form", v.rhs_closed_form},
                 {"entropy", v.entropy},
                 {"diff_stderr", v.diff_se},
                 {"pass", v.pass},
                 {"pass_closed_form", v.pass_closed_form},
                 {"n_excluded", v.n_excluded}};
    if (mode == ShiftMode::log) o.results["psi"] = detail::psi_json(v.psi);
    else o.results["gamma"] = detail::gamma_json(v.gamma);
    o.table.push_back(detail::line("lhs", v.lhs));
    o.table.push_back(detail::line("rhs", v.rhs, v.diff_se));
    o.table.push_back(detail::line("rhs closed form", v.rhs_closed_form));
    detail::set_verdict(o, v.pass);
    return o;
}

inline Outcome cmd_entropy(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, r.h1, r.h2, 1.0);
    const auto e = entropy_of_weight(r.z0, cc, ex);
    const auto psi = psi_bound(detail::bound_context(ex, cfg.C_abs), r.z0 + detail::direction_state(r), r.h1, r.h2,
                               ex.grid.T);
    Outcome o;
    o.results["entropy"] = detail::mc_json(e);
    o.results["psi"] = detail::psi_json(psi);
    bool pass = e.mean <= psi.psi + kSigmaBand * e.std_error;
    o.results["below_psi"] = pass;
    o.table.push_back(detail::line("E R log R", e.mean, e.std_error));
    o.table.push_back(detail::line("Psi", psi.psi));
    if (detail::linear(ex) && !ex.model.noise.silent()) {
        const double q = detail::continuous_quadratic(ex, cc);
        const bool agree = std::abs(e.mean - q) <= kSigmaBand * e.std_error;
        o.results["deterministic_integrand_oracle"] = q;
        o.results["oracle_agrees"] = agree;
        o.table.push_back(detail::line("1/2 int |eta|^2 (quadrature)", q));
        pass = pass && agree;
    }
    detail::set_verdict(o, pass);
    return o;
}

inline Outcome cmd_energy(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, r.h1, r.h2, 1.0);
    const double s = cfg.energy_s > 0.0 ? cfg.energy_s : ex.grid.T;
    const auto v = check_energy_moment(r.z0, cc, cfg.energy_p, s, ex);
    Outcome o;
    o.results = {{"p", v.p}, {"s", v.s}, {"lhs", v.lhs}, {"lhs_stderr", v.lhs_se}, {"rhs", v.rhs},
                 {"pass", v.pass}, {"n_excluded", v.n_excluded}};
    o.table.push_back(detail::line("int E[R E^p] dr", v.lhs, v.lhs_se));
    o.table.push_back(detail::line("bound", v.rhs));
    detail::set_verdict(o, v.pass);
    return o;
}

inline Outcome cmd_expmoment(const ExperimentConfig&, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const CouplingControls cc(ex.space(), ProfileKind::forward, ex.grid.T, r.h1, r.h2, 1.0);
    const auto v = check_exp_moment(r.z0, cc, ex);
    Outcome o;
    o.results = {{"theta", v.theta}, {"lhs", v.lhs}, {"lhs_stderr", v.lhs_se}, {"rhs", v.rhs},
                 {"tail_share", v.tail_share}, {"tail_threshold", kTailShareThreshold}, {"tail_ok", v.tail_ok},
                 {"pass_bound", v.pass_bound}, {"n_excluded", v.n_excluded}};
    bool pass = v.pass;
    o.table.push_back(detail::line("E_Q exp(theta int E)", v.lhs, v.lhs_se));
    o.table.push_back(detail::line("bound", v.rhs));
    o.table.push_back(detail::line("largest sample share", v.tail_share));
    if (detail::linear(ex)) {
        const double oracle = gaussian_exp_energy_moment(ex.model, ex.grid, ex.scheme, r.z0, v.theta);
        const bool agree = std::abs(v.lhs - oracle) <= kSigmaBand * v.lhs_se;
        o.results["cameron_martin_oracle"] = oracle;
        o.results["oracle_agrees"] = agree;
        o.table.push_back(detail::line("Gaussian oracle", oracle));
        pass = pass && agree;
    }
    o.results["pass"] = pass;
    detail::set_verdict(o, pass);
    return o;
}

inline Outcome cmd_gradient_report(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const auto rep = gradient_estimate_report(r.g, r.z0, ex, cfg.basket_modes, cfg.fd_eps);
    Outcome o;
    o.results["pt_g"] = rep.pt_g;
    o.results["variance"] = rep.variance;
    o.results["energy"] = rep.energy;
    o.results["normalizer"] = rep.normalizer;
    o.results["max_ratio"] = rep.max_ratio;
    const bool oracle = detail::linear(ex) && detail::has_closed_form(r.g);
    std::optional<GaussianLaw> law;
    if (oracle) {
        law = discrete_law(ex.model, ex.grid, ex.scheme, r.z0);
        o.results["gaussian_variance"] = gaussian_variance(*law, r.g);
    }
    json rows = json::array();
    std::ostringstream csv;
    csv << "direction,derivative,stderr,ratio\n";
    for (const auto& e : rep.entries) {
        json row = {{"direction", e.label}, {"derivative", detail::mc_json(e.derivative)}, {"ratio", e.ratio}};
        if (oracle) row["gaussian_derivative"] = gaussian_directional_derivative(ex.model, ex.grid, ex.scheme, r.z0, e.direction, r.g);
        rows.push_back(row);
        csv << e.label << ',' << detail::csv_num(e.derivative.mean) << ',' << detail::csv_num(e.derivative.std_error)
            << ',' << detail::csv_num(e.ratio) << '\n';
        o.table.push_back(detail::line("ratio " + e.label, e.ratio));
    }
    o.results["directions"] = rows;
    o.csv["gradient_report.csv"] = csv.str();
    o.table.push_back(detail::line("max ratio", rep.max_ratio));
    return o;
}

inline Outcome cmd_constants(const ExperimentConfig&, const ResolvedExperiment& r)
{
    const auto& nl = r.ex.model.nonlinearity;
    const auto grid = default_condition_grid();
    const auto cert = certify_constants(nl, grid);
    const auto rep = check_conditions(nl, grid);
    Outcome o;
    auto kjson = [](const GrowthConstants& k) {
        return json{{"K1", k.K1}, {"K2", k.K2}, {"K3", k.K3}, {"K4", k.K4}, {"K5", k.K5},
                    {"C1", k.C1}, {"C2", k.C2}, {"C3", k.C3}, {"C4", k.C4}, {"C5", k.C5}};
    };
    o.results["family"] = to_string(nl.family);
    o.results["rho"] = nl.rho;
    o.results["constants_in_use"] = kjson(nl.k);
    o.results["certified"] = kjson(cert);
    o.results["conditions_pass"] = rep.passed;
    o.results["evaluations"] = rep.evaluations;
    json viol = json::array();
    for (const auto& v : rep.worst_violations)
        viol.push_back({{"condition", v.condition}, {"r1", v.r1}, {"r2", v.r2}, {"lhs", v.lhs}, {"rhs", v.rhs}});
    o.results["violations"] = viol;
    const char* names[] = {"K1", "K2", "K3", "K4", "K5", "C1", "C2", "C3", "C4", "C5"};
    const double used[] = {nl.k.K1, nl.k.K2, nl.k.K3, nl.k.K4, nl.k.K5, nl.k.C1, nl.k.C2, nl.k.C3, nl.k.C4, nl.k.C5};
    const double cer[] = {cert.K1, cert.K2, cert.K3, cert.K4, cert.K5, cert.C1, cert.C2, cert.C3, cert.C4, cert.C5};
    for (int i = 0; i < 10; ++i)
        o.table.push_back(std::string(names[i]) + "  in use " + detail::fmt(used[i]) + "  certified " + detail::fmt(cer[i]));
    for (const auto& v : rep.worst_violations) o.table.push_back("violated: " + v.condition);
    detail::set_verdict(o, rep.passed);
    return o;
}

// ---------------------------------------------------------------------------
// selftest

struct InvariantResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

inline Outcome cmd_selftest(const ExperimentConfig& cfg, const ResolvedExperiment& r)
{
    const auto& ex = r.ex;
    const auto& space = ex.space();
    const std::size_t n = space.modes();
    std::vector<InvariantResult> out;
    auto record = [&](const std::string& name, bool pass, const std::string& d) { out.push_back({name, pass, d}); };
    const auto h = detail::direction_state(r);
    const double hnorm = direction_norms(space, ex.model.noise, r.h1, r.h2).n_half;

    { // spectral round trip
        Field u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = 1.0 / static_cast<double>(i + 1) - 0.3 * (i % 2);
        const Field back = from_grid(space, to_grid(space, u));
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - u[i]));
        record("spectral_roundtrip", err <= 1e-10, "max error " + detail::fmt(err));
    }
    { // the wave group preserves the energy norm
        const auto [x, y] = group_action(space, 0.7, r.h1, r.h2);
        const double a = energy_norm_sq(space, State(r.h1, r.h2));
        const double b = energy_norm_sq(space, State(x, y));
        record("group_isometry", std::abs(a - b) <= 1e-10 * (1.0 + a), "norms " + detail::fmt(a) + " " + detail::fmt(b));
    }
    for (const auto kind : {ProfileKind::forward, ProfileKind::shift}) {
        CouplingControls cc(space, kind, ex.grid.T, r.h1, r.h2, 1.0);
        cc.set_corrupt_phi_sign(cfg.corrupt_phi);
        const std::string tag = to_string(kind);
        // endpoints
        const auto c0 = cc.eval(0.0);
        const auto cT = cc.eval(ex.grid.T);
        const bool fwd = kind == ProfileKind::forward;
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            err = std::max(err, std::abs(c0.psi[i] - (fwd ? r.h1[i] : 0.0)));
            err = std::max(err, std::abs(c0.phi[i] - (fwd ? r.h2[i] : 0.0)));
            err = std::max(err, std::abs(cT.psi[i] - (fwd ? 0.0 : r.h1[i])));
            err = std::max(err, std::abs(cT.phi[i] - (fwd ? 0.0 : r.h2[i])));
        }
        record("control_endpoints_" + tag, err <= 1e-9, "max error " + detail::fmt(err));
        // psi' = phi, phi' = -A psi + f
        double ode = 0.0, scale = 1.0;
        const double d = 1e-5 * ex.grid.T;
        for (double frac : {0.3, 0.55, 0.8}) {
            const double t = frac * ex.grid.T;
            const auto m = cc.eval(t);
            const auto p = cc.eval(t + d);
            const auto q = cc.eval(t - d);
            for (std::size_t i = 0; i < n; ++i) {
                const double dpsi = (p.psi[i] - q.psi[i]) / (2 * d);
                const double dphi = (p.phi[i] - q.phi[i]) / (2 * d);
                ode = std::max(ode, std::abs(dpsi - m.phi[i]));
                ode = std::max(ode, std::abs(dphi - (-space.eigenvalues()[i] * m.psi[i] + m.f[i])));
                scale = std::max({scale, std::abs(m.phi[i]), space.eigenvalues()[i] * std::abs(m.psi[i])});
            }
        }
        record("control_ode_" + tag, ode <= 1e-4 * scale, "max residual " + detail::fmt(ode));
        // realized difference against the continuous controls, and its O(dt) convergence
        const auto e1 = coupling_identity_error(ex.model, ex.grid, ex.scheme, r.z0, cc, ex.seed, 0, ex.guard);
        TimeGrid fine{ex.grid.T, 2 * ex.grid.n_steps};
        const auto e2 = coupling_identity_error(ex.model, fine, ex.scheme, r.z0, cc, ex.seed, 0, ex.guard);
        const double C = 50.0 * (1.0 + hnorm);
        const bool small = e1.sup_error <= 1e-12;
        const double ratio = small ? 2.0 : e1.sup_error / std::max(e2.sup_error, 1e-300);
        const bool ok = e2.sup_error <= C * fine.dt() && (small || (ratio >= 1.6 && ratio <= 2.4));
        record("difference_identity_" + tag, ok,
               "sup error " + detail::fmt(e1.sup_error) + " -> " + detail::fmt(e2.sup_error) + " (ratio " +
                   detail::fmt(ratio) + ")");
    }
    { // martingale property of the weight
        for (const auto kind : {ProfileKind::forward, ProfileKind::shift}) {
            if (ex.model.noise.silent()) break;
            const CouplingControls cc(space, kind, ex.grid.T, r.h1, r.h2, 1.0);
            const DiscreteControls dc(cc, space, ex.grid, ex.scheme);
            SampleOptions opts;
            opts.coupling = &dc;
            const auto s = ex.engine().run(r.z0, opts, ex.n_traj, streams::main);
            const auto m = wavecouple::detail::summarize_samples(s, [](const TrajectorySample& t) { return std::exp(t.log_weight); });
            record(std::string("martingale_") + to_string(kind), std::abs(m.mean - 1.0) <= kSigmaBand * m.std_error,
                   "E R = " + detail::fmt(m.mean) + " +- " + detail::fmt(m.std_error));
        }
    }
    const double rho = ex.model.nonlinearity.rho;
    const bool derivative_ok = !(rho > 1.0 && rho < 2.0) || ex.allow_rough_rho || ex.model.nonlinearity.is_zero();
    if (derivative_ok && !ex.model.noise.silent()) {
        const auto cmp = compare_derivatives(r.g, r.z0, r.h1, r.h2, ex, cfg.fd_eps);
        const double tol = kSigmaBand * cmp.combined_stderr + cfg.fd_eps * cfg.fd_eps * (1.0 + std::abs(cmp.fd.mean));
        record("bismut_vs_fd", std::abs(cmp.difference) <= tol,
               "bismut " + detail::fmt(cmp.bismut.estimate.mean) + " fd " + detail::fmt(cmp.fd.mean) + " sign " +
                   std::to_string(cmp.bismut.sign));
    }
    if (!ex.model.noise.silent()) { // Gaussian oracles on the l = 0 model sharing space, noise and grid
        Experiment lin = ex;
        lin.model.nonlinearity = NonlinearityParams::linear_zero();
        State wq(n);
        for (std::size_t i = 0; i < std::min<std::size_t>(n, 2); ++i) wq.x[i] = wq.y[i] = 1.0;
        const auto gq = TestFunctional::quadratic(wq);
        const auto law = discrete_law(lin.model, lin.grid, lin.scheme, r.z0);
        const auto pt = estimate_pt(gq, r.z0, lin);
        const double e = gaussian_expectation(law, gq);
        record("oracle_pt_quadratic", std::abs(pt.mean - e) <= kSigmaBand * pt.std_error,
               "mc " + detail::fmt(pt.mean) + " oracle " + detail::fmt(e));
        State a(n);
        a.x[0] = 0.3;
        if (n > 1) a.x[1] = 0.1;
        a.y[0] = 0.1;
        const auto ge = TestFunctional::exp_linear(a, 1.0);
        const auto b = bismut_gradient(ge, r.z0, r.h1, r.h2, lin, -1);
        const double d = gaussian_directional_derivative(lin.model, lin.grid, lin.scheme, r.z0, h, ge);
        record("oracle_bismut_exp_linear", std::abs(b.estimate.mean - d) <= kSigmaBand * b.estimate.std_error,
               "mc " + detail::fmt(b.estimate.mean) + " oracle " + detail::fmt(d));
        const auto ibp = ibp_estimator(gq, r.z0, r.h1, r.h2, lin);
        const double gi = gaussian_expected_gradient(law, h, gq);
        record("oracle_ibp_quadratic",
               std::abs(ibp.lhs.mean - ibp.rhs.mean) <= kSigmaBand * ibp.combined_stderr &&
                   std::abs(ibp.rhs.mean - gi) <= kSigmaBand * ibp.rhs.std_error,
               "lhs " + detail::fmt(ibp.lhs.mean) + " rhs " + detail::fmt(ibp.rhs.mean) + " oracle " + detail::fmt(gi));
        const CouplingControls cc(space, ProfileKind::forward, lin.grid.T, r.h1, r.h2, 1.0);
        const auto ent = entropy_of_weight(r.z0, cc, lin);
        const double q = detail::continuous_quadratic(lin, cc);
        record("entropy_identity", std::abs(ent.mean - q) <= kSigmaBand * ent.std_error + 0.02 * q,
               "E R log R " + detail::fmt(ent.mean) + " 1/2 int |eta|^2 " + detail::fmt(q));
    }

    Outcome o;
    json arr = json::array();
    bool all = true;
    for (const auto& i : out) {
        arr.push_back({{"invariant", i.name}, {"pass", i.pass}, {"detail", i.detail}});
        o.table.push_back(std::string(i.pass ? "PASS " : "FAIL ") + i.name + ": " + i.detail);
        all = all && i.pass;
    }
    o.results["invariants"] = arr;
    detail::set_verdict(o, all);
    return o;
}

// ---------------------------------------------------------------------------

using Command = Outcome (*)(const ExperimentConfig&, const ResolvedExperiment&);

inline Command find_command(const std::string& name)
{
    static const std::map<std::string, Command> table{
        {"simulate", cmd_simulate},       {"derivative", cmd_derivative},
        {"ibp", cmd_ibp},                 {"log-harnack", cmd_log_harnack},
        {"harnack", cmd_harnack},         {"shift-harnack", cmd_shift_harnack},
        {"entropy", cmd_entropy},         {"energy", cmd_energy},
        {"expmoment", cmd_expmoment},     {"gradient-report", cmd_gradient_report},
        {"constants", cmd_constants},     {"selftest", cmd_selftest}};
    const auto it = table.find(name);
    return it == table.end() ? nullptr : it->second;
}

inline std::string usage()
{
    std::string s = "usage: wavecouple <subcommand> [--config FILE] [--set section.key=value]... [--seed N]\n"
                    "                  [--threads N] [--out-dir DIR] [--format json|csv|both]\n"
                    "subcommands:";
    for (const auto& c : subcommands()) s += " " + c;
    return s + "\n";
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Runs one subcommand. Arguments exclude the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"wavecouple"};
    std::string sub, config_path, out_dir = ".", format = "json";
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    app.add_option("subcommand", sub, "subcommand")->required();
    app.add_option("--config", config_path, "INI config file");
    app.add_option("--set", sets, "override, section.key=value")->take_all();
    app.add_option("--seed", seed, "master seed (overrides mc.seed)");
    app.add_option("--threads", threads, "worker threads (default: WAVECOUPLE_THREADS or 1)");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--format", format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help() << usage();
        return exit_pass;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n' << usage();
        return exit_config;
    }
    const Command cmd = find_command(sub);
    if (!cmd) {
        err << "unknown subcommand '" << sub << "'\n" << usage();
        return exit_config;
    }

    ExperimentConfig cfg;
    std::optional<ResolvedExperiment> resolved;
    try {
        cfg = parse_config(config_path.empty() ? std::string() : read_file(config_path), sets);
        if (seed) cfg.seed = *seed;
        resolved.emplace(validate_config(cfg, resolve_threads(threads)));
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    }

    Outcome o;
    int code = exit_pass;
    try {
        o = cmd(cfg, *resolved);
        code = o.verdict == "fail" ? exit_fail : exit_pass;
    } catch (const EstimationFailure& e) {
        err << "estimation failure: " << e.what() << '\n';
        return exit_estimation;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const DomainError& e) {
        err << "precondition violated: " << e.what() << '\n';
        return exit_config;
    } catch (const UnsupportedFunctional& e) {
        err << "unsupported functional: " << e.what() << '\n';
        return exit_config;
    }

    json doc;
    doc["subcommand"] = sub;
    doc["config_hash"] = config_hash(cfg);
    doc["seed"] = cfg.seed;
    doc["config"] = config_to_json(cfg);
    doc["results"] = o.results;
    doc["verdict"] = o.verdict;
    doc["exit_code"] = code;

    out << sub << "  [config " << config_hash(cfg) << ", seed " << cfg.seed << "]\n";
    for (const auto& l : o.table) out << "  " << l << '\n';
    out << "verdict: " << o.verdict << '\n';

    try {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path dir(out_dir);
        if (format == "json" || format == "both") {
            std::ofstream f(dir / (sub + ".json"), std::ios::binary);
            f << doc.dump(2) << '\n';
        }
        if (format == "csv" || format == "both") {
            std::ostringstream flat;
            flat << "key,value\n";
            detail::flatten(doc, "", flat);
            std::ofstream(dir / (sub + ".csv"), std::ios::binary) << flat.str();
            for (const auto& [name, body] : o.csv) std::ofstream(dir / name, std::ios::binary) << body;
        }
    } catch (const std::exception& e) {
        err << "cannot write outputs: " << e.what() << '\n';
        return exit_config;
    }
    return code;
}

inline int run(int argc, char** argv)
{
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args));
}

} // namespace wavecouple::cli
