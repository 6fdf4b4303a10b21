#pragma once

// Per-trajectory sampling shared by every estimator. One simulation yields the
// terminal state, the coupled terminal state, the Girsanov log-weight, the
// Bismut Ito sum and time-integrated energy functionals, so several
// functionals can be evaluated on the same paths.

#include <wavecouple/coupling.hpp>
#include <wavecouple/statistics.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

namespace wavecouple {

struct SampleOptions {
    /// Drives the second path and the weight. The second path starts at
    /// z0 + epsilon D_0.
    const DiscreteControls* coupling = nullptr;
    double epsilon = 1.0;
    /// Controls for the Ito sum along the first path.
    const DiscreteControls* score = nullptr;
    /// sum_{k < energy_steps} E(Z_k)^p dt for each p, on the second path if
    /// coupled, else on the first.
    std::vector<double> energy_powers;
    std::size_t energy_steps = 0;
};

struct TrajectorySample {
    State terminal;
    State terminal_coupled;
    double log_weight = 0.0;
    /// log R at step energy_steps (weight matched to the energy horizon).
    double log_weight_energy = 0.0;
    double quadratic = 0.0;
    double ito = 0.0;
    std::vector<double> energy_integrals;
    bool excluded = false;
};

class SamplingEngine {
public:
    SamplingEngine(const Model& model, TimeGrid grid, Scheme scheme, double guard, std::uint64_t seed,
                   unsigned threads = 1)
        : model_(&model), grid_(grid), scheme_(scheme), guard_(guard), seed_(seed), threads_(threads),
          prop_((validate_grid(model.space, grid, scheme), model.space), scheme, grid.dt())
    {
    }

    const Model& model() const noexcept { return *model_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    Scheme scheme() const noexcept { return scheme_; }
    double guard() const noexcept { return guard_; }
    std::uint64_t seed() const noexcept { return seed_; }
    unsigned threads() const noexcept { return threads_; }
    const LinearPropagator& propagator() const noexcept { return prop_; }

    std::vector<TrajectorySample> run(const State& z0, const SampleOptions& opts, std::size_t n_traj,
                                      std::uint32_t stream = 0) const
    {
        return parallel_map<TrajectorySample>(n_traj, threads_,
                                              [&](std::size_t i) { return run_one(z0, opts, i, stream); });
    }

    TrajectorySample run_one(const State& z0, const SampleOptions& opts, std::uint64_t index,
                             std::uint32_t stream = 0) const
    {
        const Model& model = *model_;
        const SpectralSpace& space = model.space;
        const NonlinearityParams& nl = model.nonlinearity;
        const std::size_t n = space.modes();
        const std::size_t mg = space.grid_size();
        const double dt = grid_.dt();
        const double sdt = std::sqrt(dt);
        const double damp = model.damping;
        const auto& sigma = model.noise.sigma;
        const bool silent = model.noise.silent();
        const bool coupled = opts.coupling != nullptr;
        const bool scored = opts.score != nullptr && !silent;
        const double eps = opts.epsilon;
        const bool want_energy = !opts.energy_powers.empty();
        // l(r) = r or l = 0: everything stays in coefficient space.
        const bool linear = nl.is_zero() || (nl.family == NonlinearityFamily::klein_gordon && nl.rho == 1.0);
        const double lin_coef = nl.is_zero() ? 0.0 : 1.0;

        TrajectorySample out;
        out.energy_integrals.assign(opts.energy_powers.size(), 0.0);

        const LinearPropagator& prop = propagator();
        const NormalStream rng(seed_, stream, index);

        State z = z0;
        State zt;
        if (coupled) {
            zt = z0;
            const auto p0 = opts.coupling->psi(0);
            const auto q0 = opts.coupling->phi(0);
            for (std::size_t i = 0; i < n; ++i) {
                zt.x[i] += eps * p0[i];
                zt.y[i] += eps * q0[i];
            }
        }
        auto tripped = [&] {
            return detail::guard_tripped(space, z, guard_) || (coupled && detail::guard_tripped(space, zt, guard_));
        };
        if (tripped()) {
            out.excluded = true;
            return out;
        }

        std::vector<double> dW(n), lx(n), dl(n), lpsi(n);
        std::vector<double> xg, lxg, xtg, work;
        if (!linear) {
            xg.resize(mg);
            lxg.resize(mg);
            xtg.resize(mg);
            work.resize(mg);
        }
        const auto lam = space.eigenvalues();
        const double qw = space.quad_weight();

        for (std::size_t k = 0; k < grid_.n_steps; ++k) {
            rng.fill(static_cast<std::uint32_t>(k), dW);
            for (double& v : dW) v *= sdt;

            // l(X_k), and on the grid X~_k = X_k + eps psi_k.
            if (linear) {
                for (std::size_t i = 0; i < n; ++i) lx[i] = lin_coef * z.x[i];
            } else {
                space.to_grid(z.x.coeffs(), xg);
                apply_l(nl, xg, lxg);
                space.from_grid(lxg, lx);
                if (coupled) {
                    const auto pg = opts.coupling->psi_grid(k);
                    for (std::size_t m = 0; m < mg; ++m) xtg[m] = xg[m] + eps * pg[m];
                }
            }

            if (want_energy && k == opts.energy_steps) out.log_weight_energy = out.log_weight;
            if (want_energy && k < opts.energy_steps) {
                const State& e = coupled ? zt : z;
                double E = 0.0;
                for (std::size_t i = 0; i < n; ++i) E += lam[i] * e.x[i] * e.x[i] + e.y[i] * e.y[i];
                if (linear) {
                    double xx = 0.0;
                    for (std::size_t i = 0; i < n; ++i) xx += e.x[i] * e.x[i];
                    E += lin_coef * xx; // 2 J(x) = |x|^2 for l(r) = r
                } else {
                    const auto& g = coupled ? xtg : xg;
                    double J = 0.0;
                    for (std::size_t m = 0; m < mg; ++m) J += j_eval(nl, g[m]);
                    E += 2.0 * J * qw;
                }
                for (std::size_t q = 0; q < opts.energy_powers.size(); ++q) {
                    const double p = opts.energy_powers[q];
                    out.energy_integrals[q] += (p == 1.0 ? E : p == 2.0 ? E * E : std::pow(E, p)) * dt;
                }
            }

            if (coupled && !silent) {
                // l(X~_k) - l(X_k)
                if (linear) {
                    for (std::size_t i = 0; i < n; ++i) dl[i] = lin_coef * (zt.x[i] - z.x[i]);
                } else {
                    apply_l(nl, xtg, work);
                    for (std::size_t m = 0; m < mg; ++m) work[m] -= lxg[m];
                    space.from_grid(work, dl);
                }
                const auto fk = opts.coupling->f(k);
                double eta_dw = 0.0, eta_sq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double eta = dl[i] + damp * (zt.y[i] - z.y[i]) + eps * fk[i];
                    const double e = eta / sigma[i];
                    eta_dw += e * dW[i];
                    eta_sq += e * e;
                }
                out.log_weight -= eta_dw + 0.5 * eta_sq * dt;
                out.quadratic += eta_sq * dt;
            }
            if (scored) {
                const auto psik = opts.score->psi(k);
                if (linear) {
                    for (std::size_t i = 0; i < n; ++i) lpsi[i] = lin_coef * psik[i];
                } else {
                    const auto pg = opts.score->psi_grid(k);
                    apply_l_prime(nl, xg, work);
                    for (std::size_t m = 0; m < mg; ++m) work[m] *= pg[m];
                    space.from_grid(work, lpsi);
                }
                const auto phik = opts.score->phi(k);
                const auto fk = opts.score->f(k);
                double ito = 0.0;
                for (std::size_t i = 0; i < n; ++i) ito += (lpsi[i] + damp * phik[i] + fk[i]) / sigma[i] * dW[i];
                out.ito += ito;
            }

            // Shared drift -l(X_k) - damping Y_k; the coupled path adds eps f_k.
            const auto fk = coupled ? opts.coupling->f(k) : std::span<const double>{};
            if (coupled) {
                prop.apply(zt.x.coeffs(), zt.y.coeffs());
                for (std::size_t i = 0; i < n; ++i) {
                    zt.y[i] += (-lx[i] - damp * z.y[i] + eps * fk[i]) * dt + sigma[i] * dW[i];
                }
            }
            std::vector<double>& yprev = lpsi; // reuse: Y_k for the first path's damping term
            for (std::size_t i = 0; i < n; ++i) yprev[i] = z.y[i];
            prop.apply(z.x.coeffs(), z.y.coeffs());
            for (std::size_t i = 0; i < n; ++i) z.y[i] += (-lx[i] - damp * yprev[i]) * dt + sigma[i] * dW[i];

            if (tripped() || !std::isfinite(out.log_weight)) {
                out.excluded = true;
                return out;
            }
        }
        if (want_energy && opts.energy_steps >= grid_.n_steps) out.log_weight_energy = out.log_weight;
        out.terminal = std::move(z);
        if (coupled) out.terminal_coupled = std::move(zt);
        return out;
    }

private:
    const Model* model_;
    TimeGrid grid_;
    Scheme scheme_;
    double guard_;
    std::uint64_t seed_;
    unsigned threads_;
    LinearPropagator prop_;
};

/// Keep-mask for summarize().
inline std::vector<char> keep_mask(const std::vector<TrajectorySample>& s)
{
    std::vector<char> keep(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) keep[i] = s[i].excluded ? 0 : 1;
    return keep;
}

} // namespace wavecouple
