#pragma once

// Additive-control coupling: the deterministic controls (psi, phi, f), the
// coupled pair driven by shared noise and the Girsanov weight that turns the
// second path into a solution started from the shifted point.

#include <wavecouple/dynamics.hpp>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

namespace wavecouple {

enum class ProfileKind { forward, shift };

inline const char* to_string(ProfileKind k) { return k == ProfileKind::forward ? "forward" : "shift"; }

/// The cubic v(t) = 1 - 3s^2 + 2s^3 (forward) or u(t) = 3s^2 - 2s^3 (shift), s = t/T.
struct ControlProfile {
    ProfileKind kind = ProfileKind::forward;
    double T = 1.0;

    double value(double t) const noexcept
    {
        const double s = t / T;
        const double u = 3.0 * s * s - 2.0 * s * s * s;
        return kind == ProfileKind::forward ? 1.0 - u : u;
    }
    double d1(double t) const noexcept
    {
        const double s = t / T;
        const double du = (6.0 * s - 6.0 * s * s) / T;
        return kind == ProfileKind::forward ? -du : du;
    }
    double d2(double t) const noexcept
    {
        const double s = t / T;
        const double ddu = (6.0 - 12.0 * s) / (T * T);
        return kind == ProfileKind::forward ? -ddu : ddu;
    }
};

struct ControlValues {
    Field psi;
    Field phi;
    Field f;
};

/// psi = v S h, phi = psi', f = psi'' + A psi = v'' S h + 2 v' S' h, where
/// S(t)h is the free wave group applied to (h1, h2) (forward) or the
/// backward group from T (shift), so that the terminal identities hold.
class CouplingControls {
public:
    CouplingControls(const SpectralSpace& space, ProfileKind kind, double T, Field h1, Field h2, double epsilon = 1.0)
        : profile_{kind, T}, h1_(std::move(h1)), h2_(std::move(h2)), epsilon_(epsilon),
          w_(space.frequencies().begin(), space.frequencies().end())
    {
        if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("CouplingControls: horizon must be positive");
        detail::require_field(space, h1_, "CouplingControls");
        detail::require_field(space, h2_, "CouplingControls");
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("CouplingControls: epsilon must lie in [0, 1]");
    }

    const ControlProfile& profile() const noexcept { return profile_; }
    ProfileKind kind() const noexcept { return profile_.kind; }
    double horizon() const noexcept { return profile_.T; }
    const Field& h1() const noexcept { return h1_; }
    const Field& h2() const noexcept { return h2_; }
    double epsilon() const noexcept { return epsilon_; }
    std::size_t modes() const noexcept { return w_.size(); }

    /// Test hook: negate phi in eval(), as the literal "-v'" reading would.
    void set_corrupt_phi_sign(bool on) noexcept { corrupt_phi_ = on; }
    bool corrupt_phi_sign() const noexcept { return corrupt_phi_; }

    /// Unscaled controls at time t (multiply by epsilon for the coupling).
    ControlValues eval(double t) const
    {
        ControlValues out{Field(modes()), Field(modes()), Field(modes())};
        eval_into(t, out.psi.coeffs(), out.phi.coeffs(), out.f.coeffs());
        return out;
    }

    void eval_into(double t, std::span<double> psi, std::span<double> phi, std::span<double> f) const
    {
        const double T = profile_.T;
        if (!(t >= -1e-12 * T && t <= T * (1.0 + 1e-12))) throw DomainError("CouplingControls: t outside [0, T]");
        const double v = profile_.value(t);
        const double v1 = profile_.d1(t);
        const double v2 = profile_.d2(t);
        const bool fwd = profile_.kind == ProfileKind::forward;
        const double tau = fwd ? t : T - t;
        for (std::size_t i = 0; i < w_.size(); ++i) {
            const double c = std::cos(w_[i] * tau);
            const double s = std::sin(w_[i] * tau);
            double S, dS;
            if (fwd) {
                S = c * h1_[i] + s / w_[i] * h2_[i];
                dS = -w_[i] * s * h1_[i] + c * h2_[i];
            } else {
                S = c * h1_[i] - s / w_[i] * h2_[i];
                dS = w_[i] * s * h1_[i] + c * h2_[i];
            }
            psi[i] = v * S;
            phi[i] = v1 * S + v * dS;
            if (corrupt_phi_) phi[i] = -phi[i];
            f[i] = v2 * S + 2.0 * v1 * dS;
        }
    }

private:
    ControlProfile profile_;
    Field h1_;
    Field h2_;
    double epsilon_;
    std::vector<double> w_;
    bool corrupt_phi_ = false;
};

/// The controls as seen by the time-stepper. Because the coupled drift is
/// deterministic, the realized difference Z~_k - Z_k is epsilon times a
/// deterministic sequence D_k = (psi^d_k, phi^d_k) obeying the scheme's
/// linear recursion D_{k+1} = L(D_k) + (0, f(t_k) dt), with D_0 = (h1, h2)
/// (forward) or 0 (shift). It differs from (psi(t_k), phi(t_k)) by O(dt).
class DiscreteControls {
public:
    DiscreteControls(const CouplingControls& controls, const SpectralSpace& space, const TimeGrid& grid, Scheme scheme)
        : n_(space.modes()), steps_(grid.n_steps)
    {
        if (std::abs(controls.horizon() - grid.T) > 1e-12 * grid.T) {
            throw DomainError("DiscreteControls: control horizon differs from the grid horizon");
        }
        psi_.assign((steps_ + 1) * n_, 0.0);
        phi_.assign((steps_ + 1) * n_, 0.0);
        f_.assign(steps_ * n_, 0.0);
        std::vector<double> x(n_, 0.0), y(n_, 0.0), dummy_psi(n_), dummy_phi(n_);
        if (controls.kind() == ProfileKind::forward) {
            for (std::size_t i = 0; i < n_; ++i) {
                x[i] = controls.h1()[i];
                y[i] = controls.h2()[i];
            }
        }
        const LinearPropagator lin(space, scheme, grid.dt());
        for (std::size_t k = 0; k <= steps_; ++k) {
            std::copy(x.begin(), x.end(), psi_.begin() + static_cast<std::ptrdiff_t>(k * n_));
            std::copy(y.begin(), y.end(), phi_.begin() + static_cast<std::ptrdiff_t>(k * n_));
            if (k == steps_) break;
            auto fk = std::span<double>(f_).subspan(k * n_, n_);
            controls.eval_into(grid.time(k), dummy_psi, dummy_phi, fk);
            lin.apply(x, y);
            for (std::size_t i = 0; i < n_; ++i) y[i] += fk[i] * grid.dt();
        }
        m_ = space.grid_size();
        psi_grid_.resize((steps_ + 1) * m_);
        for (std::size_t k = 0; k <= steps_; ++k) {
            space.to_grid(psi(k), std::span<double>(psi_grid_).subspan(k * m_, m_));
        }
    }

    std::size_t modes() const noexcept { return n_; }
    std::size_t steps() const noexcept { return steps_; }
    std::span<const double> psi(std::size_t k) const noexcept { return std::span<const double>(psi_).subspan(k * n_, n_); }
    std::span<const double> phi(std::size_t k) const noexcept { return std::span<const double>(phi_).subspan(k * n_, n_); }
    std::span<const double> f(std::size_t k) const noexcept { return std::span<const double>(f_).subspan(k * n_, n_); }
    /// psi^d_k on the physical grid.
    std::span<const double> psi_grid(std::size_t k) const noexcept
    {
        return std::span<const double>(psi_grid_).subspan(k * m_, m_);
    }

    /// Realized terminal offset D_N (close to 0 forward, to (h1, h2) shift).
    State terminal() const
    {
        State d(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            d.x[i] = psi_[steps_ * n_ + i];
            d.y[i] = phi_[steps_ * n_ + i];
        }
        return d;
    }

private:
    std::size_t n_;
    std::size_t steps_;
    std::size_t m_ = 0;
    std::vector<double> psi_, phi_, f_, psi_grid_;
};

/// Running log R = -sum <sigma^{-1} eta_k, dW_k> - 1/2 sum |sigma^{-1} eta_k|^2 dt and
/// the Bismut Ito sum, both with left-point integrands.
struct GirsanovAccumulator {
    double log_weight = 0.0;
    double quadratic = 0.0; // sum |sigma^{-1} eta_k|^2 dt
    double ito = 0.0;       // sum <sigma^{-1} (l'(X) psi + phi + f), dW>
    std::vector<double> log_weight_path;

    void add_weight_term(double eta_dot_dW, double eta_sq_dt) noexcept
    {
        log_weight -= eta_dot_dW + 0.5 * eta_sq_dt;
        quadratic += eta_sq_dt;
    }
};

/// R = exp(log_weight).
inline double weight(const GirsanovAccumulator& acc, bool blown_up = false)
{
    if (blown_up) throw EstimationFailure("weight: trajectory blew up and is excluded");
    return std::exp(acc.log_weight);
}

struct CoupledPath {
    PathRecord path;     // Z, from z0 (or z0 - offset, see coupled_simulate)
    PathRecord coupled;  // Z~ (forward) or Z^ (shift)
    GirsanovAccumulator acc;
    bool blown_up = false;
};

/// Simulates the first path Z from z0 and the second path, which starts at
/// z0 + eps (h1, h2) (forward) or z0 (shift) and has drift
/// -A X~ - l(X) - damping Y + eps f. Both consume identical dW_k. The weight
/// uses eta_k = l(X~_k) - l(X_k) + damping (Y~_k - Y_k) + eps f(t_k); the
/// Ito sum uses l'(X_k) psi_k + damping phi_k + f(t_k), with (psi_k, phi_k)
/// the discrete controls.
inline CoupledPath coupled_simulate(const Model& model, const TimeGrid& grid, Scheme scheme, const State& z0,
                                    const CouplingControls& controls, std::uint64_t seed, std::uint64_t index,
                                    double guard, std::uint32_t stream = 0)
{
    validate_grid(model.space, grid, scheme);
    detail::require_field(model.space, z0.x, "coupled_simulate");
    detail::require_field(model.space, z0.y, "coupled_simulate");
    const DiscreteControls dc(controls, model.space, grid, scheme);
    const double eps = controls.epsilon();
    const bool silent = model.noise.silent();
    const std::size_t n = model.space.modes();
    const auto& sigma = model.noise.sigma;
    const double dt = grid.dt();
    const double sdt = std::sqrt(dt);

    CoupledPath out;
    Stepper stepper(model, scheme, dt);
    NonlinearEvaluator tilde_eval(model.space, model.nonlinearity);
    const NormalStream rng(seed, stream, index);

    State z = z0;
    State zt = z0;
    if (controls.kind() == ProfileKind::forward) {
        for (std::size_t i = 0; i < n; ++i) {
            zt.x[i] += eps * controls.h1()[i];
            zt.y[i] += eps * controls.h2()[i];
        }
    }
    auto push = [&](double t) {
        out.path.times.push_back(t);
        out.path.states.push_back(z);
        out.coupled.times.push_back(t);
        out.coupled.states.push_back(zt);
        out.path.log_weight.push_back(out.acc.log_weight);
        out.acc.log_weight_path.push_back(out.acc.log_weight);
    };
    auto tripped = [&] {
        return detail::guard_tripped(model.space, z, guard) || detail::guard_tripped(model.space, zt, guard);
    };
    push(0.0);
    if (tripped()) {
        out.blown_up = out.path.blown_up = out.coupled.blown_up = true;
        return out;
    }

    std::vector<double> dW(n), ltilde(n), lpsi(n), psi_grid(model.space.grid_size());
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        rng.fill(static_cast<std::uint32_t>(k), dW);
        for (double& v : dW) v *= sdt;

        stepper.evaluator().load_grid(z.x.coeffs());
        const auto forcing = stepper.compute_forcing_loaded(z);
        const auto lx = stepper.last_l();

        if (!silent) {
            // l'(X_k) psi_k for the Ito sum.
            const auto psik = dc.psi(k);
            model.space.to_grid(psik, psi_grid);
            stepper.evaluator().l_prime_times_loaded(psi_grid, psik, lpsi);
            tilde_eval.l_of(zt.x.coeffs(), ltilde);
            const auto phik = dc.phi(k);
            const auto fk = dc.f(k);
            double eta_dw = 0.0, eta_sq = 0.0, ito = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double eta = ltilde[i] - lx[i] + model.damping * (zt.y[i] - z.y[i]) + eps * fk[i];
                const double e = eta / sigma[i];
                eta_dw += e * dW[i];
                eta_sq += e * e;
                ito += (lpsi[i] + model.damping * phik[i] + fk[i]) / sigma[i] * dW[i];
            }
            out.acc.add_weight_term(eta_dw, eta_sq * dt);
            out.acc.ito += ito;
        }

        stepper.advance(zt, forcing, dW, dc.f(k), eps);
        stepper.advance(z, forcing, dW);
        out.path.increments.push_back(dW);
        out.coupled.increments.push_back(dW);
        push(grid.time(k + 1));
        if (tripped() || !std::isfinite(out.acc.log_weight)) {
            out.blown_up = out.path.blown_up = out.coupled.blown_up = true;
            out.path.blowup_step = out.coupled.blowup_step = k + 1;
            return out;
        }
    }
    return out;
}

struct CouplingIdentityError {
    /// sup_k |X~_k - X_k - eps psi(t_k)|_{1/2} + |Y~_k - Y_k - eps phi(t_k)|
    double sup_error = 0.0;
    /// |X~_N - X_N - target| _{1/2} + |Y~_N - Y_N - target|, target 0 (forward) or eps h (shift)
    double terminal_mismatch = 0.0;
};

/// Compares one coupled path against the continuous controls.
inline CouplingIdentityError coupling_identity_error(const Model& model, const TimeGrid& grid, Scheme scheme,
                                                     const State& z0, const CouplingControls& controls,
                                                     std::uint64_t seed, std::uint64_t index = 0, double guard = 1e8)
{
    const auto cp = coupled_simulate(model, grid, scheme, z0, controls, seed, index, guard);
    if (cp.blown_up) throw EstimationFailure("coupling_identity_error: the coupled path blew up");
    const double eps = controls.epsilon();
    const std::size_t n = model.space.modes();
    CouplingIdentityError out;
    Field dx(n), dy(n);
    for (std::size_t k = 0; k <= grid.n_steps; ++k) {
        const auto c = controls.eval(grid.time(k));
        const State& a = cp.path.states[k];
        const State& b = cp.coupled.states[k];
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = b.x[i] - a.x[i] - eps * c.psi[i];
            dy[i] = b.y[i] - a.y[i] - eps * c.phi[i];
        }
        out.sup_error = std::max(out.sup_error, sobolev_norm(model.space, dx, 1.0) + sobolev_norm(model.space, dy, 0.0));
    }
    const State& a = cp.path.states.back();
    const State& b = cp.coupled.states.back();
    const bool shift = controls.kind() == ProfileKind::shift;
    for (std::size_t i = 0; i < n; ++i) {
        dx[i] = b.x[i] - a.x[i] - (shift ? eps * controls.h1()[i] : 0.0);
        dy[i] = b.y[i] - a.y[i] - (shift ? eps * controls.h2()[i] : 0.0);
    }
    out.terminal_mismatch = sobolev_norm(model.space, dx, 1.0) + sobolev_norm(model.space, dy, 0.0);
    return out;
}

} // namespace wavecouple
