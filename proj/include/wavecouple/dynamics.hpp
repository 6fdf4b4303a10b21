#pragma once

// Time integration of the Galerkin-truncated damped stochastic wave equation
//   dX = Y dt,  dY = (-A X - l(X) - Y) dt + sigma dW,
// with diagonal noise in the sine basis and a blow-up guard.

#include <wavecouple/error.hpp>
#include <wavecouple/nonlinearity.hpp>
#include <wavecouple/random.hpp>
#include <wavecouple/spectral.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace wavecouple {

enum class Scheme { euler_maruyama, exp_euler };

inline const char* to_string(Scheme s)
{
    return s == Scheme::euler_maruyama ? "euler_maruyama" : "exp_euler";
}

/// Diagonal noise sigma e_j = sigma_j e_j with minorant sigma0 and the
/// constant lambda of sigma0_j sqrt(lambda_j) >= 1/lambda.
struct NoiseModel {
    std::vector<double> sigma;
    std::vector<double> sigma0;
    double lambda = 0.0;
    double op_norm = 0.0;    // max_j sigma_j
    double hs_norm_sq = 0.0; // sum_j sigma_j^2

    std::size_t modes() const noexcept { return sigma.size(); }

    /// True when sigma == 0 (deterministic runs); such a model has no
    /// Girsanov weight.
    bool silent() const noexcept
    {
        return std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; });
    }

    /// sigma_j = sigma0_j = lambda_j^{-1/2}; lambda = 1.
    static NoiseModel inv_sqrt_lambda(const SpectralSpace& space, double scale = 1.0)
    {
        std::vector<double> s(space.modes());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = scale / space.frequencies()[i];
        return diagonal(space, s, s);
    }

    /// sigma_j = scale * j^{-alpha}.
    static NoiseModel power_decay(const SpectralSpace& space, double alpha, double scale = 1.0)
    {
        std::vector<double> s(space.modes());
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = scale * std::pow(static_cast<double>(i + 1), -alpha);
        return diagonal(space, s, s);
    }

    /// sigma = 0.
    static NoiseModel silent_model(const SpectralSpace& space)
    {
        NoiseModel m;
        m.sigma.assign(space.modes(), 0.0);
        m.sigma0.assign(space.modes(), 0.0);
        return m;
    }

    /// Explicit diagonal. An empty sigma0 means sigma0 = sigma; a missing
    /// lambda is set to the smallest admissible value max_j 1/(sigma0_j sqrt(lambda_j)).
    static NoiseModel diagonal(const SpectralSpace& space, std::vector<double> sigma, std::vector<double> sigma0 = {},
                               std::optional<double> lambda = std::nullopt)
    {
        if (sigma0.empty()) sigma0 = sigma;
        if (sigma.size() != space.modes() || sigma0.size() != space.modes()) {
            throw DomainError("NoiseModel: need one sigma and sigma0 per mode (" + std::to_string(space.modes()) + ")");
        }
        NoiseModel m;
        double need = 0.0;
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            if (!(sigma0[i] > 0.0) || !std::isfinite(sigma[i]) || !std::isfinite(sigma0[i])) {
                throw DomainError("NoiseModel: sigma0_" + std::to_string(i + 1) + " must be positive and finite");
            }
            if (sigma[i] < sigma0[i]) {
                throw DomainError("NoiseModel: sigma_" + std::to_string(i + 1) + " < sigma0_" + std::to_string(i + 1));
            }
            need = std::max(need, 1.0 / (sigma0[i] * space.frequencies()[i]));
            m.op_norm = std::max(m.op_norm, sigma[i]);
            m.hs_norm_sq += sigma[i] * sigma[i];
        }
        if (lambda) {
            for (std::size_t i = 0; i < sigma.size(); ++i) {
                if (sigma0[i] * space.frequencies()[i] < 1.0 / *lambda - 1e-12) {
                    throw DomainError("NoiseModel: sigma0_j sqrt(lambda_j) >= 1/lambda fails at j=" +
                                      std::to_string(i + 1));
                }
            }
            m.lambda = *lambda;
        } else {
            m.lambda = need;
        }
        m.sigma = std::move(sigma);
        m.sigma0 = std::move(sigma0);
        return m;
    }

    NoiseModel scaled(double a) const
    {
        NoiseModel m = *this;
        for (double& s : m.sigma) s *= a;
        for (double& s : m.sigma0) s *= a;
        m.op_norm *= a;
        m.hs_norm_sq *= a * a;
        if (a != 0.0) m.lambda /= a;
        return m;
    }
};

/// Everything that defines the equation being integrated.
struct Model {
    SpectralSpace space;
    NonlinearityParams nonlinearity;
    NoiseModel noise;
    /// Coefficient of the -Y drift; 1 for the physical equation, 0 only in tests.
    double damping = 1.0;

    Model(SpectralSpace s, NonlinearityParams nl, NoiseModel nm, double damping_ = 1.0)
        : space(std::move(s)), nonlinearity(std::move(nl)), noise(std::move(nm)), damping(damping_)
    {
        if (noise.modes() != space.modes()) throw DomainError("Model: noise and space mode counts differ");
    }
};

struct TimeGrid {
    double T = 1.0;
    std::size_t n_steps = 1000;

    double dt() const noexcept { return T / static_cast<double>(n_steps); }
    double time(std::size_t k) const noexcept { return T * static_cast<double>(k) / static_cast<double>(n_steps); }

    /// Grid with step at most dt_max over [0, T].
    static TimeGrid covering(double T, double dt_max)
    {
        const auto n = static_cast<std::size_t>(std::ceil(T / dt_max - 1e-9));
        return TimeGrid{T, std::max<std::size_t>(n, 1)};
    }
};

/// Throws DomainError unless the grid is admissible for the scheme. Explicit
/// Euler on the damped oscillator contracts iff lambda_N dt < 1; we require
/// lambda_N dt <= 1/2, which implies dt sqrt(lambda_N) <= 1/2.
inline void validate_grid(const SpectralSpace& space, const TimeGrid& grid, Scheme scheme)
{
    if (!(grid.T > 0.0) || !std::isfinite(grid.T)) throw DomainError("TimeGrid: horizon must be positive");
    if (grid.n_steps == 0) throw DomainError("TimeGrid: need at least one step");
    if (scheme == Scheme::euler_maruyama) {
        const double lam_n = space.eigenvalues().back();
        if (grid.dt() * lam_n > 0.5 + 1e-12) {
            throw DomainError("TimeGrid: euler_maruyama needs dt * lambda_N <= 0.5 (dt=" + std::to_string(grid.dt()) +
                              ", lambda_N=" + std::to_string(lam_n) + ")");
        }
    }
}

/// Linear part of one step, shared by the state update and by the exact
/// recursion of coupling differences. Euler: (x, y) -> (x + y dt, y - lambda x dt);
/// exponential: exact rotation by the free wave group over dt.
class LinearPropagator {
public:
    LinearPropagator(const SpectralSpace& space, Scheme scheme, double dt) : scheme_(scheme), dt_(dt)
    {
        const auto w = space.frequencies();
        a_.resize(w.size());
        b_.resize(w.size());
        c_.resize(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (scheme == Scheme::euler_maruyama) {
                a_[i] = dt;                        // x += a y
                b_[i] = -w[i] * w[i] * dt;         // y += b x
            } else {
                c_[i] = std::cos(w[i] * dt);
                a_[i] = std::sin(w[i] * dt) / w[i];
                b_[i] = -w[i] * std::sin(w[i] * dt);
            }
        }
    }

    Scheme scheme() const noexcept { return scheme_; }
    double dt() const noexcept { return dt_; }

    void apply(std::span<double> x, std::span<double> y) const noexcept
    {
        const std::size_t n = x.size();
        if (scheme_ == Scheme::euler_maruyama) {
            for (std::size_t i = 0; i < n; ++i) {
                const double x0 = x[i];
                x[i] = x0 + a_[i] * y[i];
                y[i] = y[i] + b_[i] * x0;
            }
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double x0 = x[i];
                const double y0 = y[i];
                x[i] = c_[i] * x0 + a_[i] * y0;
                y[i] = b_[i] * x0 + c_[i] * y0;
            }
        }
    }

private:
    Scheme scheme_;
    double dt_;
    std::vector<double> a_, b_, c_;
};

/// Pseudospectral evaluation of l(X), l'(X) u and J(X) with private
/// workspace. One instance per thread.
class NonlinearEvaluator {
public:
    NonlinearEvaluator(const SpectralSpace& space, const NonlinearityParams& params)
        : space_(&space), params_(&params), grid_(space.grid_size()), work_(space.grid_size()),
          aux_(space.grid_size())
    {
    }

    /// out = coefficients of l(X). Exact copy for l(r) = r.
    void l_of(std::span<const double> x, std::span<double> out)
    {
        if (params_->is_zero()) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        if (params_->family == NonlinearityFamily::klein_gordon && params_->rho == 1.0) {
            std::copy(x.begin(), x.end(), out.begin());
            return;
        }
        space_->to_grid(x, grid_);
        apply_l(*params_, grid_, work_);
        space_->from_grid(work_, out);
    }

    /// Coefficients of l(X) using grid values of X already loaded by load_grid().
    void l_of_loaded(std::span<const double> x, std::span<double> out)
    {
        if (params_->is_zero()) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        if (params_->family == NonlinearityFamily::klein_gordon && params_->rho == 1.0) {
            std::copy(x.begin(), x.end(), out.begin());
            return;
        }
        apply_l(*params_, grid_, work_);
        space_->from_grid(work_, out);
    }

    void load_grid(std::span<const double> x) { space_->to_grid(x, grid_); }
    std::span<const double> loaded_grid() const noexcept { return grid_; }

    /// J(X) from the loaded grid values.
    double J_loaded() const
    {
        if (params_->is_zero()) return 0.0;
        double acc = 0.0;
        for (double v : grid_) acc += j_eval(*params_, v);
        return acc * space_->quad_weight();
    }

    /// out = coefficients of l'(X) * u, with u given on the grid. X must be loaded.
    void l_prime_times_loaded(std::span<const double> u_grid, std::span<const double> u_coeffs, std::span<double> out)
    {
        if (params_->is_zero()) {
            std::fill(out.begin(), out.end(), 0.0);
            return;
        }
        if (params_->family == NonlinearityFamily::klein_gordon && params_->rho == 1.0) {
            std::copy(u_coeffs.begin(), u_coeffs.end(), out.begin());
            return;
        }
        apply_l_prime(*params_, grid_, aux_);
        for (std::size_t m = 0; m < aux_.size(); ++m) aux_[m] *= u_grid[m];
        space_->from_grid(aux_, out);
    }

private:
    const SpectralSpace* space_;
    const NonlinearityParams* params_;
    std::vector<double> grid_;
    std::vector<double> work_;
    std::vector<double> aux_;
};

/// Stateful integrator core: owns the workspaces of one trajectory.
class Stepper {
public:
    Stepper(const Model& model, Scheme scheme, double dt)
        : model_(&model), linear_(model.space, scheme, dt), eval_(model.space, model.nonlinearity),
          forcing_(model.space.modes()), lx_(model.space.modes())
    {
    }

    const Model& model() const noexcept { return *model_; }
    const LinearPropagator& linear() const noexcept { return linear_; }
    NonlinearEvaluator& evaluator() noexcept { return eval_; }

    /// forcing = -l(X) - damping Y at the current state.
    std::span<const double> compute_forcing(const State& z)
    {
        eval_.l_of(z.x.coeffs(), lx_);
        const double g = model_->damping;
        for (std::size_t i = 0; i < lx_.size(); ++i) forcing_[i] = -lx_[i] - g * z.y[i];
        return forcing_;
    }

    /// Same, reusing X grid values loaded into the evaluator.
    std::span<const double> compute_forcing_loaded(const State& z)
    {
        eval_.l_of_loaded(z.x.coeffs(), lx_);
        const double g = model_->damping;
        for (std::size_t i = 0; i < lx_.size(); ++i) forcing_[i] = -lx_[i] - g * z.y[i];
        return forcing_;
    }

    /// Last l(X) computed by compute_forcing*.
    std::span<const double> last_l() const noexcept { return lx_; }

    /// z <- L(z) + (0, (forcing + extra_scale * extra) dt + sigma dW).
    void advance(State& z, std::span<const double> forcing, std::span<const double> dW,
                 std::span<const double> extra = {}, double extra_scale = 0.0) const
    {
        linear_.apply(z.x.coeffs(), z.y.coeffs());
        const double dt = linear_.dt();
        const auto& sigma = model_->noise.sigma;
        const std::size_t n = z.modes();
        if (extra.empty()) {
            for (std::size_t i = 0; i < n; ++i) z.y[i] += forcing[i] * dt + sigma[i] * dW[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) z.y[i] += (forcing[i] + extra_scale * extra[i]) * dt + sigma[i] * dW[i];
        }
    }

private:
    const Model* model_;
    LinearPropagator linear_;
    NonlinearEvaluator eval_;
    std::vector<double> forcing_;
    std::vector<double> lx_;
};

/// One step of either scheme. Euler-Maruyama:
///   X+ = X + Y dt,  Y+ = Y + (-A X - l(X) - Y + extra) dt + sigma dW.
/// Exponential Euler: exact free-wave rotation over dt, then the damping,
/// nonlinearity, extra drift and noise as an Euler correction.
inline State step(const Model& model, Scheme scheme, const State& z, std::span<const double> dW, double dt,
                  const Field* extra_drift = nullptr)
{
    if (!z.finite()) throw InvalidField("step: non-finite state");
    if (dW.size() != z.modes()) throw InvalidField("step: increment length mismatch");
    Stepper stepper(model, scheme, dt);
    State next = z;
    const auto forcing = stepper.compute_forcing(z);
    if (extra_drift) {
        stepper.advance(next, forcing, dW, extra_drift->coeffs(), 1.0);
    } else {
        stepper.advance(next, forcing, dW);
    }
    return next;
}

/// dW_k for k = 0..n_steps-1, each of length `modes` with variance dt per entry.
inline std::vector<std::vector<double>> draw_increments(std::uint64_t seed, std::uint64_t trajectory,
                                                        const TimeGrid& grid, std::size_t modes,
                                                        std::uint32_t stream = 0)
{
    const NormalStream rng(seed, stream, trajectory);
    const double sdt = std::sqrt(grid.dt());
    std::vector<std::vector<double>> out(grid.n_steps, std::vector<double>(modes));
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        rng.fill(static_cast<std::uint32_t>(k), out[k]);
        for (double& v : out[k]) v *= sdt;
    }
    return out;
}

struct PathRecord {
    std::vector<double> times;
    std::vector<State> states;
    /// Second path of a coupled run (empty otherwise).
    std::vector<State> coupled;
    /// dW_k applied between times[k] and times[k+1].
    std::vector<std::vector<double>> increments;
    /// Running Girsanov log-weight at each recorded time (coupled runs only).
    std::vector<double> log_weight;
    bool blown_up = false;
    std::size_t blowup_step = 0;
};

namespace detail {

inline bool guard_tripped(const SpectralSpace& space, const State& z, double guard)
{
    if (!z.finite()) return true;
    const double n = guard_norm(space, z);
    return !std::isfinite(n) || n >= guard;
}

} // namespace detail

/// Integrates one trajectory and records it. Stops at the first recorded
/// time with ||X||_{1/2} + ||Y|| >= guard (or a non-finite state) and
/// reports blown_up.
inline PathRecord simulate(const Model& model, const TimeGrid& grid, Scheme scheme, const State& z0,
                           std::uint64_t seed, std::uint64_t index, double guard,
                           const std::function<Field(double)>& extra_drift = {}, std::uint32_t stream = 0)
{
    validate_grid(model.space, grid, scheme);
    detail::require_field(model.space, z0.x, "simulate");
    detail::require_field(model.space, z0.y, "simulate");
    PathRecord rec;
    Stepper stepper(model, scheme, grid.dt());
    const NormalStream rng(seed, stream, index);
    const double sdt = std::sqrt(grid.dt());
    State z = z0;
    rec.times.push_back(0.0);
    rec.states.push_back(z);
    if (detail::guard_tripped(model.space, z, guard)) {
        rec.blown_up = true;
        return rec;
    }
    std::vector<double> dW(model.space.modes());
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        rng.fill(static_cast<std::uint32_t>(k), dW);
        for (double& v : dW) v *= sdt;
        const auto forcing = stepper.compute_forcing(z);
        if (extra_drift) {
            const Field e = extra_drift(grid.time(k));
            stepper.advance(z, forcing, dW, e.coeffs(), 1.0);
        } else {
            stepper.advance(z, forcing, dW);
        }
        rec.increments.push_back(dW);
        rec.times.push_back(grid.time(k + 1));
        rec.states.push_back(z);
        if (detail::guard_tripped(model.space, z, guard)) {
            rec.blown_up = true;
            rec.blowup_step = k + 1;
            return rec;
        }
    }
    return rec;
}

} // namespace wavecouple
