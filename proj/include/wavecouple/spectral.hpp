#pragma once

// Dirichlet sine eigenbasis on (0, L), fractional Sobolev norms, the free
// wave group and the pseudospectral grid transform.

#include <wavecouple/error.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace wavecouple {

/// Eigenbasis coefficients of a function on the interval. Index i holds the
/// coefficient of mode j = i + 1.
class Field {
public:
    Field() = default;
    explicit Field(std::size_t modes) : c_(modes, 0.0) {}
    explicit Field(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

    /// a * e_j with j 1-based.
    static Field mode(std::size_t modes, std::size_t j, double a = 1.0)
    {
        if (j == 0 || j > modes) {
            throw DomainError("Field::mode: mode index " + std::to_string(j) + " outside 1.." +
                              std::to_string(modes));
        }
        Field f(modes);
        f.c_[j - 1] = a;
        return f;
    }

    std::size_t size() const noexcept { return c_.size(); }
    double operator[](std::size_t i) const noexcept { return c_[i]; }
    double& operator[](std::size_t i) noexcept { return c_[i]; }
    std::span<const double> coeffs() const noexcept { return c_; }
    std::span<double> coeffs() noexcept { return c_; }
    const std::vector<double>& vector() const noexcept { return c_; }

    bool finite() const noexcept
    {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return std::isfinite(v); });
    }

    bool is_zero() const noexcept
    {
        return std::all_of(c_.begin(), c_.end(), [](double v) { return v == 0.0; });
    }

    Field& operator+=(const Field& o)
    {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
        return *this;
    }
    Field& operator-=(const Field& o)
    {
        check_same(o);
        for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
        return *this;
    }
    Field& operator*=(double a) noexcept
    {
        for (double& v : c_) v *= a;
        return *this;
    }

    friend Field operator+(Field a, const Field& b) { return a += b; }
    friend Field operator-(Field a, const Field& b) { return a -= b; }
    friend Field operator*(Field a, double s) { return a *= s; }
    friend Field operator*(double s, Field a) { return a *= s; }
    friend bool operator==(const Field&, const Field&) = default;

private:
    void check_same(const Field& o) const
    {
        if (o.c_.size() != c_.size()) throw InvalidField("Field: mode count mismatch");
    }

    std::vector<double> c_;
};

/// Position/velocity pair Z = (X, Y) in H_0^1 x L^2.
struct State {
    Field x;
    Field y;

    State() = default;
    explicit State(std::size_t modes) : x(modes), y(modes) {}
    State(Field x_, Field y_) : x(std::move(x_)), y(std::move(y_))
    {
        if (x.size() != y.size()) throw InvalidField("State: position/velocity size mismatch");
    }

    std::size_t modes() const noexcept { return x.size(); }
    bool finite() const noexcept { return x.finite() && y.finite(); }

    State& operator+=(const State& o)
    {
        x += o.x;
        y += o.y;
        return *this;
    }
    State& operator-=(const State& o)
    {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    State& operator*=(double a) noexcept
    {
        x *= a;
        y *= a;
        return *this;
    }
    friend State operator+(State a, const State& b) { return a += b; }
    friend State operator-(State a, const State& b) { return a -= b; }
    friend State operator*(State a, double s) { return a *= s; }
    friend bool operator==(const State&, const State&) = default;
};

/// Sine eigenbasis e_j(xi) = sqrt(2/L) sin(j pi xi / L) of the Dirichlet
/// Laplacian on (0, L), truncated to N modes, with an M-point uniform grid
/// xi_m = m L / M (m = 0..M-1) for pointwise evaluation. The grid quadrature
/// (L/M) sum_m is exact for products of modes below M.
class SpectralSpace {
public:
    explicit SpectralSpace(std::size_t modes, double length = std::numbers::pi, std::size_t grid = 0)
        : n_(modes), length_(length), m_(grid == 0 ? 4 * modes : grid)
    {
        if (n_ == 0) throw DomainError("SpectralSpace: need at least one mode");
        if (!(length_ > 0.0) || !std::isfinite(length_)) {
            throw DomainError("SpectralSpace: interval length must be positive");
        }
        if (m_ < 2 * n_) {
            throw DomainError("SpectralSpace: grid size M=" + std::to_string(m_) + " must be >= 2N=" +
                              std::to_string(2 * n_));
        }
        lambdas_.resize(n_);
        roots_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            roots_[i] = static_cast<double>(i + 1) * std::numbers::pi / length_;
            lambdas_[i] = roots_[i] * roots_[i];
        }
        points_.resize(m_);
        table_.resize(m_ * n_);
        const double amp = std::sqrt(2.0 / length_);
        for (std::size_t m = 0; m < m_; ++m) {
            points_[m] = static_cast<double>(m) * length_ / static_cast<double>(m_);
            for (std::size_t i = 0; i < n_; ++i) {
                // Reduce the angle exactly in integers so that nodes such as L/2 hit the peaks.
                const std::size_t k = ((i + 1) * m) % (2 * m_);
                table_[m * n_ + i] =
                    amp * std::sin(std::numbers::pi * static_cast<double>(k) / static_cast<double>(m_));
            }
        }
        table_t_.resize(m_ * n_);
        for (std::size_t m = 0; m < m_; ++m)
            for (std::size_t i = 0; i < n_; ++i) table_t_[i * m_ + m] = table_[m * n_ + i];
    }

    std::size_t modes() const noexcept { return n_; }
    std::size_t grid_size() const noexcept { return m_; }
    double length() const noexcept { return length_; }

    /// lambda_j = (j pi / L)^2, increasing.
    std::span<const double> eigenvalues() const noexcept { return lambdas_; }
    /// sqrt(lambda_j).
    std::span<const double> frequencies() const noexcept { return roots_; }
    std::span<const double> grid_points() const noexcept { return points_; }
    double quad_weight() const noexcept { return length_ / static_cast<double>(m_); }

    /// Sharp 1-D embedding constant: sup|u| <= sqrt(L)/2 * ||u'||.
    double embedding_constant() const noexcept { return std::sqrt(length_) / 2.0; }

    /// e_j(xi), j 1-based.
    double basis(std::size_t j, double xi) const
    {
        return std::sqrt(2.0 / length_) * std::sin(static_cast<double>(j) * std::numbers::pi * xi / length_);
    }

    void to_grid(std::span<const double> coeffs, std::span<double> values) const
    {
        if (coeffs.size() != n_ || values.size() != m_) throw InvalidField("to_grid: length mismatch");
        std::fill(values.begin(), values.end(), 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double* col = &table_t_[i * m_];
            const double c = coeffs[i];
            for (std::size_t m = 0; m < m_; ++m) values[m] += col[m] * c;
        }
    }

    void from_grid(std::span<const double> values, std::span<double> coeffs) const
    {
        if (coeffs.size() != n_ || values.size() != m_) throw InvalidField("from_grid: length mismatch");
        std::fill(coeffs.begin(), coeffs.end(), 0.0);
        for (std::size_t m = 0; m < m_; ++m) {
            const double* row = &table_[m * n_];
            const double v = values[m];
            for (std::size_t i = 0; i < n_; ++i) coeffs[i] += row[i] * v;
        }
        const double w = quad_weight();
        for (double& c : coeffs) c *= w;
    }

private:
    std::size_t n_;
    double length_;
    std::size_t m_;
    std::vector<double> lambdas_;
    std::vector<double> roots_;
    std::vector<double> points_;
    std::vector<double> table_;   // M x N, row-major, includes sqrt(2/L)
    std::vector<double> table_t_; // its transpose
};

namespace detail {

inline void require_field(const SpectralSpace& space, const Field& u, const char* where)
{
    if (u.size() != space.modes()) {
        throw InvalidField(std::string(where) + ": field has " + std::to_string(u.size()) + " modes, space has " +
                           std::to_string(space.modes()));
    }
    if (!u.finite()) throw InvalidField(std::string(where) + ": non-finite coefficient");
}

} // namespace detail

/// ||A^{theta/2} u|| = (sum_j lambda_j^theta u_j^2)^{1/2}, theta in [-1, 2].
inline double sobolev_norm(const SpectralSpace& space, const Field& u, double theta)
{
    if (!(theta >= -1.0 && theta <= 2.0)) throw DomainError("sobolev_norm: theta must lie in [-1, 2]");
    detail::require_field(space, u, "sobolev_norm");
    const auto lam = space.eigenvalues();
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double w = theta == 0.0 ? 1.0 : theta == 1.0 ? lam[i] : std::pow(lam[i], theta);
        acc += w * u[i] * u[i];
    }
    return std::sqrt(acc);
}

/// ||X||_{1/2} + ||Y||, the quantity watched by the blow-up guard.
inline double guard_norm(const SpectralSpace& space, const State& z)
{
    return sobolev_norm(space, z.x, 1.0) + sobolev_norm(space, z.y, 0.0);
}

/// Squared energy norm ||X||_{1/2}^2 + ||Y||^2.
inline double energy_norm_sq(const SpectralSpace& space, const State& z)
{
    const auto lam = space.eigenvalues();
    double acc = 0.0;
    for (std::size_t i = 0; i < z.modes(); ++i) acc += lam[i] * z.x[i] * z.x[i] + z.y[i] * z.y[i];
    return acc;
}

/// Free wave group applied to (h1, h2) at time t, mode by mode:
/// (cos(wt) h1 + sin(wt)/w h2, -w sin(wt) h1 + cos(wt) h2), w = sqrt(lambda_j).
inline std::pair<Field, Field> group_action(const SpectralSpace& space, double t, const Field& h1, const Field& h2)
{
    detail::require_field(space, h1, "group_action");
    detail::require_field(space, h2, "group_action");
    const auto w = space.frequencies();
    Field a(space.modes());
    Field b(space.modes());
    for (std::size_t i = 0; i < space.modes(); ++i) {
        const double c = std::cos(w[i] * t);
        const double s = std::sin(w[i] * t);
        a[i] = c * h1[i] + s / w[i] * h2[i];
        b[i] = -w[i] * s * h1[i] + c * h2[i];
    }
    return {std::move(a), std::move(b)};
}

inline std::vector<double> to_grid(const SpectralSpace& space, const Field& u)
{
    if (u.size() != space.modes()) throw InvalidField("to_grid: length mismatch");
    std::vector<double> values(space.grid_size());
    space.to_grid(u.coeffs(), values);
    return values;
}

inline Field from_grid(const SpectralSpace& space, std::span<const double> values)
{
    if (values.size() != space.grid_size()) throw InvalidField("from_grid: length mismatch");
    Field u(space.modes());
    space.from_grid(values, u.coeffs());
    return u;
}

/// max |u| over the physical grid.
inline double sup_norm(const SpectralSpace& space, const Field& u)
{
    const auto values = to_grid(space, u);
    double best = 0.0;
    for (double v : values) best = std::max(best, std::abs(v));
    return best;
}

} // namespace wavecouple
