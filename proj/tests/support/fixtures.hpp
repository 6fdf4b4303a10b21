#pragma once

#include <wavecouple/wavecouple.hpp>

#include <gtest/gtest.h>

namespace fx {

using namespace wavecouple;

inline Model model(std::size_t n, NonlinearityParams nl, double sigma_scale = 1.0)
{
    SpectralSpace space(n);
    NoiseModel noise = NoiseModel::inv_sqrt_lambda(space, sigma_scale);
    return Model(space, std::move(nl), std::move(noise));
}

inline Experiment experiment(std::size_t n, NonlinearityParams nl, double T, std::size_t steps, std::size_t traj,
                             Scheme scheme = Scheme::exp_euler, std::uint64_t seed = 7)
{
    return Experiment{model(n, std::move(nl)), TimeGrid{T, steps}, scheme, traj, seed, 1e8, 1, false};
}

inline State state(std::size_t n, std::vector<double> x, std::vector<double> y = {})
{
    State z(n);
    for (std::size_t i = 0; i < x.size(); ++i) z.x[i] = x[i];
    for (std::size_t i = 0; i < y.size(); ++i) z.y[i] = y[i];
    return z;
}

inline Field field(std::size_t n, std::vector<double> c)
{
    c.resize(n, 0.0);
    return Field(std::move(c));
}

/// |a - b| <= k * se, with a readable failure message.
inline ::testing::AssertionResult within(double a, double b, double se, double k = 4.0)
{
    if (std::abs(a - b) <= k * se) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << a << " vs " << b << " differ by " << std::abs(a - b) << " > " << k
                                         << " * " << se;
}

} // namespace fx
