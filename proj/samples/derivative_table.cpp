// Bismut formula against central finite differences for rho = 1, 2, 3 and,
// for the linear equation, against the exact Gaussian derivative.

#include <wavecouple/wavecouple.hpp>

#include <cstdio>

using namespace wavecouple;

int main()
{
    const SpectralSpace space(6);
    State z0(space.modes());
    z0.x[0] = 0.4;
    Field h1(space.modes()), h2(space.modes());
    h1[0] = 0.2;
    h2[0] = 0.1;
    State a(space.modes());
    a.x[0] = 0.5;
    a.y[0] = 0.2;
    const auto g = TestFunctional::exp_linear(a);

    std::printf("%-12s %12s %10s %12s %10s %12s\n", "model", "bismut", "stderr", "fd", "stderr", "exact");
    for (const auto& nl : {NonlinearityParams::linear_zero(), NonlinearityParams::klein_gordon(1.0),
                           NonlinearityParams::klein_gordon(2.0), NonlinearityParams::klein_gordon(3.0)}) {
        Experiment ex{Model(space, nl, NoiseModel::inv_sqrt_lambda(space)), TimeGrid{1.0, 128},
                      Scheme::euler_maruyama, 4000, 11};
        const auto c = compare_derivatives(g, z0, h1, h2, ex);
        char exact[32] = "-";
        if (nl.is_linear()) {
            std::snprintf(exact, sizeof exact, "%.5f",
                          gaussian_directional_derivative(ex.model, ex.grid, ex.scheme, z0, State(h1, h2), g));
        }
        char name[32];
        std::snprintf(name, sizeof name, "%s %.0f", nl.is_zero() ? "l=0" : "rho", nl.rho);
        std::printf("%-12s %12.5f %10.5f %12.5f %10.5f %12s\n", name, c.bismut.estimate.mean,
                    c.bismut.estimate.std_error, c.fd.mean, c.fd.std_error, exact);
    }
}
