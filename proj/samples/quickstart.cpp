// Simulate the cubic Klein-Gordon equation on 8 modes, estimate P_T g and
// check the martingale property of the coupling weight.

#include <wavecouple/wavecouple.hpp>

#include <cstdio>

using namespace wavecouple;

int main()
{
    const SpectralSpace space(8);
    Model model(space, NonlinearityParams::klein_gordon(3.0), NoiseModel::inv_sqrt_lambda(space));
    Experiment ex{model, TimeGrid{1.0, 256}, Scheme::euler_maruyama, 5000, 2024};

    State z0(space.modes());
    z0.x[0] = 0.5;
    State a(space.modes());
    a.x[0] = 0.3;
    const auto g = TestFunctional::exp_linear(a);

    const auto pt = estimate_pt(g, z0, ex);
    std::printf("P_T g(z0)      = %.5f +- %.5f\n", pt.mean, pt.std_error);

    Field h1(space.modes()), h2(space.modes());
    h1[0] = 0.2;
    h2[1] = 0.1;
    const CouplingControls cc(space, ProfileKind::forward, ex.grid.T, h1, h2);
    const DiscreteControls dc(cc, space, ex.grid, ex.scheme);
    SampleOptions opts;
    opts.coupling = &dc;
    const auto samples = ex.engine().run(z0, opts, ex.n_traj);
    std::vector<double> r;
    for (const auto& s : samples) r.push_back(std::exp(s.log_weight));
    const auto m = summarize(r, keep_mask(samples));
    std::printf("E R_T          = %.5f +- %.5f\n", m.mean, m.std_error);

    const auto e = entropy_of_weight(z0, cc, ex);
    const BoundContext ctx{&ex.model.space, &ex.model.nonlinearity, &ex.model.noise};
    const auto psi = psi_bound(ctx, z0 + State(h1, h2), h1, h2, ex.grid.T);
    std::printf("E R log R      = %.5f +- %.5f  (Psi = %.3f)\n", e.mean, e.std_error, psi.psi);
}
