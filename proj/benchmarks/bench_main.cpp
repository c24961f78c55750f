#include <benchmark/benchmark.h>

#include <cmath>

#include "patchnet/equation_free.hpp"
#include "patchnet/fft.hpp"
#include "patchnet/homogenization.hpp"
#include "patchnet/learner.hpp"
#include "patchnet/micro_solvers.hpp"
#include "patchnet/random.hpp"

using namespace patchnet;

namespace {

void BM_CellProblem(benchmark::State& state) {
    const auto a = micro::Diffusivity::sinusoidal(1.1, 1.0).samples(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto cell = homog::solve_cell_problem(a);
        benchmark::DoNotOptimize(homog::effective_diffusivity(cell, a));
    }
}
BENCHMARK(BM_CellProblem)->Arg(4096)->Arg(65536);

void BM_MicroStep1D(benchmark::State& state) {
    micro::DetailedProblem1D p;
    p.a = micro::Diffusivity::sinusoidal(1.1, 1.0);
    p.epsilon = 1e-3;
    p.bc = {micro::BoundaryCondition::dirichlet(0.0), micro::BoundaryCondition::dirichlet(0.0)};
    micro::MicroState1D s;
    const auto cells = static_cast<std::size_t>(state.range(0));
    s.dx = 1.0 / static_cast<double>(cells);
    for (std::size_t i = 0; i <= cells; ++i) s.u.push_back(std::sin(3.0 * s.x(i)));
    const auto a = micro::sample_diffusivity(p, s);
    for (auto _ : state) {
        s = micro::step_micro_1d(s, a, p.bc, 1e-5);
        benchmark::DoNotOptimize(s.u.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(cells));
}
BENCHMARK(BM_MicroStep1D)->Arg(800)->Arg(20000);

void BM_LatticeStep(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto p = micro::LatticeProblem2D::reference_medium(n);
    Field2D u(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) u(i, j) = std::sin(0.1 * i) * std::cos(0.2 * j);
    for (auto _ : state) {
        u = micro::step_lattice_2d(u, p, p.stable_dt());
        benchmark::DoNotOptimize(u.data.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(n * n));
}
BENCHMARK(BM_LatticeStep)->Arg(120)->Arg(480);

void BM_GapToothStep2D(benchmark::State& state) {
    eqfree::PatchGrid2D g;
    g.scheme = micro::TimeScheme::backward_euler;
    g.dt = 2e-4;
    const eqfree::GapTooth2D sim(g, g.micro_dt());
    auto v = sim.initial_state([](double x, double y) { return std::sin(x) * std::sin(2 * y); });
    for (auto _ : state) {
        sim.step(v);
        benchmark::DoNotOptimize(v.data());
    }
}
BENCHMARK(BM_GapToothStep2D);

void BM_MlpForwardBackward(benchmark::State& state) {
    Rng rng(1);
    const auto net = nn::init_network(3, 32, rng);
    const auto batch = static_cast<Eigen::Index>(state.range(0));
    Eigen::MatrixXd z(3, batch);
    Eigen::RowVectorXd t(batch);
    for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = rng.uniform(-1.0, 1.0);
    for (Eigen::Index k = 0; k < t.size(); ++k) t(k) = rng.uniform(-1.0, 1.0);
    for (auto _ : state) {
        auto g = nn::backward(net, z, t);
        benchmark::DoNotOptimize(g.loss);
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(64)->Arg(1024);

void BM_Fft2D(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Fft2D fft(n, n);
    Field2D u(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) u(i, j) = std::sin(0.3 * i + 0.1 * j);
    for (auto _ : state) {
        auto s = fft.forward(u);
        benchmark::DoNotOptimize(fft.inverse_real(s).data.data());
    }
}
BENCHMARK(BM_Fft2D)->Arg(16)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
