#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "membrane/green.hpp"
#include "membrane/infvol.hpp"
#include "membrane/kernels.hpp"
#include "membrane/sampler.hpp"

using namespace membrane;
using kernels::Execution;

namespace {

Execution exec_of(const benchmark::State& state) { return state.range(0) == 0 ? Execution::Serial : Execution::Parallel; }

void BM_BoxStencil(benchmark::State& state) {
    const int d = static_cast<int>(state.range(1)), m = static_cast<int>(state.range(2));
    kernels::BoxStencil stencil(std::vector<int>(d, m), lattice::stencil_weights(lattice::OperatorVariant::Bilaplacian, d),
                                1.0 / (4.0 * d * d));
    std::vector<double> in(stencil.size()), out(stencil.size());
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = std::sin(0.001 * static_cast<double>(i));
    for (auto _ : state) {
        stencil.apply(in, out, exec_of(state));
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stencil.size()));
}
BENCHMARK(BM_BoxStencil)->ArgNames({"parallel", "d", "m"})->Args({0, 2, 512})->Args({1, 2, 512})->Args({0, 4, 29})->Args({1, 4, 29});

void BM_Dot(benchmark::State& state) {
    std::vector<double> a(1 << 22, 1.5), b(1 << 22, 0.5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::dot(a, b, exec_of(state)));
}
BENCHMARK(BM_Dot)->ArgNames({"parallel"})->Arg(0)->Arg(1);

void BM_SingularCube(benchmark::State& state) {
    infvol::QuadraturePlan plan;
    plan.depth = 6;
    plan.base_nodes = 6;
    plan.exec = exec_of(state);
    infvol::SeparableWeight w;
    w.factor = [](int, double t) { return std::cos(t); };
    w.extra_nodes = [](int, double a, double b) { return static_cast<int>(std::ceil(0.8 * (b - a))); };
    w.value_at_origin = 1.0;
    w.curvature = 0.5;
    for (auto _ : state) benchmark::DoNotOptimize(infvol::singular_cube_sum(5, w, plan));
}
BENCHMARK(BM_SingularCube)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Walks(benchmark::State& state) {
    infvol::WalkConfig cfg;
    cfg.walks = 50000;
    cfg.batch_size = 5000;
    cfg.tail_tolerance = 1.0;
    for (auto _ : state) benchmark::DoNotOptimize(infvol::walk_estimate(cfg, exec_of(state)).mean.data());
}
BENCHMARK(BM_Walks)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
    auto dom = lattice::classify(lattice::Shape::box({0.0, 0.0}, {1.0, 1.0}), 1.0 / 64);
    auto P = green::assemble_precision(dom);
    auto solver = green::make_precision_solver(P);
    for (auto _ : state) benchmark::DoNotOptimize(sampler::sample(P, *solver, 3, 64, 0, exec_of(state)).data());
}
BENCHMARK(BM_Sample)->ArgNames({"parallel"})->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
