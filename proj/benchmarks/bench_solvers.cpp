#include <benchmark/benchmark.h>

#include "unmix/experiments.hpp"
#include "unmix/solvers.hpp"

namespace {

using namespace unmix;

const EndmemberMatrix& library() {
    static const EndmemberMatrix m = substitute_library_spectra();
    return m;
}

Pixel noisy_pixel(double snr_db) {
    return synthesize_pixel(library(), AbundanceVector(Vector{{0.3, 0.6, 0.1}}), snr_db, 1).pixel;
}

void solve_pixel(benchmark::State& state, Algorithm algorithm) {
    const Pixel y = noisy_pixel(static_cast<double>(state.range(0)));
    SolverConfig config;
    config.algorithm = algorithm;
    const Vector init = AbundanceVector::uniform(3).values();
    long iterations = 0;
    for (auto _ : state) {
        const Solution sol = solve(y, library(), init, config);
        iterations += sol.trace.iterations();
        benchmark::DoNotOptimize(sol.abundances.data());
    }
    state.counters["iters"] = benchmark::Counter(static_cast<double>(iterations), benchmark::Counter::kAvgIterations);
}

void BM_nsgm(benchmark::State& s) { solve_pixel(s, Algorithm::nsgm); }
void BM_sgm(benchmark::State& s) { solve_pixel(s, Algorithm::sgm); }
void BM_isra(benchmark::State& s) { solve_pixel(s, Algorithm::isra); }
void BM_fcls(benchmark::State& s) { solve_pixel(s, Algorithm::fcls_penalized); }

void BM_unmix_cube(benchmark::State& state) {
    const Index side = state.range(0);
    const SyntheticCube synth = synthesize_cube(library(), side, side, 30.0, 2);
    const int threads = static_cast<int>(state.range(1));
    for (auto _ : state) {
        const AbundanceMaps maps = unmix_cube(synth.cube, library(), SolverConfig{}, threads);
        benchmark::DoNotOptimize(maps.data.data());
    }
    state.SetItemsProcessed(state.iterations() * side * side);
}

void BM_lipschitz(benchmark::State& state) {
    for (auto _ : state) benchmark::DoNotOptimize(simplex_lipschitz_estimate(library(), 100));
}

}  // namespace

BENCHMARK(BM_nsgm)->Arg(0)->Arg(20);
BENCHMARK(BM_sgm)->Arg(0)->Arg(20);
BENCHMARK(BM_isra)->Arg(0)->Arg(20);
BENCHMARK(BM_fcls)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_unmix_cube)->Args({32, 1})->Args({32, 4})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_lipschitz);

BENCHMARK_MAIN();
