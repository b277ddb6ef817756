// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <vector>

#include "sideband/fock.hpp"
#include "sideband/scan.hpp"
#include "sideband/statistics.hpp"

using namespace sideband;

namespace {

fock::TwoModeGenerator generator(benchmark::State& state) {
  const auto cutoff = static_cast<std::size_t>(state.range(0));
  return fock::TwoModeGenerator::from_couplings(complex(0.3, 0.1), complex(0.5, -0.2), cutoff, cutoff);
}

void BM_GeneratorApply(benchmark::State& state) {
  const auto gen = generator(state);
  std::vector<complex> in(gen.dim(), complex(1.0, 0.5)), out(gen.dim());
  for (auto _ : state) {
    gen.apply(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(gen.dim()));
}

void BM_GeneratorApplySerial(benchmark::State& state) {
  const auto gen = generator(state);
  std::vector<complex> in(gen.dim(), complex(1.0, 0.5)), out(gen.dim());
  for (auto _ : state) {
    gen.apply_serial(in, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(gen.dim()));
}

void BM_PhaseMap(benchmark::State& state) {
  const auto axis = scan::linspace(-3.0, 3.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scan::phase_map(scan::bright_squeezing_params(), axis, axis));
}

void BM_PhaseMapSerial(benchmark::State& state) {
  const auto axis = scan::linspace(-3.0, 3.0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(scan::phase_map_serial(scan::bright_squeezing_params(), axis, axis));
}

void BM_SqueezedVacuumSampler(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::sample_squeezed_vacuum_counts(1.0, 2, static_cast<std::size_t>(state.range(0)), 1));
  }
}

void BM_SqueezedVacuumSamplerSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        stats::sample_squeezed_vacuum_counts_serial(1.0, 2, static_cast<std::size_t>(state.range(0)), 1));
  }
}

}  // namespace

BENCHMARK(BM_GeneratorApply)->Arg(64)->Arg(256);
BENCHMARK(BM_GeneratorApplySerial)->Arg(64)->Arg(256);
BENCHMARK(BM_PhaseMap)->Arg(201);
BENCHMARK(BM_PhaseMapSerial)->Arg(201);
BENCHMARK(BM_SqueezedVacuumSampler)->Arg(100000);
BENCHMARK(BM_SqueezedVacuumSamplerSerial)->Arg(100000);

BENCHMARK_MAIN();
