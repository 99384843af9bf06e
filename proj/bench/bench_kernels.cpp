// Serial references against the OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include "depman/config.hpp"
#include "depman/gdep.hpp"
#include "depman/inverter.hpp"

using namespace depman;

namespace {

struct Fixture {
  ExperimentConfig cfg;
  ElectrodeBasis basis = make_basis(cfg);
  ObjectModel obj = make_object(cfg);
  Pose pose = Pose::planar(50e-6, 30e-6, cfg.sim.z_assumed, 0.3);
  WrenchFormSet forms = assemble_forms(obj, pose, basis, cfg.material);
  Wrench ref = [this] {
    Wrench w;
    w.F = Vec3(2e-11, -1e-11, -sedimentation(obj, cfg.material).F.z());
    w.T = Vec3(0, 0, 2e-15);
    return w;
  }();
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_AssembleSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(assemble_forms_serial(f.obj, f.pose, f.basis, f.cfg.material));
}

void BM_AssembleParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(assemble_forms(f.obj, f.pose, f.basis, f.cfg.material));
}

// arg: phase step in degrees
void BM_BruteForceSerial(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(brute_force_serial(f.forms, f.ref, static_cast<int>(st.range(0))));
}

void BM_BruteForceParallel(benchmark::State& st) {
  const auto& f = fixture();
  for (auto _ : st) benchmark::DoNotOptimize(brute_force(f.forms, f.ref, static_cast<int>(st.range(0))));
}

void BM_Anneal(benchmark::State& st) {
  const auto& f = fixture();
  const PhasorVector warm(std::vector<int>(f.basis.n_electrodes(), 0));
  for (auto _ : st) benchmark::DoNotOptimize(sa_solve(f.forms, f.ref, f.cfg.sim.schedule, warm));
}

}  // namespace

BENCHMARK(BM_AssembleSerial)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_AssembleParallel)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BruteForceSerial)->Arg(45)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BruteForceParallel)->Arg(45)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Anneal)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
