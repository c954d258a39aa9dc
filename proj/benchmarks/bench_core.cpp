#include <benchmark/benchmark.h>

#include "cowsec/attack.hpp"
#include "cowsec/optimize.hpp"

using namespace cowsec;

namespace {

ProtocolParams params() {
  ProtocolParams p;
  p.alpha2 = 0.5;
  p.f = 0.155;
  p.t_b = 0.5;
  p.eta = 0.01;
  return p;
}

void BM_UsdSolve(benchmark::State& state) {
  ProtocolParams p = params();
  p.alpha2 = static_cast<double>(state.range(0)) / 100.0;
  const DiscriminationProblem prob = DiscriminationProblem::build(build_ensemble(p));
  for (auto _ : state) {
    benchmark::DoNotOptimize(usd_failure_probability(prob).q_usd);
  }
}
BENCHMARK(BM_UsdSolve)->Arg(10)->Arg(50)->Arg(100);

void BM_MedSolve(benchmark::State& state) {
  const DiscriminationProblem prob = DiscriminationProblem::build(build_ensemble(params()));
  for (auto _ : state) {
    benchmark::DoNotOptimize(med_measurement(prob).avg_error);
  }
}
BENCHMARK(BM_MedSolve);

void BM_IntermediateSolve(benchmark::State& state) {
  const DiscriminationProblem prob = DiscriminationProblem::build(build_ensemble(params()));
  const double q = static_cast<double>(state.range(0)) / 100.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(intermediate_measurement(prob, q).avg_error);
  }
}
BENCHMARK(BM_IntermediateSolve)->Arg(20)->Arg(50)->Arg(80);

void BM_AttackSim(benchmark::State& state) {
  const ProtocolParams p = params();
  MeasurementFamily family(p);
  AttackParams a;
  a.q_inc = 0.3;
  a.q_p = 0.5;
  a.m_min = 2;
  a.beta2 = 0.5;
  SimOptions sim;
  sim.n_signals = state.range(0);
  sim.seed = 5;
  sim.estimator = state.range(1) == 0 ? Estimator::Sampled : Estimator::Marginal;
  const MeasurementModel& m = family.at(a.q_inc);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_attack_sim(p, a, m, sim).gain_bit);
  }
  state.SetItemsProcessed(state.iterations() * sim.n_signals);
}
BENCHMARK(BM_AttackSim)->Args({50'000, 0})->Args({200'000, 0})->Args({50'000, 1})->Args({200'000, 1});

void BM_BobReceive(benchmark::State& state) {
  const ProtocolParams p = params();
  const auto kinds = sample_alice_train(p, state.range(0), 3);
  const PulseTrain train = honest_train(kinds, p.alpha2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bob_receive(train, p, false, 3).data.size());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BobReceive)->Arg(100'000);

}  // namespace
