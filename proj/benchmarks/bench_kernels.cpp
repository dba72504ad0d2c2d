#include <benchmark/benchmark.h>

#include "icd/attention.hpp"
#include "icd/energy.hpp"
#include "icd/tasks.hpp"

namespace {

using namespace icd;

TaskSpec case1() {
  TaskSpec s;
  s.n = 16;
  s.d = 8;
  return s;
}

std::vector<Prompt> prompts(Index count, Index length) {
  std::vector<Prompt> out;
  const RngStream root(1, 0);
  for (Index i = 0; i < count; ++i) out.push_back(sample_episode(case1(), length, root, static_cast<std::uint64_t>(i)).prompt);
  return out;
}

void BM_ForwardLinear(benchmark::State& state) {
  const auto p = prompts(1, state.range(0)).front();
  const auto w = AttentionWeights::scaled_identity(AttentionKind::Linear, 16, 1.0, 1.0 / 3.0);
  for (auto _ : state) benchmark::DoNotOptimize(forward_linear(w, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardLinear)->Arg(100)->Arg(500)->Arg(2000);

void BM_ForwardSoftmax(benchmark::State& state) {
  const auto p = prompts(1, state.range(0)).front();
  const auto w = AttentionWeights::scaled_identity(AttentionKind::Softmax, 16, 1.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(forward_softmax(w, p));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardSoftmax)->Arg(100)->Arg(500)->Arg(2000);

void BM_GradMse(benchmark::State& state) {
  const auto batch = prompts(80, 500);
  const auto kind = state.range(0) == 0 ? AttentionKind::Linear : AttentionKind::Softmax;
  const auto w = AttentionWeights::scaled_identity(kind, 16, 1.0, 0.3);
  for (auto _ : state) benchmark::DoNotOptimize(grad_mse(w, batch));
}
BENCHMARK(BM_GradMse)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_BesselRatio(benchmark::State& state) {
  const double z = static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(bessel_ratio(3.0, z));
}
BENCHMARK(BM_BesselRatio)->Arg(1)->Arg(50)->Arg(1000);

void BM_SampleEpisode(benchmark::State& state) {
  const RngStream root(2, 0);
  std::uint64_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_episode(case1(), 500, root, i++));
}
BENCHMARK(BM_SampleEpisode);

void BM_Descend(benchmark::State& state) {
  const auto p = prompts(1, 20).front();
  const EnergyModel m{p.context, 1.0, 1.0, EnergyKind::LogSumExp};
  for (auto _ : state) benchmark::DoNotOptimize(descend(m, p.query, 1.0, 20));
}
BENCHMARK(BM_Descend);

}  // namespace

BENCHMARK_MAIN();
