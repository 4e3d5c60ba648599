// SPDX-License-Identifier: Apache-2.0
//
// Serial reference vs OpenMP kernels. The second benchmark argument selects
// the policy: 0 = serial, 1 = parallel.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sepipe/engine.h"
#include "sepipe/gru.h"
#include "sepipe/kernels.h"
#include "sepipe/neural.h"
#include "sepipe/unet.h"
#include "sepipe/weights.h"

namespace {

using sepipe::ExecPolicy;

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(1) ? ExecPolicy::kParallel : ExecPolicy::kSerial;
}

template <typename T>
std::vector<T> random_vector(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

void BM_Gemv(benchmark::State& state) {
  const auto in = static_cast<std::size_t>(state.range(0));
  const std::size_t out = 3 * 128;
  const auto x = random_vector<float>(in, 1);
  const auto w = random_vector<float>(in * out, 2);
  std::vector<float> y(out);
  for (auto _ : state) {
    std::fill(y.begin(), y.end(), 0.0f);
    sepipe::kernels::gemv_acc(policy_of(state), x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(in * out));
}
BENCHMARK(BM_Gemv)->ArgsProduct({{66, 128}, {0, 1}});

void BM_Conv5x5(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const std::size_t freq = 66;
  std::vector<std::vector<float>> cols;
  for (unsigned t = 0; t < 5; ++t) cols.push_back(random_vector<float>(ch * freq, t));
  const sepipe::kernels::TimeWindow window{cols[0].data(), cols[1].data(), cols[2].data(),
                                           cols[3].data(), cols[4].data()};
  const auto w = random_vector<float>(ch * ch * 25, 9);
  const auto b = random_vector<float>(ch, 10);
  std::vector<float> out(ch * freq);
  for (auto _ : state) {
    sepipe::kernels::conv5x5_column(policy_of(state), window, ch, freq, w, b, ch, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Conv5x5)->ArgsProduct({{16, 64}, {0, 1}});

void BM_Pointwise(benchmark::State& state) {
  const auto ch = static_cast<std::size_t>(state.range(0));
  const std::size_t freq = 33;
  const auto in = random_vector<float>(ch * freq, 1);
  const auto w = random_vector<float>(ch * ch, 2);
  const auto b = random_vector<float>(ch, 3);
  std::vector<float> out(ch * freq);
  for (auto _ : state) {
    sepipe::kernels::pointwise_column(policy_of(state), in, ch, freq, w, b, ch, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Pointwise)->ArgsProduct({{32, 128}, {0, 1}});

void BM_FirFilter(benchmark::State& state) {
  const auto taps = static_cast<std::size_t>(state.range(0));
  const auto x = random_vector<double>(32000, 1);
  const auto h = random_vector<double>(taps, 2);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    sepipe::kernels::fir_filter(policy_of(state), x, h, y);
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_FirFilter)->ArgsProduct({{256, 4096}, {0, 1}});

void BM_ModelStep(benchmark::State& state) {
  const auto kind = state.range(0) ? sepipe::ModelKind::kUnet : sepipe::ModelKind::kGru;
  sepipe::NeuralModel model = sepipe::make_model(sepipe::random_weights(kind, 0));
  sepipe::set_policy(model, policy_of(state));
  sepipe::FeatureFrame features;
  const auto v = random_vector<double>(features.values.size(), 4);
  for (std::size_t i = 0; i < v.size(); ++i) features.values[i] = std::abs(v[i]);
  for (auto _ : state) {
    auto mask = sepipe::step(model, features);
    benchmark::DoNotOptimize(mask.values.data());
  }
  state.counters["MACs"] = benchmark::Counter(
      static_cast<double>(sepipe::count_macs_per_frame(kind)) *
          static_cast<double>(state.iterations()),
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_ModelStep)->ArgsProduct({{0, 1}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
