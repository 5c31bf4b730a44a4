#include <benchmark/benchmark.h>

#include "tde/energy.hpp"
#include "tde/encoder.hpp"
#include "tde/neuron.hpp"
#include "tde/random.hpp"

using namespace tde;

namespace {

Tensor normal_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed, "bench");
  Tensor t(shape);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const Tensor x = normal_tensor(Shape{c, hw, hw}, 1);
  ConvSpec spec = ConvSpec::zeros(c, c, 3, 1, 1);
  spec.weights = normal_tensor(spec.weights.shape(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2d)->Args({4, 16})->Args({16, 32})->Args({32, 32});

void BM_LifForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor x = normal_tensor(Shape{4, n}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(lif_forward(x, LifParams{}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(4 * n));
}
BENCHMARK(BM_LifForward)->Range(1 << 10, 1 << 18);

void BM_SeEncode(benchmark::State& state) {
  Rng rng(4, "encoder");
  const EncoderState enc = make_encoder(EncoderOptions{}, rng);
  const Tensor x = normal_tensor(Shape{1, 32, 32}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(se_encode(x, enc, LifParams{}));
}
BENCHMARK(BM_SeEncode);

void BM_Attention(benchmark::State& state) {
  const auto variant = static_cast<AttentionVariant>(state.range(0));
  const AttentionShape shape{4, 32, 40, 20};
  for (auto _ : state) benchmark::DoNotOptimize(profile_attention(variant, shape, 6));
  state.SetLabel(std::string(to_string(variant)));
}
BENCHMARK(BM_Attention)
    ->Arg(static_cast<int>(AttentionVariant::Tcsa))
    ->Arg(static_cast<int>(AttentionVariant::Sda))
    ->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
