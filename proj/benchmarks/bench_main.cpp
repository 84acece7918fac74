#include <benchmark/benchmark.h>

#include "sppnet/ops.hpp"
#include "sppnet/prompt_sampling.hpp"
#include "sppnet/sppnet.hpp"
#include "sppnet/training.hpp"

using namespace sppnet;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform01(rng) - 0.5;
  return t;
}

/// A grid of square nuclei, 12 px wide with 4 px gaps.
InstanceLabelMap tiled_instances(int size) {
  Grid<int> g(size, size, 0);
  int id = 0;
  for (int y0 = 2; y0 + 12 <= size; y0 += 16)
    for (int x0 = 2; x0 + 12 <= size; x0 += 16) {
      ++id;
      for (int y = y0; y < y0 + 12; ++y)
        for (int x = x0; x < x0 + 12; ++x) g(y, x) = id;
    }
  return InstanceLabelMap(std::move(g));
}

void BM_DistanceTransform(benchmark::State& state) {
  const InstanceLabelMap m = tiled_instances(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(l1_distance_transform(m, 1));
  state.SetItemsProcessed(state.iterations() * m.height() * m.width());
}
BENCHMARK(BM_DistanceTransform)->Arg(64)->Arg(256)->Arg(1024);

void BM_SamplePromptPair(benchmark::State& state) {
  const InstanceLabelMap m = tiled_instances(static_cast<int>(state.range(0)));
  const SamplerConfig cfg;
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(sample_prompt_pair(m, cfg, rng));
}
BENCHMARK(BM_SamplePromptPair)->Arg(256)->Arg(1024);

void BM_Conv3x3(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int size = static_cast<int>(state.range(1));
  const Var x(random_tensor({c, size, size}, 1));
  const Var w(random_tensor({c, c, 3, 3}, 2));
  const Var b(random_tensor({c}, 3));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 2LL * 9 * c * c * size * size);
}
BENCHMARK(BM_Conv3x3)->Args({16, 128})->Args({32, 64});

void BM_Forward(benchmark::State& state) {
  const ModelConfig cfg = state.range(0) == 0 ? ModelConfig::micro() : ModelConfig::desk();
  const SppNet model(cfg, 1);
  const Var full(random_tensor({3, cfg.encoder_input_size, cfg.encoder_input_size}, 1));
  const Var low(random_tensor({3, cfg.llsie_input_size, cfg.llsie_input_size}, 2));
  const std::vector<PointPrompt> prompts{{100, 120, PromptLabel::kPositive}, {5, 5, PromptLabel::kNegative}};
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(full, low, prompts, {256, 256}));
  state.SetLabel(state.range(0) == 0 ? "micro" : "desk");
}
BENCHMARK(BM_Forward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const ModelConfig cfg = state.range(0) == 0 ? ModelConfig::micro() : ModelConfig::desk();
  SppNet model(cfg, 1);
  const Var full(random_tensor({3, cfg.encoder_input_size, cfg.encoder_input_size}, 1));
  const Var low(random_tensor({3, cfg.llsie_input_size, cfg.llsie_input_size}, 2));
  const std::vector<PointPrompt> prompts{{100, 120, PromptLabel::kPositive}, {5, 5, PromptLabel::kNegative}};
  const int d = cfg.decoder_output_size();
  BinaryMask target(d, d, 0);
  for (int y = d / 4; y < d / 2; ++y)
    for (int x = d / 4; x < d / 2; ++x) target(y, x) = 1;
  for (auto _ : state) {
    model.parameters().zero_grad();
    dice_loss(ops::sigmoid(model.forward(full, low, prompts, {256, 256})), target).backward();
  }
  state.SetLabel(state.range(0) == 0 ? "micro" : "desk");
}
BENCHMARK(BM_ForwardBackward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
