#include <benchmark/benchmark.h>

#include <vector>

#include "panelvit/metrics.hpp"
#include "panelvit/model.hpp"
#include "panelvit/optim.hpp"

using namespace panelvit;

namespace {

Tensor random(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from(std::move(shape), std::move(v));
}

std::vector<Image> images(std::size_t n, std::size_t size) {
  Rng rng(1);
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img(size, size, 3);
    for (auto& p : img.pixels) p = rng.uniform(-1.0, 1.0);
    out.push_back(std::move(img));
  }
  return out;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto a = random({n, n}, rng), b = random({n, n}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_Attention(benchmark::State& state) {
  // 82 tokens (81 patches + class token), width 64, 8 heads
  const auto batch = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto q = random({batch * 82, 64}, rng), k = random({batch * 82, 64}, rng), v = random({batch * 82, 64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(multi_head_scaled_attention(q, k, v, 82, 8));
}
BENCHMARK(BM_Attention)->Arg(1)->Arg(8);

void BM_ForwardEval(benchmark::State& state) {
  ModelConfig c;
  c.num_classes = 8;
  const auto params = init_params(c, 4);
  const auto batch = images(static_cast<std::size_t>(state.range(0)), c.image_size);
  NoGradGuard g;
  for (auto _ : state) benchmark::DoNotOptimize(forward(batch, params, c, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardEval)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig c;
  c.num_classes = 8;
  auto params = init_params(c, 5);
  std::vector<Tensor> ts;
  for (auto& nt : params.named()) ts.push_back(nt.tensor);
  AdamW opt(ts, {});
  const auto batch = images(8, c.image_size);
  const std::vector<std::size_t> labels{0, 1, 2, 3, 4, 5, 6, 7};
  Rng rng(6);
  ForwardOptions fo;
  fo.mode = Mode::train;
  fo.rng = &rng;
  for (auto _ : state) {
    sparse_ce_loss(forward(batch, params, c, fo), labels).backward();
    opt.step();
    opt.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_Score(benchmark::State& state) {
  Rng rng(7);
  ConfusionMatrix cm;
  cm.num_classes = 8;
  for (int i = 0; i < 64; ++i) cm.counts.push_back(rng.below(50));
  for (int i = 0; i < 8; ++i) cm.class_names.push_back(std::to_string(i));
  for (auto _ : state) benchmark::DoNotOptimize(score(cm));
}
BENCHMARK(BM_Score);

}  // namespace

BENCHMARK_MAIN();
