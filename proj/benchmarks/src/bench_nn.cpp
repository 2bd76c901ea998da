#include <benchmark/benchmark.h>

#include "falldet/har/model.hpp"
#include "falldet/nn/ops.hpp"
#include "falldet/rng.hpp"

using namespace falldet;
using namespace falldet::nn;

namespace {

Tensor random(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.storage()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Var param(Shape shape, Rng& rng) { return Var(random(std::move(shape), rng), true); }

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Var a(random({n, n}, rng)), b(random({n, n}, rng));
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b).value()[0]);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv1d(benchmark::State& state) {
  Rng rng(2);
  const Var x(random({16, 64, 100}, rng));  // [B, C, T]
  const Var w = param({64, 64, 5}, rng), b = param({64}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv1d(x, w, b).value()[0]);
}
BENCHMARK(BM_Conv1d);

// Forward and backward through one attention layer, seq length from the arg.
void BM_AttentionForwardBackward(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  AttentionParams p;
  for (Var* v : {&p.wq, &p.wk, &p.wv, &p.wo}) *v = param({64, 64}, rng);
  for (Var* v : {&p.bq, &p.bk, &p.bv, &p.bo}) *v = param({64}, rng);
  const Var x(random({8, s, 64}, rng), true);
  for (auto _ : state) {
    Var loss = sum(multi_head_attention(x, 4, p));
    loss.backward();
    benchmark::DoNotOptimize(x.value()[0]);
  }
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(50)->Arg(100);

void BM_ModelInference(benchmark::State& state) {
  har::ModelConfig cfg;
  cfg.input_time = 100;
  const har::HarModel model(cfg);
  Rng rng(4);
  const Tensor batch = random({16, cfg.input_time, cfg.input_features}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(model.logits(batch)[0]);
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ModelInference)->Unit(benchmark::kMillisecond);

}  // namespace
