// Serial reference against the OpenMP kernels.
//   bench_kernels --benchmark_filter=Train

#include <benchmark/benchmark.h>

#include <omp.h>

#include "w2vt/evaluator.hpp"
#include "w2vt/reference.hpp"
#include "w2vt/synth.hpp"
#include "w2vt/trainer.hpp"

using namespace w2vt;

namespace {

const Corpus& corpus() {
  static const Corpus c = [] {
    PlantedConfig cfg;
    cfg.clusters = 1000;
    cfg.sequences = 20000;
    return planted_corpus(cfg);
  }();
  return c;
}

HyperParams bench_hp(ModelType m) {
  HyperParams hp = default_hyperparams(m);
  hp.epochs = 1;
  return hp;
}

void BM_TrainSerial(benchmark::State& state) {
  const auto hp = bench_hp(static_cast<ModelType>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::train_serial(corpus(), hp, 1));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus().num_tokens()));
}

void BM_TrainParallel(benchmark::State& state) {
  const auto hp = bench_hp(static_cast<ModelType>(state.range(0)));
  TrainOptions opts;
  opts.workers = static_cast<int>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(train(corpus(), hp, opts));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus().num_tokens()));
}

const EmbeddingModel& model() {
  static const EmbeddingModel m = train(corpus(), bench_hp(ModelType::kSkipgram)).model;
  return m;
}

std::vector<TokenId> queries() {
  std::vector<TokenId> q;
  for (std::size_t i = 0; i < model().rows(); i += 5) q.push_back(static_cast<TokenId>(i));
  return q;
}

void BM_TopKBruteForce(benchmark::State& state) {
  const auto q = queries();
  for (auto _ : state) {
    for (auto id : q) benchmark::DoNotOptimize(reference::brute_force_top_k(model().input(), model().dim(), id, 10));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.size()));
}

void BM_TopKPerQuery(benchmark::State& state) {
  const CosineIndex index(model());
  const auto q = queries();
  for (auto _ : state) {
    for (auto id : q) benchmark::DoNotOptimize(index.exact_top_k(id, 10));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.size()));
}

void BM_TopKBatch(benchmark::State& state) {
  const CosineIndex index(model());
  const auto q = queries();
  for (auto _ : state) benchmark::DoNotOptimize(index.exact_top_k_batch(q, 10, static_cast<int>(state.range(0))));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.size()));
}

void BM_TopKApproximate(benchmark::State& state) {
  const CosineIndex index(model(), IndexMode::kApproximate);
  const auto q = queries();
  for (auto _ : state) {
    for (auto id : q) benchmark::DoNotOptimize(index.top_k(id, 10));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * q.size()));
}

void thread_args(benchmark::internal::Benchmark* b) {
  for (int m : {0, 1}) {
    for (int w = 1; w <= omp_get_max_threads(); w *= 2) b->Args({m, w});
  }
}

}  // namespace

BENCHMARK(BM_TrainSerial)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainParallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TopKBruteForce)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TopKPerQuery)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TopKBatch)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_TopKApproximate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
