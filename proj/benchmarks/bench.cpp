#include <benchmark/benchmark.h>

#include "disent/data.hpp"
#include "disent/eval.hpp"
#include "disent/losses.hpp"
#include "disent/mi.hpp"
#include "disent/rng.hpp"

namespace {

using namespace disent;

void BM_MatmulBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  std::vector<double> av(n * n), bv(n * n);
  for (double& v : av) v = rng.normal();
  for (double& v : bv) v = rng.normal();
  Tensor a = Tensor::from({n, n}, av, true);
  Tensor b = Tensor::from({n, n}, bv, true);
  for (auto _ : state) {
    Tensor loss = matmul(a, b).sum();
    loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64)->Arg(128);

void BM_VclubEmbedding(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), d = 16;
  Rng rng(11);
  VariationalGaussian q(d, 64, rng);
  std::vector<double> xs(n * d), xd(n * d);
  for (double& v : xs) v = rng.normal();
  for (double& v : xd) v = rng.normal();
  Tensor a = Tensor::from({n, d}, xs, true);
  Tensor b = Tensor::from({n, d}, xd, true);
  for (auto _ : state) {
    Tensor mi = vclub_embedding_graph(a, b, q);
    mi.backward();
    benchmark::DoNotOptimize(mi.item());
  }
}
BENCHMARK(BM_VclubEmbedding)->Arg(32)->Arg(128);

void BM_VclubValuePath(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0)), d = 4;
  Rng rng(13);
  VariationalGaussian q(d, 64, rng);
  std::vector<double> xs, xd;
  gaussian_pair_stream(std::vector<double>(d, 0.6), n, 3, xs, xd);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vclub_embedding_value(xs, xd, n, d, q).value);
  }
}
BENCHMARK(BM_VclubValuePath)->Arg(1024)->Arg(4096);

void BM_AamLoss(benchmark::State& state) {
  const std::size_t n = 32, d = 16, c = 20;
  Rng rng(17);
  std::vector<double> ev(n * d), wv(c * d);
  for (double& v : ev) v = rng.normal();
  for (double& v : wv) v = rng.normal();
  Tensor emb = Tensor::from({n, d}, ev, true);
  Tensor w = Tensor::from({c, d}, wv, true);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % c;
  for (auto _ : state) {
    Tensor loss = aam_softmax_loss(emb, labels, w, 30.0, 0.2);
    loss.backward();
    benchmark::DoNotOptimize(loss.item());
  }
}
BENCHMARK(BM_AamLoss);

void BM_Eer(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(19);
  ScoreSet scores;
  for (std::size_t i = 0; i < n; ++i) {
    scores.scores.push_back(rng.normal() + (i % 2 ? 1.0 : 0.0));
    scores.is_target.push_back(i % 2 == 1);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(compute_eer(scores).first);
  }
}
BENCHMARK(BM_Eer)->Arg(2000)->Arg(20000);

void BM_TrainBatchSample(benchmark::State& state) {
  CorpusSpec spec;
  Corpus corpus = generate_corpus(spec);
  Rng rng(23);
  for (auto _ : state) {
    Batch b = sample_batch(corpus, 16, rng);
    benchmark::DoNotOptimize(b.features.values().data());
  }
}
BENCHMARK(BM_TrainBatchSample);

}  // namespace

BENCHMARK_MAIN();
