#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "rtic/datastore.h"
#include "rtic/ensemble.h"
#include "rtic/metrics.h"
#include "rtic/tensor.h"
#include "rtic/textprep.h"

using namespace rtic;

namespace {

ScoreMatrix random_matrix(std::size_t q, std::size_t g, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ScoreMatrix m;
  for (std::size_t i = 0; i < q; ++i) m.query_ids.push_back("q" + std::to_string(i));
  for (std::size_t j = 0; j < g; ++j) m.gallery_ids.push_back("g" + std::to_string(j));
  m.values.resize(q * g);
  for (auto& v : m.values) v = u(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_stream(0, "init");
  const nk::Tensor a = nk::uniform({n, n}, -1, 1, rng), b = nk::uniform({n, n}, -1, 1, rng);
  for (auto _ : state) {
    nk::Tape tape(false);
    benchmark::DoNotOptimize(nk::matmul(tape.constant(a), tape.constant(b)).values().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng = make_stream(0, "init");
  nk::Tensor a = nk::uniform({n, n}, -1, 1, rng), b = nk::uniform({n, n}, -1, 1, rng);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    nk::Tape tape;
    tape.backward(nk::sum(nk::matmul(tape.param(a), tape.param(b))));
    benchmark::DoNotOptimize(a.grad.data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_RecallAtK(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  Rng rng = make_stream(1, "data");
  const ScoreMatrix m = random_matrix(100, g, rng);
  GroundTruth truth;
  for (std::size_t i = 0; i < m.rows(); ++i) truth[m.query_ids[i]] = m.gallery_ids[(i * 31) % g];
  for (auto _ : state) benchmark::DoNotOptimize(recall_at_k(m, truth, 10));
}
BENCHMARK(BM_RecallAtK)->Arg(200)->Arg(2000);

void BM_WeightedSum(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng = make_stream(2, "data");
  std::vector<ScoreMatrix> mats;
  for (std::size_t i = 0; i < k; ++i) mats.push_back(random_matrix(500, 1000, rng));
  std::vector<const ScoreMatrix*> ptrs;
  for (const auto& m : mats) ptrs.push_back(&m);
  const std::vector<double> w(k, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(weighted_sum(ptrs, w).values.data());
}
BENCHMARK(BM_WeightedSum)->Arg(2)->Arg(4)->Arg(8);

void BM_SpellCorrect(benchmark::State& state) {
  std::vector<std::pair<std::string, std::int64_t>> words;
  Rng rng = make_stream(3, "data");
  std::uniform_int_distribution<int> len(3, 9), letter('a', 'z');
  while (words.size() < static_cast<std::size_t>(state.range(0))) {
    std::string w;
    for (int i = len(rng); i > 0; --i) w += static_cast<char>(letter(rng));
    bool dup = false;
    for (const auto& e : words) dup = dup || e.first == w;
    if (!dup) words.emplace_back(w, static_cast<std::int64_t>(words.size() % 17));
  }
  const Vocabulary vocab(words);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < 64; ++i) {
    std::string t = words[(i * 37) % words.size()].first;
    std::swap(t[0], t[1]);
    tokens.push_back(t);
  }
  for (auto _ : state)
    for (const auto& t : tokens) benchmark::DoNotOptimize(spell_correct(t, vocab));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tokens.size()));
}
BENCHMARK(BM_SpellCorrect)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
