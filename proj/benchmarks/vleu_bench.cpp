#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "vleu/elo.hpp"
#include "vleu/metric.hpp"
#include "vleu/scoring.hpp"

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

vleu::SimilarityMatrix random_matrix(std::size_t n) {
  std::mt19937_64 rng(n);
  std::uniform_real_distribution<double> cosine(-0.2, 0.45);
  std::vector<double> v(n * n);
  for (auto& x : v) x = cosine(rng);
  return {ids(n), ids(n), std::move(v)};
}

std::vector<vleu::Embedding> random_embeddings(std::size_t n, std::size_t dim, vleu::EmbeddingKind kind,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<vleu::Embedding> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    out.push_back(vleu::make_embedding(std::to_string(i), kind, "bench", std::move(v)));
  }
  return out;
}

void BM_VleuScore(benchmark::State& state) {
  const auto s = random_matrix(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(vleu::vleu_score(s).vleu);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_VleuScore)->RangeMultiplier(4)->Range(16, 1024)->Unit(benchmark::kMillisecond)->Complexity();

void BM_SimilarityMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto texts = random_embeddings(n, 768, vleu::EmbeddingKind::text, 1);
  const auto images = random_embeddings(n, 768, vleu::EmbeddingKind::image, 2);
  for (auto _ : state) benchmark::DoNotOptimize(vleu::build_similarity_matrix(texts, images).rows());
}
BENCHMARK(BM_SimilarityMatrix)->Arg(25)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_EloUpdate(benchmark::State& state) {
  vleu::EloState elo;
  elo.register_model("a");
  elo.register_model("b");
  vleu::MatchOutcome o;
  o.match_id = "m";
  o.model_a = "a";
  o.model_b = "b";
  double s = 0;
  for (auto _ : state) {
    o.score_a = s;
    s = s == 1.0 ? 0.0 : s + 0.5;
    vleu::apply_outcome(elo, o);
    if (elo.match_log.size() > 4096) elo.match_log.clear();
  }
}
BENCHMARK(BM_EloUpdate);

}  // namespace

BENCHMARK_MAIN();
