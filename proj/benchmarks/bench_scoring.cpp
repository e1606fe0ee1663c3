#include <benchmark/benchmark.h>

#include "ftg/ego_graph.hpp"
#include "ftg/filter.hpp"
#include "ftg/trainer.hpp"

using namespace ftg;

namespace {

const KnowledgeGraph& graph() {
  static const KnowledgeGraph kg = synthetic_kg(SyntheticSpec{});
  return kg;
}

ModelKind kind_of(std::int64_t i) { return static_cast<ModelKind>(i); }

void BM_ScoreAll(benchmark::State& state) {
  const auto m = init_model(kind_of(state.range(0)), 14541, 237, 64, 6.0f, 1);
  for (auto _ : state) benchmark::DoNotOptimize(score_all(m, Direction::Tail, 17, 3));
  state.SetItemsProcessed(state.iterations() * 14541);
  state.SetLabel(std::string(to_string(kind_of(state.range(0)))));
}
BENCHMARK(BM_ScoreAll)->DenseRange(0, 3);

void BM_RankFiltered(benchmark::State& state) {
  const auto& kg = graph();
  const auto m = init_model(ModelKind::RotatE, kg.entity_count(), kg.relation_count(), 64, 6.0f, 1);
  const auto queries = split_queries(kg, Split::Test);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(rank_filtered(m, kg, queries[i++ % queries.size()], 20));
}
BENCHMARK(BM_RankFiltered);

void BM_TrainStep(benchmark::State& state) {
  const auto& kg = graph();
  TrainConfig c;
  c.steps = 1;
  c.eval_every = 0;
  for (auto _ : state) benchmark::DoNotOptimize(train(kg, c, ModelKind::RotatE));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

void BM_StructurePrunedContext(benchmark::State& state) {
  const auto& kg = graph();
  const auto m = init_model(ModelKind::RotatE, kg.entity_count(), kg.relation_count(), 64, 6.0f, 1);
  const auto queries = split_queries(kg, Split::Test);
  std::size_t i = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(context_heuristic(kg, m, queries[i++ % queries.size()], ContextOptions{}));
}
BENCHMARK(BM_StructurePrunedContext);

}  // namespace

BENCHMARK_MAIN();
