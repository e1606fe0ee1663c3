#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftg/ego_graph.hpp"
#include "ftg/embedding.hpp"
#include "ftg/evaluation.hpp"
#include "ftg/filter.hpp"
#include "ftg/generators.hpp"
#include "ftg/kg.hpp"

namespace ftg {

struct PipelineConfig {
  std::size_t k = 20;
  std::size_t n_return = 10;
  ContextOptions context;
  Split split = Split::Test;
  unsigned threads = 1;
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
  bool shuffle_candidates = false;
  std::uint64_t seed = 0;
};

struct QueryOutcome {
  Query query;
  std::size_t filter_rank = 0;
  std::size_t merged_rank = 0;
  bool fallback = false;
  bool parsed = false;  // at least one output mapped to a candidate
};

struct PipelineReport {
  std::string generator;
  Heuristic heuristic = Heuristic::StructurePruned;
  std::size_t k = 0;
  MetricReport metrics;
  MetricReport filter_metrics;
  RecallReport recall;
  std::size_t forced_inclusion = 0;
  std::size_t fallbacks = 0;
  std::size_t unparsed = 0;
  std::size_t empty_context = 0;
  std::size_t undefined_similarity = 0;
  std::vector<std::string> warnings;
  std::vector<QueryOutcome> outcomes;
};

// Filtered rank of the target for both directions of every triple in `split`.
std::vector<RankRecord> filter_rank_records(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                            Split split, unsigned threads = 1);

MetricReport filter_metrics(const EmbeddingModel& model, const KnowledgeGraph& kg, Split split,
                            unsigned threads = 1);

// Filter, candidates, context, sample, generate, parse, merge, score, for
// both directions of every triple in config.split. Transport errors are
// retried; after the last attempt the query keeps its filter rank and a
// warning is counted.
PipelineReport run_pipeline(const KnowledgeGraph& kg, const EmbeddingModel& model,
                            Generator& generator, const PipelineConfig& config);

// Kept triples of pruned ⊆ full 1-hop ⊆ two-hop for one query, compared
// without a length budget.
bool context_chain_holds(const KnowledgeGraph& kg, const EmbeddingModel& model, const Query& query,
                         const ContextOptions& options);

struct AblationReport {
  std::vector<PipelineReport> runs;
  std::size_t chain_checked = 0;
  std::size_t chain_violations = 0;
};

AblationReport run_ablation(const KnowledgeGraph& kg, const EmbeddingModel& model,
                            Generator& generator, const PipelineConfig& config,
                            std::span<const Heuristic> heuristics = kAllHeuristics);

nlohmann::ordered_json to_json(const PipelineReport& r);
nlohmann::ordered_json to_json(const AblationReport& r);

// Fixed-width text table, one row per run.
std::string render_table(std::span<const PipelineReport> runs);

}  // namespace ftg
