#include "ftg/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <limits>
#include <set>
#include <thread>

#include "ftg/adapter.hpp"
#include "ftg/error.hpp"
#include "ftg/instruct.hpp"
#include "ftg/parallel.hpp"
#include "ftg/rng.hpp"

namespace ftg {

std::vector<RankRecord> filter_rank_records(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                            Split split, unsigned threads) {
  const auto queries = split_queries(kg, split);
  std::vector<RankRecord> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    out[i] = {queries[i].direction, rank_filtered(model, kg, queries[i], std::size_t{0}).target_rank};
  });
  return out;
}

MetricReport filter_metrics(const EmbeddingModel& model, const KnowledgeGraph& kg, Split split,
                            unsigned threads) {
  return evaluate(filter_rank_records(model, kg, split, threads));
}

namespace {

struct Attempt {
  std::vector<std::string> outputs;
  bool failed = false;
};

Attempt generate_with_retry(Generator& generator, const InstructionSample& sample,
                            const PipelineConfig& cfg) {
  auto delay = cfg.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      return {generator.generate(sample, cfg.n_return), false};
    } catch (const TransportError&) {
      if (attempt >= cfg.max_attempts) return {{}, true};
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

}  // namespace

PipelineReport run_pipeline(const KnowledgeGraph& kg, const EmbeddingModel& model,
                            Generator& generator, const PipelineConfig& cfg) {
  if (cfg.k == 0 || cfg.k > kg.entity_count()) throw InvalidArgument("k must lie in [1, |E|]");
  if (cfg.max_attempts < 1) throw InvalidArgument("max_attempts must be at least 1");

  PipelineReport report;
  report.generator = std::string(generator.name());
  report.heuristic = cfg.context.kind;
  report.k = cfg.k;

  const auto queries = split_queries(kg, cfg.split);
  if (queries.empty()) throw InvalidArgument("split '" + std::string(to_string(cfg.split)) + "' is empty");
  report.outcomes.resize(queries.size());
  std::atomic<std::size_t> forced{0}, empty_ctx{0}, undefined{0};

  const unsigned threads = std::max(cfg.threads, generator.concurrency());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const Query& q = queries[i];
    const auto ranking = rank_filtered(model, kg, q, cfg.k);
    auto candidates = topk_from_ranking(ranking, q, cfg.k, CandidateMode::Eval);
    if (candidates.forced_inclusion) ++forced;
    if (cfg.shuffle_candidates)
      shuffle_candidates(candidates, derive_seed(cfg.seed, stable_hash(q.id())));
    const auto ctx = context_heuristic(kg, model, q, cfg.context);
    if (ctx.empty()) ++empty_ctx;
    undefined += ctx.undefined_similarity;
    const auto pooled = mean_pool(model, ctx, q.anchor);
    const auto sample = build_sample(kg, q, candidates, &ctx, pooled, SampleKind::Eval);

    const auto attempt = generate_with_retry(generator, sample, cfg);
    QueryOutcome& out = report.outcomes[i];
    out.query = q;
    out.filter_rank = ranking.target_rank;
    out.fallback = attempt.failed;
    if (attempt.failed) {
      out.merged_rank = ranking.target_rank;
      return;
    }
    // Filter order for parsing, whatever order the prompt showed.
    std::vector<EntityId> ids;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < cfg.k && j < ranking.order.size(); ++j) {
      ids.push_back(ranking.order[j]);
      names.push_back(kg.entity_name(ranking.order[j]));
    }
    const auto generated = parse_outputs(attempt.outputs, names, ids);
    out.parsed = !generated.empty();
    out.merged_rank = merged_target_rank(generated, candidates, *q.target, ranking.target_rank);
  });

  std::vector<RankRecord> merged, filtered;
  std::vector<std::size_t> filter_ranks;
  for (const auto& o : report.outcomes) {
    merged.push_back({o.query.direction, o.merged_rank});
    filtered.push_back({o.query.direction, o.filter_rank});
    filter_ranks.push_back(o.filter_rank);
    report.fallbacks += o.fallback;
    report.unparsed += !o.fallback && !o.parsed;
  }
  report.metrics = evaluate(merged);
  report.filter_metrics = evaluate(filtered);
  report.recall = recall_from_ranks(queries, filter_ranks, cfg.k);
  report.forced_inclusion = forced;
  report.empty_context = empty_ctx;
  report.undefined_similarity = undefined;
  if (report.fallbacks > 0)
    report.warnings.push_back(std::to_string(report.fallbacks) +
                              " queries fell back to the filter ranking after generator failures");
  if (report.unparsed > 0)
    report.warnings.push_back(std::to_string(report.unparsed) +
                              " queries produced no output matching a candidate");
  if (report.undefined_similarity > 0)
    report.warnings.push_back(std::to_string(report.undefined_similarity) +
                              " context triples had an undefined similarity (zero vector)");
  return report;
}

bool context_chain_holds(const KnowledgeGraph& kg, const EmbeddingModel& model, const Query& query,
                         const ContextOptions& options) {
  const auto kept = [&](Heuristic h) {
    ContextOptions o = options;
    o.kind = h;
    o.budget_chars = std::numeric_limits<std::size_t>::max();
    std::set<Triple> s;
    for (const auto& step : context_heuristic(kg, model, query, o).kept) s.insert(step.triple);
    return s;
  };
  const auto pruned = kept(Heuristic::StructurePruned);
  const auto full = kept(Heuristic::Full1Hop);
  const auto two = kept(Heuristic::TwoHop);
  return std::includes(full.begin(), full.end(), pruned.begin(), pruned.end()) &&
         std::includes(two.begin(), two.end(), full.begin(), full.end());
}

AblationReport run_ablation(const KnowledgeGraph& kg, const EmbeddingModel& model,
                            Generator& generator, const PipelineConfig& config,
                            std::span<const Heuristic> heuristics) {
  AblationReport report;
  for (Heuristic h : heuristics) {
    PipelineConfig c = config;
    c.context.kind = h;
    report.runs.push_back(run_pipeline(kg, model, generator, c));
  }
  for (const auto& q : split_queries(kg, config.split)) {
    ++report.chain_checked;
    if (!context_chain_holds(kg, model, q, config.context)) ++report.chain_violations;
  }
  return report;
}

nlohmann::ordered_json to_json(const PipelineReport& r) {
  nlohmann::ordered_json j;
  j["generator"] = r.generator;
  j["heuristic"] = std::string(to_string(r.heuristic));
  j["k"] = r.k;
  j["queries"] = r.outcomes.size();
  j["metrics"] = to_json(r.metrics);
  j["filter_metrics"] = to_json(r.filter_metrics);
  j["recall"] = to_json(r.recall);
  j["forced_inclusion"] = r.forced_inclusion;
  j["fallbacks"] = r.fallbacks;
  j["unparsed"] = r.unparsed;
  j["empty_context"] = r.empty_context;
  j["warnings"] = r.warnings;
  return j;
}

nlohmann::ordered_json to_json(const AblationReport& r) {
  nlohmann::ordered_json runs = nlohmann::ordered_json::array();
  for (const auto& run : r.runs) runs.push_back(to_json(run));
  nlohmann::ordered_json j;
  j["heuristics"] = std::move(runs);
  j["subset_chain"] = {{"checked", r.chain_checked}, {"violations", r.chain_violations}};
  return j;
}

std::string render_table(std::span<const PipelineReport> runs) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %-10s %8s %8s %8s %8s %10s\n", "heuristic", "generator",
                "MRR", "H@1", "H@3", "H@10", "recall@k");
  out += line;
  for (const auto& r : runs) {
    const auto& m = r.metrics.combined;
    std::snprintf(line, sizeof line, "%-18s %-10s %8.4f %8.4f %8.4f %8.4f %10.4f\n",
                  std::string(to_string(r.heuristic)).c_str(), r.generator.c_str(), m.mrr, m.hits1,
                  m.hits3, m.hits10, r.recall.recall());
    out += line;
  }
  return out;
}

}  // namespace ftg
