#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftg/embedding.hpp"
#include "ftg/kg.hpp"

namespace ftg {

// (anchor, rel, ?) for tail queries, (?, rel, anchor) for head queries.
struct Query {
  Direction direction = Direction::Tail;
  EntityId anchor = 0;
  RelationId rel = 0;
  std::optional<EntityId> target;
  Split source_split = Split::Test;
  std::size_t index = 0;  // position of the source triple in its split

  std::string id() const;
  // The full triple; requires a target.
  Triple triple() const;
};

Query make_query(const Triple& t, Direction d, Split split, std::size_t index);

// Both directions of every triple in `split`, tail query first.
std::vector<Query> split_queries(const KnowledgeGraph& kg, Split split);

struct FilteredRanking {
  // Filtered entities by descending score, ties by ascending id. When the
  // ranking was truncated only the leading entries are present.
  std::vector<EntityId> order;
  std::vector<float> scores;  // aligned with order
  std::size_t filtered_size = 0;  // entities surviving the filter
  std::size_t target_rank = 0;    // 1-based, over the full filtered set
  float target_score = 0.0f;
};

// Scores all entities, removes every other known-true answer (train, valid
// and test) and ranks the rest. `keep` limits the materialized prefix; the
// target rank is always exact. Throws InvalidArgument without a target.
FilteredRanking rank_filtered(const EmbeddingModel& model, const KnowledgeGraph& kg,
                              const Query& query, std::optional<std::size_t> keep = std::nullopt);

enum class CandidateMode { Train, Eval };

struct Candidate {
  EntityId entity = 0;
  float score = 0.0f;
};

struct CandidateSet {
  Query query;
  std::vector<Candidate> candidates;
  std::size_t k = 0;
  bool target_in_topk = false;
  std::optional<std::size_t> raw_target_rank;  // filtered rank before forcing
  bool forced_inclusion = false;

  bool contains(EntityId e) const;
  std::vector<EntityId> ids() const;
};

// Top-k of the filtered ranking. In train mode a target outside the top k
// replaces the k-th entry and forced_inclusion is set.
CandidateSet topk_candidates(const EmbeddingModel& model, const KnowledgeGraph& kg,
                             const Query& query, std::size_t k, CandidateMode mode);

// Same selection from an already computed ranking (prefix of at least k).
CandidateSet topk_from_ranking(const FilteredRanking& ranking, const Query& query, std::size_t k,
                               CandidateMode mode);

// Seeded Fisher-Yates over the candidate order; off by default in the
// pipeline.
void shuffle_candidates(CandidateSet& set, std::uint64_t seed);

struct RecallBucket {
  std::size_t lo = 0;
  std::size_t hi = 0;  // inclusive; 0 means unbounded
  std::size_t tail = 0;
  std::size_t head = 0;
};

struct RecallReport {
  std::size_t k = 0;
  std::size_t tail_queries = 0, head_queries = 0;
  std::size_t tail_hits = 0, head_hits = 0;
  std::vector<RecallBucket> histogram;

  double tail_recall() const;
  double head_recall() const;
  double recall() const;
};

// Recall@k of the unforced top-k over both directions of every triple in
// `split`, with a histogram of filtered target ranks.
RecallReport recall_report(const EmbeddingModel& model, const KnowledgeGraph& kg, Split split,
                           std::size_t k, unsigned threads = 1);

RecallReport recall_from_ranks(const std::vector<Query>& queries,
                               const std::vector<std::size_t>& ranks, std::size_t k);

nlohmann::ordered_json to_json(const RecallReport& r);

}  // namespace ftg
