#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftg/filter.hpp"
#include "ftg/kg.hpp"

namespace ftg {

// Maps free text back to one candidate. `names` and `ids` are parallel and
// in filter order. After normalization: exact match, else the longest
// candidate name found inside the text on token boundaries. Ties go to the
// earliest (highest ranked) candidate.
std::optional<EntityId> parse_answer(std::string_view text, std::span<const std::string> names,
                                     std::span<const EntityId> ids);

// Parsed outputs in generation order, first occurrence kept.
std::vector<EntityId> parse_outputs(std::span<const std::string> outputs,
                                    std::span<const std::string> names,
                                    std::span<const EntityId> ids);

enum class Provenance { Generated, CandidateTail, FilterTail };

std::string_view to_string(Provenance p);

struct RankedPrediction {
  Query query;
  std::vector<EntityId> ranking;
  std::vector<Provenance> provenance;
  std::size_t target_rank = 0;  // 1-based; 0 when the query has no target
};

// [generated] ++ [unparsed candidates, filter order] ++ [the rest, filter
// order]. `filter` must be a full (untruncated) filtered ranking. Generated
// ids outside the candidate set are ignored.
RankedPrediction merge_ranking(std::span<const EntityId> generated, const CandidateSet& candidates,
                               const FilteredRanking& filter);

RankedPrediction merge_ranking(std::span<const std::string> outputs, const KnowledgeGraph& kg,
                               const CandidateSet& candidates, const FilteredRanking& filter);

// Rank of `target` in the merged order without building it. Valid when the
// candidates are the unforced filtered top-k, so that every candidate
// precedes every non-candidate in filter order.
std::size_t merged_target_rank(std::span<const EntityId> generated, const CandidateSet& candidates,
                               EntityId target, std::size_t filter_rank);

struct Metrics {
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

struct MetricReport {
  Metrics tail;
  Metrics head;
  Metrics combined;
};

struct RankRecord {
  Direction direction = Direction::Tail;
  std::size_t rank = 0;
};

Metrics metrics_from_ranks(std::span<const std::size_t> ranks);

// Throws InvalidArgument on an empty input or a zero rank.
MetricReport evaluate(std::span<const RankRecord> records);
MetricReport evaluate(std::span<const RankedPrediction> predictions);

nlohmann::ordered_json to_json(const Metrics& m);
nlohmann::ordered_json to_json(const MetricReport& r);

}  // namespace ftg
