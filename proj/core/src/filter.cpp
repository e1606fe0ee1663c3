#include "ftg/filter.hpp"

#include <algorithm>
#include <numeric>

#include "ftg/error.hpp"
#include "ftg/parallel.hpp"
#include "ftg/rng.hpp"

namespace ftg {

std::string Query::id() const {
  return std::string(to_string(source_split)) + "-" + std::to_string(index) + "-" +
         std::string(to_string(direction));
}

Triple Query::triple() const {
  if (!target) throw InvalidArgument("query " + id() + " has no target");
  return direction == Direction::Tail ? Triple{anchor, rel, *target} : Triple{*target, rel, anchor};
}

Query make_query(const Triple& t, Direction d, Split split, std::size_t index) {
  Query q;
  q.direction = d;
  q.anchor = d == Direction::Tail ? t.head : t.tail;
  q.rel = t.rel;
  q.target = d == Direction::Tail ? t.tail : t.head;
  q.source_split = split;
  q.index = index;
  return q;
}

std::vector<Query> split_queries(const KnowledgeGraph& kg, Split split) {
  const auto triples = kg.split(split);
  std::vector<Query> out;
  out.reserve(2 * triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    out.push_back(make_query(triples[i], Direction::Tail, split, i));
    out.push_back(make_query(triples[i], Direction::Head, split, i));
  }
  return out;
}

FilteredRanking rank_filtered(const EmbeddingModel& model, const KnowledgeGraph& kg,
                              const Query& query, std::optional<std::size_t> keep) {
  if (!query.target) throw InvalidArgument("rank_filtered: query " + query.id() + " has no target");
  const EntityId target = *query.target;
  if (!kg.valid_entity(target)) throw OutOfRange("target id out of range");

  const auto scores = score_all(model, query.direction, query.anchor, query.rel);
  const auto truth = query.direction == Direction::Tail ? kg.true_tails(query.anchor, query.rel)
                                                        : kg.true_heads(query.rel, query.anchor);

  std::vector<char> removed(scores.size(), 0);
  for (EntityId e : truth) {
    if (e != target) removed[static_cast<std::size_t>(e)] = 1;
  }

  FilteredRanking out;
  std::vector<EntityId> ids;
  ids.reserve(scores.size());
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (!removed[e]) ids.push_back(static_cast<EntityId>(e));
  }
  out.filtered_size = ids.size();

  const float ts = scores[static_cast<std::size_t>(target)];
  std::size_t ahead = 0;
  for (EntityId e : ids) {
    const float s = scores[static_cast<std::size_t>(e)];
    if (s > ts || (s == ts && e < target)) ++ahead;
  }
  out.target_rank = ahead + 1;
  out.target_score = ts;

  const auto before = [&](EntityId a, EntityId b) {
    const float sa = scores[static_cast<std::size_t>(a)], sb = scores[static_cast<std::size_t>(b)];
    return sa != sb ? sa > sb : a < b;
  };
  const std::size_t n = keep ? std::min(*keep, ids.size()) : ids.size();
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), before);
  ids.resize(n);
  out.order = std::move(ids);
  out.scores.reserve(n);
  for (EntityId e : out.order) out.scores.push_back(scores[static_cast<std::size_t>(e)]);
  return out;
}

bool CandidateSet::contains(EntityId e) const {
  return std::any_of(candidates.begin(), candidates.end(),
                     [e](const Candidate& c) { return c.entity == e; });
}

std::vector<EntityId> CandidateSet::ids() const {
  std::vector<EntityId> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(c.entity);
  return out;
}

CandidateSet topk_from_ranking(const FilteredRanking& ranking, const Query& query, std::size_t k,
                               CandidateMode mode) {
  if (k == 0) throw InvalidArgument("k must be at least 1");
  const std::size_t n = std::min(k, ranking.filtered_size);
  if (ranking.order.size() < n) throw InvalidArgument("ranking prefix shorter than k");

  CandidateSet set;
  set.query = query;
  set.k = k;
  set.raw_target_rank = ranking.target_rank;
  set.target_in_topk = ranking.target_rank <= n;
  set.candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) set.candidates.push_back({ranking.order[i], ranking.scores[i]});

  if (mode == CandidateMode::Train && !set.target_in_topk && query.target) {
    // The target ranks below every kept entry, so replacing the last one
    // keeps scores non-increasing.
    set.candidates.back() = {*query.target, ranking.target_score};
    set.forced_inclusion = true;
  }
  return set;
}

CandidateSet topk_candidates(const EmbeddingModel& model, const KnowledgeGraph& kg,
                             const Query& query, std::size_t k, CandidateMode mode) {
  if (k == 0 || k > kg.entity_count())
    throw InvalidArgument("k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(kg.entity_count()) + "]");
  const auto ranking = rank_filtered(model, kg, query);
  return topk_from_ranking(ranking, query, k, mode);
}

void shuffle_candidates(CandidateSet& set, std::uint64_t seed) {
  Rng rng(derive_seed(seed, stable_hash(set.query.id())));
  auto& c = set.candidates;
  for (std::size_t i = c.size(); i > 1; --i) std::swap(c[i - 1], c[rng.index(i)]);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<RecallBucket> empty_histogram() {
  return {{1, 1}, {2, 3}, {4, 10}, {11, 20}, {21, 50}, {51, 100}, {101, 1000}, {1001, 0}};
}

double ratio(std::size_t a, std::size_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

double RecallReport::tail_recall() const { return ratio(tail_hits, tail_queries); }
double RecallReport::head_recall() const { return ratio(head_hits, head_queries); }
double RecallReport::recall() const {
  return ratio(tail_hits + head_hits, tail_queries + head_queries);
}

RecallReport recall_from_ranks(const std::vector<Query>& queries,
                               const std::vector<std::size_t>& ranks, std::size_t k) {
  RecallReport r;
  r.k = k;
  r.histogram = empty_histogram();
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool tail = queries[i].direction == Direction::Tail;
    const std::size_t rank = ranks[i];
    (tail ? r.tail_queries : r.head_queries)++;
    if (rank <= k) (tail ? r.tail_hits : r.head_hits)++;
    for (auto& b : r.histogram) {
      if (rank >= b.lo && (b.hi == 0 || rank <= b.hi)) {
        (tail ? b.tail : b.head)++;
        break;
      }
    }
  }
  return r;
}

RecallReport recall_report(const EmbeddingModel& model, const KnowledgeGraph& kg, Split split,
                           std::size_t k, unsigned threads) {
  const auto queries = split_queries(kg, split);
  std::vector<std::size_t> ranks(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    ranks[i] = rank_filtered(model, kg, queries[i], std::size_t{0}).target_rank;
  });
  return recall_from_ranks(queries, ranks, k);
}

nlohmann::ordered_json to_json(const RecallReport& r) {
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& b : r.histogram) {
    nlohmann::ordered_json j;
    j["lo"] = b.lo;
    j["hi"] = b.hi == 0 ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(b.hi);
    j["tail"] = b.tail;
    j["head"] = b.head;
    hist.push_back(std::move(j));
  }
  nlohmann::ordered_json j;
  j["k"] = r.k;
  j["tail"] = r.tail_recall();
  j["head"] = r.head_recall();
  j["combined"] = r.recall();
  j["queries"] = r.tail_queries + r.head_queries;
  j["rank_histogram"] = std::move(hist);
  return j;
}

}  // namespace ftg
