#include "ftg/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "ftg/error.hpp"
#include "ftg/instruct.hpp"
#include "ftg/text.hpp"

namespace ftg {

namespace {

bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Does `needle` occur in `hay` with no word character glued to either end?
bool contains_token(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  for (std::size_t pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left = pos == 0 || !is_word(hay[pos - 1]) || !is_word(needle.front());
    const bool right = end == hay.size() || !is_word(hay[end]) || !is_word(needle.back());
    if (left && right) return true;
  }
  return false;
}

}  // namespace

std::optional<EntityId> parse_answer(std::string_view text, std::span<const std::string> names,
                                     std::span<const EntityId> ids) {
  if (names.size() != ids.size()) throw InvalidArgument("parse_answer: names and ids differ in length");
  const std::string norm = text::normalize(text);
  if (norm.empty()) return std::nullopt;

  const auto shown = display_names(names);
  std::vector<std::string> keys_shown(names.size()), keys_raw(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    keys_shown[i] = text::normalize(shown[i]);
    keys_raw[i] = text::normalize(names[i]);
  }
  for (std::size_t i = 0; i < names.size(); ++i)
    if (keys_shown[i] == norm) return ids[i];
  for (std::size_t i = 0; i < names.size(); ++i)
    if (keys_raw[i] == norm) return ids[i];

  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (const auto* key : {&keys_shown[i], &keys_raw[i]}) {
      if (key->size() > best_len && contains_token(norm, *key)) {
        best = i;
        best_len = key->size();
      }
    }
  }
  if (best) return ids[*best];
  return std::nullopt;
}

std::vector<EntityId> parse_outputs(std::span<const std::string> outputs,
                                    std::span<const std::string> names,
                                    std::span<const EntityId> ids) {
  std::vector<EntityId> out;
  for (const auto& o : outputs) {
    const auto id = parse_answer(o, names, ids);
    if (id && std::find(out.begin(), out.end(), *id) == out.end()) out.push_back(*id);
  }
  return out;
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Generated: return "generated";
    case Provenance::CandidateTail: return "candidate_tail";
    case Provenance::FilterTail: return "filter_tail";
  }
  return "?";
}

RankedPrediction merge_ranking(std::span<const EntityId> generated, const CandidateSet& candidates,
                               const FilteredRanking& filter) {
  if (filter.order.size() != filter.filtered_size)
    throw InvalidArgument("merge_ranking needs the full filtered ranking");
  RankedPrediction p;
  p.query = candidates.query;
  p.ranking.reserve(filter.order.size());
  std::unordered_set<EntityId> placed;
  for (EntityId e : generated) {
    if (!candidates.contains(e) || !placed.insert(e).second) continue;
    p.ranking.push_back(e);
    p.provenance.push_back(Provenance::Generated);
  }
  std::unordered_set<EntityId> in_set;
  for (const auto& c : candidates.candidates) in_set.insert(c.entity);
  // Candidates may be shuffled; the tail follows filter order.
  for (EntityId e : filter.order) {
    if (in_set.contains(e) && placed.insert(e).second) {
      p.ranking.push_back(e);
      p.provenance.push_back(Provenance::CandidateTail);
    }
  }
  for (EntityId e : filter.order) {
    if (placed.insert(e).second) {
      p.ranking.push_back(e);
      p.provenance.push_back(Provenance::FilterTail);
    }
  }
  if (p.query.target) {
    const auto it = std::find(p.ranking.begin(), p.ranking.end(), *p.query.target);
    if (it != p.ranking.end()) p.target_rank = static_cast<std::size_t>(it - p.ranking.begin()) + 1;
  }
  return p;
}

RankedPrediction merge_ranking(std::span<const std::string> outputs, const KnowledgeGraph& kg,
                               const CandidateSet& candidates, const FilteredRanking& filter) {
  // Parse against the candidates in filter order so ties favor the better rank.
  std::vector<EntityId> ids;
  for (EntityId e : filter.order)
    if (candidates.contains(e)) ids.push_back(e);
  std::vector<std::string> names;
  for (EntityId e : ids) names.push_back(kg.entity_name(e));
  const auto generated = parse_outputs(outputs, names, ids);
  return merge_ranking(generated, candidates, filter);
}

std::size_t merged_target_rank(std::span<const EntityId> generated, const CandidateSet& candidates,
                               EntityId target, std::size_t filter_rank) {
  std::vector<EntityId> gen;
  for (EntityId e : generated)
    if (candidates.contains(e) && std::find(gen.begin(), gen.end(), e) == gen.end()) gen.push_back(e);
  for (std::size_t i = 0; i < gen.size(); ++i)
    if (gen[i] == target) return i + 1;
  if (!candidates.contains(target)) return filter_rank;
  std::vector<std::pair<float, EntityId>> rest;
  for (const auto& c : candidates.candidates)
    if (std::find(gen.begin(), gen.end(), c.entity) == gen.end()) rest.emplace_back(c.score, c.entity);
  std::sort(rest.begin(), rest.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t i = 0; i < rest.size(); ++i)
    if (rest[i].second == target) return gen.size() + i + 1;
  return filter_rank;  // unreachable
}

Metrics metrics_from_ranks(std::span<const std::size_t> ranks) {
  Metrics m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  double rr = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (std::size_t r : ranks) {
    if (r == 0) throw InvalidArgument("rank must be >= 1");
    rr += 1.0 / static_cast<double>(r);
    h1 += r <= 1;
    h3 += r <= 3;
    h10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr = rr / n;
  m.hits1 = static_cast<double>(h1) / n;
  m.hits3 = static_cast<double>(h3) / n;
  m.hits10 = static_cast<double>(h10) / n;
  return m;
}

MetricReport evaluate(std::span<const RankRecord> records) {
  if (records.empty()) throw InvalidArgument("evaluate: no predictions");
  std::vector<std::size_t> tail, head, all;
  for (const auto& r : records) {
    (r.direction == Direction::Tail ? tail : head).push_back(r.rank);
    all.push_back(r.rank);
  }
  return {metrics_from_ranks(tail), metrics_from_ranks(head), metrics_from_ranks(all)};
}

MetricReport evaluate(std::span<const RankedPrediction> predictions) {
  std::vector<RankRecord> records;
  records.reserve(predictions.size());
  for (const auto& p : predictions) {
    if (!p.query.target || p.target_rank == 0)
      throw InvalidArgument("evaluate: prediction " + p.query.id() + " has no target");
    records.push_back({p.query.direction, p.target_rank});
  }
  return evaluate(records);
}

nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["count"] = m.count;
  j["mrr"] = m.mrr;
  j["hits@1"] = m.hits1;
  j["hits@3"] = m.hits3;
  j["hits@10"] = m.hits10;
  return j;
}

nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["tail"] = to_json(r.tail);
  j["head"] = to_json(r.head);
  j["combined"] = to_json(r.combined);
  return j;
}

}  // namespace ftg
