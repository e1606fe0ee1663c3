#include "ftg/ego_graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "ftg/error.hpp"
#include "ftg/rng.hpp"
#include "ftg/text.hpp"

namespace ftg {

EgoGraph extract_ego(const KnowledgeGraph& kg, EntityId center) {
  EgoGraph ego;
  ego.center = center;
  for (const auto& e : kg.out_edges(center))
    ego.triples.push_back({Triple{center, e.rel, e.entity}, EgoDirection::Out});
  // Self-loops live only in the outgoing row, so the union has no duplicates.
  for (const auto& e : kg.in_edges(center))
    ego.triples.push_back({Triple{e.entity, e.rel, center}, EgoDirection::In});
  std::sort(ego.triples.begin(), ego.triples.end(), [](const EgoTriple& a, const EgoTriple& b) {
    if (a.triple.rel != b.triple.rel) return a.triple.rel < b.triple.rel;
    if (a.neighbor() != b.neighbor()) return a.neighbor() < b.neighbor();
    return a.direction < b.direction;
  });
  return ego;
}

namespace {

// Query-side vector and the machinery for cosine against it.
class SimilarityProbe {
 public:
  SimilarityProbe(const EmbeddingModel& model, const Query& query) : model_(model) {
    query_ = concat(query.anchor, query.rel);
    query_norm_ = norm(query_);
  }

  std::optional<double> operator()(EntityId entity, RelationId rel) const {
    const auto v = concat(entity, rel);
    const double n = norm(v);
    if (n == 0.0 || query_norm_ == 0.0) return std::nullopt;
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * query_[i];
    return dot / (n * query_norm_);
  }

 private:
  std::vector<double> concat(EntityId entity, RelationId rel) const {
    if (entity < 0 || static_cast<std::size_t>(entity) >= model_.n_entities)
      throw OutOfRange("entity id " + std::to_string(entity) + " out of range for model");
    std::vector<double> v(model_.entity_row(entity).begin(), model_.entity_row(entity).end());
    const auto r = relation_feature(model_, rel);
    v.insert(v.end(), r.begin(), r.end());
    return v;
  }

  static double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }

  const EmbeddingModel& model_;
  std::vector<double> query_;
  double query_norm_ = 0.0;
};

bool similarity_order(const ScoredTriple& a, const ScoredTriple& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  if (a.triple.triple.rel != b.triple.triple.rel) return a.triple.triple.rel < b.triple.triple.rel;
  if (a.triple.neighbor() != b.triple.neighbor()) return a.triple.neighbor() < b.triple.neighbor();
  return a.triple.direction < b.triple.direction;
}

}  // namespace

std::optional<double> triple_similarity(const EmbeddingModel& model, const Query& query,
                                        EntityId entity, RelationId rel) {
  return SimilarityProbe(model, query)(entity, rel);
}

PruneResult prune(const EgoGraph& ego, const EmbeddingModel& model, const Query& query,
                  double epsilon, NeighborBinding binding) {
  if (query.anchor != ego.center)
    throw InvalidArgument("prune: query anchor is not the ego-graph center");
  const SimilarityProbe probe(model, query);
  PruneResult out;
  for (const auto& t : ego.triples) {
    const EntityId bound = binding == NeighborBinding::Literal ? t.triple.head : ego.center;
    const auto sim = probe(bound, t.triple.rel);
    if (!sim) {
      ++out.undefined;
      continue;
    }
    if (*sim > epsilon) out.kept.push_back({t, *sim});
  }
  std::sort(out.kept.begin(), out.kept.end(), similarity_order);
  return out;
}

ContextStep to_step(const EgoTriple& t, EntityId center) { return {t.triple, center, t.neighbor()}; }

SerializedContext serialize_steps(const KnowledgeGraph& kg, EntityId center,
                                  std::span<const ContextStep> steps, std::size_t budget_chars) {
  SerializedContext ctx;
  ctx.center = center;
  ctx.selected.assign(steps.begin(), steps.end());

  const std::string& center_name = kg.entity_name(center);
  std::size_t length = text::utf8_length(center_name);
  if (length > budget_chars) return ctx;

  ctx.tokens.push_back(center_name);
  ctx.entities.push_back(center);
  std::unordered_set<EntityId> seen{center};
  constexpr std::size_t kSep = 2;  // ", "

  for (const auto& step : steps) {
    const std::string& rel = kg.relation_name(step.triple.rel);
    const bool fresh = !seen.contains(step.to);
    std::size_t added = kSep + text::utf8_length(rel);
    if (fresh) added += kSep + text::utf8_length(kg.entity_name(step.to));
    if (length + added > budget_chars) break;
    length += added;
    ctx.kept.push_back(step);
    ctx.tokens.push_back(rel);
    if (fresh) {
      seen.insert(step.to);
      ctx.tokens.push_back(kg.entity_name(step.to));
      ctx.entities.push_back(step.to);
    }
  }
  ctx.text = text::join(ctx.tokens, ", ");
  return ctx;
}

SerializedContext serialize_bfs(const KnowledgeGraph& kg, EntityId center,
                                std::span<const EgoTriple> kept, std::size_t budget_chars) {
  std::vector<ContextStep> steps;
  steps.reserve(kept.size());
  for (const auto& t : kept) {
    const bool incident = t.direction == EgoDirection::Out ? t.triple.head == center
                                                            : t.triple.tail == center;
    if (!incident) throw InvalidArgument("serialize_bfs: triple not incident to the center");
    steps.push_back(to_step(t, center));
  }
  return serialize_steps(kg, center, steps, budget_chars);
}

std::string_view to_string(Heuristic h) {
  switch (h) {
    case Heuristic::StructurePruned: return "structure_pruned";
    case Heuristic::RandomWalk: return "random_walk";
    case Heuristic::Full1Hop: return "full_1hop";
    case Heuristic::TwoHop: return "two_hop";
  }
  return "?";
}

Heuristic parse_heuristic(std::string_view name) {
  for (auto h : kAllHeuristics) {
    if (name == to_string(h)) return h;
  }
  throw InvalidArgument("unknown context heuristic '" + std::string(name) + "'");
}

namespace {

EgoGraph query_ego(const KnowledgeGraph& kg, const Query& query, bool exclude_query_triple) {
  auto ego = extract_ego(kg, query.anchor);
  if (exclude_query_triple && query.target) {
    const Triple own = query.triple();
    std::erase_if(ego.triples, [&](const EgoTriple& t) { return t.triple == own; });
  }
  return ego;
}

std::vector<ContextStep> random_walk(const KnowledgeGraph& kg, const Query& query,
                                     const ContextOptions& opt) {
  std::optional<Triple> own;
  if (opt.exclude_query_triple && query.target) own = query.triple();
  Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(query.anchor),
                      static_cast<std::uint64_t>(query.rel),
                      query.direction == Direction::Tail ? 1u : 2u));
  std::vector<ContextStep> steps;
  EntityId cur = query.anchor;
  for (std::size_t i = 0; i < opt.walk_max_steps; ++i) {
    std::vector<ContextStep> options;
    for (const auto& e : kg.out_edges(cur)) {
      const Triple t{cur, e.rel, e.entity};
      if (!own || t != *own) options.push_back({t, cur, e.entity});
    }
    for (const auto& e : kg.in_edges(cur)) {
      const Triple t{e.entity, e.rel, cur};
      if (!own || t != *own) options.push_back({t, cur, e.entity});
    }
    if (options.empty()) break;
    const auto& next = options[rng.index(options.size())];
    steps.push_back(next);
    cur = next.to;
  }
  return steps;
}

std::vector<ContextStep> two_hop(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                 const Query& query, const EgoGraph& ego,
                                 const ContextOptions& opt, std::size_t& undefined) {
  std::vector<ContextStep> steps;
  std::set<Triple> used;
  std::vector<EntityId> frontier;
  std::unordered_set<EntityId> visited{ego.center};
  for (const auto& t : ego.triples) {
    steps.push_back(to_step(t, ego.center));
    used.insert(t.triple);
    if (visited.insert(t.neighbor()).second) frontier.push_back(t.neighbor());
  }

  std::optional<Triple> own;
  if (opt.exclude_query_triple && query.target) own = query.triple();

  struct Hop2 {
    ContextStep step;
    std::size_t parent = 0;
    double similarity = 0.0;
  };
  std::vector<Hop2> pool;
  const SimilarityProbe probe(model, query);
  for (std::size_t p = 0; p < frontier.size(); ++p) {
    const EntityId node = frontier[p];
    const auto consider = [&](const Triple& t, EntityId to) {
      if ((own && t == *own) || !used.insert(t).second) return;
      const EntityId bound = opt.binding == NeighborBinding::Literal ? t.head : node;
      const auto sim = probe(bound, t.rel);
      if (!sim) {
        ++undefined;
        return;
      }
      pool.push_back({{t, node, to}, p, *sim});
    };
    for (const auto& e : kg.out_edges(node)) consider({node, e.rel, e.entity}, e.entity);
    for (const auto& e : kg.in_edges(node)) consider({e.entity, e.rel, node}, e.entity);
  }
  std::sort(pool.begin(), pool.end(), [](const Hop2& a, const Hop2& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.step.triple.rel != b.step.triple.rel) return a.step.triple.rel < b.step.triple.rel;
    if (a.step.to != b.step.to) return a.step.to < b.step.to;
    return a.step.triple < b.step.triple;
  });
  if (pool.size() > opt.two_hop_cap) pool.resize(opt.two_hop_cap);
  std::sort(pool.begin(), pool.end(), [](const Hop2& a, const Hop2& b) {
    if (a.parent != b.parent) return a.parent < b.parent;
    if (a.step.triple.rel != b.step.triple.rel) return a.step.triple.rel < b.step.triple.rel;
    if (a.step.to != b.step.to) return a.step.to < b.step.to;
    return a.step.triple < b.step.triple;
  });
  for (const auto& h : pool) steps.push_back(h.step);
  return steps;
}

}  // namespace

SerializedContext context_heuristic(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                    const Query& query, const ContextOptions& opt) {
  const EntityId center = query.anchor;
  switch (opt.kind) {
    case Heuristic::StructurePruned: {
      const auto ego = query_ego(kg, query, opt.exclude_query_triple);
      const auto pruned = prune(ego, model, query, opt.epsilon, opt.binding);
      std::vector<EgoTriple> kept;
      kept.reserve(pruned.kept.size());
      for (const auto& s : pruned.kept) kept.push_back(s.triple);
      auto ctx = serialize_bfs(kg, center, kept, opt.budget_chars);
      ctx.undefined_similarity = pruned.undefined;
      return ctx;
    }
    case Heuristic::RandomWalk: {
      const auto steps = random_walk(kg, query, opt);
      return serialize_steps(kg, center, steps, opt.budget_chars);
    }
    case Heuristic::Full1Hop: {
      const auto ego = query_ego(kg, query, opt.exclude_query_triple);
      return serialize_bfs(kg, center, ego.triples, opt.budget_chars);
    }
    case Heuristic::TwoHop: {
      const auto ego = query_ego(kg, query, opt.exclude_query_triple);
      std::size_t undefined = 0;
      const auto steps = two_hop(kg, model, query, ego, opt, undefined);
      auto ctx = serialize_steps(kg, center, steps, opt.budget_chars);
      ctx.undefined_similarity = undefined;
      return ctx;
    }
  }
  throw InvalidArgument("unknown context heuristic");
}

}  // namespace ftg
