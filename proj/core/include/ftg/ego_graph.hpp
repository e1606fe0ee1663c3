#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftg/embedding.hpp"
#include "ftg/filter.hpp"
#include "ftg/kg.hpp"

namespace ftg {

enum class EgoDirection { Out, In };

struct EgoTriple {
  Triple triple;
  EgoDirection direction = EgoDirection::Out;

  // The entity at the other end from the center (the center itself for a
  // self-loop).
  EntityId neighbor() const { return direction == EgoDirection::Out ? triple.tail : triple.head; }

  friend bool operator==(const EgoTriple&, const EgoTriple&) = default;
};

// 1-hop neighborhood of `center` over train edges, ordered by
// (relation, neighbor, out-before-in).
struct EgoGraph {
  EntityId center = 0;
  std::vector<EgoTriple> triples;
};

EgoGraph extract_ego(const KnowledgeGraph& kg, EntityId center);

// How an ego triple (h', r', t') is embedded for the similarity test.
// Literal uses h' as written (the neighbor for incoming triples); CenterSide
// always uses the center entity.
enum class NeighborBinding { Literal, CenterSide };

struct ScoredTriple {
  EgoTriple triple;
  double similarity = 0.0;
};

struct PruneResult {
  std::vector<ScoredTriple> kept;  // similarity desc, ties by (relation, neighbor)
  std::size_t undefined = 0;       // dropped because a vector had zero norm
};

// Keeps triples with cos(h' || r', anchor || rel) > epsilon.
PruneResult prune(const EgoGraph& ego, const EmbeddingModel& model, const Query& query,
                  double epsilon, NeighborBinding binding = NeighborBinding::Literal);

// One traversed edge: `triple` connects the already-visited `from` to `to`.
struct ContextStep {
  Triple triple;
  EntityId from = 0;
  EntityId to = 0;

  friend bool operator==(const ContextStep&, const ContextStep&) = default;
};

ContextStep to_step(const EgoTriple& t, EntityId center);

struct SerializedContext {
  EntityId center = 0;
  std::vector<ContextStep> selected;   // chosen by the heuristic, before the budget
  std::vector<ContextStep> kept;       // the prefix that fit the budget
  std::vector<std::string> tokens;     // center, r1, e1, r2, e2, ... (entities deduplicated)
  std::vector<EntityId> entities;      // distinct entities in token order, center first
  std::string text;                    // tokens joined by ", "
  std::size_t undefined_similarity = 0;

  bool empty() const noexcept { return kept.empty(); }
};

// Linearizes steps in the given order. Each step contributes its relation
// name and, on first occurrence, the name of the entity it reaches. Steps
// are appended until the next one would push the text past budget_chars
// (counted in UTF-8 code points). If the center name alone exceeds the
// budget the context is empty.
SerializedContext serialize_steps(const KnowledgeGraph& kg, EntityId center,
                                  std::span<const ContextStep> steps, std::size_t budget_chars);

SerializedContext serialize_bfs(const KnowledgeGraph& kg, EntityId center,
                                std::span<const EgoTriple> kept, std::size_t budget_chars);

enum class Heuristic { StructurePruned, RandomWalk, Full1Hop, TwoHop };

std::string_view to_string(Heuristic h);
Heuristic parse_heuristic(std::string_view name);
inline constexpr Heuristic kAllHeuristics[] = {Heuristic::StructurePruned, Heuristic::RandomWalk,
                                               Heuristic::Full1Hop, Heuristic::TwoHop};

struct ContextOptions {
  Heuristic kind = Heuristic::StructurePruned;
  double epsilon = 0.0;
  NeighborBinding binding = NeighborBinding::Literal;
  std::size_t budget_chars = 3500;
  std::uint64_t seed = 0;
  std::size_t walk_max_steps = 32;
  std::size_t two_hop_cap = 16;
  // Drop the query's own triple when it is a train edge.
  bool exclude_query_triple = true;
};

// structure_pruned: prune + BFS order. random_walk: seeded walk over train
// edges in either direction. full_1hop: whole ego-graph by (relation, entity).
// two_hop: full 1-hop plus up to two_hop_cap second-hop edges chosen by
// similarity, grouped under their first-hop parent.
SerializedContext context_heuristic(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                    const Query& query, const ContextOptions& options);

// Cosine of (entity || relation feature) against the query's
// (anchor || relation feature); nullopt when either vector is zero.
std::optional<double> triple_similarity(const EmbeddingModel& model, const Query& query,
                                        EntityId entity, RelationId rel);

}  // namespace ftg
