#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace ftg {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head = 0;
  RelationId rel = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

enum class Split { Train = 0, Valid = 1, Test = 2 };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

// One adjacency entry: the relation and the entity on the other end.
struct Edge {
  RelationId rel = 0;
  EntityId entity = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Immutable knowledge graph with dense ids, split triple lists, train-only
// adjacency and all-split truth indices for the filtered protocol.
//
// Adjacency rows are sorted by (relation, entity). A self-loop (h, r, h) is
// stored once, in the outgoing row of h only.
class KnowledgeGraph {
 public:
  using SplitArray = std::array<std::vector<Triple>, 3>;

  // Throws InvalidArgument on empty train split, out-of-range ids or a
  // duplicate triple within one split.
  KnowledgeGraph(std::vector<std::string> entity_names, std::vector<std::string> relation_names,
                 SplitArray splits);

  std::size_t entity_count() const noexcept { return entity_names_.size(); }
  std::size_t relation_count() const noexcept { return relation_names_.size(); }

  const std::string& entity_name(EntityId id) const;
  const std::string& relation_name(RelationId id) const;
  std::optional<EntityId> find_entity(std::string_view name) const;
  std::optional<RelationId> find_relation(std::string_view name) const;

  const std::vector<std::string>& entity_names() const noexcept { return entity_names_; }
  const std::vector<std::string>& relation_names() const noexcept { return relation_names_; }

  std::span<const Triple> split(Split s) const noexcept {
    return splits_[static_cast<std::size_t>(s)];
  }
  std::span<const Triple> train() const noexcept { return split(Split::Train); }

  // Train-split edges leaving / entering an entity.
  std::span<const Edge> out_edges(EntityId head) const;
  std::span<const Edge> in_edges(EntityId tail) const;

  // Sorted ids of all tails t with (head, rel, t) in any split.
  std::span<const EntityId> true_tails(EntityId head, RelationId rel) const;
  // Sorted ids of all heads h with (h, rel, tail) in any split.
  std::span<const EntityId> true_heads(RelationId rel, EntityId tail) const;

  bool contains(const Triple& t) const;
  bool in_train(const Triple& t) const;

  bool valid_entity(EntityId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < entity_names_.size();
  }
  bool valid_relation(RelationId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < relation_names_.size();
  }

 private:
  std::uint64_t pair_key(std::int64_t a, std::int64_t b) const noexcept {
    return static_cast<std::uint64_t>(a) * relation_names_.size() + static_cast<std::uint64_t>(b);
  }

  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::unordered_map<std::string, RelationId> relation_index_;
  SplitArray splits_;

  std::vector<std::size_t> out_offsets_;
  std::vector<Edge> out_edges_;
  std::vector<std::size_t> in_offsets_;
  std::vector<Edge> in_edges_;

  std::unordered_map<std::uint64_t, std::vector<EntityId>> true_tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> true_heads_;
};

// Reads three `head<TAB>relation<TAB>tail` files. Ids are assigned by first
// appearance in train, then valid, then test. Blank lines are ignored and a
// repeated line within one split is kept once.
KnowledgeGraph load_tsv(const std::filesystem::path& train, const std::filesystem::path& valid,
                        const std::filesystem::path& test);

// Same as load_tsv but from in-memory text; parse errors name the split.
KnowledgeGraph load_tsv_text(std::string_view train, std::string_view valid, std::string_view test);

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t entities = 200;
  std::size_t relations = 8;
  std::size_t triples = 4000;
};

// Modular successor families over a ring of entities: relation r links h to
// (h + offset_r + j) mod |E| for j in [0, width), width = ceil(T / (|R|·|E|)).
// Triples are sampled without replacement from that family and split with
// test = ceil(T/10), valid = floor(T/10), train = the rest.
KnowledgeGraph synthetic_kg(const SyntheticSpec& spec);

struct SyntheticRule {
  std::size_t offset = 0;
  std::size_t width = 1;
};
// The generating rule of each relation, for verification.
std::vector<SyntheticRule> synthetic_rules(const SyntheticSpec& spec);

// A graph whose answers can be read off the query entity's neighborhood
// while an embedding model has to untangle them from randomly chosen hint
// relations.
//
// Anchors belong to one group and answer (relation "answer") one entity of
// that group's pool; pool entities point to their group via "pool_of". Each anchor also links to its answer through a randomly
// chosen hint relation, and to `distractors` noise entities through random
// hint relations. The hint relations additionally carry a cyclic pattern over
// the noise entities that fixes each to a distinct rotation. Answer triples
// are split 70/10/20 (train/valid/test) by anchor; everything else is train.
struct NeighborhoodSpec {
  std::uint64_t seed = 11;
  std::size_t groups = 20;
  std::size_t pool = 8;
  std::size_t anchors_per_group = 20;
  std::size_t hint_relations = 8;
  std::size_t distractors = 1;
  std::size_t noise = 100;
};

KnowledgeGraph neighborhood_kg(const NeighborhoodSpec& spec);

struct KgSummary {
  std::size_t entities = 0;
  std::size_t relations = 0;
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  // Degree counts train triple endpoints (a self-loop contributes 2).
  double mean_degree = 0.0;
  double median_degree = 0.0;
};

KgSummary kg_stats(const KnowledgeGraph& kg);
nlohmann::ordered_json to_json(const KgSummary& s);

}  // namespace ftg
