#include "ftg/kg.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "ftg/error.hpp"
#include "ftg/rng.hpp"
#include "ftg/text.hpp"

namespace ftg {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "valid") return Split::Valid;
  if (name == "test") return Split::Test;
  throw InvalidArgument("unknown split '" + std::string(name) + "'");
}

namespace {

void build_csr(std::size_t n, std::vector<std::pair<EntityId, Edge>>& entries,
               std::vector<std::size_t>& offsets, std::vector<Edge>& edges) {
  std::sort(entries.begin(), entries.end());
  offsets.assign(n + 1, 0);
  for (const auto& [node, edge] : entries) ++offsets[static_cast<std::size_t>(node) + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  edges.clear();
  edges.reserve(entries.size());
  for (const auto& entry : entries) edges.push_back(entry.second);
}

}  // namespace

KnowledgeGraph::KnowledgeGraph(std::vector<std::string> entity_names,
                               std::vector<std::string> relation_names, SplitArray splits)
    : entity_names_(std::move(entity_names)),
      relation_names_(std::move(relation_names)),
      splits_(std::move(splits)) {
  if (splits_[0].empty()) throw InvalidArgument("train split is empty");
  if (relation_names_.empty()) throw InvalidArgument("no relations");

  entity_index_.reserve(entity_names_.size());
  for (std::size_t i = 0; i < entity_names_.size(); ++i) {
    if (!entity_index_.emplace(entity_names_[i], static_cast<EntityId>(i)).second)
      throw InvalidArgument("duplicate entity name '" + entity_names_[i] + "'");
  }
  for (std::size_t i = 0; i < relation_names_.size(); ++i) {
    if (!relation_index_.emplace(relation_names_[i], static_cast<RelationId>(i)).second)
      throw InvalidArgument("duplicate relation name '" + relation_names_[i] + "'");
  }

  for (std::size_t s = 0; s < splits_.size(); ++s) {
    std::vector<Triple> sorted = splits_[s];
    for (const auto& t : sorted) {
      if (!valid_entity(t.head) || !valid_entity(t.tail) || !valid_relation(t.rel))
        throw InvalidArgument("triple id out of range in " +
                              std::string(to_string(static_cast<Split>(s))) + " split");
    }
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw InvalidArgument("duplicate triple in " +
                            std::string(to_string(static_cast<Split>(s))) + " split");
  }

  std::vector<std::pair<EntityId, Edge>> out_entries, in_entries;
  out_entries.reserve(splits_[0].size());
  in_entries.reserve(splits_[0].size());
  for (const auto& t : splits_[0]) {
    out_entries.push_back({t.head, Edge{t.rel, t.tail}});
    if (t.head != t.tail) in_entries.push_back({t.tail, Edge{t.rel, t.head}});
  }
  build_csr(entity_names_.size(), out_entries, out_offsets_, out_edges_);
  build_csr(entity_names_.size(), in_entries, in_offsets_, in_edges_);

  for (const auto& split : splits_) {
    for (const auto& t : split) {
      true_tails_[pair_key(t.head, t.rel)].push_back(t.tail);
      true_heads_[pair_key(t.tail, t.rel)].push_back(t.head);
    }
  }
  for (auto* index : {&true_tails_, &true_heads_}) {
    for (auto& [key, ids] : *index) {
      std::sort(ids.begin(), ids.end());
      ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    }
  }
}

const std::string& KnowledgeGraph::entity_name(EntityId id) const {
  if (!valid_entity(id)) throw OutOfRange("entity id " + std::to_string(id) + " out of range");
  return entity_names_[static_cast<std::size_t>(id)];
}

const std::string& KnowledgeGraph::relation_name(RelationId id) const {
  if (!valid_relation(id)) throw OutOfRange("relation id " + std::to_string(id) + " out of range");
  return relation_names_[static_cast<std::size_t>(id)];
}

std::optional<EntityId> KnowledgeGraph::find_entity(std::string_view name) const {
  const auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<RelationId> KnowledgeGraph::find_relation(std::string_view name) const {
  const auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const Edge> KnowledgeGraph::out_edges(EntityId head) const {
  if (!valid_entity(head)) throw OutOfRange("entity id " + std::to_string(head) + " out of range");
  const auto i = static_cast<std::size_t>(head);
  return {out_edges_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
}

std::span<const Edge> KnowledgeGraph::in_edges(EntityId tail) const {
  if (!valid_entity(tail)) throw OutOfRange("entity id " + std::to_string(tail) + " out of range");
  const auto i = static_cast<std::size_t>(tail);
  return {in_edges_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
}

std::span<const EntityId> KnowledgeGraph::true_tails(EntityId head, RelationId rel) const {
  const auto it = true_tails_.find(pair_key(head, rel));
  if (it == true_tails_.end()) return {};
  return it->second;
}

std::span<const EntityId> KnowledgeGraph::true_heads(RelationId rel, EntityId tail) const {
  const auto it = true_heads_.find(pair_key(tail, rel));
  if (it == true_heads_.end()) return {};
  return it->second;
}

bool KnowledgeGraph::contains(const Triple& t) const {
  const auto tails = true_tails(t.head, t.rel);
  return std::binary_search(tails.begin(), tails.end(), t.tail);
}

bool KnowledgeGraph::in_train(const Triple& t) const {
  if (!valid_entity(t.head)) return false;
  const auto row = out_edges(t.head);
  return std::binary_search(row.begin(), row.end(), Edge{t.rel, t.tail});
}

// ---------------------------------------------------------------------------
// TSV loading

namespace {

struct TsvBuilder {
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  std::unordered_map<std::string, EntityId> entity_ids;
  std::unordered_map<std::string, RelationId> relation_ids;
  KnowledgeGraph::SplitArray splits;

  EntityId entity(const std::string& name) {
    auto [it, inserted] = entity_ids.emplace(name, static_cast<EntityId>(entities.size()));
    if (inserted) entities.push_back(name);
    return it->second;
  }

  RelationId relation(const std::string& name) {
    auto [it, inserted] = relation_ids.emplace(name, static_cast<RelationId>(relations.size()));
    if (inserted) relations.push_back(name);
    return it->second;
  }

  void add(std::istream& in, const std::string& label, Split split) {
    auto& out = splits[static_cast<std::size_t>(split)];
    std::set<Triple> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto fields = text::split(line, '\t');
      if (fields.size() != 3)
        throw ParseError(label, line_no,
                         "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
      const Triple t{entity(fields[0]), relation(fields[1]), entity(fields[2])};
      if (seen.insert(t).second) out.push_back(t);
    }
  }

  KnowledgeGraph finish() {
    if (splits[0].empty()) throw InvalidArgument("train split is empty");
    return KnowledgeGraph(std::move(entities), std::move(relations), std::move(splits));
  }
};

std::ifstream open_input(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open " + p.string());
  return in;
}

}  // namespace

KnowledgeGraph load_tsv(const std::filesystem::path& train, const std::filesystem::path& valid,
                        const std::filesystem::path& test) {
  TsvBuilder b;
  auto tr = open_input(train);
  b.add(tr, train.string(), Split::Train);
  auto va = open_input(valid);
  b.add(va, valid.string(), Split::Valid);
  auto te = open_input(test);
  b.add(te, test.string(), Split::Test);
  return b.finish();
}

KnowledgeGraph load_tsv_text(std::string_view train, std::string_view valid, std::string_view test) {
  TsvBuilder b;
  std::istringstream tr{std::string(train)}, va{std::string(valid)}, te{std::string(test)};
  b.add(tr, "train", Split::Train);
  b.add(va, "valid", Split::Valid);
  b.add(te, "test", Split::Test);
  return b.finish();
}

// ---------------------------------------------------------------------------
// Synthetic graphs

namespace {

void check_synthetic(const SyntheticSpec& spec) {
  if (spec.entities < 4) throw InvalidArgument("synthetic_kg: need at least 4 entities");
  if (spec.relations < 1) throw InvalidArgument("synthetic_kg: need at least 1 relation");
  if (spec.triples < spec.entities)
    throw InvalidArgument("synthetic_kg: need at least as many triples as entities");
  const auto capacity = static_cast<unsigned long long>(spec.relations) * spec.entities * spec.entities;
  if (spec.triples > capacity)
    throw InvalidArgument("synthetic_kg: " + std::to_string(spec.triples) +
                          " triples requested but only " + std::to_string(capacity) +
                          " distinct triples exist");
}

}  // namespace

std::vector<SyntheticRule> synthetic_rules(const SyntheticSpec& spec) {
  check_synthetic(spec);
  const std::size_t n = spec.entities;
  const std::size_t per_width = spec.relations * n;
  const std::size_t width = (spec.triples + per_width - 1) / per_width;
  Rng rng(derive_seed(spec.seed, "synthetic-rules"));
  std::vector<SyntheticRule> rules(spec.relations);
  for (auto& rule : rules) {
    rule.offset = 1 + rng.index(n - 1);
    rule.width = width;
  }
  return rules;
}

KnowledgeGraph synthetic_kg(const SyntheticSpec& spec) {
  const auto rules = synthetic_rules(spec);
  const std::size_t n = spec.entities;

  std::vector<Triple> pool;
  pool.reserve(rules.size() * n * rules.front().width);
  for (std::size_t r = 0; r < rules.size(); ++r) {
    for (std::size_t h = 0; h < n; ++h) {
      for (std::size_t j = 0; j < rules[r].width; ++j) {
        pool.push_back({static_cast<EntityId>(h), static_cast<RelationId>(r),
                        static_cast<EntityId>((h + rules[r].offset + j) % n)});
      }
    }
  }
  Rng rng(derive_seed(spec.seed, "synthetic-sample"));
  // Partial Fisher-Yates: the first `triples` slots are a uniform sample.
  for (std::size_t i = 0; i < spec.triples; ++i) {
    const std::size_t j = i + rng.index(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  const std::size_t n_test = (spec.triples + 9) / 10;
  const std::size_t n_valid = spec.triples / 10;
  const std::size_t n_train = spec.triples - n_test - n_valid;

  KnowledgeGraph::SplitArray splits;
  splits[0].assign(pool.begin(), pool.begin() + n_train);
  splits[1].assign(pool.begin() + n_train, pool.begin() + n_train + n_valid);
  splits[2].assign(pool.begin() + n_train + n_valid, pool.begin() + spec.triples);

  std::vector<std::string> entities(n), relations(rules.size());
  for (std::size_t i = 0; i < n; ++i) entities[i] = "e" + std::to_string(i);
  for (std::size_t i = 0; i < relations.size(); ++i) relations[i] = "r" + std::to_string(i);
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(splits));
}

KnowledgeGraph neighborhood_kg(const NeighborhoodSpec& spec) {
  if (spec.groups == 0 || spec.pool < 2 || spec.anchors_per_group == 0)
    throw InvalidArgument("neighborhood_kg: need groups >= 1, pool >= 2, anchors >= 1");
  if (spec.hint_relations == 0 || spec.hint_relations >= spec.noise)
    throw InvalidArgument("neighborhood_kg: need 1 <= hint_relations < noise");
  if (spec.distractors > spec.noise)
    throw InvalidArgument("neighborhood_kg: more distractors than noise entities");

  std::vector<std::string> entities;
  const auto add = [&](std::string name) {
    entities.push_back(std::move(name));
    return static_cast<EntityId>(entities.size() - 1);
  };
  std::vector<EntityId> group_node, noise;
  std::vector<std::vector<EntityId>> pool(spec.groups), anchors(spec.groups);
  for (std::size_t g = 0; g < spec.groups; ++g) group_node.push_back(add("group" + std::to_string(g)));
  for (std::size_t g = 0; g < spec.groups; ++g)
    for (std::size_t i = 0; i < spec.pool; ++i)
      pool[g].push_back(add("pool" + std::to_string(g) + "_" + std::to_string(i)));
  for (std::size_t g = 0; g < spec.groups; ++g)
    for (std::size_t i = 0; i < spec.anchors_per_group; ++i)
      anchors[g].push_back(add("anchor" + std::to_string(g) + "_" + std::to_string(i)));
  for (std::size_t i = 0; i < spec.noise; ++i) noise.push_back(add("noise" + std::to_string(i)));

  std::vector<std::string> relations{"in_group", "answer", "pool_of"};
  for (std::size_t r = 0; r < spec.hint_relations; ++r) relations.push_back("hint" + std::to_string(r));
  constexpr RelationId kInGroup = 0, kAnswer = 1, kPoolOf = 2, kHint0 = 3;

  Rng rng(derive_seed(spec.seed, "neighborhood"));
  std::set<Triple> train;
  for (std::size_t r = 0; r < spec.hint_relations; ++r)
    for (std::size_t i = 0; i < spec.noise; ++i)
      train.insert({noise[i], static_cast<RelationId>(kHint0 + r), noise[(i + r + 1) % spec.noise]});

  for (std::size_t g = 0; g < spec.groups; ++g)
    for (EntityId p : pool[g]) train.insert({p, kPoolOf, group_node[g]});

  std::vector<Triple> answers;
  for (std::size_t g = 0; g < spec.groups; ++g) {
    for (EntityId x : anchors[g]) {
      const EntityId a = pool[g][rng.index(spec.pool)];
      const auto hint = [&] { return static_cast<RelationId>(kHint0 + rng.index(spec.hint_relations)); };
      answers.push_back({x, kAnswer, a});
      train.insert({x, kInGroup, group_node[g]});
      train.insert({x, hint(), a});
      std::set<EntityId> picked;
      while (picked.size() < spec.distractors) picked.insert(noise[rng.index(spec.noise)]);
      for (EntityId n : picked) train.insert({x, hint(), n});
    }
  }
  for (std::size_t i = answers.size(); i > 1; --i) std::swap(answers[i - 1], answers[rng.index(i)]);
  const std::size_t n_test = answers.size() / 5;
  const std::size_t n_valid = answers.size() / 10;

  KnowledgeGraph::SplitArray splits;
  splits[2].assign(answers.begin(), answers.begin() + n_test);
  splits[1].assign(answers.begin() + n_test, answers.begin() + n_test + n_valid);
  splits[0].assign(train.begin(), train.end());
  splits[0].insert(splits[0].end(), answers.begin() + n_test + n_valid, answers.end());
  return KnowledgeGraph(std::move(entities), std::move(relations), std::move(splits));
}

// ---------------------------------------------------------------------------

KgSummary kg_stats(const KnowledgeGraph& kg) {
  KgSummary s;
  s.entities = kg.entity_count();
  s.relations = kg.relation_count();
  s.train = kg.split(Split::Train).size();
  s.valid = kg.split(Split::Valid).size();
  s.test = kg.split(Split::Test).size();

  std::vector<std::size_t> degree(kg.entity_count(), 0);
  for (const auto& t : kg.train()) {
    ++degree[static_cast<std::size_t>(t.head)];
    ++degree[static_cast<std::size_t>(t.tail)];
  }
  if (!degree.empty()) {
    s.mean_degree = 2.0 * static_cast<double>(s.train) / static_cast<double>(degree.size());
    std::sort(degree.begin(), degree.end());
    const std::size_t m = degree.size() / 2;
    s.median_degree = degree.size() % 2 ? static_cast<double>(degree[m])
                                        : 0.5 * static_cast<double>(degree[m - 1] + degree[m]);
  }
  return s;
}

nlohmann::ordered_json to_json(const KgSummary& s) {
  return {{"entities", s.entities},       {"relations", s.relations},
          {"train", s.train},             {"valid", s.valid},
          {"test", s.test},               {"mean_degree", s.mean_degree},
          {"median_degree", s.median_degree}};
}

}  // namespace ftg
