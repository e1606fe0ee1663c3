#include <doctest.h>

#include <set>

#include "ftg/ego_graph.hpp"
#include "ftg/error.hpp"
#include "ftg/pipeline.hpp"
#include "ftg/text.hpp"
#include "oracles.hpp"

using namespace ftg;

namespace {

KnowledgeGraph named_kg(std::size_t n, std::vector<Triple> train, std::size_t n_rel = 2) {
  std::vector<std::string> ents, rels;
  for (std::size_t i = 0; i < n; ++i) ents.push_back("e" + std::to_string(i));
  for (std::size_t i = 0; i < n_rel; ++i) rels.push_back("r" + std::to_string(i));
  return KnowledgeGraph(ents, rels, {std::move(train), {}, {}});
}

Query open_query(EntityId anchor, RelationId rel) {
  Query q;
  q.anchor = anchor;
  q.rel = rel;
  return q;
}

std::vector<ContextStep> steps_of(const std::vector<EgoTriple>& ts, EntityId center) {
  std::vector<ContextStep> out;
  for (const auto& t : ts) out.push_back(to_step(t, center));
  return out;
}

}  // namespace

TEST_CASE("isolated entity has an empty ego-graph") {
  const auto kg = named_kg(4, {{0, 0, 1}});
  CHECK(extract_ego(kg, 3).triples.empty());
}

TEST_CASE("two outgoing and one incoming edge") {
  const auto kg = named_kg(4, {{0, 0, 1}, {0, 1, 2}, {3, 0, 0}, {1, 1, 2}});
  const auto ego = extract_ego(kg, 0);
  REQUIRE(ego.triples.size() == 3);
  CHECK(ego.triples[0] == EgoTriple{{0, 0, 1}, EgoDirection::Out});
  CHECK(ego.triples[1] == EgoTriple{{3, 0, 0}, EgoDirection::In});
  CHECK(ego.triples[2] == EgoTriple{{0, 1, 2}, EgoDirection::Out});
  CHECK(ego.triples[1].neighbor() == 3);
}

TEST_CASE("self-loop appears once") {
  const auto kg = named_kg(2, {{0, 0, 0}, {1, 0, 0}});
  const auto ego = extract_ego(kg, 0);
  REQUIRE(ego.triples.size() == 2);
  CHECK(std::count_if(ego.triples.begin(), ego.triples.end(),
                      [](const EgoTriple& t) { return t.triple == Triple{0, 0, 0}; }) == 1);
}

TEST_CASE("prune with hand-set vectors") {
  // center e0 = (1,0); A = e1 = (1,0); B = e2 = (0,1); e3 = 0; r0 = (0,0).
  const auto kg = named_kg(4, {{1, 0, 0}, {2, 0, 0}, {3, 0, 0}}, 1);
  auto m = init_model(ModelKind::DistMult, 4, 1, 2, 6.0f, 0);
  m.entity = {1, 0, 1, 0, 0, 1, 0, 0};
  m.relation = {0, 0};
  const auto ego = extract_ego(kg, 0);
  const auto q = open_query(0, 0);

  const auto half = prune(ego, m, q, 0.5);
  REQUIRE(half.kept.size() == 1);
  CHECK(half.kept[0].triple.triple == Triple{1, 0, 0});
  CHECK(half.kept[0].similarity == doctest::Approx(1.0));
  CHECK(half.undefined == 1);

  CHECK(prune(ego, m, q, 1.0).kept.empty());
  const auto all = prune(ego, m, q, -1.0001);
  CHECK(all.kept.size() == 2);
  CHECK(all.kept[1].similarity == doctest::Approx(0.0));

  CHECK_THROWS_AS(prune(ego, m, open_query(1, 0), 0.0), InvalidArgument);
}

TEST_CASE("center-side binding embeds the center instead of the head") {
  const auto kg = named_kg(3, {{1, 0, 0}, {2, 0, 0}}, 1);
  auto m = init_model(ModelKind::DistMult, 3, 1, 2, 6.0f, 0);
  m.entity = {1, 0, 0, 1, -1, 0};
  m.relation = {0, 0};
  const auto ego = extract_ego(kg, 0);
  CHECK(prune(ego, m, open_query(0, 0), 0.5).kept.empty());
  CHECK(prune(ego, m, open_query(0, 0), 0.5, NeighborBinding::CenterSide).kept.size() == 2);
}

TEST_CASE("serialization") {
  const auto kg = named_kg(4, {{0, 0, 1}, {0, 1, 2}, {3, 1, 0}, {0, 1, 1}});
  SUBCASE("empty kept set is the center alone") {
    const auto ctx = serialize_bfs(kg, 0, {}, 3500);
    CHECK(ctx.tokens == std::vector<std::string>{"e0"});
    CHECK(ctx.text == "e0");
    CHECK(ctx.empty());
  }
  SUBCASE("kept order is preserved") {
    const std::vector<EgoTriple> kept{{{0, 0, 1}, EgoDirection::Out}, {{0, 1, 2}, EgoDirection::Out}};
    const auto ctx = serialize_bfs(kg, 0, kept, 3500);
    CHECK(ctx.tokens == std::vector<std::string>{"e0", "r0", "e1", "r1", "e2"});
    CHECK(ctx.text == "e0, r0, e1, r1, e2");
    CHECK(ctx.entities == std::vector<EntityId>{0, 1, 2});
  }
  SUBCASE("a repeated entity is emitted once, its relation still appears") {
    const std::vector<EgoTriple> kept{{{0, 0, 1}, EgoDirection::Out}, {{0, 1, 1}, EgoDirection::Out},
                                      {{3, 1, 0}, EgoDirection::In}};
    const auto ctx = serialize_bfs(kg, 0, kept, 3500);
    CHECK(ctx.tokens == std::vector<std::string>{"e0", "r0", "e1", "r1", "r1", "e3"});
  }
  SUBCASE("budget") {
    const std::vector<EgoTriple> kept{{{0, 0, 1}, EgoDirection::Out}, {{0, 1, 2}, EgoDirection::Out}};
    CHECK(serialize_bfs(kg, 0, kept, 10).text == "e0, r0, e1");
    CHECK(serialize_bfs(kg, 0, kept, 17).text == "e0, r0, e1");
    CHECK(serialize_bfs(kg, 0, kept, 18).text == "e0, r0, e1, r1, e2");
    const auto none = serialize_bfs(kg, 0, kept, 1);
    CHECK(none.tokens.empty());
    CHECK(none.empty());
  }
  SUBCASE("non-incident triples are rejected") {
    const std::vector<EgoTriple> kept{{{3, 1, 0}, EgoDirection::Out}};
    CHECK_THROWS_AS(serialize_bfs(kg, 0, kept, 100), InvalidArgument);
  }
}

TEST_CASE("budget counts code points") {
  const auto kg = KnowledgeGraph({"Zürich", "Genève"}, {"près"}, {{{{0, 0, 1}}, {}, {}}});
  const std::vector<ContextStep> steps{{{0, 0, 1}, 0, 1}};
  CHECK(serialize_steps(kg, 0, steps, 20).text == "Zürich, près, Genève");
  CHECK(serialize_steps(kg, 0, steps, 19).text == "Zürich");
}

TEST_CASE("heuristics on small fixtures") {
  const auto kg = named_kg(5, {{0, 0, 1}, {0, 1, 2}, {3, 0, 0}, {1, 0, 4}});
  const auto m = init_model(ModelKind::RotatE, 5, 2, 4, 6.0f, 1);
  ContextOptions opt;
  const auto q = open_query(0, 1);

  opt.kind = Heuristic::Full1Hop;
  const auto full = context_heuristic(kg, m, q, opt);
  CHECK(full.kept.size() == 3);
  CHECK(full.kept == steps_of(extract_ego(kg, 0).triples, 0));

  opt.kind = Heuristic::TwoHop;
  const auto two = context_heuristic(kg, m, q, opt);
  CHECK(std::find(two.entities.begin(), two.entities.end(), 4) != two.entities.end());

  opt.kind = Heuristic::RandomWalk;
  opt.seed = 9;
  const auto w1 = context_heuristic(kg, m, q, opt);
  const auto w2 = context_heuristic(kg, m, q, opt);
  CHECK(w1.kept == w2.kept);
  CHECK(w1.text == w2.text);
  CHECK_FALSE(w1.kept.empty());
  for (std::size_t i = 1; i < w1.kept.size(); ++i) CHECK(w1.kept[i].from == w1.kept[i - 1].to);
}

TEST_CASE("two-hop path a -> b -> c includes c") {
  const auto kg = KnowledgeGraph({"a", "b", "c"}, {"next"}, {{{{0, 0, 1}, {1, 0, 2}}, {}, {}}});
  const auto m = init_model(ModelKind::TransE, 3, 1, 4, 6.0f, 0);
  ContextOptions opt;
  opt.kind = Heuristic::TwoHop;
  opt.epsilon = -2.0;
  const auto ctx = context_heuristic(kg, m, open_query(0, 0), opt);
  CHECK(ctx.text == "a, next, b, next, c");
}

TEST_CASE("query triple never enters its own context") {
  const auto kg = named_kg(3, {{0, 0, 1}, {0, 1, 2}});
  const auto m = init_model(ModelKind::RotatE, 3, 2, 4, 6.0f, 1);
  const auto q = make_query({0, 0, 1}, Direction::Tail, Split::Train, 0);
  for (Heuristic h : kAllHeuristics) {
    ContextOptions opt;
    opt.kind = h;
    opt.epsilon = -2.0;
    for (const auto& s : context_heuristic(kg, m, q, opt).kept) CHECK(s.triple != Triple{0, 0, 1});
  }
}

TEST_CASE("pruning and serialization equal the naive recomputation") {
  const auto kg = synthetic_kg({3, 40, 3, 300});
  for (ModelKind kind : {ModelKind::RotatE, ModelKind::TransE, ModelKind::ComplEx}) {
    const auto m = init_model(kind, 40, 3, 6, 6.0f, 4, 10.0);
    for (double eps : {-0.2, 0.0, 0.3}) {
      for (std::size_t budget : {3500, 60}) {
        ContextOptions opt;
        opt.epsilon = eps;
        opt.budget_chars = budget;
        for (auto split : {Split::Train, Split::Test})
          for (const auto& q : split_queries(kg, split)) {
            const auto want = oracle::prune(kg, m, q, eps);
            auto ego = extract_ego(kg, q.anchor);
            std::erase_if(ego.triples, [&](const EgoTriple& t) { return t.triple == q.triple(); });
            const auto got = prune(ego, m, q, eps);
            REQUIRE(got.kept.size() == want.size());
            std::vector<Triple> steps;
            for (std::size_t i = 0; i < want.size(); ++i) {
              CHECK(got.kept[i].triple.triple == want[i].triple);
              CHECK(got.kept[i].similarity == doctest::Approx(want[i].similarity).epsilon(1e-12));
              steps.push_back(want[i].triple);
            }
            const auto ctx = context_heuristic(kg, m, q, opt);
            CHECK(ctx.text == oracle::serialize(kg, q.anchor, steps, budget));
            CHECK(text::utf8_length(ctx.text) <= budget);
          }
      }
    }
  }
}

TEST_CASE("every heuristic respects the budget") {
  const auto kg = synthetic_kg({3, 40, 3, 300});
  const auto m = init_model(ModelKind::RotatE, 40, 3, 6, 6.0f, 4);
  for (Heuristic h : kAllHeuristics)
    for (std::size_t budget : {0, 5, 40, 200}) {
      ContextOptions opt;
      opt.kind = h;
      opt.budget_chars = budget;
      for (const auto& q : split_queries(kg, Split::Test))
        CHECK(text::utf8_length(context_heuristic(kg, m, q, opt).text) <= budget);
    }
}

TEST_CASE("subset chain pruned within full 1-hop within two-hop") {
  const auto kg = synthetic_kg({3, 40, 3, 300});
  const auto m = init_model(ModelKind::RotatE, 40, 3, 6, 6.0f, 4);
  for (double eps : {-1.5, 0.0, 0.5})
    for (const auto& q : split_queries(kg, Split::Test)) {
      ContextOptions opt;
      opt.epsilon = eps;
      CHECK(context_chain_holds(kg, m, q, opt));
    }
}

TEST_CASE("heuristic names") {
  for (Heuristic h : kAllHeuristics) CHECK(parse_heuristic(to_string(h)) == h);
  CHECK_THROWS_AS(parse_heuristic("three_hop"), InvalidArgument);
}
