#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ftg/adapter.hpp"
#include "ftg/checkpoint.hpp"
#include "ftg/error.hpp"
#include "ftg/rng.hpp"
#include "ftg/trainer.hpp"
#include "oracles.hpp"

using namespace ftg;

namespace {

KnowledgeGraph named_kg(std::size_t n, std::vector<Triple> train) {
  std::vector<std::string> ents;
  for (std::size_t i = 0; i < n; ++i) ents.push_back("e" + std::to_string(i));
  return KnowledgeGraph(ents, {"r0", "r1"}, {std::move(train), {}, {}});
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace

TEST_CASE("mean pooling") {
  auto m = init_model(ModelKind::DistMult, 5, 2, 2, 6.0f, 0);
  SUBCASE("empty context pools the center alone") {
    const SerializedContext empty;
    const auto p = mean_pool(m, empty, 3);
    CHECK(p == oracle::row(m, 3));
  }
  SUBCASE("two-point mean") {
    m.entity = {1, 1, 3, 3, 0, 0, 0, 0, 0, 0};
    SerializedContext ctx;
    ctx.kept = {{{0, 0, 1}, 0, 1}};
    CHECK(mean_pool(m, ctx, 0) == std::vector<double>{2, 2});
  }
  SUBCASE("distinct entities only, loop-and-divide oracle") {
    m = init_model(ModelKind::DistMult, 5, 2, 2, 6.0f, 8, 10.0);
    const auto kg = named_kg(5, {{0, 0, 1}, {2, 0, 0}, {0, 1, 1}, {1, 1, 4}, {3, 0, 2}});
    ContextOptions opt;
    opt.kind = Heuristic::TwoHop;
    Query q;
    q.anchor = 0;
    const auto ctx = context_heuristic(kg, m, q, opt);
    std::vector<std::vector<double>> rows{oracle::row(m, 0)};
    std::set<EntityId> seen{0};
    for (const auto& t : kg.train())
      for (EntityId e : {t.head, t.tail})
        if (seen.insert(e).second) rows.push_back(oracle::row(m, e));
    REQUIRE(ctx.entities.size() == 5);
    const auto want = oracle::mean(rows);
    const auto got = mean_pool(m, ctx, 0);
    for (std::size_t i = 0; i < 2; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-15));
  }
}

TEST_CASE("projection") {
  auto r = init_reranker(2, 6, 1);
  const auto x = random_vec(6, 3);
  SUBCASE("identity") {
    std::fill(r.w_p.begin(), r.w_p.end(), 0.0);
    for (std::size_t i = 0; i < 6; ++i) r.w_p[i * 6 + i] = 1.0;
    CHECK(project(r, x) == x);
  }
  SUBCASE("zero") {
    std::fill(r.w_p.begin(), r.w_p.end(), 0.0);
    CHECK(project(r, x) == std::vector<double>(6, 0.0));
  }
  SUBCASE("seeded weights against a naive matvec") {
    r = init_reranker(4, 5, 7);
    const auto y = random_vec(12, 4);
    const auto got = project(r, y);
    const auto want = oracle::matvec(r.w_p, 5, y);
    for (std::size_t i = 0; i < 5; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(project(r, random_vec(5, 1)), InvalidArgument);
}

TEST_CASE("surrogate logits") {
  const auto m = init_model(ModelKind::RotatE, 6, 2, 4, 6.0f, 2);
  auto r = init_reranker(4, 3, 5);
  const auto f = random_vec(12, 6);
  const std::vector<EntityId> cands{5, 0, 3};
  SUBCASE("zero weights give zero logits") {
    std::fill(r.w_p.begin(), r.w_p.end(), 0.0);
    std::fill(r.w_c.begin(), r.w_c.end(), 0.0);
    CHECK(surrogate_logits(r, m, f, cands) == std::vector<double>(3, 0.0));
  }
  SUBCASE("one candidate has probability one") {
    const auto l = surrogate_logits(r, m, f, std::vector<EntityId>{2});
    REQUIRE(l.size() == 1);
    const SurrogateExample ex{f, {2}, 0};
    CHECK(surrogate_loss(r, m, std::span(&ex, 1)) == doctest::Approx(0.0));
  }
  SUBCASE("seeded fixture against the formula") {
    const auto u = oracle::matvec(r.w_p, 3, f);
    const auto got = surrogate_logits(r, m, f, cands);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto v = oracle::matvec(r.w_c, 3, oracle::row(m, cands[i]));
      double want = 0;
      for (std::size_t j = 0; j < 3; ++j) want += u[j] * v[j];
      CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(surrogate_logits(r, m, f, std::vector<EntityId>{}), InvalidArgument);
  CHECK_THROWS_AS(surrogate_logits(r, m, random_vec(11, 1), cands), InvalidArgument);
}

TEST_CASE("query features use the inverse relation for head queries") {
  const auto m = init_model(ModelKind::RotatE, 3, 1, 4, 6.0f, 2);
  const std::vector<double> pooled(4, 0.5);
  Query tail;
  tail.anchor = 1;
  Query head = tail;
  head.direction = Direction::Head;
  const auto ft = query_features(m, tail, pooled);
  const auto fh = query_features(m, head, pooled);
  REQUIRE(ft.size() == 12);
  for (std::size_t i = 0; i < 6; ++i) CHECK(ft[i] == fh[i]);
  for (std::size_t i = 6; i < 8; ++i) CHECK(ft[i] == -fh[i]);
  for (std::size_t i = 8; i < 12; ++i) CHECK(ft[i] == fh[i]);
}

TEST_CASE("cross-entropy gradients match central finite differences") {
  const auto m = init_model(ModelKind::ComplEx, 8, 2, 4, 6.0f, 3, 20.0);
  auto r = init_reranker(4, 3, 9, 2.0);
  std::vector<SurrogateExample> batch{{random_vec(12, 1), {0, 3, 5, 7}, 2},
                                      {random_vec(12, 2), {6, 1}, 0},
                                      {random_vec(12, 3), {2, 4, 1}, 1}};
  SurrogateReranker grad;
  const double loss = surrogate_loss_and_gradient(r, m, batch, grad);
  CHECK(loss == doctest::Approx(surrogate_loss(r, m, batch)).epsilon(1e-12));
  const double h = 1e-6;
  for (auto* w : {&r.w_p, &r.w_c}) {
    const auto& analytic = w == &r.w_p ? grad.w_p : grad.w_c;
    std::vector<double> numeric(w->size());
    for (std::size_t i = 0; i < w->size(); ++i) {
      const double keep = (*w)[i];
      (*w)[i] = keep + h;
      const double up = surrogate_loss(r, m, batch);
      (*w)[i] = keep - h;
      const double down = surrogate_loss(r, m, batch);
      (*w)[i] = keep;
      numeric[i] = (up - down) / (2 * h);
    }
    const double err = relative_error(analytic, numeric);
    CAPTURE(err);
    CHECK(err <= 1e-4);
  }
}

TEST_CASE("zero training steps return the initialization") {
  const auto kg = synthetic_kg({7, 40, 2, 200});
  const auto m = init_model(ModelKind::RotatE, 40, 2, 8, 6.0f, 1);
  SurrogateConfig cfg;
  cfg.steps = 0;
  cfg.d_x = 16;
  cfg.seed = 21;
  cfg.k = 10;
  const auto queries = split_queries(kg, Split::Train);
  const auto res = train_surrogate(m, kg, queries, cfg);
  const auto init = init_reranker(8, 16, 21);
  CHECK(res.reranker.w_p == init.w_p);
  CHECK(res.reranker.w_c == init.w_c);
  CHECK(res.final_holdout_loss == res.initial_holdout_loss);
}

TEST_CASE("training lowers the held-out loss and is deterministic") {
  NeighborhoodSpec ns;
  ns.groups = 8;
  ns.noise = 20;
  const auto kg = neighborhood_kg(ns);
  TrainConfig tc;
  tc.dim = 16;
  tc.steps = 300;
  tc.batch_size = 64;
  tc.negatives = 16;
  const auto m = train(kg, tc, ModelKind::RotatE).model;
  SurrogateConfig cfg;
  cfg.steps = 300;
  cfg.lr = 0.2;
  cfg.d_x = 16;
  cfg.k = 8;
  const RelationId answer = *kg.find_relation("answer");
  cfg.relations = {answer};
  const auto queries = split_queries(kg, Split::Train);
  const auto a = train_surrogate(m, kg, queries, cfg);
  const auto b = train_surrogate(m, kg, queries, cfg);
  CHECK(a.reranker.w_p == b.reranker.w_p);
  CHECK(a.reranker.w_c == b.reranker.w_c);
  CAPTURE(a.initial_holdout_loss);
  CHECK(a.final_holdout_loss < a.initial_holdout_loss);
  const auto answer_queries = std::count_if(queries.begin(), queries.end(), [&](const Query& q) { return q.rel == answer; });
  CHECK(a.train_examples + a.holdout_examples == static_cast<std::size_t>(answer_queries));

  cfg.steps = 10;
  cfg.relations.clear();
  cfg.max_queries = 50;
  const auto capped = train_surrogate(m, kg, queries, cfg);
  CHECK(capped.train_examples + capped.holdout_examples == 50);
  cfg.relations = {static_cast<RelationId>(kg.relation_count())};
  CHECK_THROWS_AS(train_surrogate(m, kg, queries, cfg), InvalidArgument);
}

TEST_CASE("surrogate examples use train-mode candidates") {
  const auto kg = synthetic_kg({7, 40, 2, 200});
  const auto m = init_model(ModelKind::RotatE, 40, 2, 8, 6.0f, 1);
  const auto queries = split_queries(kg, Split::Train);
  const std::span<const Query> some(queries.data(), 50);
  const auto ex = build_surrogate_examples(m, kg, some, 5, ContextOptions{});
  REQUIRE(ex.size() == 50);
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(ex[i].candidates.size() == 5);
    CHECK(ex[i].candidates[ex[i].label] == *queries[i].target);
    CHECK(ex[i].features.size() == 24);
  }
}

TEST_CASE("save and load round-trip") {
  const auto r = init_reranker(4, 3, 5);
  const auto path = std::filesystem::temp_directory_path() / "ftg_test_surrogate.ckpt";
  save_surrogate(r, path);
  const auto back = load_surrogate(path);
  CHECK(back.d_s == 4);
  CHECK(back.d_x == 3);
  CHECK(back.seed == 5);
  CHECK(back.w_p == r.w_p);
  CHECK(back.w_c == r.w_c);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  save_checkpoint(init_model(ModelKind::RotatE, 3, 1, 4, 6.0f, 0), path);
  CHECK_THROWS_AS(load_surrogate(path), CheckpointError);
}
