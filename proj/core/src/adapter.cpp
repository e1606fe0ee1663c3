#include "ftg/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "ftg/checkpoint.hpp"
#include "ftg/error.hpp"
#include "ftg/parallel.hpp"
#include "ftg/rng.hpp"

namespace ftg {

std::vector<double> mean_pool(const EmbeddingModel& model, const SerializedContext& context,
                              EntityId center) {
  std::vector<EntityId> members{center};
  const auto add = [&](EntityId e) {
    if (std::find(members.begin(), members.end(), e) == members.end()) members.push_back(e);
  };
  for (const auto& step : context.kept) {
    add(step.triple.head);
    add(step.triple.tail);
  }
  std::vector<double> pooled(model.dim, 0.0);
  for (EntityId e : members) {
    const auto row = model.entity_row(e);
    for (std::size_t i = 0; i < model.dim; ++i) pooled[i] += row[i];
  }
  for (auto& v : pooled) v /= static_cast<double>(members.size());
  return pooled;
}

void SurrogateReranker::validate() const {
  if (d_s == 0 || d_x == 0) throw InvalidArgument("surrogate dimensions must be positive");
  if (w_p.size() != d_x * d_feat()) throw InvalidArgument("W_p shape does not match d_x x 3·d_s");
  if (w_c.size() != d_x * d_s) throw InvalidArgument("W_c shape does not match d_x x d_s");
  for (double v : w_p)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite W_p entry");
  for (double v : w_c)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite W_c entry");
}

SurrogateReranker init_reranker(std::size_t d_s, std::size_t d_x, std::uint64_t seed,
                                double init_scale) {
  SurrogateReranker r;
  r.d_s = d_s;
  r.d_x = d_x;
  r.seed = seed;
  Rng rng(derive_seed(seed, "surrogate-init"));
  const double sp = init_scale / std::sqrt(static_cast<double>(r.d_feat()));
  const double sc = init_scale / std::sqrt(static_cast<double>(d_s));
  r.w_p.resize(d_x * r.d_feat());
  for (auto& v : r.w_p) v = static_cast<float>(rng.uniform(-sp, sp));
  r.w_c.resize(d_x * d_s);
  for (auto& v : r.w_c) v = static_cast<float>(rng.uniform(-sc, sc));
  return r;
}

namespace {

void matvec(const std::vector<double>& w, std::size_t rows, std::span<const double> x,
            std::vector<double>& out) {
  const std::size_t cols = x.size();
  out.assign(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = w.data() + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
}

std::vector<double> entity_vector(const EmbeddingModel& model, EntityId e) {
  const auto row = model.entity_row(e);
  return {row.begin(), row.end()};
}

void check_shapes(const SurrogateReranker& r, const EmbeddingModel& model,
                  std::span<const double> features) {
  if (model.dim != r.d_s)
    throw InvalidArgument("surrogate d_s=" + std::to_string(r.d_s) +
                          " does not match model dimension " + std::to_string(model.dim));
  if (features.size() != r.d_feat())
    throw InvalidArgument("feature length " + std::to_string(features.size()) + " != " +
                          std::to_string(r.d_feat()));
}

}  // namespace

std::vector<double> project(const SurrogateReranker& reranker, std::span<const double> features) {
  if (features.size() != reranker.d_feat())
    throw InvalidArgument("project: feature length " + std::to_string(features.size()) +
                          " != " + std::to_string(reranker.d_feat()));
  std::vector<double> out;
  matvec(reranker.w_p, reranker.d_x, features, out);
  return out;
}

std::vector<double> query_features(const EmbeddingModel& model, const Query& query,
                                   std::span<const double> pooled) {
  if (pooled.size() != model.dim) throw InvalidArgument("pooled vector length != model dimension");
  std::vector<double> f = entity_vector(model, query.anchor);
  const auto r = relation_feature(model, query.rel, query.direction);
  f.insert(f.end(), r.begin(), r.end());
  f.insert(f.end(), pooled.begin(), pooled.end());
  return f;
}

GraphToken graph_token(const SurrogateReranker& reranker, const EmbeddingModel& model,
                       const Query& query, const SerializedContext& context) {
  GraphToken t;
  t.pooled = mean_pool(model, context, query.anchor);
  t.projected = project(reranker, query_features(model, query, t.pooled));
  return t;
}

std::vector<double> surrogate_logits(const SurrogateReranker& reranker, const EmbeddingModel& model,
                                     std::span<const double> features,
                                     std::span<const EntityId> candidates) {
  check_shapes(reranker, model, features);
  if (candidates.empty()) throw InvalidArgument("surrogate_logits: empty candidate set");
  std::vector<double> u, v;
  matvec(reranker.w_p, reranker.d_x, features, u);
  std::vector<double> logits;
  logits.reserve(candidates.size());
  for (EntityId c : candidates) {
    matvec(reranker.w_c, reranker.d_x, entity_vector(model, c), v);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    logits.push_back(s);
  }
  return logits;
}

std::vector<double> surrogate_logits(const SurrogateReranker& reranker, const EmbeddingModel& model,
                                     const Query& query, const CandidateSet& candidates,
                                     const SerializedContext& context) {
  const auto pooled = mean_pool(model, context, query.anchor);
  const auto ids = candidates.ids();
  return surrogate_logits(reranker, model, query_features(model, query, pooled), ids);
}

namespace {

struct Workspace {
  std::vector<double> u, v, e, p, gu, ge;
};

// Cross-entropy of one example; when grad is non-null adds its gradient
// scaled by `scale`.
double example_ce(const SurrogateReranker& r, const EmbeddingModel& model,
                  const SurrogateExample& ex, SurrogateReranker* grad, double scale, Workspace& ws) {
  const std::size_t dx = r.d_x, ds = r.d_s, n = ex.candidates.size();
  matvec(r.w_p, dx, ex.features, ws.u);
  ws.p.assign(n, 0.0);
  std::vector<std::vector<double>> cand_proj(n);
  for (std::size_t i = 0; i < n; ++i) {
    matvec(r.w_c, dx, entity_vector(model, ex.candidates[i]), cand_proj[i]);
    double s = 0.0;
    for (std::size_t j = 0; j < dx; ++j) s += ws.u[j] * cand_proj[i][j];
    ws.p[i] = s;
  }
  const double mx = *std::max_element(ws.p.begin(), ws.p.end());
  double z = 0.0;
  for (auto& l : ws.p) z += (l = std::exp(l - mx));
  const double label_logit_shifted = std::log(ws.p[ex.label]);
  for (auto& l : ws.p) l /= z;
  const double loss = std::log(z) - label_logit_shifted;
  if (!grad) return loss;

  // g_i = p_i - y_i ; dL/du = sum g_i v_i ; dL/dW_p = (dL/du) f^T
  // dL/dW_c = u (sum g_i e_i)^T
  ws.gu.assign(dx, 0.0);
  ws.ge.assign(ds, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = ws.p[i] - (i == ex.label ? 1.0 : 0.0);
    for (std::size_t j = 0; j < dx; ++j) ws.gu[j] += g * cand_proj[i][j];
    const auto row = model.entity_row(ex.candidates[i]);
    for (std::size_t j = 0; j < ds; ++j) ws.ge[j] += g * row[j];
  }
  const std::size_t df = r.d_feat();
  for (std::size_t a = 0; a < dx; ++a) {
    double* gp = grad->w_p.data() + a * df;
    const double cu = scale * ws.gu[a];
    for (std::size_t b = 0; b < df; ++b) gp[b] += cu * ex.features[b];
    double* gc = grad->w_c.data() + a * ds;
    const double cc = scale * ws.u[a];
    for (std::size_t b = 0; b < ds; ++b) gc[b] += cc * ws.ge[b];
  }
  return loss;
}

void check_example(const SurrogateReranker& r, const EmbeddingModel& model,
                   const SurrogateExample& ex) {
  check_shapes(r, model, ex.features);
  if (ex.candidates.empty()) throw InvalidArgument("surrogate example without candidates");
  if (ex.label >= ex.candidates.size()) throw InvalidArgument("surrogate label out of range");
}

}  // namespace

double surrogate_loss(const SurrogateReranker& r, const EmbeddingModel& model,
                      std::span<const SurrogateExample> examples) {
  if (examples.empty()) return 0.0;
  Workspace ws;
  double total = 0.0;
  for (const auto& ex : examples) {
    check_example(r, model, ex);
    total += example_ce(r, model, ex, nullptr, 0.0, ws);
  }
  return total / static_cast<double>(examples.size());
}

double surrogate_loss_and_gradient(const SurrogateReranker& r, const EmbeddingModel& model,
                                   std::span<const SurrogateExample> examples,
                                   SurrogateReranker& grad) {
  grad.d_s = r.d_s;
  grad.d_x = r.d_x;
  grad.w_p.assign(r.w_p.size(), 0.0);
  grad.w_c.assign(r.w_c.size(), 0.0);
  if (examples.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(examples.size());
  Workspace ws;
  double total = 0.0;
  for (const auto& ex : examples) {
    check_example(r, model, ex);
    total += example_ce(r, model, ex, &grad, scale, ws);
  }
  return total * scale;
}

std::vector<SurrogateExample> build_surrogate_examples(const EmbeddingModel& model,
                                                       const KnowledgeGraph& kg,
                                                       std::span<const Query> queries,
                                                       std::size_t k, const ContextOptions& context,
                                                       unsigned threads) {
  std::vector<std::optional<SurrogateExample>> slots(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) {
    const Query& q = queries[i];
    const auto ranking = rank_filtered(model, kg, q, k);
    const auto cands = topk_from_ranking(ranking, q, k, CandidateMode::Train);
    if (cands.candidates.size() < 2) return;
    const auto ctx = context_heuristic(kg, model, q, context);
    SurrogateExample ex;
    ex.features = query_features(model, q, mean_pool(model, ctx, q.anchor));
    ex.candidates = cands.ids();
    const auto it = std::find(ex.candidates.begin(), ex.candidates.end(), *q.target);
    ex.label = static_cast<std::size_t>(it - ex.candidates.begin());
    slots[i] = std::move(ex);
  });
  std::vector<SurrogateExample> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

SurrogateTrainResult train_surrogate_on(const EmbeddingModel& model,
                                        std::vector<SurrogateExample> examples,
                                        const SurrogateConfig& config) {
  if (config.steps < 0) throw InvalidArgument("steps must be non-negative");
  SurrogateTrainResult result;
  result.reranker = init_reranker(model.dim, config.d_x, config.seed, config.init_scale);
  if (examples.empty()) return result;

  Rng split_rng(derive_seed(config.seed, "surrogate-holdout"));
  for (std::size_t i = examples.size(); i > 1; --i)
    std::swap(examples[i - 1], examples[split_rng.index(i)]);
  std::size_t n_hold = static_cast<std::size_t>(config.holdout_fraction * static_cast<double>(examples.size()));
  if (examples.size() > 1) n_hold = std::clamp<std::size_t>(n_hold, 1, examples.size() - 1);
  else n_hold = 0;
  const std::span<const SurrogateExample> all(examples);
  const auto train = all.first(examples.size() - n_hold);
  const auto hold = n_hold ? all.last(n_hold) : train;
  result.train_examples = train.size();
  result.holdout_examples = n_hold;

  auto& r = result.reranker;
  result.initial_holdout_loss = surrogate_loss(r, model, hold);
  result.final_holdout_loss = result.initial_holdout_loss;
  if (config.steps == 0) return result;

  Rng rng(derive_seed(config.seed, "surrogate-train"));
  SurrogateReranker grad;
  std::vector<SurrogateExample> batch(std::min(config.batch_size, train.size()));
  for (long step = 0; step < config.steps; ++step) {
    for (auto& b : batch) b = train[rng.index(train.size())];
    const double loss = surrogate_loss_and_gradient(r, model, batch, grad);
    if (!std::isfinite(loss)) throw TrainingDiverged("surrogate training", step);
    for (std::size_t i = 0; i < r.w_p.size(); ++i) r.w_p[i] -= config.lr * grad.w_p[i];
    for (std::size_t i = 0; i < r.w_c.size(); ++i) r.w_c[i] -= config.lr * grad.w_c[i];
  }
  // Round to checkpoint precision so saved rerankers reload bit-exactly.
  for (auto& v : r.w_p) v = static_cast<float>(v);
  for (auto& v : r.w_c) v = static_cast<float>(v);
  r.validate();
  result.final_holdout_loss = surrogate_loss(r, model, hold);
  if (!std::isfinite(result.final_holdout_loss))
    throw TrainingDiverged("surrogate training", config.steps);
  return result;
}

SurrogateTrainResult train_surrogate(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                     std::span<const Query> train_queries,
                                     const SurrogateConfig& config) {
  std::vector<Query> chosen(train_queries.begin(), train_queries.end());
  if (!config.relations.empty()) {
    std::erase_if(chosen, [&](const Query& q) {
      return std::find(config.relations.begin(), config.relations.end(), q.rel) == config.relations.end();
    });
    if (chosen.empty()) throw InvalidArgument("no training queries use the selected relations");
  }
  if (config.max_queries > 0 && chosen.size() > config.max_queries) {
    Rng rng(derive_seed(config.seed, "surrogate-queries"));
    for (std::size_t i = 0; i < config.max_queries; ++i)
      std::swap(chosen[i], chosen[i + rng.index(chosen.size() - i)]);
    chosen.resize(config.max_queries);
  }
  for (const auto& q : chosen) {
    if (!q.target) throw InvalidArgument("surrogate training query " + q.id() + " has no target");
  }
  auto examples = build_surrogate_examples(model, kg, chosen, config.k, config.context, config.threads);
  return train_surrogate_on(model, std::move(examples), config);
}

void save_surrogate(const SurrogateReranker& r, const std::filesystem::path& path) {
  r.validate();
  nlohmann::ordered_json meta;
  meta["kind"] = "surrogate";
  meta["d_s"] = r.d_s;
  meta["d_x"] = r.d_x;
  meta["d_feat"] = r.d_feat();
  meta["seed"] = r.seed;
  const std::vector<float> wp(r.w_p.begin(), r.w_p.end());
  const std::vector<float> wc(r.w_c.begin(), r.w_c.end());
  const std::span<const float> sections[] = {wp, wc};
  write_file(path, encode_container(meta, sections));
}

SurrogateReranker load_surrogate(const std::filesystem::path& path) {
  const auto c = decode_container(read_file(path));
  const auto get = [&](const char* key) {
    if (!c.metadata.contains(key))
      throw CheckpointError(CheckpointError::Kind::BadMetadata,
                            std::string("surrogate metadata lacks '") + key + "'");
    return c.metadata.at(key);
  };
  if (get("kind") != "surrogate")
    throw CheckpointError(CheckpointError::Kind::BadMetadata, "checkpoint is not a surrogate reranker");
  SurrogateReranker r;
  r.d_s = get("d_s").get<std::size_t>();
  r.d_x = get("d_x").get<std::size_t>();
  r.seed = get("seed").get<std::uint64_t>();
  if (get("d_feat").get<std::size_t>() != r.d_feat())
    throw CheckpointError(CheckpointError::Kind::DimensionMismatch, "surrogate d_feat != 3·d_s");
  const std::size_t counts[] = {r.d_x * r.d_feat(), r.d_x * r.d_s};
  auto sections = read_sections(c, counts);
  r.w_p.assign(sections[0].begin(), sections[0].end());
  r.w_c.assign(sections[1].begin(), sections[1].end());
  return r;
}

}  // namespace ftg
