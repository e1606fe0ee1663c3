#include "ftg/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "ftg/error.hpp"
#include "ftg/parallel.hpp"

namespace ftg {

DenseParams to_dense(const EmbeddingModel& model) {
  DenseParams p;
  p.kind = model.kind;
  p.n_entities = model.n_entities;
  p.n_relations = model.n_relations;
  p.dim = model.dim;
  p.gamma = model.gamma;
  p.entity.assign(model.entity.begin(), model.entity.end());
  p.relation.assign(model.relation.begin(), model.relation.end());
  return p;
}

EmbeddingModel to_model(const DenseParams& p, std::uint64_t seed) {
  EmbeddingModel m;
  m.kind = p.kind;
  m.n_entities = p.n_entities;
  m.n_relations = p.n_relations;
  m.dim = p.dim;
  m.gamma = static_cast<float>(p.gamma);
  m.seed = seed;
  m.entity.assign(p.entity.begin(), p.entity.end());
  m.relation.assign(p.relation.begin(), p.relation.end());
  return m;
}

namespace {

// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const double* erow(const DenseParams& p, EntityId e) {
  return p.entity.data() + static_cast<std::size_t>(e) * p.dim;
}
const double* rrow(const DenseParams& p, RelationId r) {
  return p.relation.data() + static_cast<std::size_t>(r) * p.relation_dim();
}

// The relation of one example; RotatE phases are turned into cos/sin once
// instead of once per scored triple.
struct Relation {
  const double* row = nullptr;
  std::vector<double> cs, sn;

  Relation(const DenseParams& p, RelationId r) : row(rrow(p, r)) {
    if (p.kind != ModelKind::RotatE) return;
    const std::size_t half = p.dim / 2;
    cs.resize(half);
    sn.resize(half);
    for (std::size_t i = 0; i < half; ++i) {
      cs[i] = std::cos(row[i]);
      sn[i] = std::sin(row[i]);
    }
  }

  double logit(const DenseParams& p, const double* h, const double* t) const {
    if (p.kind == ModelKind::RotatE)
      return kernels::rotate_logit(h, cs.data(), sn.data(), t, p.dim / 2, p.gamma);
    return kernels::logit(p.kind, h, row, t, p.dim, p.gamma);
  }

  void gradient(const DenseParams& p, const double* h, const double* t, double upstream, double* gh,
                double* gr, double* gt) const {
    if (p.kind == ModelKind::RotatE)
      kernels::rotate_gradient(h, cs.data(), sn.data(), t, p.dim / 2, upstream, gh, gr, gt);
    else
      kernels::logit_gradient(p.kind, h, row, t, p.dim, upstream, gh, gr, gt);
  }
};

double positive_logit(const DenseParams& p, const Relation& rel, const TrainingExample& ex) {
  return rel.logit(p, erow(p, ex.positive.head), erow(p, ex.positive.tail));
}

std::vector<double> negative_logits(const DenseParams& p, const Relation& rel,
                                    const TrainingExample& ex) {
  std::vector<double> out(ex.negatives.size());
  for (std::size_t i = 0; i < ex.negatives.size(); ++i) {
    const EntityId h = ex.corrupt_head ? ex.negatives[i] : ex.positive.head;
    const EntityId t = ex.corrupt_head ? ex.positive.tail : ex.negatives[i];
    out[i] = rel.logit(p, erow(p, h), erow(p, t));
  }
  return out;
}

std::vector<double> softmax_weights(const std::vector<double>& logits, double alpha) {
  std::vector<double> w(logits.size());
  if (w.empty()) return w;
  double mx = -INFINITY;
  for (double l : logits) mx = std::max(mx, alpha * l);
  double z = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) z += (w[i] = std::exp(alpha * logits[i] - mx));
  for (auto& v : w) v /= z;
  return w;
}

double loss_from_logits(double pos, const std::vector<double>& neg, std::span<const double> w) {
  double loss = -log_sigmoid(pos);
  for (std::size_t i = 0; i < neg.size(); ++i) loss -= w[i] * log_sigmoid(-neg[i]);
  return loss;
}

struct ExampleGradient {
  double loss = 0.0;
  std::vector<double> head, rel, tail;  // rows of the positive triple
  std::vector<double> negatives;        // one row per corrupting entity
};

ExampleGradient example_gradient(const DenseParams& p, const TrainingExample& ex, double alpha) {
  const std::size_t dim = p.dim;
  ExampleGradient g;
  g.head.assign(dim, 0.0);
  g.tail.assign(dim, 0.0);
  g.rel.assign(p.relation_dim(), 0.0);
  g.negatives.assign(ex.negatives.size() * dim, 0.0);

  const Relation rel(p, ex.positive.rel);
  const double pos = positive_logit(p, rel, ex);
  const auto neg = negative_logits(p, rel, ex);
  const auto w = softmax_weights(neg, alpha);
  g.loss = loss_from_logits(pos, neg, w);

  const double* h = erow(p, ex.positive.head);
  const double* t = erow(p, ex.positive.tail);
  // d/ds [-log sigmoid(s)] = -sigmoid(-s)
  rel.gradient(p, h, t, -sigmoid(-pos), g.head.data(), g.rel.data(), g.tail.data());
  for (std::size_t i = 0; i < neg.size(); ++i) {
    // d/ds [-w log sigmoid(-s)] = w sigmoid(s)
    const double up = w[i] * sigmoid(neg[i]);
    double* gn = g.negatives.data() + i * dim;
    if (ex.corrupt_head)
      rel.gradient(p, erow(p, ex.negatives[i]), t, up, gn, g.rel.data(), g.tail.data());
    else
      rel.gradient(p, h, erow(p, ex.negatives[i]), up, g.head.data(), g.rel.data(), gn);
  }
  return g;
}

void scatter(const ExampleGradient& g, const TrainingExample& ex, double scale, DenseParams& target) {
  const std::size_t dim = target.dim;
  auto add = [&](std::vector<double>& dst, std::size_t row, std::size_t width, const double* src) {
    double* d = dst.data() + row * width;
    for (std::size_t i = 0; i < width; ++i) d[i] += scale * src[i];
  };
  add(target.entity, static_cast<std::size_t>(ex.positive.head), dim, g.head.data());
  add(target.entity, static_cast<std::size_t>(ex.positive.tail), dim, g.tail.data());
  add(target.relation, static_cast<std::size_t>(ex.positive.rel), target.relation_dim(), g.rel.data());
  for (std::size_t i = 0; i < ex.negatives.size(); ++i)
    add(target.entity, static_cast<std::size_t>(ex.negatives[i]), dim, g.negatives.data() + i * dim);
}

std::vector<ExampleGradient> gradients(const DenseParams& p, std::span<const TrainingExample> batch,
                                       double alpha, unsigned threads) {
  std::vector<ExampleGradient> out(batch.size());
  parallel_for(batch.size(), threads,
               [&](std::size_t i) { out[i] = example_gradient(p, batch[i], alpha); });
  return out;
}

}  // namespace

std::vector<double> adversarial_weights(const DenseParams& p, const TrainingExample& ex,
                                        double alpha) {
  return softmax_weights(negative_logits(p, Relation(p, ex.positive.rel), ex), alpha);
}

double example_loss(const DenseParams& p, const TrainingExample& ex, double alpha,
                    std::span<const double> weights) {
  const Relation rel(p, ex.positive.rel);
  const double pos = positive_logit(p, rel, ex);
  const auto neg = negative_logits(p, rel, ex);
  if (!weights.empty()) return loss_from_logits(pos, neg, weights);
  const auto w = softmax_weights(neg, alpha);
  return loss_from_logits(pos, neg, w);
}

double batch_loss(const DenseParams& p, std::span<const TrainingExample> batch, double alpha) {
  if (batch.empty()) return 0.0;
  double total = 0.0;
  for (const auto& ex : batch) total += example_loss(p, ex, alpha);
  return total / static_cast<double>(batch.size());
}

double batch_loss_and_gradient(const DenseParams& p, std::span<const TrainingExample> batch,
                               double alpha, DenseParams& grad, unsigned threads) {
  if (batch.empty()) return 0.0;
  if (grad.entity.size() != p.entity.size()) grad.entity.assign(p.entity.size(), 0.0);
  if (grad.relation.size() != p.relation.size()) grad.relation.assign(p.relation.size(), 0.0);
  grad.kind = p.kind;
  grad.dim = p.dim;
  grad.n_entities = p.n_entities;
  grad.n_relations = p.n_relations;
  const auto gs = gradients(p, batch, alpha, threads);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += gs[i].loss;
    scatter(gs[i], batch[i], scale, grad);
  }
  return total * scale;
}

std::vector<TrainingExample> sample_batch(const KnowledgeGraph& kg, std::size_t batch_size,
                                          std::size_t negatives, Rng& rng) {
  const auto train = kg.train();
  std::vector<TrainingExample> batch(batch_size);
  for (auto& ex : batch) {
    ex.positive = train[rng.index(train.size())];
    ex.corrupt_head = rng.bernoulli(0.5);
    ex.negatives.resize(negatives);
    for (auto& n : ex.negatives) n = static_cast<EntityId>(rng.index(kg.entity_count()));
  }
  return batch;
}

TrainResult train(const KnowledgeGraph& kg, const TrainConfig& config, ModelKind kind) {
  if (kg.train().empty()) throw InvalidArgument("train split is empty");
  if (config.batch_size == 0) throw InvalidArgument("batch_size must be positive");
  if (config.steps < 0) throw InvalidArgument("steps must be non-negative");
  if (!(config.lr > 0.0)) throw InvalidArgument("lr must be positive");
  if (config.adversarial_temperature < 0.0)
    throw InvalidArgument("adversarial_temperature must be non-negative");

  TrainResult result;
  result.model = init_model(kind, kg.entity_count(), kg.relation_count(), config.dim,
                            static_cast<float>(config.gamma), config.seed, config.init_scale);
  if (config.steps == 0) return result;

  DenseParams p = to_dense(result.model);

  // Fixed monitor batch, preferably from held-out triples.
  std::vector<TrainingExample> monitor;
  {
    Rng mrng(derive_seed(config.seed, "kge-monitor"));
    const auto valid = kg.split(Split::Valid);
    const auto source = valid.empty() ? kg.train() : valid;
    const std::size_t n = std::min<std::size_t>(256, source.size());
    monitor.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      monitor[i].positive = source[mrng.index(source.size())];
      monitor[i].corrupt_head = mrng.bernoulli(0.5);
      monitor[i].negatives.resize(config.negatives);
      for (auto& e : monitor[i].negatives) e = static_cast<EntityId>(mrng.index(kg.entity_count()));
    }
  }
  const double alpha = config.adversarial_temperature;

  Rng rng(derive_seed(config.seed, "kge-train"));
  const double scale = -config.lr / static_cast<double>(config.batch_size);
  for (long step = 0; step < config.steps; ++step) {
    const auto batch = sample_batch(kg, config.batch_size, config.negatives, rng);
    if (step == 0) result.history.push_back({0, batch_loss(p, batch, alpha), batch_loss(p, monitor, alpha)});

    const auto gs = gradients(p, batch, alpha, config.threads);
    double total = 0.0;
    for (const auto& g : gs) total += g.loss;
    if (!std::isfinite(total)) throw TrainingDiverged("kge training", step);
    for (std::size_t i = 0; i < batch.size(); ++i) scatter(gs[i], batch[i], scale, p);

    const long done = step + 1;
    if (done == config.steps || (config.eval_every > 0 && done % config.eval_every == 0)) {
      const double mon = batch_loss(p, monitor, alpha);
      if (!std::isfinite(mon)) throw TrainingDiverged("kge training", done);
      result.history.push_back({done, total / static_cast<double>(batch.size()), mon});
    }
  }
  result.model = to_model(p, config.seed);
  result.model.validate();
  return result;
}

}  // namespace ftg
