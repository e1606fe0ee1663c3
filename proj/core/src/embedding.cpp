#include "ftg/embedding.hpp"

#include <numbers>
#include <string>

#include "ftg/error.hpp"
#include "ftg/rng.hpp"

namespace ftg {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::TransE: return "TransE";
    case ModelKind::DistMult: return "DistMult";
    case ModelKind::ComplEx: return "ComplEx";
    case ModelKind::RotatE: return "RotatE";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx, ModelKind::RotatE}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidArgument("unknown model kind '" + std::string(name) + "'");
}

std::string_view to_string(Direction d) { return d == Direction::Tail ? "tail" : "head"; }

Direction parse_direction(std::string_view name) {
  if (name == "tail") return Direction::Tail;
  if (name == "head") return Direction::Head;
  throw InvalidArgument("unknown direction '" + std::string(name) + "'");
}

void EmbeddingModel::validate() const {
  if (dim == 0) throw InvalidArgument("embedding dimension must be positive");
  if (is_complex(kind) && dim % 2 != 0)
    throw InvalidArgument(std::string(to_string(kind)) + " requires an even dimension");
  if (entity.size() != n_entities * dim)
    throw InvalidArgument("entity matrix size does not match n_entities x dim");
  if (relation.size() != n_relations * relation_dim())
    throw InvalidArgument("relation matrix size does not match n_relations x relation_dim");
  if (!(gamma > 0.0f) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  for (float v : entity)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite entity embedding entry");
  for (float v : relation)
    if (!std::isfinite(v)) throw InvalidArgument("non-finite relation embedding entry");
}

EmbeddingModel init_model(ModelKind kind, std::size_t n_entities, std::size_t n_relations,
                          std::size_t dim, float gamma, std::uint64_t seed, double init_scale) {
  EmbeddingModel m;
  m.kind = kind;
  m.n_entities = n_entities;
  m.n_relations = n_relations;
  m.dim = dim;
  m.gamma = gamma;
  m.seed = seed;
  if (dim == 0 || (is_complex(kind) && dim % 2 != 0))
    throw InvalidArgument("invalid embedding dimension " + std::to_string(dim) + " for " +
                          std::string(to_string(kind)));
  const double range = init_scale * static_cast<double>(gamma) / static_cast<double>(dim);
  Rng rng(derive_seed(seed, "kge-init"));
  m.entity.resize(n_entities * dim);
  for (auto& v : m.entity) v = static_cast<float>(rng.uniform(-range, range));
  m.relation.resize(n_relations * m.relation_dim());
  for (auto& v : m.relation) {
    v = kind == ModelKind::RotatE ? static_cast<float>(rng.uniform(-std::numbers::pi, std::numbers::pi))
                                  : static_cast<float>(rng.uniform(-range, range));
  }
  return m;
}

double score(const EmbeddingModel& model, EntityId head, RelationId rel, EntityId tail) {
  const auto n_e = static_cast<EntityId>(model.n_entities);
  if (head < 0 || head >= n_e) throw OutOfRange("head id " + std::to_string(head) + " out of range");
  if (tail < 0 || tail >= n_e) throw OutOfRange("tail id " + std::to_string(tail) + " out of range");
  if (rel < 0 || static_cast<std::size_t>(rel) >= model.n_relations)
    throw OutOfRange("relation id " + std::to_string(rel) + " out of range");
  const double l = kernels::logit(model.kind, model.entity_row(head).data(),
                                  model.relation_row(rel).data(), model.entity_row(tail).data(),
                                  model.dim, model.gamma);
  return model.kind == ModelKind::TransE ? l - model.gamma : l;
}

std::vector<float> score_all(const EmbeddingModel& model, Direction direction, EntityId anchor,
                             RelationId rel) {
  if (anchor < 0 || static_cast<std::size_t>(anchor) >= model.n_entities)
    throw OutOfRange("anchor id " + std::to_string(anchor) + " out of range");
  if (rel < 0 || static_cast<std::size_t>(rel) >= model.n_relations)
    throw OutOfRange("relation id " + std::to_string(rel) + " out of range");

  const std::size_t dim = model.dim;
  const std::size_t half = dim / 2;
  const auto a = model.entity_row(anchor);
  const auto r = model.relation_row(rel);
  const bool tail = direction == Direction::Tail;

  // Every kind reduces to comparing each entity row against one query
  // vector q (or, for ComplEx head queries, a conjugate-flipped product).
  std::vector<double> q(dim);
  switch (model.kind) {
    case ModelKind::TransE:
      for (std::size_t i = 0; i < dim; ++i)
        q[i] = tail ? static_cast<double>(a[i]) + r[i] : static_cast<double>(a[i]) - r[i];
      break;
    case ModelKind::DistMult:
      for (std::size_t i = 0; i < dim; ++i) q[i] = static_cast<double>(a[i]) * r[i];
      break;
    case ModelKind::ComplEx:
      for (std::size_t i = 0; i < half; ++i) {
        const double ar = a[i], ai = a[half + i], rr = r[i], ri = r[half + i];
        if (tail) {  // q = a * r ; score = Re(q * conj(e))
          q[i] = ar * rr - ai * ri;
          q[half + i] = ar * ri + ai * rr;
        } else {  // q = r * conj(a) ; score = Re(e * q)
          q[i] = rr * ar + ri * ai;
          q[half + i] = ri * ar - rr * ai;
        }
      }
      break;
    case ModelKind::RotatE:
      for (std::size_t i = 0; i < half; ++i) {
        const double cs = std::cos(static_cast<double>(r[i]));
        const double sn = tail ? std::sin(static_cast<double>(r[i]))
                               : -std::sin(static_cast<double>(r[i]));
        q[i] = a[i] * cs - a[half + i] * sn;
        q[half + i] = a[i] * sn + a[half + i] * cs;
      }
      break;
  }

  std::vector<float> out(model.n_entities);
  for (std::size_t e = 0; e < model.n_entities; ++e) {
    const float* x = model.entity.data() + e * dim;
    double s = 0.0;
    switch (model.kind) {
      case ModelKind::TransE: {
        for (std::size_t i = 0; i < dim; ++i) {
          const double v = tail ? q[i] - x[i] : x[i] - q[i];
          s += v * v;
        }
        s = -std::sqrt(s);
        break;
      }
      case ModelKind::DistMult:
        for (std::size_t i = 0; i < dim; ++i) s += q[i] * x[i];
        break;
      case ModelKind::ComplEx:
        if (tail) {
          for (std::size_t i = 0; i < half; ++i) s += q[i] * x[i] + q[half + i] * x[half + i];
        } else {
          for (std::size_t i = 0; i < half; ++i) s += x[i] * q[i] - x[half + i] * q[half + i];
        }
        break;
      case ModelKind::RotatE: {
        for (std::size_t i = 0; i < half; ++i) {
          const double dx = q[i] - x[i];
          const double dy = q[half + i] - x[half + i];
          s += std::sqrt(dx * dx + dy * dy);
        }
        s = model.gamma - s;
        break;
      }
    }
    out[e] = static_cast<float>(s);
  }
  return out;
}

std::vector<double> relation_feature(const EmbeddingModel& model, RelationId rel) {
  if (rel < 0 || static_cast<std::size_t>(rel) >= model.n_relations)
    throw OutOfRange("relation id " + std::to_string(rel) + " out of range");
  const auto row = model.relation_row(rel);
  std::vector<double> f(model.dim);
  if (model.kind == ModelKind::RotatE) {
    const std::size_t half = model.dim / 2;
    for (std::size_t i = 0; i < half; ++i) {
      f[i] = std::cos(static_cast<double>(row[i]));
      f[half + i] = std::sin(static_cast<double>(row[i]));
    }
  } else {
    for (std::size_t i = 0; i < model.dim; ++i) f[i] = row[i];
  }
  return f;
}

std::vector<double> relation_feature(const EmbeddingModel& model, RelationId rel, Direction direction) {
  auto f = relation_feature(model, rel);
  if (direction == Direction::Tail) return f;
  switch (model.kind) {
    case ModelKind::TransE:
      for (double& x : f) x = -x;
      break;
    case ModelKind::DistMult:
      break;
    case ModelKind::ComplEx:
    case ModelKind::RotatE:
      for (std::size_t i = model.dim / 2; i < model.dim; ++i) f[i] = -f[i];
      break;
  }
  return f;
}

namespace kernels {

void logit_gradient(ModelKind kind, const double* h, const double* r, const double* t,
                    std::size_t dim, double upstream, double* gh, double* gr, double* gt) {
  const std::size_t half = dim / 2;
  switch (kind) {
    case ModelKind::TransE: {
      double sq = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double v = h[i] + r[i] - t[i];
        sq += v * v;
      }
      const double norm = std::sqrt(sq);
      if (norm == 0.0) return;
      for (std::size_t i = 0; i < dim; ++i) {
        const double g = -upstream * (h[i] + r[i] - t[i]) / norm;
        gh[i] += g;
        gr[i] += g;
        gt[i] -= g;
      }
      return;
    }
    case ModelKind::DistMult:
      for (std::size_t i = 0; i < dim; ++i) {
        gh[i] += upstream * r[i] * t[i];
        gr[i] += upstream * h[i] * t[i];
        gt[i] += upstream * h[i] * r[i];
      }
      return;
    case ModelKind::ComplEx:
      for (std::size_t i = 0; i < half; ++i) {
        const double a = h[i], b = h[half + i], c = r[i], d = r[half + i], e = t[i], f = t[half + i];
        gh[i] += upstream * (c * e + d * f);
        gh[half + i] += upstream * (c * f - d * e);
        gr[i] += upstream * (a * e + b * f);
        gr[half + i] += upstream * (a * f - b * e);
        gt[i] += upstream * (a * c - b * d);
        gt[half + i] += upstream * (b * c + a * d);
      }
      return;
    case ModelKind::RotatE: {
      std::vector<double> cs(half), sn(half);
      for (std::size_t i = 0; i < half; ++i) {
        cs[i] = std::cos(r[i]);
        sn[i] = std::sin(r[i]);
      }
      rotate_gradient(h, cs.data(), sn.data(), t, half, upstream, gh, gr, gt);
      return;
    }
  }
}

double rotate_logit(const double* h, const double* cs, const double* sn, const double* t,
                    std::size_t half, double gamma) {
  double dist = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    const double x = h[i] * cs[i] - h[half + i] * sn[i] - t[i];
    const double y = h[i] * sn[i] + h[half + i] * cs[i] - t[half + i];
    dist += std::sqrt(x * x + y * y);
  }
  return gamma - dist;
}

void rotate_gradient(const double* h, const double* cs, const double* sn, const double* t,
                     std::size_t half, double upstream, double* gh, double* gphase, double* gt) {
  for (std::size_t i = 0; i < half; ++i) {
    const double a = h[i], b = h[half + i], e = t[i], f = t[half + i];
    const double x = a * cs[i] - b * sn[i] - e;
    const double y = a * sn[i] + b * cs[i] - f;
    const double m = std::sqrt(x * x + y * y);
    if (m == 0.0) continue;
    const double gx = -upstream * x / m;
    const double gy = -upstream * y / m;
    gh[i] += gx * cs[i] + gy * sn[i];
    gh[half + i] += -gx * sn[i] + gy * cs[i];
    gphase[i] += gx * (-a * sn[i] - b * cs[i]) + gy * (a * cs[i] - b * sn[i]);
    gt[i] -= gx;
    gt[half + i] -= gy;
  }
}

}  // namespace kernels

}  // namespace ftg
