#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "ftg/kg.hpp"

namespace ftg {

enum class ModelKind { TransE, DistMult, ComplEx, RotatE };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

inline bool is_complex(ModelKind kind) {
  return kind == ModelKind::ComplEx || kind == ModelKind::RotatE;
}

enum class Direction { Tail, Head };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view name);

// Structural embeddings of a trained (or freshly initialized) filter model.
//
// Complex-valued kinds store each row as [re_0 .. re_{d/2-1}, im_0 .. im_{d/2-1}].
// RotatE relation rows hold d/2 phase angles, so |r_i| = 1 by construction.
struct EmbeddingModel {
  ModelKind kind = ModelKind::RotatE;
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;
  std::size_t dim = 0;
  float gamma = 6.0f;
  std::uint64_t seed = 0;
  std::vector<float> entity;    // n_entities x dim, row-major
  std::vector<float> relation;  // n_relations x relation_dim(), row-major

  std::size_t relation_dim() const noexcept {
    return kind == ModelKind::RotatE ? dim / 2 : dim;
  }
  std::span<const float> entity_row(EntityId e) const {
    return {entity.data() + static_cast<std::size_t>(e) * dim, dim};
  }
  std::span<const float> relation_row(RelationId r) const {
    return {relation.data() + static_cast<std::size_t>(r) * relation_dim(), relation_dim()};
  }

  // Throws InvalidArgument if shapes are inconsistent, dim is odd for a
  // complex kind, or any entry is non-finite.
  void validate() const;
};

// Uniform init in [-scale·gamma/dim, +scale·gamma/dim]; RotatE phases are
// uniform in [-pi, pi].
EmbeddingModel init_model(ModelKind kind, std::size_t n_entities, std::size_t n_relations,
                          std::size_t dim, float gamma, std::uint64_t seed, double init_scale = 1.0);

// Plausibility score, higher is better for every kind:
//   TransE   -||h + r - t||_2
//   DistMult sum h_i r_i t_i
//   ComplEx  Re<h, r, conj(t)>
//   RotatE   gamma - sum_i |h_i r_i - t_i|   (r_i = exp(i·phase_i))
// Throws OutOfRange on bad ids.
double score(const EmbeddingModel& model, EntityId head, RelationId rel, EntityId tail);

// Scores every entity as the missing end of (anchor, rel, ?) or (?, rel, anchor).
// Single precision output, double accumulation.
std::vector<float> score_all(const EmbeddingModel& model, Direction direction, EntityId anchor,
                             RelationId rel);

// The d_s-dimensional relation embedding used for similarity and features.
// RotatE phases map to [cos, sin]; other kinds return the raw row.
std::vector<double> relation_feature(const EmbeddingModel& model, RelationId rel);

// Relation feature as seen from the anchor: the inverse relation for head
// queries (negated for TransE, conjugated for ComplEx and RotatE).
std::vector<double> relation_feature(const EmbeddingModel& model, RelationId rel, Direction direction);

namespace kernels {

// Training logit: the score, shifted by gamma for TransE so that the
// margin enters every distance model the same way.
template <class T>
double logit(ModelKind kind, const T* h, const T* r, const T* t, std::size_t dim, double gamma) {
  const std::size_t half = dim / 2;
  switch (kind) {
    case ModelKind::TransE: {
      double sq = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double v = static_cast<double>(h[i]) + r[i] - t[i];
        sq += v * v;
      }
      return gamma - std::sqrt(sq);
    }
    case ModelKind::DistMult: {
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) s += static_cast<double>(h[i]) * r[i] * t[i];
      return s;
    }
    case ModelKind::ComplEx: {
      double s = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        const double a = h[i], b = h[half + i], c = r[i], d = r[half + i], e = t[i], f = t[half + i];
        s += a * c * e + b * c * f + a * d * f - b * d * e;
      }
      return s;
    }
    case ModelKind::RotatE: {
      double dist = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        const double cs = std::cos(static_cast<double>(r[i]));
        const double sn = std::sin(static_cast<double>(r[i]));
        const double x = h[i] * cs - h[half + i] * sn - t[i];
        const double y = h[i] * sn + h[half + i] * cs - t[half + i];
        dist += std::sqrt(x * x + y * y);
      }
      return gamma - dist;
    }
  }
  return 0.0;
}

// Accumulates upstream · d(logit)/d(h, r, t) into gh, gr, gt.
void logit_gradient(ModelKind kind, const double* h, const double* r, const double* t,
                    std::size_t dim, double upstream, double* gh, double* gr, double* gt);

// RotatE with the phases' cos/sin precomputed; gphase is per phase.
double rotate_logit(const double* h, const double* cs, const double* sn, const double* t,
                    std::size_t half, double gamma);
void rotate_gradient(const double* h, const double* cs, const double* sn, const double* t,
                     std::size_t half, double upstream, double* gh, double* gphase, double* gt);

}  // namespace kernels

}  // namespace ftg
