#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ftg/embedding.hpp"
#include "ftg/kg.hpp"
#include "ftg/rng.hpp"

namespace ftg {

struct TrainConfig {
  std::size_t dim = 64;
  double lr = 0.5;
  std::size_t batch_size = 256;
  std::size_t negatives = 64;
  double adversarial_temperature = 1.0;
  double gamma = 6.0;
  long steps = 2000;
  std::uint64_t seed = 0;
  // Record the monitor loss every this many steps (0: only first and last).
  long eval_every = 100;
  double init_scale = 1.0;
  unsigned threads = 1;
};

// A positive triple and the entities used to corrupt one of its ends.
struct TrainingExample {
  Triple positive;
  bool corrupt_head = false;
  std::vector<EntityId> negatives;
};

// Double-precision working copy of the parameters, used by the optimizer and
// by gradient checks.
struct DenseParams {
  ModelKind kind = ModelKind::RotatE;
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;
  std::size_t dim = 0;
  double gamma = 0.0;
  std::vector<double> entity;
  std::vector<double> relation;

  std::size_t relation_dim() const noexcept {
    return kind == ModelKind::RotatE ? dim / 2 : dim;
  }
};

DenseParams to_dense(const EmbeddingModel& model);
EmbeddingModel to_model(const DenseParams& params, std::uint64_t seed);

// Self-adversarial negative-sampling loss of one example:
//   -log sigmoid(s+) - sum_i w_i log sigmoid(-s_i)
// with w = softmax(alpha · s_-). The weights act as constants during
// differentiation. Passing `weights` pins them instead of recomputing.
double example_loss(const DenseParams& p, const TrainingExample& ex, double alpha,
                    std::span<const double> weights = {});

// Adversarial weights for the negatives of `ex` at the current parameters.
std::vector<double> adversarial_weights(const DenseParams& p, const TrainingExample& ex,
                                        double alpha);

// Mean loss over `batch` and its gradient (same shape as p) added into `grad`.
double batch_loss_and_gradient(const DenseParams& p, std::span<const TrainingExample> batch,
                               double alpha, DenseParams& grad, unsigned threads = 1);

double batch_loss(const DenseParams& p, std::span<const TrainingExample> batch, double alpha);

struct LossPoint {
  long step = 0;
  double train_loss = 0.0;
  double monitor_loss = 0.0;
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<LossPoint> history;
};

// Draws uniformly random positives from the train split with head or tail
// corruption chosen by a fair coin; negatives are not filtered against
// known triples.
std::vector<TrainingExample> sample_batch(const KnowledgeGraph& kg, std::size_t batch_size,
                                          std::size_t negatives, Rng& rng);

// Plain SGD on the mean batch loss. Throws TrainingDiverged naming the step
// when the loss becomes non-finite. Deterministic for a fixed seed; the
// gradient reduction order does not depend on `threads`.
TrainResult train(const KnowledgeGraph& kg, const TrainConfig& config, ModelKind kind);

}  // namespace ftg
