#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ftg/ego_graph.hpp"
#include "ftg/embedding.hpp"
#include "ftg/filter.hpp"
#include "ftg/kg.hpp"

namespace ftg {

// Arithmetic mean of the structural embeddings of the distinct entities in
// the context (center included). An empty context pools the center alone.
std::vector<double> mean_pool(const EmbeddingModel& model, const SerializedContext& context,
                              EntityId center);

// Bilinear stand-in for the generator's candidate-selection head:
//   logit_i = <W_p · [anchor || relation || pooled], W_c · e_i>
// W_p maps the 3·d_s feature vector to d_x, W_c maps an entity embedding to
// d_x. Both are stored row-major with d_x rows.
struct SurrogateReranker {
  std::size_t d_s = 0;
  std::size_t d_x = 64;
  std::uint64_t seed = 0;
  std::vector<double> w_p;  // d_x x d_feat
  std::vector<double> w_c;  // d_x x d_s

  std::size_t d_feat() const noexcept { return 3 * d_s; }
  void validate() const;
};

SurrogateReranker init_reranker(std::size_t d_s, std::size_t d_x, std::uint64_t seed,
                                double init_scale = 1.0);

struct GraphToken {
  std::vector<double> pooled;
  std::vector<double> projected;
};

// W_p · features. Throws InvalidArgument on a length mismatch.
std::vector<double> project(const SurrogateReranker& reranker, std::span<const double> features);

// [anchor || relation feature || pooled]
std::vector<double> query_features(const EmbeddingModel& model, const Query& query,
                                   std::span<const double> pooled);

GraphToken graph_token(const SurrogateReranker& reranker, const EmbeddingModel& model,
                       const Query& query, const SerializedContext& context);

std::vector<double> surrogate_logits(const SurrogateReranker& reranker, const EmbeddingModel& model,
                                     std::span<const double> features,
                                     std::span<const EntityId> candidates);

std::vector<double> surrogate_logits(const SurrogateReranker& reranker, const EmbeddingModel& model,
                                     const Query& query, const CandidateSet& candidates,
                                     const SerializedContext& context);

// One supervised reranking problem: candidate embeddings are looked up in
// `model` at loss time and never updated.
struct SurrogateExample {
  std::vector<double> features;
  std::vector<EntityId> candidates;
  std::size_t label = 0;
};

double surrogate_loss(const SurrogateReranker& r, const EmbeddingModel& model,
                      std::span<const SurrogateExample> examples);

// Mean softmax cross-entropy and its gradient; `grad` is resized to match.
double surrogate_loss_and_gradient(const SurrogateReranker& r, const EmbeddingModel& model,
                                   std::span<const SurrogateExample> examples,
                                   SurrogateReranker& grad);

struct SurrogateConfig {
  std::size_t d_x = 64;
  double lr = 0.5;
  long steps = 1500;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;
  std::size_t max_queries = 0;  // 0 = use every training query
  std::vector<RelationId> relations;  // train only on these; empty = all
  double init_scale = 1.0;
  std::size_t k = 20;
  ContextOptions context;
  unsigned threads = 1;
};

// Train-mode candidates (target forced in) plus context features for each
// query. Queries whose filtered set has fewer than two candidates are skipped.
std::vector<SurrogateExample> build_surrogate_examples(const EmbeddingModel& model,
                                                       const KnowledgeGraph& kg,
                                                       std::span<const Query> queries,
                                                       std::size_t k, const ContextOptions& context,
                                                       unsigned threads = 1);

struct SurrogateTrainResult {
  SurrogateReranker reranker;
  double initial_holdout_loss = 0.0;
  double final_holdout_loss = 0.0;
  std::size_t train_examples = 0;
  std::size_t holdout_examples = 0;
};

// Minibatch SGD on softmax cross-entropy over the k candidates; the filter
// model is read-only throughout. Throws TrainingDiverged on a non-finite
// loss.
SurrogateTrainResult train_surrogate(const EmbeddingModel& model, const KnowledgeGraph& kg,
                                     std::span<const Query> train_queries,
                                     const SurrogateConfig& config);

SurrogateTrainResult train_surrogate_on(const EmbeddingModel& model,
                                        std::vector<SurrogateExample> examples,
                                        const SurrogateConfig& config);

// FTGKGE1 container, kind "surrogate", sections W_p then W_c.
void save_surrogate(const SurrogateReranker& r, const std::filesystem::path& path);
SurrogateReranker load_surrogate(const std::filesystem::path& path);

}  // namespace ftg
