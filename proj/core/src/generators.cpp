#include "ftg/generators.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ftg/error.hpp"
#include "ftg/rng.hpp"

namespace ftg {

OracleGenerator::OracleGenerator(double p, std::uint64_t seed) : p_(p), seed_(seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("oracle probability must lie in [0, 1]");
}

std::vector<std::string> OracleGenerator::generate(const InstructionSample& sample,
                                                   std::size_t n_return) {
  if (n_return == 0 || sample.candidates.empty()) return {};
  const auto target = std::find(sample.candidates.begin(), sample.candidates.end(), sample.answer);
  const bool recalled = !sample.answer.empty() && target != sample.candidates.end();
  Rng rng(derive_seed(seed_, stable_hash(sample.id)));
  if (recalled && rng.bernoulli(p_)) return {*target};
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < sample.candidates.size(); ++i)
    if (sample.candidates[i] != sample.answer) others.push_back(i);
  if (others.empty()) return {};
  return {sample.candidates[others[rng.index(others.size())]]};
}

std::vector<std::string> EchoTop1Generator::generate(const InstructionSample& sample,
                                                     std::size_t n_return) {
  if (n_return == 0 || sample.candidates.empty()) return {};
  return {sample.candidates.front()};
}

ReplayGenerator::ReplayGenerator(std::map<std::string, std::vector<std::string>> outputs)
    : outputs_(std::move(outputs)) {}

ReplayGenerator::ReplayGenerator(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open replay file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    try {
      const auto j = nlohmann::json::parse(line);
      outputs_[j.at("id").get<std::string>()] = j.at("outputs").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
}

std::vector<std::string> ReplayGenerator::generate(const InstructionSample& sample,
                                                   std::size_t n_return) {
  const auto it = outputs_.find(sample.id);
  if (it == outputs_.end()) return {};
  std::vector<std::string> out = it->second;
  if (out.size() > n_return) out.resize(n_return);
  return out;
}

SurrogateGenerator::SurrogateGenerator(const KnowledgeGraph& kg, const EmbeddingModel& model,
                                       SurrogateReranker reranker)
    : kg_(kg), model_(model), reranker_(std::move(reranker)) {
  reranker_.validate();
  if (reranker_.d_s != model.dim)
    throw InvalidArgument("surrogate d_s " + std::to_string(reranker_.d_s) +
                          " does not match filter dimension " + std::to_string(model.dim));
}

std::vector<std::string> SurrogateGenerator::generate(const InstructionSample& sample,
                                                      std::size_t n_return) {
  if (!sample.graph_vec) throw InvalidArgument("surrogate generator needs graph_vec in " + sample.id);
  const auto anchor = kg_.find_entity(sample.anchor);
  const auto rel = kg_.find_relation(sample.relation);
  if (!anchor || !rel) throw InvalidArgument("sample " + sample.id + " names unknown anchor or relation");
  if (sample.candidate_ids.empty() || n_return == 0) return {};

  Query q;
  q.direction = sample.direction;
  q.anchor = *anchor;
  q.rel = *rel;
  const std::vector<double> pooled(sample.graph_vec->begin(), sample.graph_vec->end());
  const auto logits =
      surrogate_logits(reranker_, model_, query_features(model_, q, pooled), sample.candidate_ids);

  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < order.size() && out.size() < n_return; ++i)
    out.push_back(sample.candidates[order[i]]);
  return out;
}

}  // namespace ftg
