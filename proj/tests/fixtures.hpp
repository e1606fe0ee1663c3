#pragma once

#include <fstream>
#include <iterator>
#include <string>

#include "ftg/ego_graph.hpp"
#include "ftg/filter.hpp"
#include "ftg/instruct.hpp"
#include "ftg/kg.hpp"

namespace fixture {

using namespace ftg;

inline std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(FTG_GOLDEN_DIR) + "/" + name, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A small biography graph around the case-study query (Friedrich Gundolf, employer, ?).
inline KnowledgeGraph case_study_kg() {
  return KnowledgeGraph(
      {"Friedrich Gundolf", "Heidelberg University", "University of Cincinnati",
       "Ludwig Maximilian University of Munich", "Darmstadt", "Stefan George"},
      {"employer", "place of birth", "influenced by"},
      {{{{0, 1, 4}, {0, 2, 5}, {5, 1, 4}}, {}, {{0, 0, 1}}}});
}

inline CandidateSet candidates(const Query& q, std::vector<EntityId> ids) {
  CandidateSet c;
  c.query = q;
  c.k = ids.size();
  float s = 0.0f;
  for (EntityId e : ids) c.candidates.push_back({e, s -= 1.0f});
  c.target_in_topk = q.target && c.contains(*q.target);
  return c;
}

struct CaseSamples {
  InstructionSample tail;
  InstructionSample head;
};

inline CaseSamples case_samples(const KnowledgeGraph& kg, SampleKind kind) {
  const Triple t{0, 0, 1};
  const auto tq = make_query(t, Direction::Tail, Split::Test, 0);
  const auto hq = make_query(t, Direction::Head, Split::Test, 0);
  const std::vector<ContextStep> steps{{{0, 1, 4}, 0, 4}, {{0, 2, 5}, 0, 5}};
  const auto ctx = serialize_steps(kg, 0, steps, 3500);
  const std::vector<double> vec{0.5, -1.25, 0.1};
  return {build_sample(kg, tq, candidates(tq, {1, 3, 2}), &ctx, vec, kind),
          build_sample(kg, hq, candidates(hq, {0, 5, 4}), nullptr, {}, kind)};
}

}  // namespace fixture
