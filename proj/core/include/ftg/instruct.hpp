#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ftg/ego_graph.hpp"
#include "ftg/filter.hpp"
#include "ftg/kg.hpp"

namespace ftg {

inline constexpr std::string_view kInstruction =
    "Please answer the following question and select only one answer from the candidates that "
    "is most relevant to the question.";

// Tail query: "<head>, <relation>?"
// Head query: "What/Who/When/Where/Why <relation> <tail>?"
std::string verbalize(const KnowledgeGraph& kg, const Query& query);

struct InstructionSample {
  std::string id;
  Direction direction = Direction::Tail;
  std::string anchor;
  std::string relation;
  std::string instruction{kInstruction};
  std::string question;
  std::optional<std::string> context;
  std::vector<std::string> candidates;
  std::vector<EntityId> candidate_ids;
  std::string answer;
  bool forced_inclusion = false;
  std::optional<std::vector<float>> graph_vec;

  friend bool operator==(const InstructionSample&, const InstructionSample&) = default;
};

enum class SampleKind { Train, Eval };

// The context section is included only when it carries at least one triple.
// Throws InvalidArgument for a train sample whose target is not among the
// candidates.
InstructionSample build_sample(const KnowledgeGraph& kg, const Query& query,
                               const CandidateSet& candidates, const SerializedContext* context,
                               std::span<const double> graph_vec, SampleKind kind);

// Names as shown to the generator. Names equal after answer normalization
// get " (2)", " (3)", ... in order of appearance.
std::vector<std::string> display_names(std::span<const std::string> names);

// Instruction / Question / [Context] / Candidates / Answer, one per line.
// With include_answer=false (or an empty answer) the last line is "Answer:".
std::string render_prompt(const InstructionSample& sample, bool include_answer);

// One JSON object, keys in fixed order, graph_vec floats with 9 significant
// digits. No trailing newline.
std::string to_jsonl_line(const InstructionSample& sample, bool include_graph_vec);
InstructionSample parse_jsonl_line(std::string_view line);

void emit_jsonl(std::span<const InstructionSample> samples, const std::filesystem::path& path,
                bool include_graph_vec);
std::vector<InstructionSample> read_jsonl(const std::filesystem::path& path);

}  // namespace ftg
