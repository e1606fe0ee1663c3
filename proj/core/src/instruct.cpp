#include "ftg/instruct.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ftg/error.hpp"
#include "ftg/text.hpp"

namespace ftg {

std::string verbalize(const KnowledgeGraph& kg, const Query& query) {
  const std::string& rel = kg.relation_name(query.rel);
  const std::string& anchor = kg.entity_name(query.anchor);
  if (query.direction == Direction::Tail) return anchor + ", " + rel + "?";
  return "What/Who/When/Where/Why " + rel + " " + anchor + "?";
}

InstructionSample build_sample(const KnowledgeGraph& kg, const Query& query,
                               const CandidateSet& candidates, const SerializedContext* context,
                               std::span<const double> graph_vec, SampleKind kind) {
  InstructionSample s;
  s.id = query.id();
  s.direction = query.direction;
  s.anchor = kg.entity_name(query.anchor);
  s.relation = kg.relation_name(query.rel);
  s.question = verbalize(kg, query);
  if (context && !context->empty()) s.context = context->text;
  for (const auto& c : candidates.candidates) {
    s.candidates.push_back(kg.entity_name(c.entity));
    s.candidate_ids.push_back(c.entity);
  }
  if (query.target) {
    s.answer = kg.entity_name(*query.target);
    if (kind == SampleKind::Train && !candidates.contains(*query.target))
      throw InvalidArgument("train sample " + s.id + ": target '" + s.answer +
                            "' missing from candidates");
  } else if (kind == SampleKind::Train) {
    throw InvalidArgument("train sample " + s.id + " has no target");
  }
  s.forced_inclusion = candidates.forced_inclusion;
  if (!graph_vec.empty()) s.graph_vec = std::vector<float>(graph_vec.begin(), graph_vec.end());
  return s;
}

std::vector<std::string> display_names(std::span<const std::string> names) {
  std::vector<std::string> out;
  std::vector<std::pair<std::string, int>> counts;
  out.reserve(names.size());
  for (const auto& name : names) {
    const auto key = text::normalize(name);
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == key; });
    if (it == counts.end()) {
      counts.emplace_back(key, 1);
      out.push_back(name);
    } else {
      ++it->second;
      out.push_back(name + " (" + std::to_string(it->second) + ")");
    }
  }
  return out;
}

std::string render_prompt(const InstructionSample& sample, bool include_answer) {
  std::string out;
  out += "Instruction: " + sample.instruction + "\n";
  out += "Question: " + sample.question + "\n";
  if (sample.context) out += "Context: " + *sample.context + "\n";
  out += "Candidates: " + text::join(display_names(sample.candidates), ", ") + "\n";
  out += "Answer:";
  if (include_answer && !sample.answer.empty()) {
    // Show the answer the way the candidate list shows it.
    const auto shown = display_names(sample.candidates);
    auto it = std::find(sample.candidates.begin(), sample.candidates.end(), sample.answer);
    out += " ";
    out += it == sample.candidates.end() ? sample.answer
                                         : shown[static_cast<std::size_t>(it - sample.candidates.begin())];
  }
  return out;
}

namespace {

std::string json_string(const std::string& s) {
  return nlohmann::json(s).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string format_float(float f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
  return buf;
}

}  // namespace

std::string to_jsonl_line(const InstructionSample& s, bool include_graph_vec) {
  std::string out = "{";
  const auto key = [&](const char* k) {
    if (out.size() > 1) out += ",";
    out += "\"";
    out += k;
    out += "\":";
  };
  key("id");
  out += json_string(s.id);
  key("direction");
  out += json_string(std::string(to_string(s.direction)));
  key("anchor");
  out += json_string(s.anchor);
  key("relation");
  out += json_string(s.relation);
  key("instruction");
  out += json_string(s.instruction);
  key("question");
  out += json_string(s.question);
  key("context");
  out += s.context ? json_string(*s.context) : "null";
  key("candidates");
  out += "[";
  for (std::size_t i = 0; i < s.candidates.size(); ++i) {
    if (i) out += ",";
    out += json_string(s.candidates[i]);
  }
  out += "]";
  key("candidate_ids");
  out += "[";
  for (std::size_t i = 0; i < s.candidate_ids.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s.candidate_ids[i]);
  }
  out += "]";
  key("answer");
  out += json_string(s.answer);
  key("forced_inclusion");
  out += s.forced_inclusion ? "true" : "false";
  if (include_graph_vec && s.graph_vec) {
    key("graph_vec");
    out += "[";
    for (std::size_t i = 0; i < s.graph_vec->size(); ++i) {
      if (i) out += ",";
      out += format_float((*s.graph_vec)[i]);
    }
    out += "]";
  }
  out += "}";
  return out;
}

InstructionSample parse_jsonl_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("instruction JSONL: ") + e.what());
  }
  InstructionSample s;
  try {
    s.id = j.at("id").get<std::string>();
    s.direction = parse_direction(j.at("direction").get<std::string>());
    s.anchor = j.at("anchor").get<std::string>();
    s.relation = j.at("relation").get<std::string>();
    s.instruction = j.at("instruction").get<std::string>();
    s.question = j.at("question").get<std::string>();
    if (!j.at("context").is_null()) s.context = j.at("context").get<std::string>();
    s.candidates = j.at("candidates").get<std::vector<std::string>>();
    s.candidate_ids = j.at("candidate_ids").get<std::vector<EntityId>>();
    s.answer = j.at("answer").get<std::string>();
    s.forced_inclusion = j.at("forced_inclusion").get<bool>();
    if (j.contains("graph_vec")) s.graph_vec = j.at("graph_vec").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("instruction JSONL: ") + e.what());
  }
  if (s.candidates.size() != s.candidate_ids.size())
    throw InvalidArgument("instruction JSONL: candidates and candidate_ids differ in length");
  return s;
}

void emit_jsonl(std::span<const InstructionSample> samples, const std::filesystem::path& path,
                bool include_graph_vec) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& s : samples) out << to_jsonl_line(s, include_graph_vec) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<InstructionSample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<InstructionSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_jsonl_line(line));
    } catch (const InvalidArgument& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return out;
}

}  // namespace ftg
