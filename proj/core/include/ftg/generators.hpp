#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ftg/adapter.hpp"
#include "ftg/embedding.hpp"
#include "ftg/instruct.hpp"
#include "ftg/kg.hpp"

namespace ftg {

// Turns an instruction sample into at most n_return answer strings, best
// first. Implementations must tolerate concurrent calls. Transport problems
// are reported as TransportError so the caller can retry.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string_view name() const = 0;
  virtual std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) = 0;
  // Upper bound on useful concurrent calls.
  virtual unsigned concurrency() const { return 1; }
};

// Emits the answer with probability p when it is among the candidates,
// otherwise one uniformly chosen non-answer candidate. Seeded per sample id.
class OracleGenerator final : public Generator {
 public:
  explicit OracleGenerator(double p = 1.0, std::uint64_t seed = 0);
  std::string_view name() const override { return "oracle"; }
  std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) override;

 private:
  double p_;
  std::uint64_t seed_;
};

// Repeats the first candidate.
class EchoTop1Generator final : public Generator {
 public:
  std::string_view name() const override { return "echo"; }
  std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) override;
};

// Outputs recorded elsewhere: JSONL lines {"id": ..., "outputs": [...]}.
// Unknown ids yield no output.
class ReplayGenerator final : public Generator {
 public:
  explicit ReplayGenerator(const std::filesystem::path& path);
  explicit ReplayGenerator(std::map<std::string, std::vector<std::string>> outputs);
  std::string_view name() const override { return "replay"; }
  std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) override;

 private:
  std::map<std::string, std::vector<std::string>> outputs_;
};

// Candidates ordered by the surrogate reranker's logits. Needs the sample's
// graph_vec (the pooled context embedding).
class SurrogateGenerator final : public Generator {
 public:
  SurrogateGenerator(const KnowledgeGraph& kg, const EmbeddingModel& model,
                     SurrogateReranker reranker);
  std::string_view name() const override { return "surrogate"; }
  std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) override;

 private:
  const KnowledgeGraph& kg_;
  const EmbeddingModel& model_;
  SurrogateReranker reranker_;
};

struct HttpChatConfig {
  std::string url;  // full endpoint, e.g. http://localhost:8000/v1/chat/completions
  std::string api_key;
  std::string model = "ftg";
  double temperature = 0.0;
  unsigned max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};

  // url from FTG_LLM_URL, api_key from FTG_LLM_KEY. Throws InvalidArgument
  // when FTG_LLM_URL is unset.
  static HttpChatConfig from_env();
};

// OpenAI-compatible chat completions over HTTP(S). The graph vector has no
// place in the text protocol and is dropped (one warning per instance).
class HttpChatGenerator final : public Generator {
 public:
  explicit HttpChatGenerator(HttpChatConfig config);
  ~HttpChatGenerator() override;
  std::string_view name() const override { return "http"; }
  std::vector<std::string> generate(const InstructionSample& sample, std::size_t n_return) override;
  unsigned concurrency() const override { return config_.max_in_flight; }

  // Peak number of simultaneous requests observed so far.
  unsigned peak_in_flight() const;

 private:
  struct State;
  HttpChatConfig config_;
  std::unique_ptr<State> state_;
};

// Request body for one sample, exposed for tests.
std::string chat_request_body(const HttpChatConfig& config, const InstructionSample& sample,
                              std::size_t n_return);
// choices[*].message.content; throws TransportError on malformed bodies.
std::vector<std::string> parse_chat_response(std::string_view body);

}  // namespace ftg
