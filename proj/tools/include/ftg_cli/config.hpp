#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ftg/adapter.hpp"
#include "ftg/ego_graph.hpp"
#include "ftg/embedding.hpp"
#include "ftg/kg.hpp"
#include "ftg/trainer.hpp"

namespace ftg::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingArtifact = 3,
  kUnknownName = 4,
  kUnwritableOutput = 5,
  kDataError = 6,
};

// Carries the exit code the process should end with.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | neighborhood | tsv
  SyntheticSpec synthetic;
  NeighborhoodSpec neighborhood;
  std::filesystem::path train, valid, test;
};

struct GeneratorConfig {
  std::string name = "surrogate";  // echo | oracle | replay | http | surrogate
  double oracle_p = 1.0;
  std::filesystem::path replay_file;
  std::string http_model = "ftg";
  double http_temperature = 0.0;
  unsigned http_max_in_flight = 4;
  long http_timeout_ms = 30000;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "ftg-out";
  DatasetConfig dataset;
  ModelKind filter_kind = ModelKind::RotatE;
  TrainConfig filter;
  std::size_t k = 20;
  ContextOptions context;
  SurrogateConfig surrogate;
  std::vector<std::string> surrogate_relations;
  GeneratorConfig generator;
  std::size_t n_return = 10;
  Split split = Split::Test;
  unsigned threads = 1;
  bool shuffle_candidates = false;
};

// Command-line values that win over the file.
struct Overrides {
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k;
  std::optional<double> epsilon;
  std::optional<std::string> heuristic;
  std::optional<std::string> generator;
  std::optional<std::size_t> n_return;
};

// Fills a RunConfig from JSON; unknown keys are rejected so typos surface.
// Relative dataset paths resolve against `base_dir`. Throws CliError.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
void apply_overrides(RunConfig& config, const Overrides& overrides);
// Derives stage seeds from the top-level seed and validates ranges.
void finalize(RunConfig& config);

// Complete config with every default spelled out; re-parses to the same
// RunConfig.
nlohmann::ordered_json to_json(const RunConfig& config);

bool is_known_generator(const std::string& name);

}  // namespace ftg::cli
