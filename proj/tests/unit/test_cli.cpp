#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ftg_cli/cli.hpp"
#include "ftg_cli/config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kSubcommands[] = {"kg-stats",           "train-filter",    "eval-filter", "dump-candidates",
                                    "build-instructions", "train-surrogate", "eval-ftg",    "ablate-context"};

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ftg_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_config(const fs::path& out) {
  return {{"seed", 5},
          {"out", out.string()},
          {"dataset", {{"kind", "synthetic"}, {"entities", 30}, {"relations", 3}, {"triples", 240}}},
          {"filter", {{"model", "RotatE"}, {"dim", 8}, {"steps", 60}, {"batch_size", 32}, {"negatives", 8}}},
          {"k", 5},
          {"surrogate", {{"d_x", 4}, {"steps", 20}}},
          {"n_return", 3}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = ftg::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void run_chain(const fs::path& config) {
  for (const char* sub : kSubcommands) {
    const auto r = run({sub, "--config", config.string()});
    const std::string name = sub;
    CAPTURE(name);
    CAPTURE(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find(std::string(sub) + ":") != std::string::npos);
  }
}

const char* const kArtifacts[] = {"resolved_config.json",  "kg_stats.json",
                                  "filter.ckpt",           "filter_history.json",
                                  "filter_metrics.json",   "eval_filter_report.json",
                                  "candidates_test.jsonl", "instructions_train.jsonl",
                                  "instructions_test.jsonl", "surrogate.ckpt",
                                  "surrogate_report.json", "ftg_metrics.json",
                                  "ftg_report.json",       "ablation.json",
                                  "ablation.txt"};

}  // namespace

TEST_CASE("all eight subcommands chain on a small synthetic graph") {
  const auto dir = fresh_dir("chain");
  const auto out = dir / "out";
  run_chain(write_config(dir, small_config(out)));
  for (const std::string a : kArtifacts) {
    CAPTURE(a);
    CHECK(fs::exists(out / a));
  }
  const auto ablation = json::parse(slurp(out / "ablation.json"));
  CHECK(ablation["heuristics"].size() == 4);
  CHECK(ablation["subset_chain"]["violations"] == 0);
  const auto resolved = json::parse(slurp(out / "resolved_config.json"));
  CHECK(resolved["filter"]["model"] == "RotatE");
  CHECK(resolved["k"] == 5);
}

TEST_CASE("reruns with the same seed are byte-identical") {
  const auto dir = fresh_dir("repro");
  const auto out = dir / "out";
  const auto config = write_config(dir, small_config(out));
  run_chain(config);
  std::map<std::string, std::string> first;
  for (const char* name : kArtifacts) first[name] = slurp(out / name);
  fs::remove_all(out);
  run_chain(config);
  for (const auto& [name, bytes] : first) {
    CAPTURE(name);
    CHECK(slurp(out / name) == bytes);
  }
}

TEST_CASE("echo through eval-ftg reproduces eval-filter") {
  const auto dir = fresh_dir("echo");
  const auto out = dir / "out";
  auto cfg = small_config(out);
  cfg["generator"] = {{"name", "echo"}};
  const auto path = write_config(dir, cfg);
  for (const char* sub : {"train-filter", "eval-filter", "eval-ftg"}) REQUIRE(run({sub, "--config", path.string()}).code == 0);
  CHECK(slurp(out / "ftg_metrics.json") == slurp(out / "filter_metrics.json"));
}

TEST_CASE("failure exit codes") {
  const auto dir = fresh_dir("codes");
  const auto out = dir / "out";
  const auto path = write_config(dir, small_config(out));
  const std::string cfg = path.string();

  CHECK(run({}).code == ftg::cli::kUsage);
  CHECK(run({"no-such-command"}).code == ftg::cli::kUsage);
  CHECK(run({"eval-filter", "--k", "many"}).code == ftg::cli::kUsage);
  CHECK(run({"eval-filter", "--config", cfg, "--k", "0"}).code == ftg::cli::kUsage);

  const auto missing = run({"eval-filter", "--config", cfg});
  CHECK(missing.code == ftg::cli::kMissingArtifact);
  CHECK(missing.err.find("train-filter") != std::string::npos);
  CHECK(run({"eval-ftg", "--config", cfg}).code == ftg::cli::kMissingArtifact);

  CHECK(run({"kg-stats", "--config", cfg, "--heuristic", "three_hop"}).code == ftg::cli::kUnknownName);
  CHECK(run({"kg-stats", "--config", cfg, "--generator", "gpt"}).code == ftg::cli::kUnknownName);

  std::ofstream(dir / "blocker") << "a file where a directory should be";
  CHECK(run({"kg-stats", "--config", cfg, "--out", (dir / "blocker" / "sub").string()}).code ==
        ftg::cli::kUnwritableOutput);

  auto bad = small_config(out);
  bad["filter"]["stpes"] = 3;
  CHECK(run({"kg-stats", "--config", write_config(dir, bad).string()}).code == ftg::cli::kUsage);

  auto tsv = small_config(out);
  tsv["dataset"] = {{"kind", "tsv"}, {"train", "nope/train.tsv"}, {"valid", "nope/valid.tsv"}, {"test", "nope/test.tsv"}};
  CHECK(run({"kg-stats", "--config", write_config(dir, tsv).string()}).code == ftg::cli::kMissingArtifact);

  fs::create_directories(dir / "data");
  std::ofstream(dir / "data" / "train.tsv") << "a\tr\tb\nbroken line\n";
  std::ofstream(dir / "data" / "valid.tsv") << "";
  std::ofstream(dir / "data" / "test.tsv") << "";
  tsv["dataset"] = {{"kind", "tsv"}, {"train", "data/train.tsv"}, {"valid", "data/valid.tsv"}, {"test", "data/test.tsv"}};
  CHECK(run({"kg-stats", "--config", write_config(dir, tsv).string()}).code == ftg::cli::kDataError);
}

TEST_CASE("command-line overrides win over the file") {
  const auto dir = fresh_dir("override");
  const auto out = dir / "out";
  const auto path = write_config(dir, small_config(out));
  REQUIRE(run({"kg-stats", "--config", path.string(), "--k", "7", "--heuristic", "two_hop", "--seed", "9"}).code == 0);
  const auto resolved = json::parse(slurp(out / "resolved_config.json"));
  CHECK(resolved["k"] == 7);
  CHECK(resolved["seed"] == 9);
  CHECK(resolved["context"]["heuristic"] == "two_hop");
}

TEST_CASE("resolved config re-parses to itself") {
  for (const char* model : {"TransE", "DistMult", "ComplEx", "RotatE"}) {
    auto j = small_config("somewhere");
    j["filter"]["model"] = model;
    j["context"] = {{"heuristic", "random_walk"}, {"epsilon", 0.25}};
    j["surrogate"]["relations"] = {"r1"};
    auto c = ftg::cli::parse_config(j, fs::current_path());
    ftg::cli::finalize(c);
    const auto once = ftg::cli::to_json(c);
    auto again = ftg::cli::parse_config(json::parse(once.dump()), fs::current_path());
    ftg::cli::finalize(again);
    CHECK(ftg::cli::to_json(again) == once);
    CHECK(once["filter"]["model"] == model);
  }
  CHECK(ftg::cli::is_known_generator("surrogate"));
  CHECK_FALSE(ftg::cli::is_known_generator("gpt"));
}
