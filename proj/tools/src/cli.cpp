#include "ftg_cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "ftg/adapter.hpp"
#include "ftg/checkpoint.hpp"
#include "ftg/error.hpp"
#include "ftg/evaluation.hpp"
#include "ftg/filter.hpp"
#include "ftg/generators.hpp"
#include "ftg/instruct.hpp"
#include "ftg/kg.hpp"
#include "ftg/parallel.hpp"
#include "ftg/pipeline.hpp"
#include "ftg/rng.hpp"
#include "ftg/trainer.hpp"
#include "ftg_cli/config.hpp"

namespace ftg::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Session {
  RunConfig cfg;
  std::ostream& out;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CliError(kUnwritableOutput, "cannot write " + path.string());
  f << text;
  if (!f) throw CliError(kUnwritableOutput, "write failed: " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

void prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec || !fs::is_directory(cfg.out))
    throw CliError(kUnwritableOutput, "cannot create output directory " + cfg.out.string());
  write_json(cfg.out / "resolved_config.json", to_json(cfg));
}

KnowledgeGraph load_dataset(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  try {
    if (d.kind == "synthetic") return synthetic_kg(d.synthetic);
    if (d.kind == "neighborhood") return neighborhood_kg(d.neighborhood);
    for (const auto& p : {d.train, d.valid, d.test})
      if (!fs::exists(p)) throw CliError(kMissingArtifact, "dataset file not found: " + p.string());
    return load_tsv(d.train, d.valid, d.test);
  } catch (const ParseError& e) {
    throw CliError(kDataError, e.what());
  } catch (const IoError& e) {
    throw CliError(kMissingArtifact, e.what());
  } catch (const InvalidArgument& e) {
    throw CliError(kDataError, std::string("dataset: ") + e.what());
  }
}

fs::path filter_path(const RunConfig& cfg) { return cfg.out / "filter.ckpt"; }
fs::path surrogate_path(const RunConfig& cfg) { return cfg.out / "surrogate.ckpt"; }

EmbeddingModel load_filter(const RunConfig& cfg, const KnowledgeGraph& kg) {
  const auto path = filter_path(cfg);
  if (!fs::exists(path))
    throw CliError(kMissingArtifact, "filter checkpoint " + path.string() + " not found; run train-filter first");
  EmbeddingModel m;
  try {
    m = load_checkpoint(path);
  } catch (const CheckpointError& e) {
    throw CliError(kMissingArtifact, "unusable filter checkpoint " + path.string() + ": " + e.what());
  }
  if (m.n_entities != kg.entity_count() || m.n_relations != kg.relation_count())
    throw CliError(kMissingArtifact, "filter checkpoint " + path.string() + " was trained on a different graph");
  return m;
}

SurrogateReranker load_reranker(const RunConfig& cfg) {
  const auto path = surrogate_path(cfg);
  if (!fs::exists(path))
    throw CliError(kMissingArtifact, "surrogate checkpoint " + path.string() + " not found; run train-surrogate first");
  try {
    return load_surrogate(path);
  } catch (const CheckpointError& e) {
    throw CliError(kMissingArtifact, "unusable surrogate checkpoint " + path.string() + ": " + e.what());
  }
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string metric_line(const Metrics& m) {
  return "MRR " + fixed(m.mrr) + " H@1 " + fixed(m.hits1) + " H@3 " + fixed(m.hits3) + " H@10 " +
         fixed(m.hits10);
}

std::unique_ptr<Generator> make_generator(const RunConfig& cfg, const KnowledgeGraph& kg,
                                          const EmbeddingModel& model) {
  const auto& g = cfg.generator;
  if (g.name == "echo" || g.name == "echo_top1") return std::make_unique<EchoTop1Generator>();
  if (g.name == "oracle")
    return std::make_unique<OracleGenerator>(g.oracle_p, derive_seed(cfg.seed, "oracle"));
  if (g.name == "replay") {
    if (g.replay_file.empty() || !fs::exists(g.replay_file))
      throw CliError(kMissingArtifact, "replay file not found: " + g.replay_file.string());
    return std::make_unique<ReplayGenerator>(g.replay_file);
  }
  if (g.name == "http" || g.name == "http_chat") {
    HttpChatConfig h;
    try {
      h = HttpChatConfig::from_env();
    } catch (const InvalidArgument& e) {
      throw CliError(kUsage, e.what());
    }
    h.model = g.http_model;
    h.temperature = g.http_temperature;
    h.max_in_flight = g.http_max_in_flight;
    h.timeout = std::chrono::milliseconds(g.http_timeout_ms);
    return std::make_unique<HttpChatGenerator>(h);
  }
  if (g.name == "surrogate") return std::make_unique<SurrogateGenerator>(kg, model, load_reranker(cfg));
  throw CliError(kUnknownName, "unknown generator '" + g.name + "'");
}

PipelineConfig pipeline_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.k = cfg.k;
  p.n_return = cfg.n_return;
  p.context = cfg.context;
  p.split = cfg.split;
  p.threads = cfg.threads;
  p.shuffle_candidates = cfg.shuffle_candidates;
  p.seed = cfg.seed;
  return p;
}

void check_k(const RunConfig& cfg, const KnowledgeGraph& kg) {
  if (cfg.k > kg.entity_count())
    throw CliError(kUsage, "k = " + std::to_string(cfg.k) + " exceeds the number of entities (" +
                               std::to_string(kg.entity_count()) + ")");
}

// ---------------------------------------------------------------------------

void cmd_kg_stats(Session& s) {
  const auto kg = load_dataset(s.cfg);
  const auto stats = kg_stats(kg);
  const auto path = s.cfg.out / "kg_stats.json";
  write_json(path, to_json(stats));
  s.out << "kg-stats: " << stats.entities << " entities, " << stats.relations << " relations, "
        << stats.train << "/" << stats.valid << "/" << stats.test << " train/valid/test, mean degree "
        << fixed(stats.mean_degree, 2) << " -> " << path.string() << "\n";
}

void cmd_train_filter(Session& s) {
  const auto kg = load_dataset(s.cfg);
  const auto result = train(kg, s.cfg.filter, s.cfg.filter_kind);
  save_checkpoint(result.model, filter_path(s.cfg));
  ojson hist = ojson::array();
  for (const auto& p : result.history)
    hist.push_back({{"step", p.step}, {"train_loss", p.train_loss}, {"monitor_loss", p.monitor_loss}});
  write_json(s.cfg.out / "filter_history.json", hist);
  const double last = result.history.empty() ? 0.0 : result.history.back().monitor_loss;
  s.out << "train-filter: " << to_string(s.cfg.filter_kind) << " d=" << s.cfg.filter.dim << ", "
        << s.cfg.filter.steps << " steps, monitor loss " << fixed(last) << " -> "
        << filter_path(s.cfg).string() << "\n";
}

void cmd_eval_filter(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  const auto records = filter_rank_records(model, kg, s.cfg.split, s.cfg.threads);
  const auto metrics = evaluate(records);
  std::vector<std::size_t> ranks;
  for (const auto& r : records) ranks.push_back(r.rank);
  const auto recall = recall_from_ranks(split_queries(kg, s.cfg.split), ranks, s.cfg.k);
  write_json(s.cfg.out / "filter_metrics.json", to_json(metrics));
  ojson report;
  report["split"] = std::string(to_string(s.cfg.split));
  report["metrics"] = to_json(metrics);
  report["recall"] = to_json(recall);
  write_json(s.cfg.out / "eval_filter_report.json", report);
  s.out << "eval-filter: " << metric_line(metrics.combined) << " recall@" << s.cfg.k << " "
        << fixed(recall.recall()) << " -> " << (s.cfg.out / "filter_metrics.json").string() << "\n";
}

void cmd_dump_candidates(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  const auto queries = split_queries(kg, s.cfg.split);
  const auto mode = s.cfg.split == Split::Train ? CandidateMode::Train : CandidateMode::Eval;
  std::vector<std::string> lines(queries.size());
  std::vector<std::size_t> ranks(queries.size());
  parallel_for(queries.size(), s.cfg.threads, [&](std::size_t i) {
    const auto& q = queries[i];
    const auto ranking = rank_filtered(model, kg, q, s.cfg.k);
    const auto set = topk_from_ranking(ranking, q, s.cfg.k, mode);
    ranks[i] = ranking.target_rank;
    ojson cands = ojson::array();
    for (const auto& c : set.candidates)
      cands.push_back({{"entity", c.entity}, {"name", kg.entity_name(c.entity)}, {"score", c.score}});
    ojson j;
    j["id"] = q.id();
    j["direction"] = std::string(to_string(q.direction));
    j["anchor"] = kg.entity_name(q.anchor);
    j["relation"] = kg.relation_name(q.rel);
    j["target"] = kg.entity_name(*q.target);
    j["target_rank"] = ranking.target_rank;
    j["target_in_topk"] = set.target_in_topk;
    j["forced_inclusion"] = set.forced_inclusion;
    j["candidates"] = std::move(cands);
    lines[i] = j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  const auto path = s.cfg.out / ("candidates_" + std::string(to_string(s.cfg.split)) + ".jsonl");
  write_text(path, text);
  const auto recall = recall_from_ranks(queries, ranks, s.cfg.k);
  s.out << "dump-candidates: " << queries.size() << " queries, recall@" << s.cfg.k << " "
        << fixed(recall.recall()) << " -> " << path.string() << "\n";
}

std::vector<InstructionSample> make_samples(const RunConfig& cfg, const KnowledgeGraph& kg,
                                            const EmbeddingModel& model, Split split) {
  const auto queries = split_queries(kg, split);
  const auto kind = split == Split::Train ? SampleKind::Train : SampleKind::Eval;
  const auto mode = split == Split::Train ? CandidateMode::Train : CandidateMode::Eval;
  std::vector<InstructionSample> samples(queries.size());
  parallel_for(queries.size(), cfg.threads, [&](std::size_t i) {
    const auto& q = queries[i];
    auto set = topk_candidates(model, kg, q, cfg.k, mode);
    if (cfg.shuffle_candidates) shuffle_candidates(set, derive_seed(cfg.seed, stable_hash(q.id())));
    const auto ctx = context_heuristic(kg, model, q, cfg.context);
    const auto pooled = mean_pool(model, ctx, q.anchor);
    samples[i] = build_sample(kg, q, set, &ctx, pooled, kind);
  });
  return samples;
}

void cmd_build_instructions(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  const auto train_path = s.cfg.out / "instructions_train.jsonl";
  const auto train_samples = make_samples(s.cfg, kg, model, Split::Train);
  std::size_t forced = 0;
  for (const auto& x : train_samples) forced += x.forced_inclusion;
  try {
    emit_jsonl(train_samples, train_path, true);
    if (s.cfg.split != Split::Train) {
      const auto eval_path =
          s.cfg.out / ("instructions_" + std::string(to_string(s.cfg.split)) + ".jsonl");
      emit_jsonl(make_samples(s.cfg, kg, model, s.cfg.split), eval_path, true);
    }
  } catch (const IoError& e) {
    throw CliError(kUnwritableOutput, e.what());
  }
  s.out << "build-instructions: " << train_samples.size() << " train samples (" << forced
        << " with forced target), heuristic " << to_string(s.cfg.context.kind) << " -> "
        << s.cfg.out.string() << "\n";
}

void cmd_train_surrogate(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  SurrogateConfig sc = s.cfg.surrogate;
  sc.relations.clear();
  for (const auto& name : s.cfg.surrogate_relations) {
    const auto r = kg.find_relation(name);
    if (!r) throw CliError(kUsage, "surrogate.relations: unknown relation '" + name + "'");
    sc.relations.push_back(*r);
  }
  const auto queries = split_queries(kg, Split::Train);
  const auto result = train_surrogate(model, kg, queries, sc);
  save_surrogate(result.reranker, surrogate_path(s.cfg));
  ojson report;
  report["train_examples"] = result.train_examples;
  report["holdout_examples"] = result.holdout_examples;
  report["initial_holdout_loss"] = result.initial_holdout_loss;
  report["final_holdout_loss"] = result.final_holdout_loss;
  write_json(s.cfg.out / "surrogate_report.json", report);
  s.out << "train-surrogate: " << result.train_examples << " examples, holdout loss "
        << fixed(result.initial_holdout_loss) << " -> " << fixed(result.final_holdout_loss) << " -> "
        << surrogate_path(s.cfg).string() << "\n";
}

void cmd_eval_ftg(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  auto generator = make_generator(s.cfg, kg, model);
  const auto report = run_pipeline(kg, model, *generator, pipeline_config(s.cfg));
  write_json(s.cfg.out / "ftg_metrics.json", to_json(report.metrics));
  auto j = to_json(report);
  j["config"] = to_json(s.cfg);
  write_json(s.cfg.out / "ftg_report.json", j);
  const PipelineReport runs[] = {report};
  s.out << render_table(runs);
  for (const auto& w : report.warnings) s.out << "warning: " << w << "\n";
  s.out << "eval-ftg: " << report.generator << " " << metric_line(report.metrics.combined) << " -> "
        << (s.cfg.out / "ftg_metrics.json").string() << "\n";
}

void cmd_ablate_context(Session& s) {
  const auto kg = load_dataset(s.cfg);
  check_k(s.cfg, kg);
  const auto model = load_filter(s.cfg, kg);
  auto generator = make_generator(s.cfg, kg, model);
  const auto report = run_ablation(kg, model, *generator, pipeline_config(s.cfg));
  auto j = to_json(report);
  j["config"] = to_json(s.cfg);
  write_json(s.cfg.out / "ablation.json", j);
  const auto table = render_table(report.runs);
  write_text(s.cfg.out / "ablation.txt", table);
  s.out << table;
  s.out << "ablate-context: " << report.runs.size() << " heuristics, subset chain "
        << (report.chain_violations == 0 ? "holds" : "VIOLATED") << " on " << report.chain_checked
        << " queries -> " << (s.cfg.out / "ablation.json").string() << "\n";
  if (report.chain_violations > 0)
    throw Error(std::to_string(report.chain_violations) + " queries violate pruned <= 1-hop <= 2-hop");
}

struct Command {
  const char* name;
  const char* help;
  void (*fn)(Session&);
};

constexpr Command kCommands[] = {
    {"kg-stats", "Summarize the dataset", cmd_kg_stats},
    {"train-filter", "Train the structural filter model", cmd_train_filter},
    {"eval-filter", "Filtered MRR/Hits@N and recall@k of the filter", cmd_eval_filter},
    {"dump-candidates", "Write top-k candidates per query", cmd_dump_candidates},
    {"build-instructions", "Write instruction-tuning JSONL", cmd_build_instructions},
    {"train-surrogate", "Train the surrogate reranker", cmd_train_surrogate},
    {"eval-ftg", "Run the filter-then-generate pipeline", cmd_eval_ftg},
    {"ablate-context", "Compare context heuristics", cmd_ablate_context},
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Filter-then-generate knowledge graph completion", "ftg"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides o;
  std::map<std::string, const Command*> by_name;

  for (const auto& c : kCommands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    by_name[c.name] = &c;
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option_function<std::string>("--out", [&](const std::string& v) { o.out = v; },
                                          "Output directory");
    sub->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; },
                                            "Top-level seed");
    sub->add_option_function<std::size_t>("--k", [&](const std::size_t& v) { o.k = v; },
                                           "Candidate set size");
    sub->add_option_function<double>("--epsilon", [&](const double& v) { o.epsilon = v; },
                                      "Pruning threshold");
    sub->add_option_function<std::string>("--heuristic", [&](const std::string& v) { o.heuristic = v; },
                                          "structure_pruned | random_walk | full_1hop | two_hop");
    sub->add_option_function<std::string>("--generator", [&](const std::string& v) { o.generator = v; },
                                          "echo | oracle | replay | http | surrogate");
    sub->add_option_function<std::size_t>("--n-return", [&](const std::size_t& v) { o.n_return = v; },
                                           "Answers requested per query");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const Command* command = nullptr;
  for (auto* sub : app.get_subcommands()) command = by_name.at(sub->get_name());

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    apply_overrides(cfg, o);
    finalize(cfg);
    prepare_output(cfg);
    Session session{std::move(cfg), out};
    command->fn(session);
    return kOk;
  } catch (const CliError& e) {
    err << "ftg " << command->name << ": " << e.what() << "\n";
    return e.code();
  } catch (const ParseError& e) {
    err << "ftg " << command->name << ": " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "ftg " << command->name << ": " << e.what() << "\n";
    return kFailure;
  }
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace ftg::cli
