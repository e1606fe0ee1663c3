#include "ftg_cli/config.hpp"

#include <fstream>
#include <set>

#include "ftg/error.hpp"
#include "ftg/rng.hpp"

namespace ftg::cli {

namespace {

using json = nlohmann::json;

// Reads members of one JSON object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw CliError(kUsage, "config: '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& value) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      value = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw CliError(kUsage, "config: '" + name(key) + "' has the wrong type");
    }
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return std::nullopt;
    return Section(j_.at(key), name(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) throw CliError(kUsage, "config: unknown key '" + name(k) + "'");
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <class Fn>
auto named(int code, Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw CliError(code, e.what());
  }
}

}  // namespace

bool is_known_generator(const std::string& name) {
  static const std::set<std::string> names{"echo", "echo_top1", "oracle", "replay",
                                           "http", "http_chat", "surrogate"};
  return names.contains(name);
}

RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  std::string out = c.out.string();
  root.get("out", out);
  c.out = out;

  if (auto d = root.child("dataset")) {
    d->get("kind", c.dataset.kind);
    std::string train, valid, test;
    d->get("train", train);
    d->get("valid", valid);
    d->get("test", test);
    c.dataset.train = resolve(base_dir, train);
    c.dataset.valid = resolve(base_dir, valid);
    c.dataset.test = resolve(base_dir, test);
    auto& s = c.dataset.synthetic;
    auto& n = c.dataset.neighborhood;
    if (c.dataset.kind == "neighborhood") {
      d->get("seed", n.seed);
      d->get("groups", n.groups);
      d->get("pool", n.pool);
      d->get("anchors_per_group", n.anchors_per_group);
      d->get("hint_relations", n.hint_relations);
      d->get("distractors", n.distractors);
      d->get("noise", n.noise);
    } else {
      d->get("seed", s.seed);
      d->get("entities", s.entities);
      d->get("relations", s.relations);
      d->get("triples", s.triples);
    }
    d->finish();
  }
  if (c.dataset.kind != "synthetic" && c.dataset.kind != "neighborhood" && c.dataset.kind != "tsv")
    throw CliError(kUsage, "config: dataset.kind must be synthetic, neighborhood or tsv");

  if (auto f = root.child("filter")) {
    std::string model(to_string(c.filter_kind));
    f->get("model", model);
    c.filter_kind = named(kUsage, [&] { return parse_model_kind(model); });
    f->get("dim", c.filter.dim);
    f->get("lr", c.filter.lr);
    f->get("batch_size", c.filter.batch_size);
    f->get("negatives", c.filter.negatives);
    f->get("adversarial_temperature", c.filter.adversarial_temperature);
    f->get("gamma", c.filter.gamma);
    f->get("steps", c.filter.steps);
    f->get("eval_every", c.filter.eval_every);
    f->get("init_scale", c.filter.init_scale);
    f->finish();
  }
  root.get("k", c.k);

  if (auto x = root.child("context")) {
    std::string heuristic(to_string(c.context.kind));
    x->get("heuristic", heuristic);
    c.context.kind = named(kUnknownName, [&] { return parse_heuristic(heuristic); });
    x->get("epsilon", c.context.epsilon);
    std::string binding = c.context.binding == NeighborBinding::Literal ? "literal" : "center";
    x->get("binding", binding);
    if (binding == "literal")
      c.context.binding = NeighborBinding::Literal;
    else if (binding == "center")
      c.context.binding = NeighborBinding::CenterSide;
    else
      throw CliError(kUsage, "config: context.binding must be literal or center");
    x->get("budget_chars", c.context.budget_chars);
    x->get("walk_max_steps", c.context.walk_max_steps);
    x->get("two_hop_cap", c.context.two_hop_cap);
    x->finish();
  }

  if (auto s = root.child("surrogate")) {
    s->get("d_x", c.surrogate.d_x);
    s->get("lr", c.surrogate.lr);
    s->get("steps", c.surrogate.steps);
    s->get("batch_size", c.surrogate.batch_size);
    s->get("holdout_fraction", c.surrogate.holdout_fraction);
    s->get("max_queries", c.surrogate.max_queries);
    s->get("init_scale", c.surrogate.init_scale);
    s->get("relations", c.surrogate_relations);
    s->finish();
  }

  if (auto g = root.child("generator")) {
    g->get("name", c.generator.name);
    g->get("oracle_p", c.generator.oracle_p);
    std::string replay;
    g->get("replay_file", replay);
    c.generator.replay_file = resolve(base_dir, replay);
    g->get("http_model", c.generator.http_model);
    g->get("http_temperature", c.generator.http_temperature);
    g->get("http_max_in_flight", c.generator.http_max_in_flight);
    g->get("http_timeout_ms", c.generator.http_timeout_ms);
    g->finish();
  }
  root.get("n_return", c.n_return);
  std::string split(to_string(c.split));
  root.get("split", split);
  c.split = named(kUsage, [&] { return parse_split(split); });
  root.get("threads", c.threads);
  root.get("shuffle_candidates", c.shuffle_candidates);
  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kUsage, "cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CliError(kUsage, "config " + path.string() + ": " + e.what());
  }
  return parse_config(j, std::filesystem::absolute(path).parent_path());
}

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.k) c.k = *o.k;
  if (o.epsilon) c.context.epsilon = *o.epsilon;
  if (o.heuristic) c.context.kind = named(kUnknownName, [&] { return parse_heuristic(*o.heuristic); });
  if (o.generator) c.generator.name = *o.generator;
  if (o.n_return) c.n_return = *o.n_return;
}

void finalize(RunConfig& c) {
  if (!is_known_generator(c.generator.name))
    throw CliError(kUnknownName, "unknown generator '" + c.generator.name + "'");
  if (c.k == 0) throw CliError(kUsage, "k must be at least 1");
  if (c.n_return == 0) throw CliError(kUsage, "n_return must be at least 1");
  if (c.threads == 0) throw CliError(kUsage, "threads must be at least 1");
  if (c.dataset.kind == "tsv" && (c.dataset.train.empty() || c.dataset.valid.empty() || c.dataset.test.empty()))
    throw CliError(kUsage, "tsv dataset needs train, valid and test paths");
  c.filter.seed = derive_seed(c.seed, "filter");
  c.filter.threads = c.threads;
  c.surrogate.seed = derive_seed(c.seed, "surrogate");
  c.surrogate.k = c.k;
  c.surrogate.threads = c.threads;
  c.context.seed = derive_seed(c.seed, "context");
  c.surrogate.context = c.context;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  nlohmann::ordered_json d;
  d["kind"] = c.dataset.kind;
  if (c.dataset.kind == "tsv") {
    d["train"] = std::filesystem::absolute(c.dataset.train).string();
    d["valid"] = std::filesystem::absolute(c.dataset.valid).string();
    d["test"] = std::filesystem::absolute(c.dataset.test).string();
  } else if (c.dataset.kind == "neighborhood") {
    const auto& n = c.dataset.neighborhood;
    d["seed"] = n.seed;
    d["groups"] = n.groups;
    d["pool"] = n.pool;
    d["anchors_per_group"] = n.anchors_per_group;
    d["hint_relations"] = n.hint_relations;
    d["distractors"] = n.distractors;
    d["noise"] = n.noise;
  } else {
    const auto& s = c.dataset.synthetic;
    d["seed"] = s.seed;
    d["entities"] = s.entities;
    d["relations"] = s.relations;
    d["triples"] = s.triples;
  }
  j["dataset"] = d;
  j["filter"] = {{"model", std::string(to_string(c.filter_kind))},
                 {"dim", c.filter.dim},
                 {"lr", c.filter.lr},
                 {"batch_size", c.filter.batch_size},
                 {"negatives", c.filter.negatives},
                 {"adversarial_temperature", c.filter.adversarial_temperature},
                 {"gamma", c.filter.gamma},
                 {"steps", c.filter.steps},
                 {"eval_every", c.filter.eval_every},
                 {"init_scale", c.filter.init_scale}};
  j["k"] = c.k;
  j["context"] = {{"heuristic", std::string(to_string(c.context.kind))},
                  {"epsilon", c.context.epsilon},
                  {"binding", c.context.binding == NeighborBinding::Literal ? "literal" : "center"},
                  {"budget_chars", c.context.budget_chars},
                  {"walk_max_steps", c.context.walk_max_steps},
                  {"two_hop_cap", c.context.two_hop_cap}};
  j["surrogate"] = {{"d_x", c.surrogate.d_x},
                    {"lr", c.surrogate.lr},
                    {"steps", c.surrogate.steps},
                    {"batch_size", c.surrogate.batch_size},
                    {"holdout_fraction", c.surrogate.holdout_fraction},
                    {"max_queries", c.surrogate.max_queries},
                    {"init_scale", c.surrogate.init_scale},
                    {"relations", c.surrogate_relations}};
  j["generator"] = {{"name", c.generator.name},
                    {"oracle_p", c.generator.oracle_p},
                    {"replay_file", c.generator.replay_file.empty()
                                        ? std::string()
                                        : std::filesystem::absolute(c.generator.replay_file).string()},
                    {"http_model", c.generator.http_model},
                    {"http_temperature", c.generator.http_temperature},
                    {"http_max_in_flight", c.generator.http_max_in_flight},
                    {"http_timeout_ms", c.generator.http_timeout_ms}};
  j["n_return"] = c.n_return;
  j["split"] = std::string(to_string(c.split));
  j["threads"] = c.threads;
  j["shuffle_candidates"] = c.shuffle_candidates;
  return j;
}

}  // namespace ftg::cli
