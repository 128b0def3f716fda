#include "glg/experiment.hpp"

#include "glg/error.hpp"
#include "glg/fgl.hpp"
#include "glg/graph.hpp"
#include "glg/metrics.hpp"
#include "glg/report.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

namespace glg::cli {

using nlohmann::json;
using attack::Distance;
using num::Matrix;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  fail(ErrorCode::validation, path + ": " + why);
}

// Typed access to one JSON object; remembers which keys were read so that
// unknown keys can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path(const std::string& key) const { return path_ + "." + key; }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number()) bad(path(key), "expected a number");
    return v->get<double>();
  }

  long integer(const std::string& key, long def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_integer()) bad(path(key), "expected an integer");
    return v->get<long>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long>() >= 0))
      bad(path(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  bool boolean(const std::string& key, bool def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_boolean()) bad(path(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& def) {
    const json* v = raw(key);
    if (!v) return def;
    if (!v->is_string()) bad(path(key), "expected a string");
    return v->get<std::string>();
  }

  std::optional<Reader> object(const std::string& key) {
    const json* v = raw(key);
    if (!v) return std::nullopt;
    return Reader(*v, path(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) bad(path(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Wraps a library parse error with the field path.
template <typename F>
auto at_field(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    bad(path, e.what());
  }
}

gnn::Framework parse_framework(const std::string& s, const std::string& path) {
  if (s == "gcn") return gnn::Framework::gcn;
  if (s == "sage") return gnn::Framework::sage;
  bad(path, "unknown framework '" + s + "' (expected gcn or sage)");
}

Distance parse_distance(const std::string& s, const std::string& path) {
  if (s == "cosine") return Distance::cosine;
  if (s == "l2") return Distance::l2;
  bad(path, "unknown objective '" + s + "' (expected cosine or l2)");
}

attack::FinalizeRule parse_rule(const std::string& s, const std::string& path) {
  if (s == "bernoulli") return attack::FinalizeRule::bernoulli;
  if (s == "threshold") return attack::FinalizeRule::threshold;
  bad(path, "unknown finalize rule '" + s + "' (expected bernoulli or threshold)");
}

const char* rule_name(attack::FinalizeRule r) {
  return r == attack::FinalizeRule::bernoulli ? "bernoulli" : "threshold";
}

const char* distance_name(Distance d) { return d == Distance::cosine ? "cosine" : "l2"; }

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string DatasetSpec::name() const {
  char buf[96];
  if (kind == "synthetic") {
    std::snprintf(buf, sizeof buf, "synthetic_n%d_d%g_D%d", nodes, avg_degree, features);
    return buf;
  }
  if (kind == "er") {
    std::snprintf(buf, sizeof buf, "er_n%d_p%g_D%d", nodes, edge_prob, features);
    return buf;
  }
  return std::filesystem::path(features_path).stem().string();
}

void ExperimentConfig::validate() const {
  require(!name.empty(), "config.name: must not be empty");
  require(dataset.kind == "synthetic" || dataset.kind == "er" || dataset.kind == "files",
          "config.dataset.kind: expected synthetic, er or files");
  if (dataset.kind != "files") {
    require(dataset.nodes >= 1, "config.dataset.nodes: must be >= 1");
    require(dataset.features >= 1, "config.dataset.features: must be >= 1");
  } else {
    require(!dataset.features_path.empty(), "config.dataset.features_path: required for files");
    require(!dataset.edges_path.empty(), "config.dataset.edges_path: required for files");
  }
  require(dataset.avg_degree >= 0.0, "config.dataset.avg_degree: must be >= 0");
  require(dataset.edge_prob >= 0.0 && dataset.edge_prob <= 1.0,
          "config.dataset.edge_prob: must lie in [0, 1]");
  require(dataset.hops >= 1, "config.dataset.hops: must be >= 1");
  require(dataset.classes >= 2, "config.model.classes: must be >= 2");
  require(layers == 1 || layers == 2, "config.model.layers: must be 1 or 2");
  require(hidden >= 1, "config.model.hidden: must be >= 1");
  require(repeats >= 1, "config.repeats: must be >= 1");
  require(threads >= 0, "config.threads: must be >= 0");
  require(batch_size >= 1, "config.batch_size: must be >= 1");
  const auto sc = attack.scenario;
  const bool node2 = sc == attack::Scenario::node2a || sc == attack::Scenario::node2b ||
                     sc == attack::Scenario::node2c;
  require(!(node2 && batch_size > 1),
          "config.batch_size: batching applies to node1 and graph scenarios only");
  require(fl.rounds >= 0, "config.fl.rounds: must be >= 0");
  require(fl.lr >= 0.0, "config.fl.lr: must be >= 0");
  require(output.format == "csv" || output.format == "json",
          "config.output.format: expected csv or json");
  for (double t : taus) require(t >= 0.0 && t <= 1.0, "config.mae_taus: entries must lie in [0, 1]");
  try {
    attack.validate();
  } catch (const Error& e) {
    bad("config.attack", e.what());
  }
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  Reader root(doc, "config");
  c.name = root.string("name", c.name);

  const std::string scenario = root.string("scenario", attack::to_string(c.attack.scenario));
  c.attack.scenario = at_field(root.path("scenario"), [&] { return attack::parse_scenario(scenario); });
  c.seed = root.unsigned_integer("seed", c.seed);
  c.repeats = static_cast<int>(root.integer("repeats", c.repeats));
  c.threads = static_cast<int>(root.integer("threads", c.threads));
  c.batch_size = static_cast<int>(root.integer("batch_size", c.batch_size));

  if (auto d = root.object("dataset")) {
    c.dataset.kind = d->string("kind", c.dataset.kind);
    c.dataset.nodes = static_cast<int>(d->integer("nodes", c.dataset.nodes));
    c.dataset.avg_degree = d->number("avg_degree", c.dataset.avg_degree);
    c.dataset.edge_prob = d->number("edge_prob", c.dataset.edge_prob);
    c.dataset.features = static_cast<int>(d->integer("features", c.dataset.features));
    c.dataset.hops = static_cast<int>(d->integer("hops", c.dataset.hops));
    c.dataset.features_path = d->string("features_path", "");
    c.dataset.edges_path = d->string("edges_path", "");
    c.dataset.labels_path = d->string("labels_path", "");
    d->finish();
  }

  if (auto m = root.object("model")) {
    c.framework = parse_framework(m->string("framework", gnn::to_string(c.framework)),
                                  m->path("framework"));
    if (m->has("task")) {
      const std::string task = m->string("task", "");
      if (task != "node" && task != "graph") bad(m->path("task"), "expected node or graph");
      const std::string want = gnn::to_string(attack::task_of(c.attack.scenario));
      if (task != want)
        bad(m->path("task"), "scenario " + scenario + " needs the " + want + " task, not " + task);
    }
    c.layers = static_cast<int>(m->integer("layers", c.layers));
    c.hidden = static_cast<int>(m->integer("hidden", c.hidden));
    c.dataset.classes = static_cast<int>(m->integer("classes", c.dataset.classes));
    m->finish();
  }

  if (auto a = root.object("attack")) {
    auto& s = c.attack;
    s.objective = parse_distance(a->string("objective", distance_name(s.objective)), a->path("objective"));
    s.alpha = a->number("alpha", s.alpha);
    s.beta = a->number("beta", s.beta);
    s.lr = a->number("lr", s.lr);
    s.iterations = static_cast<int>(a->integer("iterations", s.iterations));
    const std::string fi = a->string("feature_init", attack::to_string(s.feature_init));
    s.feature_init = at_field(a->path("feature_init"), [&] { return attack::parse_init(fi); });
    const std::string ai = a->string("adjacency_init", attack::to_string(s.adjacency_init));
    s.adjacency_init = at_field(a->path("adjacency_init"), [&] { return attack::parse_init(ai); });
    s.d_tree = static_cast<int>(a->integer("d_tree", s.d_tree));
    s.tree_depth = static_cast<int>(a->integer("tree_depth", s.tree_depth));
    s.finalize.rule = parse_rule(a->string("finalize", rule_name(s.finalize.rule)), a->path("finalize"));
    s.finalize.tau = a->number("tau", s.finalize.tau);
    s.restarts = static_cast<int>(a->integer("restarts", s.restarts));
    a->finish();
  }

  if (auto f = root.object("fl")) {
    c.fl.rounds = static_cast<int>(f->integer("rounds", c.fl.rounds));
    c.fl.lr = f->number("lr", c.fl.lr);
    f->finish();
  }

  if (const json* t = root.raw("mae_taus")) {
    if (!t->is_array()) bad("config.mae_taus", "expected an array of numbers");
    for (std::size_t i = 0; i < t->size(); ++i) {
      if (!(*t)[i].is_number()) bad("config.mae_taus[" + std::to_string(i) + "]", "expected a number");
      c.taus.push_back((*t)[i].get<double>());
    }
  }

  if (auto o = root.object("output")) {
    c.output.dir = o->string("dir", c.output.dir);
    c.output.format = o->string("format", c.output.format);
    c.output.dump_artifacts = o->boolean("dump_artifacts", c.output.dump_artifacts);
    c.output.record_timing = o->boolean("record_timing", c.output.record_timing);
    o->finish();
  }
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::validation, path + ": " + e.what());
  }
  return parse_config(doc);
}

json ExperimentConfig::to_json() const {
  json d = {{"kind", dataset.kind}, {"hops", dataset.hops}};
  if (dataset.kind == "files") {
    d["features_path"] = dataset.features_path;
    d["edges_path"] = dataset.edges_path;
    d["labels_path"] = dataset.labels_path;
  } else {
    d["nodes"] = dataset.nodes;
    d["features"] = dataset.features;
    if (dataset.kind == "synthetic")
      d["avg_degree"] = dataset.avg_degree;
    else
      d["edge_prob"] = dataset.edge_prob;
  }
  const auto& a = attack;
  return json{
      {"name", name},
      {"scenario", attack::to_string(a.scenario)},
      {"seed", seed},
      {"repeats", repeats},
      {"threads", threads},
      {"batch_size", batch_size},
      {"dataset", d},
      {"model",
       {{"framework", gnn::to_string(framework)},
        {"task", gnn::to_string(attack::task_of(a.scenario))},
        {"layers", layers},
        {"hidden", hidden},
        {"classes", dataset.classes}}},
      {"attack",
       {{"objective", distance_name(a.objective)},
        {"alpha", a.alpha},
        {"beta", a.beta},
        {"lr", a.lr},
        {"iterations", a.iterations},
        {"feature_init", attack::to_string(a.feature_init)},
        {"adjacency_init", attack::to_string(a.adjacency_init)},
        {"d_tree", a.d_tree},
        {"tree_depth", a.tree_depth},
        {"finalize", rule_name(a.finalize.rule)},
        {"tau", a.finalize.tau},
        {"restarts", a.restarts}}},
      {"fl", {{"rounds", fl.rounds}, {"lr", fl.lr}}},
      {"mae_taus", taus},
      {"output",
       {{"dir", output.dir},
        {"format", output.format},
        {"dump_artifacts", output.dump_artifacts},
        {"record_timing", output.record_timing}}},
  };
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {
      "target_rnmse", "batch_rnmse", "x_rnmse",  "adj_accuracy",   "adj_auc",
      "adj_ap",       "adj_mae",     "label_accuracy", "final_objective"};
  return names;
}

const std::vector<std::string>& hyper_names() {
  static const std::vector<std::string> names = {
      "layers",       "hidden",         "classes",  "objective", "alpha",  "beta",
      "lr",           "iterations",     "feature_init", "adjacency_init", "d_tree",
      "tree_depth",   "finalize",       "tau",      "restarts",  "batch_size", "fl_rounds",
      "seed"};
  return names;
}

std::string tau_metric(double tau) { return "adj_mae_tau" + fmt_double(tau); }

namespace {

std::map<std::string, std::string> hyper_values(const ExperimentConfig& c) {
  const auto& a = c.attack;
  return {
      {"layers", std::to_string(c.layers)},
      {"hidden", std::to_string(c.hidden)},
      {"classes", std::to_string(c.dataset.classes)},
      {"objective", distance_name(a.objective)},
      {"alpha", fmt_double(a.alpha)},
      {"beta", fmt_double(a.beta)},
      {"lr", fmt_double(a.lr)},
      {"iterations", std::to_string(a.iterations)},
      {"feature_init", attack::to_string(a.feature_init)},
      {"adjacency_init", attack::to_string(a.adjacency_init)},
      {"d_tree", std::to_string(a.d_tree)},
      {"tree_depth", std::to_string(a.tree_depth)},
      {"finalize", rule_name(a.finalize.rule)},
      {"tau", fmt_double(a.finalize.tau)},
      {"restarts", std::to_string(a.restarts)},
      {"batch_size", std::to_string(c.batch_size)},
      {"fl_rounds", std::to_string(c.fl.rounds)},
      {"seed", std::to_string(c.seed)},
  };
}

// Loaded once so that file errors surface before any repetition runs.
struct BaseData {
  std::optional<graph::Graph> loaded;
};

graph::Graph make_graph(const ExperimentConfig& c, const BaseData& base, num::Rng& rng) {
  const auto& d = c.dataset;
  graph::Graph g;
  if (base.loaded) {
    g = *base.loaded;
  } else if (d.kind == "synthetic") {
    g = graph::synthetic_graph(rng, d.nodes, d.avg_degree, d.features, d.classes);
  } else {
    g = graph::er_graph(rng, d.nodes, d.edge_prob, d.features);
  }
  if (!g.labels) {
    std::vector<int> labels(g.num_nodes());
    for (auto& l : labels) l = static_cast<int>(rng.uniform_int(0, d.classes - 1));
    g.labels = labels;
  }
  g.graph_label = static_cast<int>(rng.uniform_int(0, d.classes - 1));
  return g;
}

// Targets are drawn from the nodes with at least one neighbor, since a
// dummy tree cannot represent an isolated node. Falls back to all nodes
// when too few qualify.
std::vector<int> distinct_targets(num::Rng& rng, const graph::Graph& g, int count) {
  const int n = g.num_nodes();
  require(count <= n, "config.batch_size: larger than the number of nodes");
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (g.degree(i) > 0) idx.push_back(i);
  if (static_cast<int>(idx.size()) < count) {
    idx.resize(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
  }
  for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(0, i)]);
  idx.resize(count);
  return idx;
}

// Ground truth of one repetition, as the scorer needs it.
struct Truth {
  std::vector<graph::Graph> samples;  // private graph per sample
  std::vector<int> targets;           // node task: target per sample
};

struct Artifacts {
  std::vector<std::pair<std::string, Matrix>> mats;
  void add(const std::string& name, const Matrix& m) { mats.emplace_back(name, m); }
};

double fraction_equal(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.empty() || a.size() != b.size()) return std::numeric_limits<double>::quiet_NaN();
  int same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

void put(std::map<std::string, double>& m, const std::string& key, double v) {
  if (std::isfinite(v)) m[key] = v;
}

void score_adjacency(std::map<std::string, double>& out, const Matrix& truth, const Matrix& prob,
                     const Matrix& binary, const std::vector<double>& taus, double weight) {
  const auto s = metrics::score_adjacency(truth, prob, binary, taus);
  auto acc = [&](const std::string& k, double v) {
    if (!std::isfinite(v)) return;
    out[k] += weight * v;
  };
  acc("adj_accuracy", s.accuracy);
  acc("adj_auc", s.auc);
  acc("adj_ap", s.ap);
  acc("adj_mae", s.mae);
  for (const auto& t : s.mae_thresholded) acc(tau_metric(t.tau), t.mae);
}

struct RepOutcome {
  std::map<std::string, double> metrics;
  Artifacts artifacts;
};

RepOutcome run_repetition(const ExperimentConfig& c, const BaseData& base, std::uint64_t seed) {
  num::Rng rng(seed);
  num::Rng data_rng = rng.fork(1);
  num::Rng model_rng = rng.fork(2);
  attack::AttackSpec spec = c.attack;
  spec.seed = rng.fork(3).next_u64();

  const auto sc = spec.scenario;
  const auto task = attack::task_of(sc);
  const int batch = c.batch_size;
  const bool want_x = attack::optimizes_features(sc);
  const bool want_a = attack::optimizes_adjacency(sc);

  Truth truth;
  fgl::PrivateData priv;
  fgl::LeakScenario leak_kind{};
  gnn::Architecture arch;
  arch.framework = c.framework;
  arch.task = task;
  arch.layers = c.layers;
  arch.hidden = c.hidden;
  arch.classes = c.dataset.classes;

  if (task == gnn::Task::node) {
    graph::Graph g = make_graph(c, base, data_rng);
    arch.in_dim = g.feature_dim();
    if (sc == attack::Scenario::node1 && batch == 1) {
      const int t = distinct_targets(data_rng, g, 1)[0];
      auto ego = graph::khop_egonet(g, t, c.dataset.hops);
      priv.graph = ego.graph;
      priv.targets = {0};
      leak_kind = fgl::LeakScenario::node1;
      truth.samples = {ego.graph};
      truth.targets = {0};
    } else if (sc == attack::Scenario::node1) {
      priv.graph = g;
      priv.targets = distinct_targets(data_rng, g, batch);
      leak_kind = fgl::LeakScenario::batched_node;
      truth.samples = {g};
      truth.targets = priv.targets;
    } else {
      priv.graph = g;
      leak_kind = fgl::LeakScenario::node2;
      truth.samples = {g};
    }
  } else {
    for (int b = 0; b < batch; ++b) truth.samples.push_back(make_graph(c, base, data_rng));
    arch.in_dim = truth.samples[0].feature_dim();
    arch.num_nodes = truth.samples[0].num_nodes();
    if (batch == 1) {
      priv.graph = truth.samples[0];
      leak_kind = fgl::LeakScenario::graph;
    } else {
      priv.graphs = truth.samples;
      leak_kind = fgl::LeakScenario::batched_graph;
    }
  }

  gnn::ModelParams params = gnn::init_params(arch, model_rng);
  for (int r = 0; r < c.fl.rounds; ++r) {
    auto rec = fgl::leak(params, priv, leak_kind);
    params = fgl::aggregate_and_step(params, {rec.bundles}, c.fl.lr, r).params;
  }
  const auto leaked = fgl::leak(params, priv, leak_kind);

  const bool truth_x = spec.feature_init.kind == attack::InitKind::truth;
  const bool truth_a = spec.adjacency_init.kind == attack::InitKind::truth;
  auto start_for = [&](const graph::Graph& g) {
    attack::DummyStart s;
    if (truth_x) s.features = g.features;
    if (truth_a || (sc == attack::Scenario::node1 && truth_x)) s.adjacency = g.adjacency;
    return s;
  };
  auto known_for = [&](const graph::Graph& g) {
    attack::KnownData k;
    if (!want_x) k.features = g.features;
    if (!want_a) k.adjacency = g.adjacency;
    return k;
  };

  RepOutcome out;
  auto& m = out.metrics;
  auto& art = out.artifacts;

  if (leak_kind == fgl::LeakScenario::node1) {
    const auto& ego = truth.samples[0];
    const auto start = start_for(ego);
    const auto res = attack::attack_node1(leaked.bundles[0], spec, params, -1,
                                          truth_x ? &start : nullptr);
    const Matrix xt = ego.features.row(0);
    const Matrix xr = res.features.row(0);
    put(m, "target_rnmse", metrics::rnmse(xt, xr));
    put(m, "label_accuracy", fraction_equal(res.labels, {(*ego.labels)[0]}));
    put(m, "final_objective", res.final_objective);
    art.add("X_true", xt);
    art.add("X_hat", xr);
  } else if (leak_kind == fgl::LeakScenario::batched_node) {
    const auto& g = truth.samples[0];
    std::vector<int> labels;
    for (int t : truth.targets) labels.push_back((*g.labels)[t]);
    std::vector<attack::DummyStart> starts;
    if (truth_x) {
      // The target's egonet is the best available tree stand-in.
      for (int t : truth.targets) {
        auto ego = graph::khop_egonet(g, t, c.dataset.hops);
        starts.push_back(start_for(ego.graph));
      }
    }
    const auto res = attack::attack_batched(leaked.bundles[0], spec, params, batch, labels, {},
                                            truth_x ? &starts : nullptr);
    std::vector<Matrix> xt, xr;
    Matrix xt_all(batch, g.feature_dim()), xr_all(batch, g.feature_dim());
    double obj = 0.0;
    for (int b = 0; b < batch; ++b) {
      xt.push_back(g.features.row(truth.targets[b]));
      xr.push_back(res[b].features.row(0));
      xt_all.row(b) = xt.back();
      xr_all.row(b) = xr.back();
      obj = res[b].final_objective;
    }
    put(m, "batch_rnmse", metrics::batch_match_score(xt, xr).mean);
    put(m, "final_objective", obj);
    art.add("X_true", xt_all);
    art.add("X_hat", xr_all);
  } else if (leak_kind == fgl::LeakScenario::node2) {
    const auto& g = truth.samples[0];
    const auto start = start_for(g);
    const auto res = attack::attack_node2(leaked.bundles, spec, params, known_for(g),
                                          (truth_x || truth_a) ? &start : nullptr);
    if (want_x) put(m, "x_rnmse", metrics::rnmse_rows(g.features, res.features));
    if (want_a) score_adjacency(m, g.adjacency, res.adjacency_prob, res.adjacency, c.taus, 1.0);
    put(m, "label_accuracy", fraction_equal(res.labels, *g.labels));
    put(m, "final_objective", res.final_objective);
    art.add("X_true", g.features);
    art.add("X_hat", res.features);
    art.add("A_true", g.adjacency);
    art.add("A_prob", res.adjacency_prob);
    art.add("A_hat", res.adjacency);
  } else {
    std::vector<attack::RecoveryResult> res;
    std::vector<int> labels;
    for (const auto& g : truth.samples) labels.push_back(*g.graph_label);
    if (batch == 1) {
      const auto start = start_for(truth.samples[0]);
      res.push_back(attack::attack_graph(leaked.bundles[0], spec, params, known_for(truth.samples[0]),
                                         (truth_x || truth_a) ? &start : nullptr));
      put(m, "label_accuracy", fraction_equal(res[0].labels, labels));
    } else {
      std::vector<attack::KnownData> known;
      std::vector<attack::DummyStart> starts;
      for (const auto& g : truth.samples) {
        known.push_back(known_for(g));
        starts.push_back(start_for(g));
      }
      res = attack::attack_batched(leaked.bundles[0], spec, params, batch, labels, known,
                                   (truth_x || truth_a) ? &starts : nullptr);
    }
    // Samples with unknown features are paired by feature error; otherwise
    // the known data already ties each dummy to its sample.
    std::vector<int> assign(batch);
    for (int b = 0; b < batch; ++b) assign[b] = b;
    std::vector<Matrix> xt, xr;
    for (int b = 0; b < batch; ++b) {
      xt.push_back(truth.samples[b].features);
      xr.push_back(res[b].features);
    }
    if (want_x) {
      if (batch == 1) {
        put(m, "x_rnmse", metrics::rnmse_rows(xt[0], xr[0]));
      } else {
        const auto bm = metrics::batch_match_score(xt, xr);
        assign = bm.assignment;
        put(m, "batch_rnmse", bm.mean);
      }
    }
    if (want_a) {
      for (int b = 0; b < batch; ++b) {
        const auto& r = res[assign[b]];
        score_adjacency(m, truth.samples[b].adjacency, r.adjacency_prob, r.adjacency, c.taus,
                        1.0 / batch);
      }
    }
    put(m, "final_objective", res[0].final_objective);
    for (int b = 0; b < batch; ++b) {
      const std::string p = batch == 1 ? "" : "s" + std::to_string(b) + "_";
      const auto& r = res[assign[b]];
      art.add(p + "X_true", truth.samples[b].features);
      art.add(p + "X_hat", r.features);
      art.add(p + "A_true", truth.samples[b].adjacency);
      art.add(p + "A_prob", r.adjacency_prob);
      art.add(p + "A_hat", r.adjacency);
    }
  }
  for (const auto& [k, v] : m)
    if (!std::isfinite(v)) fail(ErrorCode::numeric, "metric " + k + " is not finite");
  return out;
}

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  s.count = static_cast<int>(v.size());
  if (v.empty()) return s;
  double sum = 0.0;
  s.min = v[0];
  s.max = v[0];
  for (double x : v) {
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  s.mean = sum / s.count;
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(var / s.count);
  return s;
}

}  // namespace

int worker_count(const ExperimentConfig& config) {
  int n = config.threads > 0 ? config.threads
                             : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("GLG_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1)
      fail(ErrorCode::validation, std::string("GLG_THREADS: expected a positive integer, got '") + env + "'");
    n = std::min<long>(n, cap);
  }
  return std::max(1, std::min(n, config.repeats));
}

ReportRow run_experiment(const ExperimentConfig& config) {
  config.validate();
  BaseData base;
  if (config.dataset.kind == "files")
    base.loaded = graph::load_graph(
        {config.dataset.features_path, config.dataset.edges_path, config.dataset.labels_path});
  if (base.loaded) base.loaded->validate(config.dataset.classes);

  const int r_count = config.repeats;
  std::vector<RunRecord> runs(r_count);
  std::vector<Artifacts> arts(r_count);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next++; r < r_count; r = next++) {
      RunRecord& rec = runs[r];
      rec.repetition = r;
      rec.seed = config.seed + static_cast<std::uint64_t>(r);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        auto o = run_repetition(config, base, rec.seed);
        rec.metrics = std::move(o.metrics);
        arts[r] = std::move(o.artifacts);
      } catch (const Error& e) {
        rec.ok = false;
        rec.error = e.what();
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
      }
      if (config.output.record_timing)
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  const int nw = worker_count(config);
  if (nw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ReportRow row;
  row.scenario = attack::to_string(config.attack.scenario);
  row.framework = gnn::to_string(config.framework);
  row.dataset = config.dataset.name();
  row.repeats = r_count;
  row.hyper = hyper_values(config);
  std::map<std::string, std::vector<double>> values;
  for (const auto& rec : runs) {
    if (!rec.ok) ++row.failures;
    for (const auto& [k, v] : rec.metrics) values[k].push_back(v);
  }
  for (const auto& [k, v] : values) row.metrics[k] = summarize(v);
  if (config.output.record_timing)
    row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.runs = std::move(runs);

  if (config.output.dump_artifacts) {
    const auto dir = std::filesystem::path(config.output.dir) / "artifacts" / config.name;
    for (int r = 0; r < r_count; ++r) {
      if (!row.runs[r].ok) continue;
      const auto rep = dir / ("rep" + std::to_string(r));
      for (const auto& [name, mat] : arts[r].mats) write_matrix_csv(mat, (rep / (name + ".csv")).string());
    }
  }
  return row;
}

ExperimentConfig with_param(const ExperimentConfig& config, const std::string& param,
                            const std::string& value) {
  ExperimentConfig c = config;
  const std::string path = "sweep." + param;
  auto as_double = [&] {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) bad(path, "'" + value + "' is not a number");
    return v;
  };
  auto as_int = [&] {
    const double v = as_double();
    if (v != std::floor(v)) bad(path, "'" + value + "' is not an integer");
    return static_cast<int>(v);
  };
  if (param == "alpha") {
    c.attack.alpha = as_double();
  } else if (param == "beta") {
    c.attack.beta = as_double();
  } else if (param == "hidden") {
    c.hidden = as_int();
  } else if (param == "tau") {
    c.attack.finalize = {attack::FinalizeRule::threshold, as_double()};
  } else if (param == "batch_size") {
    c.batch_size = as_int();
  } else if (param == "d_tree") {
    c.attack.d_tree = as_int();
  } else if (param == "init") {
    const auto init = at_field(path, [&] { return attack::parse_init(value); });
    if (attack::optimizes_features(c.attack.scenario)) c.attack.feature_init = init;
    if (attack::optimizes_adjacency(c.attack.scenario)) c.attack.adjacency_init = init;
  } else {
    std::string known;
    for (const auto& p : kSweepParams) known += (known.empty() ? "" : ", ") + p;
    bad("sweep.param", "unknown parameter '" + param + "' (expected one of " + known + ")");
  }
  c.name = config.name + "_" + param + "_" + value;
  c.validate();
  return c;
}

std::vector<ReportRow> sweep(const ExperimentConfig& config, const std::string& param,
                             const std::vector<std::string>& values) {
  // Reject the parameter even when there is nothing to run.
  if (std::find(kSweepParams.begin(), kSweepParams.end(), param) == kSweepParams.end())
    with_param(config, param, "0");
  std::vector<ExperimentConfig> configs;
  for (const auto& v : values) configs.push_back(with_param(config, param, v));
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    ReportRow row = run_experiment(configs[i]);
    row.param = param;
    row.value = values[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace glg::cli
