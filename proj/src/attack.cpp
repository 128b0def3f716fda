#include "glg/attack.hpp"

#include "glg/error.hpp"
#include "glg/graph.hpp"
#include "glg/inversion.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>

namespace glg::attack {

const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::node1: return "node1";
    case Scenario::node2a: return "node2a";
    case Scenario::node2b: return "node2b";
    case Scenario::node2c: return "node2c";
    case Scenario::graph_a: return "graph_a";
    case Scenario::graph_b: return "graph_b";
    case Scenario::graph_c: return "graph_c";
  }
  return "?";
}

Scenario parse_scenario(const std::string& name) {
  for (Scenario s : {Scenario::node1, Scenario::node2a, Scenario::node2b, Scenario::node2c,
                     Scenario::graph_a, Scenario::graph_b, Scenario::graph_c})
    if (name == to_string(s)) return s;
  fail(ErrorCode::validation, "unknown scenario '" + name + "'");
}

gnn::Task task_of(Scenario s) {
  return (s == Scenario::graph_a || s == Scenario::graph_b || s == Scenario::graph_c)
             ? gnn::Task::graph
             : gnn::Task::node;
}

// The a-scenarios know X, the b-scenarios know A, the c-scenarios know neither.
bool optimizes_features(Scenario s) { return s != Scenario::node2a && s != Scenario::graph_a; }

bool optimizes_adjacency(Scenario s) {
  return s == Scenario::node2a || s == Scenario::node2c || s == Scenario::graph_a ||
         s == Scenario::graph_c;
}

const char* to_string(InitKind k) {
  switch (k) {
    case InitKind::gaussian: return "gaussian";
    case InitKind::constant: return "constant";
    case InitKind::bernoulli: return "bernoulli";
    case InitKind::uniform: return "uniform";
    case InitKind::truth: return "truth";
  }
  return "?";
}

namespace {

double parse_number(const std::string& text, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
    fail(ErrorCode::validation, what + ": '" + text + "' is not a number");
  return v;
}

}  // namespace

InitStrategy parse_init(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const bool has_arg = colon != std::string::npos;
  const std::string arg = has_arg ? text.substr(colon + 1) : "";
  if (head == "gaussian") return {InitKind::gaussian, has_arg ? parse_number(arg, "init") : 1.0};
  if (head == "bernoulli") return {InitKind::bernoulli, has_arg ? parse_number(arg, "init") : 0.5};
  if (head == "constant") {
    require(has_arg, "init: constant needs a value, e.g. constant:0.1");
    return {InitKind::constant, parse_number(arg, "init")};
  }
  if (head == "uniform" && !has_arg) return {InitKind::uniform, 0.0};
  if (head == "truth" && !has_arg) return {InitKind::truth, 0.0};
  if (!has_arg) return {InitKind::constant, parse_number(text, "init")};
  fail(ErrorCode::validation, "init: unknown strategy '" + text + "'");
}

std::string to_string(const InitStrategy& s) {
  switch (s.kind) {
    case InitKind::uniform:
    case InitKind::truth: return to_string(s.kind);
    default: {
      char buf[32];
      const auto end = std::to_chars(buf, buf + sizeof buf, s.value).ptr;
      return std::string(to_string(s.kind)) + ":" + std::string(buf, end);
    }
  }
}

void AttackSpec::validate() const {
  require(alpha >= 0.0 && std::isfinite(alpha), "attack.alpha must be >= 0");
  require(beta >= 0.0 && std::isfinite(beta), "attack.beta must be >= 0");
  require(lr > 0.0 && std::isfinite(lr), "attack.lr must be > 0");
  require(iterations >= 1, "attack.iterations must be >= 1");
  require(restarts >= 1, "attack.restarts must be >= 1");
  require(finalize.tau >= 0.0 && finalize.tau <= 1.0, "attack.tau must lie in [0, 1]");
  require(d_tree >= 1, "attack.d_tree must be >= 1");
  require(tree_depth >= 1, "attack.tree_depth must be >= 1");
  if (feature_init.kind == InitKind::gaussian)
    require(feature_init.value >= 0.0, "attack.feature_init: negative standard deviation");
  for (const auto* in : {&feature_init, &adjacency_init})
    if (in->kind == InitKind::bernoulli)
      require(in->value >= 0.0 && in->value <= 1.0, "attack init: bernoulli p must lie in [0, 1]");
}

namespace {

using gnn::GradientBundle;
using gnn::ModelParams;
using Clock = std::chrono::steady_clock;

// Above this size a fixed adjacency is multiplied in sparse form.
constexpr long kSparseThreshold = 64;

Matrix init_features(const InitStrategy& in, num::Rng& rng, long n, long d,
                     const std::optional<Matrix>& start) {
  switch (in.kind) {
    case InitKind::gaussian:
      return num::sample_gaussian(rng, static_cast<int>(n), static_cast<int>(d), in.value);
    case InitKind::constant: return Matrix::Constant(n, d, in.value);
    case InitKind::bernoulli: return num::sample_bernoulli(rng, Matrix::Constant(n, d, in.value));
    case InitKind::uniform: {
      Matrix m(n, d);
      for (long i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
      return m;
    }
    case InitKind::truth:
      require(start.has_value(), "attack: truth init requires the true features");
      require(start->rows() == n && start->cols() == d, "attack: start features have the wrong shape");
      return *start;
  }
  return {};
}

Matrix init_adjacency(const InitStrategy& in, num::Rng& rng, long n,
                      const std::optional<Matrix>& start) {
  if (in.kind == InitKind::truth) {
    require(start.has_value(), "attack: truth init requires the true adjacency");
    require(start->rows() == n && start->cols() == n, "attack: start adjacency has the wrong shape");
    return project_interval(*start);
  }
  Matrix a = Matrix::Zero(n, n);
  for (long i = 1; i < n; ++i)
    for (long j = 0; j < i; ++j) {
      double v = 0.0;
      switch (in.kind) {
        case InitKind::gaussian: v = in.value * rng.normal(); break;
        case InitKind::constant: v = in.value; break;
        case InitKind::bernoulli: v = rng.uniform() < in.value ? 1.0 : 0.0; break;
        case InitKind::uniform: v = rng.uniform(); break;
        case InitKind::truth: break;
      }
      a(i, j) = a(j, i) = v;
    }
  return project_interval(a);
}

// One dummy graph of the attack.
struct Slot {
  Matrix x;
  Matrix a;  // raw adjacency: optimized, known, or the fixed dummy structure
  bool opt_x = false;
  bool opt_a = false;
  int label = 0;  // graph task and node1
};

struct Problem {
  std::vector<Slot> slots;
  std::vector<DummySample> samples;
  std::vector<MatchGroup> groups;
};

struct Outcome {
  std::vector<Slot> slots;
  std::vector<double> trace;
  double final_objective = 0.0;
};

class Optimizer {
 public:
  Optimizer(const ModelParams& params, const AttackSpec& spec, Problem pb)
      : params_(params), spec_(spec), pb_(std::move(pb)), mode_(gnn::adjacency_mode(params.arch.framework)) {
    match_.params = &params_;
    match_.distance = spec.objective;
    match_.samples = pb_.samples;
    match_.groups = pb_.groups;
    for (const auto& s : pb_.slots) {
      DummyInstance inst;
      inst.features = s.x;
      inst.want_features = s.opt_x;
      inst.want_normalized = s.opt_a;
      auto norm = graph::normalize_adjacency(s.a, mode_);
      if (!s.opt_a && s.a.rows() > kSparseThreshold)
        inst.normalized_sparse = to_sparse(norm.matrix);
      else
        inst.normalized = std::move(norm.matrix);
      match_.instances.push_back(std::move(inst));
    }
    match_.validate();
    const num::AdamConfig cfg{spec.lr, 0.9, 0.999, 1e-8};
    adam_x_.assign(pb_.slots.size(), num::AdamState(cfg));
    adam_a_.assign(pb_.slots.size(), num::AdamState(cfg));
  }

  Outcome run() {
    Outcome out;
    out.trace.reserve(spec_.iterations);
    for (int it = 0; it < spec_.iterations; ++it) {
      std::vector<Matrix> gx, ga;
      out.trace.push_back(evaluate(true, &gx, &ga));
      for (std::size_t i = 0; i < pb_.slots.size(); ++i) {
        auto& s = pb_.slots[i];
        if (s.opt_x) s.x = adam_x_[i].step(s.x, gx[i]);
        if (s.opt_a) {
          Matrix sym = ga[i] + ga[i].transpose();
          sym.diagonal().setZero();
          s.a = project_interval(adam_a_[i].step(s.a, sym));
        }
      }
    }
    out.final_objective = evaluate(false, nullptr, nullptr);
    out.slots = pb_.slots;
    return out;
  }

 private:
  double evaluate(bool grads, std::vector<Matrix>* gx, std::vector<Matrix>* ga) {
    const std::size_t ns = pb_.slots.size();
    std::vector<graph::NormalizedAdjacency> norms(ns);
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& s = pb_.slots[i];
      if (s.opt_x) match_.instances[i].features = s.x;
      if (s.opt_a) {
        norms[i] = graph::normalize_adjacency(s.a, mode_);
        match_.instances[i].normalized = norms[i].matrix;
      }
    }
    MatchEvaluation ev = evaluate_match(match_, grads);
    double value = ev.value;
    if (grads) {
      gx->assign(ns, Matrix());
      ga->assign(ns, Matrix());
    }
    for (std::size_t i = 0; i < ns; ++i) {
      const auto& s = pb_.slots[i];
      if (grads && s.opt_x) (*gx)[i] = std::move(*ev.grad_features[i]);
      if (grads && s.opt_a)
        (*ga)[i] = graph::normalize_adjacency_backward(s.a, norms[i], *ev.grad_normalized[i]);
      if (spec_.alpha > 0.0) {
        const Smoothness sm = smoothness(s.x, s.a, grads && s.opt_x, grads && s.opt_a);
        value += spec_.alpha * sm.value;
        if (grads && s.opt_x) (*gx)[i] += spec_.alpha * *sm.grad_features;
        if (grads && s.opt_a) (*ga)[i] += spec_.alpha * *sm.grad_adjacency;
      }
      if (s.opt_a && spec_.beta > 0.0) {
        value += spec_.beta * frobenius_penalty(s.a);
        if (grads) (*ga)[i] += 2.0 * spec_.beta * s.a;
      }
    }
    if (!std::isfinite(value)) fail(ErrorCode::numeric, "attack objective is not finite");
    return value;
  }

  const ModelParams& params_;
  const AttackSpec& spec_;
  Problem pb_;
  graph::AdjNorm mode_;
  MatchProblem match_;
  std::vector<num::AdamState> adam_x_, adam_a_;
};

// Builds the problem for one restart from its random stream.
using Builder = std::function<Problem(num::Rng&)>;

std::vector<RecoveryResult> run_restarts(const ModelParams& params, const AttackSpec& spec,
                                         const Builder& build) {
  const auto t0 = Clock::now();
  const num::Rng base(spec.seed);
  std::optional<Outcome> best;
  int best_index = 0;
  num::Rng final_rng(0);
  for (int r = 0; r < spec.restarts; ++r) {
    num::Rng rng = base.fork(static_cast<std::uint64_t>(r));
    Problem pb = build(rng);
    Outcome o = Optimizer(params, spec, std::move(pb)).run();
    if (!best || o.final_objective < best->final_objective) {
      best = std::move(o);
      best_index = r;
      final_rng = rng;
    }
  }
  const double wall = std::chrono::duration<double>(Clock::now() - t0).count();

  std::vector<RecoveryResult> out;
  for (const auto& s : best->slots) {
    RecoveryResult res;
    res.features = s.x;
    res.adjacency_prob = project_interval(s.a);
    res.adjacency = s.opt_a ? finalize_adjacency(res.adjacency_prob, spec.finalize, final_rng) : s.a;
    res.trace = best->trace;
    res.final_objective = best->final_objective;
    res.wall_seconds = wall;
    res.restart = best_index;
    out.push_back(std::move(res));
  }
  return out;
}

void check_scenario(const AttackSpec& spec, const ModelParams& params, const char* who) {
  spec.validate();
  params.validate();
  require(task_of(spec.scenario) == params.arch.task,
          std::string(who) + ": scenario " + to_string(spec.scenario) + " does not fit a " +
              gnn::to_string(params.arch.task) + "-task model");
}

Matrix dummy_tree_adjacency(const AttackSpec& spec, int d) {
  num::Rng unused(0);
  return graph::dummy_tree(unused, spec.tree_depth, spec.d_tree, d).adjacency;
}

// Slot for a graph that carries a known / unknown X and A.
Slot make_slot(const AttackSpec& spec, num::Rng& rng, long n, long d, const KnownData& known,
               const DummyStart* start) {
  Slot s;
  s.opt_x = optimizes_features(spec.scenario);
  s.opt_a = optimizes_adjacency(spec.scenario);
  const std::optional<Matrix> none;
  if (s.opt_x) {
    s.x = init_features(spec.feature_init, rng, n, d, start ? start->features : none);
  } else {
    require(known.features.has_value(),
            std::string("scenario ") + to_string(spec.scenario) + " needs the known features");
    require(known.features->rows() == n && known.features->cols() == d,
            "known features have the wrong shape");
    s.x = *known.features;
  }
  if (s.opt_a) {
    s.a = init_adjacency(spec.adjacency_init, rng, n, start ? start->adjacency : none);
  } else {
    require(known.adjacency.has_value(),
            std::string("scenario ") + to_string(spec.scenario) + " needs the known adjacency");
    require(known.adjacency->rows() == n && known.adjacency->cols() == n,
            "known adjacency has the wrong shape");
    s.a = *known.adjacency;
  }
  return s;
}

Slot make_tree_slot(const AttackSpec& spec, num::Rng& rng, long d, const DummyStart* start) {
  Slot s;
  s.opt_x = true;
  s.a = start && start->adjacency ? *start->adjacency : dummy_tree_adjacency(spec, static_cast<int>(d));
  s.x = init_features(spec.feature_init, rng, s.a.rows(), d, start ? start->features : std::nullopt);
  return s;
}

}  // namespace

RecoveryResult attack_node1(const GradientBundle& leaked, const AttackSpec& spec,
                            const ModelParams& params, int label, const DummyStart* start) {
  check_scenario(spec, params, "attack_node1");
  require(spec.scenario == Scenario::node1, "attack_node1: scenario must be node1");
  const int y = label >= 0 ? label : gnn::infer_label(leaked, params.arch);
  auto res = run_restarts(params, spec, [&](num::Rng& rng) {
    Problem pb;
    pb.slots.push_back(make_tree_slot(spec, rng, params.arch.in_dim, start));
    pb.samples.push_back({0, 0, y});
    pb.groups.push_back({&leaked, {0}});
    return pb;
  });
  res.front().labels = {y};
  return std::move(res.front());
}

RecoveryResult attack_node2(const std::vector<GradientBundle>& per_node, const AttackSpec& spec,
                            const ModelParams& params, const KnownData& known,
                            const DummyStart* start) {
  check_scenario(spec, params, "attack_node2");
  require(spec.scenario == Scenario::node2a || spec.scenario == Scenario::node2b ||
              spec.scenario == Scenario::node2c,
          "attack_node2: scenario must be node2a, node2b or node2c");
  require(!per_node.empty(), "attack_node2: no per-node bundles");
  const long n = static_cast<long>(per_node.size());
  std::vector<int> labels;
  for (const auto& b : per_node) labels.push_back(gnn::infer_label(b, params.arch));
  auto res = run_restarts(params, spec, [&](num::Rng& rng) {
    Problem pb;
    pb.slots.push_back(make_slot(spec, rng, n, params.arch.in_dim, known, start));
    for (int v = 0; v < n; ++v) {
      pb.samples.push_back({0, v, labels[v]});
      pb.groups.push_back({&per_node[v], {v}});
    }
    return pb;
  });
  res.front().labels = labels;
  return std::move(res.front());
}

RecoveryResult attack_graph(const GradientBundle& leaked, const AttackSpec& spec,
                            const ModelParams& params, const KnownData& known,
                            const DummyStart* start) {
  check_scenario(spec, params, "attack_graph");
  const int y = gnn::infer_label(leaked, params.arch);
  auto res = run_restarts(params, spec, [&](num::Rng& rng) {
    Problem pb;
    pb.slots.push_back(make_slot(spec, rng, params.arch.num_nodes, params.arch.in_dim, known, start));
    pb.samples.push_back({0, -1, y});
    pb.groups.push_back({&leaked, {0}});
    return pb;
  });
  res.front().labels = {y};
  return std::move(res.front());
}

std::vector<RecoveryResult> attack_batched(const GradientBundle& averaged, const AttackSpec& spec,
                                           const ModelParams& params, int batch,
                                           const std::vector<int>& labels,
                                           const std::vector<KnownData>& known,
                                           const std::vector<DummyStart>* starts) {
  check_scenario(spec, params, "attack_batched");
  require(batch >= 1, "attack_batched: batch size must be >= 1");
  const bool node = params.arch.task == gnn::Task::node;
  require(!node || spec.scenario == Scenario::node1,
          "attack_batched: node-task batches use the node1 scenario");
  std::vector<int> y = labels;
  if (y.empty()) {
    require(batch == 1, "attack_batched: labels are required for batches larger than one");
    y.push_back(gnn::infer_label(averaged, params.arch));
  }
  require(static_cast<int>(y.size()) == batch, "attack_batched: one label per sample required");
  for (int v : y) require(v >= 0 && v < params.arch.classes, "attack_batched: label out of range");
  require(node || known.empty() || static_cast<int>(known.size()) == batch,
          "attack_batched: one known-data entry per sample required");
  require(!starts || static_cast<int>(starts->size()) == batch,
          "attack_batched: one start per sample required");

  auto res = run_restarts(params, spec, [&](num::Rng& rng) {
    Problem pb;
    MatchGroup grp{&averaged, {}};
    const KnownData nothing;
    for (int b = 0; b < batch; ++b) {
      const DummyStart* st = starts ? &(*starts)[b] : nullptr;
      if (node) {
        pb.slots.push_back(make_tree_slot(spec, rng, params.arch.in_dim, st));
        pb.samples.push_back({b, 0, y[b]});
      } else {
        pb.slots.push_back(make_slot(spec, rng, params.arch.num_nodes, params.arch.in_dim,
                                     known.empty() ? nothing : known[b], st));
        pb.samples.push_back({b, -1, y[b]});
      }
      grp.samples.push_back(b);
    }
    pb.groups.push_back(std::move(grp));
    return pb;
  });
  for (int b = 0; b < batch; ++b) res[b].labels = {y[b]};
  return res;
}

}  // namespace glg::attack
