#pragma once

// Iterative gradient-matching attacks. Each one builds dummy data, runs
// Adam on the regularized matching objective
//   D(dummy gradients, leaked gradients) + alpha * smoothness + beta * ||A||_F^2
// for a fixed number of iterations and returns the last iterate.

#include "glg/gnn.hpp"
#include "glg/numkit.hpp"
#include "glg/objective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace glg::attack {

enum class Scenario { node1, node2a, node2b, node2c, graph_a, graph_b, graph_c };

const char* to_string(Scenario s);
Scenario parse_scenario(const std::string& name);
gnn::Task task_of(Scenario s);
bool optimizes_features(Scenario s);
bool optimizes_adjacency(Scenario s);

enum class InitKind { gaussian, constant, bernoulli, uniform, truth };

const char* to_string(InitKind k);

// gaussian: N(0, value^2); constant: every entry = value; bernoulli: 0/1
// with P(1) = value; uniform: U[0, 1); truth: caller supplies the start.
// Adjacency starts are symmetrized, projected to [0, 1] and get a zero
// diagonal.
struct InitStrategy {
  InitKind kind = InitKind::gaussian;
  double value = 1.0;
};

/// Parses "gaussian", "gaussian:<sd>", "uniform", "truth", "bernoulli:<p>",
/// "constant:<c>" or a bare number (constant).
InitStrategy parse_init(const std::string& text);
std::string to_string(const InitStrategy& s);

struct AttackSpec {
  Scenario scenario = Scenario::node1;
  Distance objective = Distance::cosine;
  double alpha = 1e-9;
  double beta = 1e-7;
  double lr = 0.05;
  int iterations = 2000;
  InitStrategy feature_init{InitKind::gaussian, 1.0};
  InitStrategy adjacency_init{InitKind::bernoulli, 0.5};
  int d_tree = 10;      // node1: branching factor of the dummy tree
  int tree_depth = 2;   // node1: depth of the dummy tree
  Finalization finalize;
  int restarts = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RecoveryResult {
  Matrix features;        // recovered (or known) X; node1: row 0 is the target
  Matrix adjacency_prob;  // relaxed adjacency in [0, 1]
  Matrix adjacency;       // binary, symmetric, zero diagonal
  std::vector<int> labels;
  std::vector<double> trace;  // objective at every iterate
  double final_objective = 0.0;
  double wall_seconds = 0.0;
  int restart = 0;  // index of the restart that was kept
};

struct KnownData {
  std::optional<Matrix> features;
  std::optional<Matrix> adjacency;  // raw binary adjacency
};

// Explicit starting point; used by the `truth` init and by tests.
struct DummyStart {
  std::optional<Matrix> features;
  std::optional<Matrix> adjacency;
};

/// Single target node; the dummy graph is a tree rooted at node 0 unless
/// `start` supplies an adjacency. `label` < 0 means infer it from the bundle.
RecoveryResult attack_node1(const gnn::GradientBundle& leaked, const AttackSpec& spec,
                            const gnn::ModelParams& params, int label = -1,
                            const DummyStart* start = nullptr);

/// One bundle per node of the private graph, in node order.
RecoveryResult attack_node2(const std::vector<gnn::GradientBundle>& per_node,
                            const AttackSpec& spec, const gnn::ModelParams& params,
                            const KnownData& known, const DummyStart* start = nullptr);

RecoveryResult attack_graph(const gnn::GradientBundle& leaked, const AttackSpec& spec,
                            const gnn::ModelParams& params, const KnownData& known,
                            const DummyStart* start = nullptr);

/// B dummy samples optimized jointly against a batch-averaged bundle. Node
/// scenarios use node1 trees; graph scenarios take per-sample known data.
/// `labels` holds one label per sample; empty is allowed only for B = 1.
std::vector<RecoveryResult> attack_batched(const gnn::GradientBundle& averaged,
                                           const AttackSpec& spec,
                                           const gnn::ModelParams& params, int batch,
                                           const std::vector<int>& labels,
                                           const std::vector<KnownData>& known = {},
                                           const std::vector<DummyStart>* starts = nullptr);

}  // namespace glg::attack
