#pragma once

// In-process federated graph learning: clients compute per-sample gradient
// bundles, the server averages them and applies an SGD step. The leak
// functions produce exactly what an honest-but-curious server observes.

#include "glg/gnn.hpp"
#include "glg/graph.hpp"

#include <vector>

namespace glg::fgl {

using gnn::GradientBundle;
using gnn::ModelParams;

struct ClientShard {
  int id = 0;
  // Node task: one graph and the target nodes the client trains on.
  graph::Graph graph;
  std::vector<int> targets;
  // Graph task: the client's graphs, all with the readout's node count.
  std::vector<graph::Graph> graphs;

  void validate(const gnn::Architecture& arch) const;
};

/// One bundle per batch entry. Entries index `shard.targets` (node task) or
/// `shard.graphs` (graph task).
std::vector<GradientBundle> client_gradients(const ModelParams& params, const ClientShard& shard,
                                             const std::vector<int>& batch);

struct FedRound {
  int round = 0;
  int batch_size = 0;
  int clients = 0;
  double lr = 0.0;
  std::vector<std::vector<GradientBundle>> client_bundles;
  GradientBundle averaged;
};

struct StepResult {
  ModelParams params;
  FedRound round;
};

/// Mean over every bundle of every client, summed in client order, then
/// W <- W - lr * mean.
StepResult aggregate_and_step(const ModelParams& params,
                              const std::vector<std::vector<GradientBundle>>& client_bundles,
                              double lr, int round_index = 0);

GradientBundle average(const std::vector<GradientBundle>& bundles);

enum class LeakScenario { node1, node2, graph, batched_node, batched_graph };

const char* to_string(LeakScenario s);

// What the attacker receives. Deliberately carries no features, adjacency or
// labels.
struct LeakRecord {
  LeakScenario scenario = LeakScenario::node1;
  // node1 / graph: one bundle; node2: one bundle per node in node order;
  // batched: the batch-averaged bundle.
  std::vector<GradientBundle> bundles;
  int batch_size = 1;
};

struct PrivateData {
  // node1 / node2 / batched_node use `graph`; graph uses `graph`;
  // batched_graph uses `graphs`.
  graph::Graph graph;
  std::vector<int> targets;  // node1: one target; batched_node: B targets
  std::vector<graph::Graph> graphs;
};

LeakRecord leak(const ModelParams& params, const PrivateData& data, LeakScenario scenario);

}  // namespace glg::fgl
