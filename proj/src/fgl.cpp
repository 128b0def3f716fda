#include "glg/fgl.hpp"

#include "glg/error.hpp"

#include <string>

namespace glg::fgl {

void ClientShard::validate(const gnn::Architecture& arch) const {
  if (arch.task == gnn::Task::node) {
    graph.validate(arch.classes);
    require(graph.labels.has_value(), "client " + std::to_string(id) + ": graph has no labels");
    for (int t : targets)
      require(t >= 0 && t < graph.num_nodes(),
              "client " + std::to_string(id) + ": target " + std::to_string(t) + " out of range");
  } else {
    for (const auto& g : graphs) {
      g.validate(arch.classes);
      require(g.num_nodes() == arch.num_nodes,
              "client " + std::to_string(id) + ": graph size differs from the readout's");
    }
  }
}

std::vector<GradientBundle> client_gradients(const ModelParams& params, const ClientShard& shard,
                                             const std::vector<int>& batch) {
  const bool node = params.arch.task == gnn::Task::node;
  const int pool = static_cast<int>(node ? shard.targets.size() : shard.graphs.size());
  std::vector<GradientBundle> out;
  out.reserve(batch.size());
  for (int b : batch) {
    require(b >= 0 && b < pool, "client_gradients: batch index " + std::to_string(b) +
                                    " out of range for client " + std::to_string(shard.id));
    out.push_back(node ? gnn::sample_gradients(params, shard.graph, shard.targets[b])
                       : gnn::sample_gradients(params, shard.graphs[b]));
  }
  return out;
}

GradientBundle average(const std::vector<GradientBundle>& bundles) {
  require(!bundles.empty(), "average: no gradient bundles");
  GradientBundle mean{bundles.front().grads.zeros_like()};
  for (const auto& b : bundles) {
    mean.require_compatible(b, "average");
    mean.grads += b.grads;
  }
  mean.grads *= 1.0 / static_cast<double>(bundles.size());
  return mean;
}

StepResult aggregate_and_step(const ModelParams& params,
                              const std::vector<std::vector<GradientBundle>>& client_bundles,
                              double lr, int round_index) {
  std::vector<GradientBundle> flat;
  std::size_t batch = 0;
  for (const auto& c : client_bundles) {
    batch = std::max(batch, c.size());
    flat.insert(flat.end(), c.begin(), c.end());
  }
  require(!flat.empty(), "aggregate_and_step: empty bundle set");
  StepResult r;
  r.round.round = round_index;
  r.round.batch_size = static_cast<int>(batch);
  r.round.clients = static_cast<int>(client_bundles.size());
  r.round.lr = lr;
  r.round.client_bundles = client_bundles;
  r.round.averaged = average(flat);
  require(params.weights.same_shape(r.round.averaged.grads),
          "aggregate_and_step: bundles do not match the model");
  r.params = params;
  auto w = r.params.weights.list();
  const auto g = r.round.averaged.grads.list();
  for (std::size_t i = 0; i < w.size(); ++i) *w[i] -= lr * *g[i];
  return r;
}

const char* to_string(LeakScenario s) {
  switch (s) {
    case LeakScenario::node1: return "node1";
    case LeakScenario::node2: return "node2";
    case LeakScenario::graph: return "graph";
    case LeakScenario::batched_node: return "batched_node";
    case LeakScenario::batched_graph: return "batched_graph";
  }
  return "?";
}

LeakRecord leak(const ModelParams& params, const PrivateData& data, LeakScenario scenario) {
  const bool node_task = params.arch.task == gnn::Task::node;
  const bool node_scenario = scenario == LeakScenario::node1 || scenario == LeakScenario::node2 ||
                             scenario == LeakScenario::batched_node;
  require(node_task == node_scenario, std::string("leak: scenario ") + to_string(scenario) +
                                          " does not match a " + gnn::to_string(params.arch.task) +
                                          "-task model");
  LeakRecord rec;
  rec.scenario = scenario;
  switch (scenario) {
    case LeakScenario::node1:
      require(data.targets.size() == 1, "leak(node1): exactly one target required");
      rec.bundles.push_back(gnn::sample_gradients(params, data.graph, data.targets.front()));
      break;
    case LeakScenario::node2: {
      const auto norm = graph::normalize_adjacency(data.graph, gnn::adjacency_mode(params.arch.framework));
      for (int v = 0; v < data.graph.num_nodes(); ++v) {
        const auto tr = gnn::forward_node(params, data.graph, norm, v);
        rec.bundles.push_back(gnn::backward(params, tr, data.graph.features, norm).params);
      }
      break;
    }
    case LeakScenario::graph:
      rec.bundles.push_back(gnn::sample_gradients(params, data.graph));
      break;
    case LeakScenario::batched_node: {
      require(!data.targets.empty(), "leak(batched_node): no targets");
      std::vector<GradientBundle> per;
      for (int t : data.targets) per.push_back(gnn::sample_gradients(params, data.graph, t));
      rec.bundles.push_back(average(per));
      rec.batch_size = static_cast<int>(per.size());
      break;
    }
    case LeakScenario::batched_graph: {
      require(!data.graphs.empty(), "leak(batched_graph): no graphs");
      std::vector<GradientBundle> per;
      for (const auto& g : data.graphs) per.push_back(gnn::sample_gradients(params, g));
      rec.bundles.push_back(average(per));
      rec.batch_size = static_cast<int>(per.size());
      break;
    }
  }
  return rec;
}

}  // namespace glg::fgl
