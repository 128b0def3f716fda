#pragma once

// Two-layer GCN / GraphSAGE-mean models for node and graph classification
// with hand-derived reverse-mode gradients.
//
// Layer l computes
//   gcn : H_l = act(S H_{l-1} W^T + 1 b)
//   sage: H_l = act(S H_{l-1} W1^T + H_{l-1} W2^T + 1 b)
// with H_0 = X and S the normalized adjacency. Hidden layers use a sigmoid.
// The node task reads the logits from the last layer's row of the target
// node, without activation. The graph task applies the sigmoid on every GNN
// layer, flattens H_L row-major and feeds it to a linear readout.

#include "glg/graph.hpp"
#include "glg/numkit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glg::gnn {

using num::Matrix;
using num::RowVector;

enum class Framework { gcn, sage };
enum class Task { node, graph };

const char* to_string(Framework f);
const char* to_string(Task t);
graph::AdjNorm adjacency_mode(Framework f);

struct Architecture {
  Framework framework = Framework::sage;
  Task task = Task::node;
  int layers = 2;
  int in_dim = 0;
  int hidden = 100;
  int classes = 2;
  int num_nodes = 0;  // graph task only: node count fixed by the readout

  int out_dim(int layer) const;  // output width of GNN layer `layer` (0-based)
  int in_width(int layer) const;
  void validate() const;
};

// For gcn layers `w_self` is empty. In the paper's sage notation w_agg is W1
// and w_self is W2.
struct LayerTensors {
  Matrix w_agg;
  Matrix w_self;
  Matrix bias;  // 1 x out
};

// One Matrix per parameter tensor. Used both for weights and for gradients.
struct Tensors {
  std::vector<LayerTensors> layers;
  Matrix mlp_weight;  // K x (N * F), graph task only
  Matrix mlp_bias;    // 1 x K, graph task only

  // Non-empty tensors in canonical order: per layer (w_agg, w_self, bias),
  // then the readout.
  std::vector<const Matrix*> list() const;
  std::vector<Matrix*> list();
  std::vector<std::string> names() const;

  Tensors zeros_like() const;
  bool same_shape(const Tensors& other) const;
  Tensors& operator+=(const Tensors& other);
  Tensors& operator*=(double s);
  long size() const;  // total scalar count
};

struct ModelParams {
  Architecture arch;
  Tensors weights;

  void validate() const;
};

struct GradientBundle {
  Tensors grads;

  void require_compatible(const GradientBundle& other, const char* what) const;
  double dot(const GradientBundle& other) const;
  double squared_norm() const;
  bool all_finite() const;
};

/// i.i.d. Gaussian weights and biases with standard deviation 1/sqrt(fan_in).
ModelParams init_params(const Architecture& arch, num::Rng& rng);

struct LayerTrace {
  Matrix agg;  // S H_{l-1}
  Matrix pre;  // pre-activation
  Matrix act;  // H_l (equals pre for the linear node-task output)
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  RowVector logits;
  RowVector probs;
  double loss = 0.0;
  int target = -1;  // node task
  int label = -1;
  long num_nodes = 0;
  long in_dim = 0;
};

RowVector softmax(const RowVector& logits);
/// -log softmax(logits)[label], evaluated with max subtraction.
double cross_entropy(const RowVector& logits, int label);

/// Forward pass on raw matrices; `target` is ignored for the graph task.
ForwardTrace forward(const ModelParams& params, const Matrix& features, const Matrix& normalized,
                     int target, int label);

ForwardTrace forward_node(const ModelParams& params, const graph::Graph& g,
                          const graph::NormalizedAdjacency& norm, int target);
ForwardTrace forward_graph(const ModelParams& params, const graph::Graph& g,
                           const graph::NormalizedAdjacency& norm);

struct Wrt {
  bool features = false;
  bool normalized = false;
  bool adjacency = false;  // needs the raw adjacency
};

struct Gradients {
  GradientBundle params;
  std::optional<Matrix> features;
  std::optional<Matrix> normalized;
  std::optional<Matrix> adjacency;
};

/// Exact gradients of the trace's loss. `raw_adjacency` is required when
/// `wrt.adjacency` is set and is the matrix `norm` was computed from.
Gradients backward(const ModelParams& params, const ForwardTrace& trace, const Matrix& features,
                   const graph::NormalizedAdjacency& norm, Wrt wrt = {},
                   const Matrix* raw_adjacency = nullptr);

/// Forward + parameter gradients for one node-task or graph-task sample.
GradientBundle sample_gradients(const ModelParams& params, const graph::Graph& g, int target = -1);

/// Ground-truth label from the gradients of the logit-producing layer.
///
/// Row k of that layer's weight gradient is g_k times a shared input vector,
/// where g = softmax(p) - onehot(label) has exactly one negative entry. The
/// label is the row whose dot product with every other row is <= 0. When
/// several rows qualify (always the case for two classes) the bias gradient,
/// which equals g, breaks the tie.
int infer_label(const GradientBundle& bundle, const Architecture& arch);
int infer_label(const Matrix& weight_grad, const RowVector* bias_grad);

}  // namespace glg::gnn
