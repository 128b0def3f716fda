#include "glg/gnn.hpp"

#include "glg/error.hpp"

#include <cmath>
#include <string>

namespace glg::gnn {

const char* to_string(Framework f) { return f == Framework::gcn ? "gcn" : "sage"; }
const char* to_string(Task t) { return t == Task::node ? "node" : "graph"; }

graph::AdjNorm adjacency_mode(Framework f) {
  return f == Framework::gcn ? graph::AdjNorm::gcn : graph::AdjNorm::sage_mean;
}

int Architecture::out_dim(int layer) const {
  return (task == Task::node && layer == layers - 1) ? classes : hidden;
}

int Architecture::in_width(int layer) const { return layer == 0 ? in_dim : hidden; }

void Architecture::validate() const {
  require(layers == 1 || layers == 2, "model: layers must be 1 or 2");
  require(in_dim >= 1, "model: input dimension must be positive");
  require(hidden >= 1, "model: hidden width must be positive");
  require(classes >= 2, "model: at least two classes are required");
  if (task == Task::graph) require(num_nodes >= 1, "model: graph task needs a fixed node count");
}

std::vector<const Matrix*> Tensors::list() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers) {
    out.push_back(&l.w_agg);
    if (l.w_self.size() > 0) out.push_back(&l.w_self);
    out.push_back(&l.bias);
  }
  if (mlp_weight.size() > 0) {
    out.push_back(&mlp_weight);
    out.push_back(&mlp_bias);
  }
  return out;
}

std::vector<Matrix*> Tensors::list() {
  std::vector<Matrix*> out;
  for (const Matrix* m : std::as_const(*this).list()) out.push_back(const_cast<Matrix*>(m));
  return out;
}

std::vector<std::string> Tensors::names() const {
  std::vector<std::string> out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string p = "layer" + std::to_string(l + 1) + ".";
    const bool sage = layers[l].w_self.size() > 0;
    out.push_back(p + (sage ? "W1" : "W"));
    if (sage) out.push_back(p + "W2");
    out.push_back(p + "b");
  }
  if (mlp_weight.size() > 0) {
    out.push_back("mlp.W");
    out.push_back("mlp.b");
  }
  return out;
}

Tensors Tensors::zeros_like() const {
  Tensors z = *this;
  for (Matrix* m : z.list()) m->setZero();
  return z;
}

bool Tensors::same_shape(const Tensors& other) const {
  const auto a = list();
  const auto b = other.list();
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i]->rows() != b[i]->rows() || a[i]->cols() != b[i]->cols()) return false;
  return true;
}

Tensors& Tensors::operator+=(const Tensors& other) {
  require(same_shape(other), "tensors: shape mismatch in accumulation");
  auto a = list();
  const auto b = other.list();
  for (std::size_t i = 0; i < a.size(); ++i) *a[i] += *b[i];
  return *this;
}

Tensors& Tensors::operator*=(double s) {
  for (Matrix* m : list()) *m *= s;
  return *this;
}

long Tensors::size() const {
  long n = 0;
  for (const Matrix* m : list()) n += m->size();
  return n;
}

void ModelParams::validate() const {
  arch.validate();
  require(static_cast<int>(weights.layers.size()) == arch.layers, "model: layer count mismatch");
  for (int l = 0; l < arch.layers; ++l) {
    const auto& t = weights.layers[l];
    const int out = arch.out_dim(l), in = arch.in_width(l);
    require(t.w_agg.rows() == out && t.w_agg.cols() == in, "model: layer weight shape mismatch");
    require(t.bias.rows() == 1 && t.bias.cols() == out, "model: bias shape mismatch");
    if (arch.framework == Framework::sage)
      require(t.w_self.rows() == out && t.w_self.cols() == in, "model: W2 shape mismatch");
    else
      require(t.w_self.size() == 0, "model: gcn layers have no W2");
  }
  if (arch.task == Task::graph) {
    require(weights.mlp_weight.rows() == arch.classes &&
                weights.mlp_weight.cols() == static_cast<long>(arch.num_nodes) * arch.hidden,
            "model: readout weight must be K x (N*F)");
    require(weights.mlp_bias.rows() == 1 && weights.mlp_bias.cols() == arch.classes,
            "model: readout bias shape mismatch");
  }
}

void GradientBundle::require_compatible(const GradientBundle& other, const char* what) const {
  if (!grads.same_shape(other.grads))
    fail(ErrorCode::validation, std::string(what) + ": gradient bundles are not congruent");
}

double GradientBundle::dot(const GradientBundle& other) const {
  require_compatible(other, "bundle dot");
  const auto a = grads.list();
  const auto b = other.grads.list();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i]->cwiseProduct(*b[i]).sum();
  return s;
}

double GradientBundle::squared_norm() const {
  double s = 0.0;
  for (const Matrix* m : grads.list()) s += m->squaredNorm();
  return s;
}

bool GradientBundle::all_finite() const {
  for (const Matrix* m : grads.list())
    if (!m->allFinite()) return false;
  return true;
}

ModelParams init_params(const Architecture& arch, num::Rng& rng) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  for (int l = 0; l < arch.layers; ++l) {
    const int out = arch.out_dim(l), in = arch.in_width(l);
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    LayerTensors t;
    t.w_agg = num::sample_gaussian(rng, out, in, sd);
    if (arch.framework == Framework::sage) t.w_self = num::sample_gaussian(rng, out, in, sd);
    t.bias = num::sample_gaussian(rng, 1, out, sd);
    p.weights.layers.push_back(std::move(t));
  }
  if (arch.task == Task::graph) {
    const int fan_in = arch.num_nodes * arch.hidden;
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
    p.weights.mlp_weight = num::sample_gaussian(rng, arch.classes, fan_in, sd);
    p.weights.mlp_bias = num::sample_gaussian(rng, 1, arch.classes, sd);
  }
  return p;
}

RowVector softmax(const RowVector& logits) {
  const double m = logits.maxCoeff();
  RowVector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

double cross_entropy(const RowVector& logits, int label) {
  require(label >= 0 && label < logits.size(),
          "cross_entropy: label " + std::to_string(label) + " out of range");
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(label);
}

namespace {

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

bool linear_output(const Architecture& arch, int layer) {
  return arch.task == Task::node && layer == arch.layers - 1;
}

}  // namespace

ForwardTrace forward(const ModelParams& params, const Matrix& x, const Matrix& s, int target,
                     int label) {
  const auto& arch = params.arch;
  const long n = x.rows();
  require(x.cols() == arch.in_dim, "forward: feature dimension " + std::to_string(x.cols()) +
                                       " does not match model input " +
                                       std::to_string(arch.in_dim));
  require(s.rows() == n && s.cols() == n, "forward: normalized adjacency must be N x N");
  require(label >= 0 && label < arch.classes, "forward: label out of range");
  if (arch.task == Task::node) {
    require(target >= 0 && target < n, "forward: target node out of range");
  } else {
    require(n == arch.num_nodes, "forward: graph has " + std::to_string(n) +
                                     " nodes but the readout expects " +
                                     std::to_string(arch.num_nodes));
  }

  ForwardTrace tr;
  tr.target = arch.task == Task::node ? target : -1;
  tr.label = label;
  tr.num_nodes = n;
  tr.in_dim = x.cols();
  const Matrix* h = &x;
  for (int l = 0; l < arch.layers; ++l) {
    const auto& w = params.weights.layers[l];
    LayerTrace lt;
    lt.agg = s * (*h);
    lt.pre.noalias() = lt.agg * w.w_agg.transpose();
    if (w.w_self.size() > 0) lt.pre.noalias() += (*h) * w.w_self.transpose();
    lt.pre.rowwise() += w.bias.row(0);
    lt.act = linear_output(arch, l) ? lt.pre : sigmoid(lt.pre);
    tr.layers.push_back(std::move(lt));
    h = &tr.layers.back().act;
  }
  if (arch.task == Task::node) {
    tr.logits = h->row(target);
  } else {
    const Eigen::Map<const RowVector> flat(h->data(), h->size());
    tr.logits = flat * params.weights.mlp_weight.transpose() + params.weights.mlp_bias;
  }
  tr.probs = softmax(tr.logits);
  tr.loss = cross_entropy(tr.logits, label);
  return tr;
}

ForwardTrace forward_node(const ModelParams& params, const graph::Graph& g,
                          const graph::NormalizedAdjacency& norm, int target) {
  require(params.arch.task == Task::node, "forward_node: model is not a node-task model");
  require(norm.mode == adjacency_mode(params.arch.framework),
          "forward_node: normalization does not match the framework");
  require(g.labels.has_value(), "forward_node: graph has no node labels");
  require(target >= 0 && target < g.num_nodes(), "forward_node: target out of range");
  return forward(params, g.features, norm.matrix, target, (*g.labels)[target]);
}

ForwardTrace forward_graph(const ModelParams& params, const graph::Graph& g,
                           const graph::NormalizedAdjacency& norm) {
  require(params.arch.task == Task::graph, "forward_graph: model is not a graph-task model");
  require(norm.mode == adjacency_mode(params.arch.framework),
          "forward_graph: normalization does not match the framework");
  require(g.graph_label.has_value(), "forward_graph: graph has no label");
  return forward(params, g.features, norm.matrix, -1, *g.graph_label);
}

Gradients backward(const ModelParams& params, const ForwardTrace& tr, const Matrix& x,
                   const graph::NormalizedAdjacency& norm, Wrt wrt, const Matrix* raw_adjacency) {
  const auto& arch = params.arch;
  const Matrix& s = norm.matrix;
  const long n = x.rows();
  if (static_cast<int>(tr.layers.size()) != arch.layers || tr.num_nodes != n ||
      tr.in_dim != x.cols() || s.rows() != n || tr.logits.size() != arch.classes) {
    fail(ErrorCode::validation, "backward: trace does not match the model or inputs");
  }
  for (int l = 0; l < arch.layers; ++l) {
    if (tr.layers[l].act.rows() != n || tr.layers[l].act.cols() != arch.out_dim(l))
      fail(ErrorCode::validation, "backward: stale trace");
  }

  Gradients out;
  Tensors& gr = out.params.grads;
  gr = params.weights.zeros_like();

  RowVector g = tr.probs;
  g(tr.label) -= 1.0;

  const int last = arch.layers - 1;
  Matrix grad_h = Matrix::Zero(n, arch.out_dim(last));
  if (arch.task == Task::node) {
    grad_h.row(tr.target) = g;
  } else {
    const auto& act = tr.layers[last].act;
    const Eigen::Map<const RowVector> flat(act.data(), act.size());
    gr.mlp_weight = g.transpose() * flat;
    gr.mlp_bias = g;
    const RowVector gh = g * params.weights.mlp_weight;
    grad_h = Eigen::Map<const Matrix>(gh.data(), n, arch.hidden);
  }

  Matrix grad_s;
  if (wrt.normalized || wrt.adjacency) grad_s = Matrix::Zero(n, n);
  for (int l = last; l >= 0; --l) {
    const auto& lt = tr.layers[l];
    const auto& w = params.weights.layers[l];
    const Matrix& h_in = l == 0 ? x : tr.layers[l - 1].act;
    Matrix delta = linear_output(arch, l)
                       ? grad_h
                       : Matrix(grad_h.cwiseProduct(lt.act.cwiseProduct(
                             (1.0 - lt.act.array()).matrix())));
    auto& gl = gr.layers[l];
    gl.w_agg = delta.transpose() * lt.agg;
    if (w.w_self.size() > 0) gl.w_self = delta.transpose() * h_in;
    gl.bias = delta.colwise().sum();
    if (l == 0 && !wrt.features && !wrt.normalized && !wrt.adjacency) break;
    const Matrix grad_agg = delta * w.w_agg;
    if (grad_s.size() > 0) grad_s.noalias() += grad_agg * h_in.transpose();
    grad_h = s.transpose() * grad_agg;
    if (w.w_self.size() > 0) grad_h.noalias() += delta * w.w_self;
  }
  if (wrt.features) out.features = grad_h;
  if (wrt.normalized) out.normalized = grad_s;
  if (wrt.adjacency) {
    require(raw_adjacency != nullptr, "backward: raw adjacency required for d/dA");
    out.adjacency = graph::normalize_adjacency_backward(*raw_adjacency, norm, grad_s);
  }
  return out;
}

GradientBundle sample_gradients(const ModelParams& params, const graph::Graph& g, int target) {
  const auto norm = graph::normalize_adjacency(g, adjacency_mode(params.arch.framework));
  const ForwardTrace tr = params.arch.task == Task::node ? forward_node(params, g, norm, target)
                                                         : forward_graph(params, g, norm);
  return backward(params, tr, g.features, norm).params;
}

int infer_label(const Matrix& weight_grad, const RowVector* bias_grad) {
  const long k = weight_grad.rows();
  require(k >= 2, "infer_label: need at least two classes");
  if (bias_grad) require(bias_grad->size() == k, "infer_label: bias gradient size mismatch");
  const Matrix gram = weight_grad * weight_grad.transpose();
  std::vector<int> candidates;
  for (long i = 0; i < k; ++i) {
    bool ok = true;
    for (long j = 0; j < k && ok; ++j)
      if (j != i && gram(i, j) > 0.0) ok = false;
    if (ok) candidates.push_back(static_cast<int>(i));
  }
  if (candidates.size() > 1 && bias_grad) {
    std::vector<int> negative;
    for (int c : candidates)
      if ((*bias_grad)(c) < 0.0) negative.push_back(c);
    candidates = std::move(negative);
  }
  if (candidates.size() != 1) {
    fail(ErrorCode::ambiguous_label,
         "infer_label: " + std::to_string(candidates.size()) + " classes satisfy the sign criterion");
  }
  return candidates.front();
}

int infer_label(const GradientBundle& bundle, const Architecture& arch) {
  const Tensors& t = bundle.grads;
  if (arch.task == Task::graph) {
    const RowVector bias = t.mlp_bias.row(0);
    return infer_label(t.mlp_weight, &bias);
  }
  const auto& l = t.layers.back();
  Matrix w = l.w_agg;
  if (l.w_self.size() > 0) {
    w.conservativeResize(Eigen::NoChange, l.w_agg.cols() + l.w_self.cols());
    w.rightCols(l.w_self.cols()) = l.w_self;
  }
  const RowVector bias = l.bias.row(0);
  return infer_label(w, &bias);
}

}  // namespace glg::gnn
