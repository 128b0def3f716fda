#include "glg/graph.hpp"

#include "glg/error.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <string>

namespace glg::graph {

int Graph::num_edges() const {
  int count = 0;
  for (int i = 0; i < num_nodes(); ++i)
    for (int j = 0; j < i; ++j) count += adjacency(i, j) != 0.0;
  return count;
}

std::vector<int> Graph::neighbors(int node) const {
  std::vector<int> out;
  for (int j = 0; j < num_nodes(); ++j)
    if (adjacency(node, j) != 0.0) out.push_back(j);
  return out;
}

int Graph::degree(int node) const { return static_cast<int>(neighbors(node).size()); }

void Graph::validate(int num_classes) const {
  const int n = num_nodes();
  require(adjacency.cols() == n, "graph: adjacency must be square");
  require(features.rows() == n, "graph: feature rows (" + std::to_string(features.rows()) +
                                    ") must equal node count (" + std::to_string(n) + ")");
  num::require_finite(features, "graph features");
  for (int i = 0; i < n; ++i) {
    require(adjacency(i, i) == 0.0, "graph: nonzero diagonal at node " + std::to_string(i));
    for (int j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      require(a == 0.0 || a == 1.0, "graph: adjacency must be binary");
      require(a == adjacency(j, i), "graph: adjacency must be symmetric");
    }
  }
  if (labels) {
    require(static_cast<int>(labels->size()) == n, "graph: label count must equal node count");
    for (int y : *labels) {
      require(y >= 0 && (num_classes == 0 || y < num_classes),
              "graph: label " + std::to_string(y) + " out of range");
    }
  }
  if (graph_label) {
    require(*graph_label >= 0 && (num_classes == 0 || *graph_label < num_classes),
            "graph: graph label out of range");
  }
}

const char* to_string(AdjNorm mode) { return mode == AdjNorm::gcn ? "gcn" : "sage_mean"; }

NormalizedAdjacency normalize_adjacency(const Matrix& a, AdjNorm mode) {
  require(a.rows() == a.cols(), "normalize_adjacency: adjacency must be square");
  const Eigen::Index n = a.rows();
  NormalizedAdjacency out{Matrix::Zero(n, n), mode};
  if (mode == AdjNorm::gcn) {
    Eigen::VectorXd inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = 1.0 + a.row(i).sum();
      if (!(d > 0.0)) fail(ErrorCode::numeric, "normalize_adjacency: non-positive gcn degree");
      inv_sqrt(i) = 1.0 / std::sqrt(d);
    }
    out.matrix = inv_sqrt.asDiagonal() * (a + Matrix::Identity(n, n)) * inv_sqrt.asDiagonal();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = a.row(i).sum();
      out.matrix.row(i) = d > 1.0 ? Matrix(a.row(i) / d) : Matrix(a.row(i));
    }
  }
  return out;
}

NormalizedAdjacency normalize_adjacency(const Graph& g, AdjNorm mode) {
  return normalize_adjacency(g.adjacency, mode);
}

Matrix normalize_adjacency_backward(const Matrix& a, const NormalizedAdjacency& norm,
                                    const Matrix& grad) {
  num::require_same_shape(a, grad, "normalize_adjacency_backward");
  const Eigen::Index n = a.rows();
  const Matrix& s = norm.matrix;
  Matrix out(n, n);
  if (norm.mode == AdjNorm::gcn) {
    Eigen::VectorXd deg(n), inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      deg(i) = 1.0 + a.row(i).sum();
      inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
    }
    const Matrix gs = grad.cwiseProduct(s);
    const Eigen::VectorXd through_degree =
        (gs.rowwise().sum() + gs.colwise().sum().transpose()).cwiseQuotient(-2.0 * deg);
    out = inv_sqrt.asDiagonal() * grad * inv_sqrt.asDiagonal();
    out.colwise() += through_degree;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = a.row(i).sum();
      if (d > 1.0) {
        const double dot = grad.row(i).dot(s.row(i));
        out.row(i) = (grad.row(i).array() - dot) / d;
      } else {
        out.row(i) = grad.row(i);
      }
    }
  }
  return out;
}

Matrix laplacian(const Matrix& a) {
  require(a.rows() == a.cols(), "laplacian: adjacency must be square");
  const Eigen::Index n = a.rows();
  Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = a.row(i).sum();
    if (d > 0.0) inv_sqrt(i) = 1.0 / std::sqrt(d);
  }
  return Matrix::Identity(n, n) - inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
}

Matrix laplacian(const Graph& g) { return laplacian(g.adjacency); }

Graph er_graph(num::Rng& rng, int n, double p, int feature_dim) {
  require(n >= 0 && feature_dim >= 0, "er_graph: negative size");
  require(p >= 0.0 && p <= 1.0, "er_graph: p must lie in [0,1]");
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;
  g.features = num::sample_gaussian(rng, n, feature_dim);
  return g;
}

Graph synthetic_graph(num::Rng& rng, int n, double avg_degree, int feature_dim, int num_classes) {
  require(n >= 1 && feature_dim >= 0 && num_classes >= 1, "synthetic_graph: bad sizes");
  require(avg_degree >= 0.0 && avg_degree < n, "synthetic_graph: avg_degree must lie in [0, n)");
  const long edges = static_cast<long>(std::floor(avg_degree * n / 2.0));
  const long max_edges = static_cast<long>(n) * (n - 1) / 2;
  if (edges > max_edges) {
    fail(ErrorCode::validation, "synthetic_graph: " + std::to_string(edges) +
                                    " edges requested but only " + std::to_string(max_edges) +
                                    " possible");
  }
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  long placed = 0;
  while (placed < edges) {
    const int u = static_cast<int>(rng.uniform_int(0, n - 1));
    const int v = static_cast<int>(rng.uniform_int(0, n - 1));
    if (u == v || g.adjacency(u, v) != 0.0) continue;
    g.adjacency(u, v) = g.adjacency(v, u) = 1.0;
    ++placed;
  }
  g.features = num::sample_gaussian(rng, n, feature_dim);
  std::vector<int> labels(n);
  for (auto& y : labels) y = static_cast<int>(rng.uniform_int(0, num_classes - 1));
  g.labels = std::move(labels);
  return g;
}

Graph dummy_tree(num::Rng& rng, int depth, int branching, int feature_dim) {
  require(depth >= 0 && branching >= 1 && feature_dim >= 0, "dummy_tree: bad sizes");
  long n = 0, level = 1;
  for (int l = 0; l <= depth; ++l, level *= branching) n += level;
  const long internal = n - level / branching;  // nodes above the last level
  Graph g;
  g.adjacency = Matrix::Zero(n, n);
  for (long k = 0; k < internal; ++k) {
    for (int c = 1; c <= branching; ++c) {
      const long child = k * branching + c;
      g.adjacency(k, child) = g.adjacency(child, k) = 1.0;
    }
  }
  g.features = num::sample_gaussian(rng, static_cast<int>(n), feature_dim);
  return g;
}

std::vector<int> bfs_distances(const Matrix& adjacency, int source) {
  const int n = static_cast<int>(adjacency.rows());
  std::vector<int> dist(n, -1);
  std::deque<int> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop_front();
    for (int v = 0; v < n; ++v) {
      if (adjacency(u, v) != 0.0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
  }
  return dist;
}

Egonet khop_egonet(const Graph& g, int center, int hops) {
  const int n = g.num_nodes();
  require(center >= 0 && center < n, "khop_egonet: center out of range");
  require(hops >= 0, "khop_egonet: hops must be non-negative");
  std::vector<int> dist(n, -1), order{center};
  dist[center] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    if (dist[u] == hops) continue;
    for (int v = 0; v < n; ++v) {
      if (g.adjacency(u, v) != 0.0 && dist[v] < 0) {
        dist[v] = dist[u] + 1;
        order.push_back(v);
      }
    }
  }
  const int m = static_cast<int>(order.size());
  Egonet ego;
  ego.index = order;
  ego.graph.adjacency = Matrix(m, m);
  ego.graph.features = Matrix(m, g.feature_dim());
  for (int i = 0; i < m; ++i) {
    ego.graph.features.row(i) = g.features.row(order[i]);
    for (int j = 0; j < m; ++j) ego.graph.adjacency(i, j) = g.adjacency(order[i], order[j]);
  }
  if (g.labels) {
    std::vector<int> labels(m);
    for (int i = 0; i < m; ++i) labels[i] = (*g.labels)[order[i]];
    ego.graph.labels = std::move(labels);
  }
  ego.graph.graph_label = g.graph_label;
  return ego;
}

}  // namespace glg::graph
