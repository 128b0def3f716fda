#pragma once

#include "glg/numkit.hpp"

#include <optional>
#include <string>
#include <vector>

namespace glg::graph {

using num::Matrix;

// Undirected graph with node features. The adjacency is dense, binary,
// symmetric and has a zero diagonal.
struct Graph {
  Matrix adjacency;
  Matrix features;
  std::optional<std::vector<int>> labels;
  std::optional<int> graph_label;

  int num_nodes() const { return static_cast<int>(adjacency.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
  int num_edges() const;
  std::vector<int> neighbors(int node) const;
  int degree(int node) const;

  // Throws a validation error if any invariant is broken. `num_classes` of 0
  // skips the label range check.
  void validate(int num_classes = 0) const;
};

enum class AdjNorm { gcn, sage_mean };

const char* to_string(AdjNorm mode);

struct NormalizedAdjacency {
  Matrix matrix;
  AdjNorm mode = AdjNorm::gcn;
};

/// gcn: D^{-1/2}(A+I)D^{-1/2} with degrees counted on A+I.
/// sage_mean: D^{-1}A with the degree clamped below at 1, so isolated rows
/// stay zero.
///
/// Accepts any finite real matrix; degrees are row sums, which lets the
/// attacks normalize a relaxed (probabilistic) adjacency the same way. On a
/// binary adjacency the clamp never binds. On a relaxed one it keeps the mean
/// continuous as a row fades to zero.
NormalizedAdjacency normalize_adjacency(const Matrix& adjacency, AdjNorm mode);
NormalizedAdjacency normalize_adjacency(const Graph& g, AdjNorm mode);

/// Pulls a gradient with respect to the normalized matrix back to the raw
/// adjacency entries (treated as independent variables).
Matrix normalize_adjacency_backward(const Matrix& adjacency, const NormalizedAdjacency& norm,
                                    const Matrix& grad_normalized);

/// I - D^{-1/2} A D^{-1/2}; rows of isolated nodes are identity rows.
Matrix laplacian(const Matrix& adjacency);
Matrix laplacian(const Graph& g);

Graph er_graph(num::Rng& rng, int n, double p, int feature_dim);

/// floor(avg_degree * n / 2) distinct edges with uniformly drawn endpoints,
/// standard-normal features and uniform labels in [0, num_classes).
Graph synthetic_graph(num::Rng& rng, int n, double avg_degree, int feature_dim, int num_classes);

/// Full tree of the given depth where every internal node has `branching`
/// children; node 0 is the root and nodes are numbered level by level.
Graph dummy_tree(num::Rng& rng, int depth, int branching, int feature_dim);

struct Egonet {
  Graph graph;
  // index[i] is the original id of egonet node i; index[0] is the center.
  std::vector<int> index;
};

/// Induced subgraph on nodes within `hops` BFS steps of `center`, numbered in
/// BFS discovery order (neighbors visited by increasing id).
Egonet khop_egonet(const Graph& g, int center, int hops);

/// Hop distance from `source` to every node (-1 when unreachable).
std::vector<int> bfs_distances(const Matrix& adjacency, int source);

struct GraphFiles {
  std::string features;
  std::string edges;
  std::string labels;  // optional; empty means no labels
};

Graph load_graph(const GraphFiles& files);
void write_graph(const Graph& g, const GraphFiles& files);

}  // namespace glg::graph
