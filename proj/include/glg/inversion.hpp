#pragma once

// Gradient of a gradient-matching objective with respect to dummy inputs.
//
// A match problem holds one or more dummy instances (features plus a
// normalized adjacency), the samples drawn from them (a target node and a
// label, or a whole graph) and groups of samples whose mean parameter
// gradient is compared against one leaked bundle. The objective is the sum
// of the group distances. Its derivative needs the derivative of the
// parameter gradients themselves, which is computed here by running the
// reverse of the model's backward pass followed by the reverse of its
// forward pass.

#include "glg/gnn.hpp"
#include "glg/numkit.hpp"
#include "glg/objective.hpp"

#include <Eigen/SparseCore>

#include <optional>
#include <vector>

namespace glg::attack {

using num::RowVector;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct DummyInstance {
  Matrix features;
  // A fixed adjacency may be stored sparse; an optimized one must be dense.
  Matrix normalized;
  std::optional<SparseMatrix> normalized_sparse;
  bool want_features = false;
  bool want_normalized = false;
};

struct DummySample {
  int instance = 0;
  int target = -1;  // node task only
  int label = 0;
};

struct MatchGroup {
  const gnn::GradientBundle* leaked = nullptr;
  std::vector<int> samples;  // averaged before matching
};

struct MatchProblem {
  const gnn::ModelParams* params = nullptr;
  Distance distance = Distance::cosine;
  std::vector<DummyInstance> instances;
  std::vector<DummySample> samples;
  std::vector<MatchGroup> groups;

  void validate() const;
};

struct MatchEvaluation {
  double value = 0.0;
  std::vector<gnn::GradientBundle> dummy;  // one mean bundle per group
  // Per instance, filled when the instance asks for it.
  std::vector<std::optional<Matrix>> grad_features;
  std::vector<std::optional<Matrix>> grad_normalized;
};

MatchEvaluation evaluate_match(const MatchProblem& problem, bool with_gradients = true);

SparseMatrix to_sparse(const Matrix& m);

}  // namespace glg::attack
