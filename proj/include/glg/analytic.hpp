#pragma once

// Closed-form recoveries from first-layer gradients.
//
// For a layer pre-activation h = x_agg W^T (+ x W2^T) + b evaluated at a
// single node, dL/dW_i = dL/db_i * x_agg and dL/dW2_i = dL/db_i * x, so a
// row ratio of weight and bias gradients returns the layer input. These
// identities are exact only when the loss reaches the first layer through
// that one node's row, i.e. when the first GNN layer is also the output
// layer of a node-task model. The graph-task chain at the bottom of this
// header needs no such restriction.

#include "glg/gnn.hpp"
#include "glg/numkit.hpp"

#include <string>
#include <vector>

namespace glg::attack {

using num::Matrix;
using num::RowVector;

inline constexpr double kDivisionEpsilon = 1e-12;

/// Least-squares fit of W_i = b_i * x over the rows with |b_i| > eps, which
/// is the b_i^2-weighted average of the per-row ratios W_i / b_i.
RowVector ratio_recover(const Matrix& weight_grad, const Matrix& bias_grad,
                        double eps = kDivisionEpsilon);

/// x_v^agg from the first layer: W for gcn, W1 for sage.
RowVector recover_agg_features(const gnn::GradientBundle& bundle, gnn::Framework framework);

/// x_v from the first sage layer's W2.
RowVector recover_target_features(const gnn::GradientBundle& bundle, gnn::Framework framework);

struct LinearRecovery {
  Matrix value;
  int rank = 0;           // numerical rank of the matrix that had to be inverted
  int required_rank = 0;  // rank needed for a unique answer
  double residual = 0.0;  // relative residual of the defining linear system
  std::string warning;    // empty when well conditioned

  bool well_conditioned() const { return warning.empty(); }
};

/// A~ = X_agg X^+ ; unique when X has full row rank.
LinearRecovery recover_adjacency_given_X(const Matrix& x_agg, const Matrix& x,
                                         double tol = num::kDefaultPinvTol);

/// Minimum-norm X solving A~ X = X_agg; unique when A~ has full column rank.
LinearRecovery recover_X_given_adjacency(const Matrix& x_agg, const Matrix& a_norm,
                                         double tol = num::kDefaultPinvTol);

struct JointRecovery {
  Matrix features;
  Matrix aggregated;
  LinearRecovery adjacency;
};

/// X, X_agg and A~ from one sage bundle per node (node order).
JointRecovery recover_both_sage(const std::vector<gnn::GradientBundle>& per_node,
                                gnn::Framework framework, double tol = num::kDefaultPinvTol);

/// Graph-task sage: G = (X^T)^+ dW2^T gives dL/dH~ of the first layer, the
/// least-squares solve G^T (A~X) = dW1 gives A~X, and A~ = (A~X) X^+.
LinearRecovery recover_adjacency_graph_sage(const gnn::GradientBundle& bundle, const Matrix& x,
                                            double tol = num::kDefaultPinvTol);

/// The compact closed form X (dW2)^+ dW1 X^+ of the same recovery.
Matrix recover_adjacency_graph_sage_closed_form(const gnn::GradientBundle& bundle,
                                                const Matrix& x,
                                                double tol = num::kDefaultPinvTol);

}  // namespace glg::attack
