#include "glg/analytic.hpp"

#include "glg/error.hpp"

#include <cmath>
#include <string>

namespace glg::attack {

namespace {

const gnn::LayerTensors& first_layer(const gnn::GradientBundle& bundle) {
  require(!bundle.grads.layers.empty(), "recovery: bundle has no GNN layers");
  return bundle.grads.layers.front();
}

double relative(double num, double den) { return den > 0.0 ? num / den : num; }

}  // namespace

RowVector ratio_recover(const Matrix& w, const Matrix& b, double eps) {
  require(b.rows() == 1 && b.cols() == w.rows(), "ratio_recover: bias/weight shape mismatch");
  RowVector acc = RowVector::Zero(w.cols());
  double weight = 0.0;
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    const double bi = b(0, i);
    if (std::abs(bi) <= eps) continue;
    acc += bi * w.row(i);
    weight += bi * bi;
  }
  if (weight == 0.0)
    fail(ErrorCode::unrecoverable, "recovery: every bias gradient is below the division threshold");
  return acc / weight;
}

RowVector recover_agg_features(const gnn::GradientBundle& bundle, gnn::Framework) {
  const auto& l = first_layer(bundle);
  return ratio_recover(l.w_agg, l.bias);
}

RowVector recover_target_features(const gnn::GradientBundle& bundle, gnn::Framework framework) {
  const auto& l = first_layer(bundle);
  if (framework != gnn::Framework::sage || l.w_self.size() == 0)
    fail(ErrorCode::validation, "recover_target_features: needs a sage bundle with a W2 tensor");
  return ratio_recover(l.w_self, l.bias);
}

LinearRecovery recover_adjacency_given_X(const Matrix& x_agg, const Matrix& x, double tol) {
  require(x_agg.rows() == x.rows() && x_agg.cols() == x.cols(),
          "recover_adjacency_given_X: X_agg and X must both be N x D");
  LinearRecovery r;
  r.required_rank = static_cast<int>(x.rows());
  r.rank = num::numerical_rank(x, tol);
  r.value = x_agg * num::pseudoinverse(x, tol);
  r.residual = relative((r.value * x - x_agg).norm(), x_agg.norm());
  if (r.rank < r.required_rank) {
    r.warning = "X has rank " + std::to_string(r.rank) + " < " + std::to_string(x.rows()) +
                " rows; the adjacency is not identifiable";
  }
  return r;
}

LinearRecovery recover_X_given_adjacency(const Matrix& x_agg, const Matrix& a, double tol) {
  require(a.rows() == a.cols() && a.rows() == x_agg.rows(),
          "recover_X_given_adjacency: A~ must be N x N with N = rows of X_agg");
  LinearRecovery r;
  r.required_rank = static_cast<int>(a.cols());
  r.rank = num::numerical_rank(a, tol);
  r.value = num::least_squares(a, x_agg, tol);
  r.residual = relative((a * r.value - x_agg).norm(), x_agg.norm());
  if (r.rank < r.required_rank) {
    r.warning = "A~ has rank " + std::to_string(r.rank) + " < " + std::to_string(a.cols()) +
                " columns; returning the minimum-norm solution";
  }
  return r;
}

JointRecovery recover_both_sage(const std::vector<gnn::GradientBundle>& per_node,
                                gnn::Framework framework, double tol) {
  require(!per_node.empty(), "recover_both_sage: no bundles");
  require(framework == gnn::Framework::sage, "recover_both_sage: sage bundles required");
  const auto n = static_cast<Eigen::Index>(per_node.size());
  const Eigen::Index d = first_layer(per_node.front()).w_agg.cols();
  JointRecovery out;
  out.features = Matrix::Zero(n, d);
  out.aggregated = Matrix::Zero(n, d);
  std::vector<int> failed;
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      out.features.row(i) = recover_target_features(per_node[i], framework);
      out.aggregated.row(i) = recover_agg_features(per_node[i], framework);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::unrecoverable) throw;
      failed.push_back(static_cast<int>(i));
    }
  }
  if (!failed.empty()) {
    std::string list;
    for (int v : failed) list += (list.empty() ? "" : ",") + std::to_string(v);
    throw PartialRecoveryError(failed, "recover_both_sage: unrecoverable nodes [" + list + "]");
  }
  out.adjacency = recover_adjacency_given_X(out.aggregated, out.features, tol);
  return out;
}

LinearRecovery recover_adjacency_graph_sage(const gnn::GradientBundle& bundle, const Matrix& x,
                                            double tol) {
  const auto& l = first_layer(bundle);
  require(l.w_self.size() > 0, "recover_adjacency_graph_sage: needs a sage bundle");
  require(l.w_self.cols() == x.cols(), "recover_adjacency_graph_sage: feature width mismatch");
  const Eigen::Index n = x.rows();

  LinearRecovery r;
  r.required_rank = static_cast<int>(n);
  const int x_rank = num::numerical_rank(x, tol);
  // dW2^T = X^T G  =>  G = (X^T)^+ dW2^T   (N x F)
  const Matrix g = num::pseudoinverse(x.transpose(), tol) * l.w_self.transpose();
  const int g_rank = num::numerical_rank(g, tol);
  // dW1 = G^T (A~X)  =>  A~X by least squares
  const Matrix ax = num::least_squares(g.transpose(), l.w_agg, tol);
  r.value = ax * num::pseudoinverse(x, tol);
  r.rank = std::min(x_rank, g_rank);
  const double res_w1 = relative((g.transpose() * r.value * x - l.w_agg).norm(), l.w_agg.norm());
  const double res_w2 = relative((g.transpose() * x - l.w_self).norm(), l.w_self.norm());
  r.residual = std::max(res_w1, res_w2);
  if (x_rank < n) {
    r.warning = "X has rank " + std::to_string(x_rank) + " < " + std::to_string(n) +
                " nodes; the adjacency is not identifiable";
  } else if (g_rank < n) {
    r.warning = "first-layer dL/dH~ has rank " + std::to_string(g_rank) + " < " +
                std::to_string(n) + "; the adjacency is not identifiable";
  }
  return r;
}

Matrix recover_adjacency_graph_sage_closed_form(const gnn::GradientBundle& bundle, const Matrix& x,
                                                double tol) {
  const auto& l = first_layer(bundle);
  require(l.w_self.size() > 0, "recover_adjacency_graph_sage: needs a sage bundle");
  return x * num::pseudoinverse(l.w_self, tol) * l.w_agg * num::pseudoinverse(x, tol);
}

}  // namespace glg::attack
