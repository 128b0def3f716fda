#include "glg/objective.hpp"

#include "glg/error.hpp"

#include <algorithm>
#include <cmath>

namespace glg::attack {

const char* to_string(Distance d) { return d == Distance::l2 ? "l2" : "cosine"; }

const char* to_string(FinalizeRule r) {
  return r == FinalizeRule::bernoulli ? "bernoulli" : "threshold";
}

MatchValue grad_match_l2(const gnn::GradientBundle& dummy, const gnn::GradientBundle& leaked) {
  dummy.require_compatible(leaked, "grad_match_l2");
  MatchValue out;
  out.grad = dummy.grads.zeros_like();
  const auto a = dummy.grads.list();
  const auto b = leaked.grads.list();
  auto g = out.grad.list();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix diff = *a[i] - *b[i];
    out.value += diff.squaredNorm();
    *g[i] = 2.0 * diff;
  }
  return out;
}

MatchValue grad_match_cosine(const gnn::GradientBundle& dummy, const gnn::GradientBundle& leaked) {
  dummy.require_compatible(leaked, "grad_match_cosine");
  const double nd = std::sqrt(dummy.squared_norm());
  const double nl = std::sqrt(leaked.squared_norm());
  if (!(nd > 0.0) || !(nl > 0.0))
    fail(ErrorCode::degenerate, "grad_match_cosine: zero-norm gradient bundle");
  const auto a = dummy.grads.list();
  const auto b = leaked.grads.list();
  MatchValue out;
  out.grad = dummy.grads.zeros_like();
  auto g = out.grad.list();
  // value = 0.5 ||u - v||^2, u = a/|a|, v = b/|b|
  // d/da = (r - <r,u> u) / |a| with r = u - v
  double ru = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix u = *a[i] / nd;
    const Matrix r = u - *b[i] / nl;
    out.value += 0.5 * r.squaredNorm();
    ru += r.cwiseProduct(u).sum();
    *g[i] = r;
  }
  for (std::size_t i = 0; i < a.size(); ++i) *g[i] = (*g[i] - ru * (*a[i] / nd)) / nd;
  return out;
}

MatchValue grad_match(Distance d, const gnn::GradientBundle& dummy,
                      const gnn::GradientBundle& leaked) {
  return d == Distance::l2 ? grad_match_l2(dummy, leaked) : grad_match_cosine(dummy, leaked);
}

Smoothness smoothness(const Matrix& x, const Matrix& a, bool want_x, bool want_a) {
  const auto n = a.rows();
  require(a.cols() == n && x.rows() == n, "smoothness: features and adjacency disagree on N");
  const Eigen::VectorXd deg = a.rowwise().sum();
  Eigen::VectorXd inv_sqrt = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (deg(i) > 0.0) inv_sqrt(i) = 1.0 / std::sqrt(deg(i));
  const Matrix u = inv_sqrt.asDiagonal() * x;
  const Eigen::VectorXd sq = u.rowwise().squaredNorm();
  // dist(i, j) = ||u_i - u_j||^2
  Matrix dist = -2.0 * u * u.transpose();
  dist.colwise() += sq;
  dist.rowwise() += sq.transpose();
  dist = dist.cwiseMax(0.0);

  Smoothness out;
  out.value = 0.5 * a.cwiseProduct(dist).sum();
  if (!want_x && !want_a) return out;

  const Matrix m = a + a.transpose();
  // dL/du_k = sum_j (A_kj + A_jk) (u_k - u_j)
  Matrix grad_u = m.rowwise().sum().asDiagonal() * u;
  grad_u.noalias() -= m * u;
  if (want_x) out.grad_features = inv_sqrt.asDiagonal() * grad_u;
  if (want_a) {
    // u_k depends on d_k = sum_l A_kl: du_k/dA_kl = -u_k / (2 d_k)
    Matrix ga = 0.5 * dist;
    for (Eigen::Index k = 0; k < n; ++k) {
      if (deg(k) <= 0.0) continue;
      const double c = -grad_u.row(k).dot(u.row(k)) / (2.0 * deg(k));
      ga.row(k).array() += c;
    }
    out.grad_adjacency = std::move(ga);
  }
  return out;
}

double frobenius_penalty(const Matrix& a) { return a.squaredNorm(); }

Matrix project_interval(const Matrix& a, double lo, double hi) {
  require(lo <= hi, "project_interval: empty interval");
  Matrix p = a.cwiseMax(lo).cwiseMin(hi);
  p.diagonal().setZero();
  return p;
}

Matrix finalize_adjacency(const Matrix& probs, const Finalization& rule, num::Rng& rng) {
  const auto n = probs.rows();
  require(probs.cols() == n, "finalize_adjacency: matrix must be square");
  num::require_finite(probs, "finalize_adjacency input");
  Matrix out = Matrix::Zero(n, n);
  if (n < 2) return out;

  if (rule.rule == FinalizeRule::bernoulli) {
    for (Eigen::Index i = 1; i < n; ++i)
      for (Eigen::Index j = 0; j < i; ++j) {
        const double p = std::clamp(probs(i, j), 0.0, 1.0);
        if (rng.uniform() < p) out(i, j) = out(j, i) = 1.0;
      }
    return out;
  }

  double lo = probs(1, 0), hi = probs(1, 0);
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      lo = std::min(lo, probs(i, j));
      hi = std::max(hi, probs(i, j));
    }
  const double range = hi - lo;
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      const double z = range > 0.0 ? (probs(i, j) - lo) / range : std::clamp(probs(i, j), 0.0, 1.0);
      if (z >= rule.tau) out(i, j) = out(j, i) = 1.0;
    }
  return out;
}

}  // namespace glg::attack
