#pragma once

// Gradient-matching distances, graph regularizers and the projection and
// finalization steps applied to a relaxed dummy adjacency.

#include "glg/gnn.hpp"
#include "glg/numkit.hpp"

#include <optional>

namespace glg::attack {

using num::Matrix;

enum class Distance { l2, cosine };

const char* to_string(Distance d);

struct MatchValue {
  double value = 0.0;
  gnn::Tensors grad;  // d value / d dummy, same layout as the bundles
};

/// sum over tensors of ||dummy - leaked||^2.
MatchValue grad_match_l2(const gnn::GradientBundle& dummy, const gnn::GradientBundle& leaked);

/// 1 - cos(dummy, leaked) over the concatenated tensors, evaluated as
/// 0.5 * ||u - v||^2 on the unit vectors so that identical bundles give
/// exactly zero. A zero-norm bundle is a degenerate error.
MatchValue grad_match_cosine(const gnn::GradientBundle& dummy, const gnn::GradientBundle& leaked);

MatchValue grad_match(Distance d, const gnn::GradientBundle& dummy,
                      const gnn::GradientBundle& leaked);

struct Smoothness {
  double value = 0.0;
  std::optional<Matrix> grad_features;
  std::optional<Matrix> grad_adjacency;
};

/// 0.5 * sum_ij A_ij ||x_i / sqrt(d_i) - x_j / sqrt(d_j)||^2 with d the row
/// sums of A, i.e. tr(X^T L X) over the edges for a binary A. Nodes with
/// zero degree contribute nothing.
Smoothness smoothness(const Matrix& features, const Matrix& adjacency, bool grad_features = false,
                      bool grad_adjacency = false);

/// ||A||_F^2
double frobenius_penalty(const Matrix& adjacency);

/// Clamp into [lo, hi] and clear the diagonal.
Matrix project_interval(const Matrix& adjacency, double lo = 0.0, double hi = 1.0);

enum class FinalizeRule { bernoulli, threshold };

const char* to_string(FinalizeRule r);

struct Finalization {
  FinalizeRule rule = FinalizeRule::bernoulli;
  double tau = 0.5;
};

/// Binary, symmetric, zero-diagonal adjacency from a relaxed one. Only the
/// lower triangle is read. The threshold rule min-max normalizes the
/// off-diagonal entries first; a constant matrix is left unnormalized.
Matrix finalize_adjacency(const Matrix& probs, const Finalization& rule, num::Rng& rng);

}  // namespace glg::attack
