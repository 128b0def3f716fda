#pragma once

// Recovery quality measures for features and adjacency matrices.

#include "glg/numkit.hpp"

#include <vector>

namespace glg::metrics {

using num::Matrix;

/// ||x - x_hat|| / ||x|| (Frobenius). Undefined-metric error when x = 0.
double rnmse(const Matrix& truth, const Matrix& recovered);

/// Mean of the per-row rnmse.
double rnmse_rows(const Matrix& truth, const Matrix& recovered);

/// Fraction of the N^2 entries on which two binary matrices agree.
double adjacency_accuracy(const Matrix& truth, const Matrix& predicted);

/// Mann-Whitney AUC of `scores` against the binary truth over the strict
/// lower triangle, ties counted one half.
double auc(const Matrix& truth, const Matrix& scores);

/// Precision TP / (TP + FP) of a binary prediction over the strict lower
/// triangle. Undefined-metric error when nothing is predicted.
double average_precision(const Matrix& truth, const Matrix& predicted);

/// Mean absolute difference over the lower triangle including the diagonal.
double mae_lower_tri(const Matrix& truth, const Matrix& predicted);

struct ThresholdMae {
  double tau = 0.0;
  double mae = 0.0;
};

struct AdjacencyScore {
  double accuracy = 0.0;
  double auc = 0.0;
  double ap = 0.0;
  double mae = 0.0;
  std::vector<ThresholdMae> mae_thresholded;
};

/// Scores a binary and a relaxed recovery against the binary truth. AUC is
/// reported as NaN when the truth has a single class and AP as NaN when the
/// prediction has no edges. `taus` adds MAE after min-max thresholding.
AdjacencyScore score_adjacency(const Matrix& truth, const Matrix& probs, const Matrix& binary,
                               const std::vector<double>& taus = {});

struct BatchMatch {
  std::vector<int> assignment;  // assignment[true index] = recovered index
  std::vector<double> errors;   // rnmse of each matched pair, in true order
  double mean = 0.0;
  double min = 0.0;
  double std = 0.0;
};

/// Pairs recovered with true samples by a minimum-cost assignment on the
/// pairwise rnmse and summarizes the matched errors. Matrices are compared
/// with `rnmse`; pass single rows to match feature vectors.
BatchMatch batch_match_score(const std::vector<Matrix>& truth, const std::vector<Matrix>& recovered);

}  // namespace glg::metrics
