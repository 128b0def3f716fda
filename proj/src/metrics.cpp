#include "glg/metrics.hpp"

#include "glg/error.hpp"
#include "glg/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace glg::metrics {

namespace {

void require_same(const Matrix& a, const Matrix& b, const char* what) {
  num::require_same_shape(a, b, what);
}

void require_square(const Matrix& a, const char* what) {
  require(a.rows() == a.cols(), std::string(what) + ": adjacency must be square");
}

void require_binary(const Matrix& a, const char* what) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (v != 0.0 && v != 1.0)
      fail(ErrorCode::validation, std::string(what) + ": matrix is not binary");
  }
}

}  // namespace

double rnmse(const Matrix& truth, const Matrix& recovered) {
  require_same(truth, recovered, "rnmse");
  const double n = truth.norm();
  if (!(n > 0.0)) fail(ErrorCode::undefined_metric, "rnmse: ground truth has zero norm");
  return (truth - recovered).norm() / n;
}

double rnmse_rows(const Matrix& truth, const Matrix& recovered) {
  require_same(truth, recovered, "rnmse_rows");
  require(truth.rows() > 0, "rnmse_rows: no rows");
  double s = 0.0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    s += rnmse(truth.row(i), recovered.row(i));
  return s / static_cast<double>(truth.rows());
}

double adjacency_accuracy(const Matrix& truth, const Matrix& predicted) {
  require_same(truth, predicted, "adjacency_accuracy");
  require_binary(truth, "adjacency_accuracy");
  require_binary(predicted, "adjacency_accuracy");
  require(truth.size() > 0, "adjacency_accuracy: empty matrices");
  const auto same = (truth.array() == predicted.array()).count();
  return static_cast<double>(same) / static_cast<double>(truth.size());
}

double auc(const Matrix& truth, const Matrix& scores) {
  require_same(truth, scores, "auc");
  require_square(truth, "auc");
  require_binary(truth, "auc");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  for (Eigen::Index i = 1; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) items.push_back({scores(i, j), truth(i, j) == 1.0});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double pos = 0.0, neg = 0.0, rank_sum = 0.0;
  for (std::size_t k = 0; k < items.size();) {
    std::size_t e = k;
    while (e < items.size() && items[e].score == items[k].score) ++e;
    const double mid_rank = 0.5 * static_cast<double>(k + 1 + e);  // mean of ranks k+1..e
    for (std::size_t t = k; t < e; ++t) {
      if (items[t].positive) {
        rank_sum += mid_rank;
        pos += 1.0;
      } else {
        neg += 1.0;
      }
    }
    k = e;
  }
  if (pos == 0.0 || neg == 0.0)
    fail(ErrorCode::undefined_metric, "auc: ground truth has a single class");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double average_precision(const Matrix& truth, const Matrix& predicted) {
  require_same(truth, predicted, "average_precision");
  require_square(truth, "average_precision");
  require_binary(truth, "average_precision");
  require_binary(predicted, "average_precision");
  long tp = 0, fp = 0;
  for (Eigen::Index i = 1; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) {
      if (predicted(i, j) != 1.0) continue;
      (truth(i, j) == 1.0 ? tp : fp) += 1;
    }
  if (tp + fp == 0) fail(ErrorCode::undefined_metric, "average_precision: no predicted edges");
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double mae_lower_tri(const Matrix& truth, const Matrix& predicted) {
  require_same(truth, predicted, "mae_lower_tri");
  require_square(truth, "mae_lower_tri");
  const auto n = truth.rows();
  require(n > 0, "mae_lower_tri: empty matrices");
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) s += std::abs(truth(i, j) - predicted(i, j));
  return 2.0 * s / static_cast<double>(n * (n + 1));
}

AdjacencyScore score_adjacency(const Matrix& truth, const Matrix& probs, const Matrix& binary,
                               const std::vector<double>& taus) {
  AdjacencyScore s;
  s.accuracy = adjacency_accuracy(truth, binary);
  s.mae = mae_lower_tri(truth, binary);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    s.auc = auc(truth, probs);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_metric) throw;
    s.auc = nan;
  }
  try {
    s.ap = average_precision(truth, binary);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::undefined_metric) throw;
    s.ap = nan;
  }
  num::Rng unused(0);
  for (double tau : taus) {
    const Matrix t = attack::finalize_adjacency(probs, {attack::FinalizeRule::threshold, tau}, unused);
    s.mae_thresholded.push_back({tau, mae_lower_tri(truth, t)});
  }
  return s;
}

BatchMatch batch_match_score(const std::vector<Matrix>& truth, const std::vector<Matrix>& recovered) {
  require(truth.size() == recovered.size(),
          "batch_match_score: " + std::to_string(truth.size()) + " true samples but " +
              std::to_string(recovered.size()) + " recovered");
  require(!truth.empty(), "batch_match_score: empty batch");
  const int b = static_cast<int>(truth.size());
  Matrix cost(b, b);
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < b; ++j) cost(i, j) = rnmse(truth[i], recovered[j]);
  BatchMatch m;
  m.assignment = num::hungarian_assign(cost);
  double sum = 0.0;
  m.min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < b; ++i) {
    const double e = cost(i, m.assignment[i]);
    m.errors.push_back(e);
    sum += e;
    m.min = std::min(m.min, e);
  }
  m.mean = sum / b;
  double var = 0.0;
  for (double e : m.errors) var += (e - m.mean) * (e - m.mean);
  m.std = std::sqrt(var / b);
  return m;
}

}  // namespace glg::metrics
