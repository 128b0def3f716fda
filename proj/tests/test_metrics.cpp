#include "glg/metrics.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace glg;
using num::Matrix;
using testutil::error_code_of;
using testutil::mat;

TEST_CASE("tabulated metric examples") {
  oracle::Report r;
  oracle::check_tabulated(r);
  for (const auto& f : r.failures) FAIL_CHECK(f);
  CHECK(r.cases > 15);
}

TEST_CASE("auc agrees with the pairwise count") {
  num::Rng rng(1);
  oracle::Report r;
  oracle::check_auc(r, rng, 50);
  for (const auto& f : r.failures) FAIL_CHECK(f);
  CHECK(r.cases > 100);
  const Matrix one_class = Matrix::Zero(3, 3);
  CHECK(error_code_of([&] { metrics::auc(one_class, one_class); }) == ErrorCode::undefined_metric);
}

TEST_CASE("hungarian-based matching agrees with exhaustive search") {
  num::Rng rng(2);
  oracle::Report r;
  oracle::check_hungarian(r, rng, 20);
  for (const auto& f : r.failures) FAIL_CHECK(f);
}

TEST_CASE("accuracy matches an entry loop") {
  num::Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 6;
    const Matrix a = oracle::random_adjacency(rng, n, 0.4);
    const Matrix b = oracle::random_adjacency(rng, n, 0.4);
    int same = 0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) same += a(i, j) == b(i, j);
    CHECK(metrics::adjacency_accuracy(a, b) == doctest::Approx(double(same) / (n * n)));
  }
  CHECK(error_code_of([] { metrics::adjacency_accuracy(mat({{0, 0.5}, {0.5, 0}}), Matrix::Zero(2, 2)); }) ==
        ErrorCode::validation);
}

TEST_CASE("scores are invariant under node relabeling") {
  num::Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const int n = 6;
    Matrix a = oracle::random_adjacency(rng, n, 0.5);
    if (!oracle::has_both_classes(a)) continue;
    Matrix probs = num::sample_gaussian(rng, n, n).cwiseAbs();
    probs = (probs + probs.transpose()).eval() * 0.2;
    Matrix bin = oracle::random_adjacency(rng, n, 0.5);
    bin(1, 0) = bin(0, 1) = 1;
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
    perm.setIdentity();
    std::swap(perm.indices()[0], perm.indices()[4]);
    std::swap(perm.indices()[2], perm.indices()[5]);
    const auto p = [&](const Matrix& m) { return Matrix(perm * m * perm.transpose()); };
    const auto s0 = metrics::score_adjacency(a, probs, bin, {0.5});
    const auto s1 = metrics::score_adjacency(p(a), p(probs), p(bin), {0.5});
    CHECK(s0.accuracy == doctest::Approx(s1.accuracy));
    CHECK(s0.auc == doctest::Approx(s1.auc));
    CHECK(s0.ap == doctest::Approx(s1.ap));
    CHECK(s0.mae == doctest::Approx(s1.mae));
    CHECK(s0.mae_thresholded[0].mae == doctest::Approx(s1.mae_thresholded[0].mae));
  }
}

TEST_CASE("score_adjacency marks undefined scores as nan") {
  const Matrix empty = Matrix::Zero(3, 3);
  const auto s = metrics::score_adjacency(empty, empty, empty);
  CHECK(std::isnan(s.auc));
  CHECK(std::isnan(s.ap));
  CHECK(s.accuracy == 1.0);
  CHECK(s.mae == 0.0);
}

TEST_CASE("rnmse bound and row mean") {
  num::Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Matrix x = num::sample_gaussian(rng, 3, 4);
    const Matrix y = num::sample_gaussian(rng, 3, 4);
    CHECK(metrics::rnmse(x, y) <= (x.norm() + y.norm()) / x.norm() + 1e-12);
  }
  const Matrix x = mat({{3, 4}, {1, 0}});
  const Matrix y = mat({{3, 0}, {1, 0}});
  CHECK(metrics::rnmse_rows(x, y) == doctest::Approx(0.4));
  CHECK(error_code_of([] { metrics::batch_match_score({Matrix::Ones(1, 1)}, {}); }) ==
        ErrorCode::validation);
}
