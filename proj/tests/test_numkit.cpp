#include "glg/numkit.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace glg;
using num::Matrix;
using testutil::mat;
using testutil::max_abs_diff;

TEST_CASE("pseudoinverse of small fixed matrices") {
  CHECK(max_abs_diff(num::pseudoinverse(num::identity(3)), num::identity(3)) < 1e-15);
  CHECK(max_abs_diff(num::pseudoinverse(mat({{2, 0}, {0, 0}})), mat({{0.5, 0}, {0, 0}})) < 1e-15);
}

TEST_CASE("pseudoinverse satisfies the Penrose conditions") {
  num::Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const Matrix m = num::sample_gaussian(rng, 4, 6);
    const Matrix p = num::pseudoinverse(m);
    CHECK(p.rows() == 6);
    CHECK(max_abs_diff(m * p * m, m) < 1e-8);
    CHECK(max_abs_diff(p * m * p, p) < 1e-8);
    CHECK(max_abs_diff((m * p).transpose(), m * p) < 1e-8);
    CHECK(max_abs_diff((p * m).transpose(), p * m) < 1e-8);
  }
}

TEST_CASE("pseudoinverse rejects non-finite input") {
  Matrix m = num::identity(2);
  m(0, 1) = std::nan("");
  CHECK(testutil::error_code_of([&] { num::pseudoinverse(m); }) == ErrorCode::numeric);
}

TEST_CASE("numerical rank and singular values") {
  num::Rng rng(3);
  const Matrix a = num::sample_gaussian(rng, 5, 2);
  const Matrix low = a * a.transpose();
  CHECK(num::numerical_rank(low) == 2);
  const auto s = num::singular_values(mat({{3, 0}, {0, 4}}));
  CHECK(s(0) == doctest::Approx(4));
  CHECK(s(1) == doctest::Approx(3));
}

TEST_CASE("least squares") {
  CHECK(max_abs_diff(num::least_squares(num::identity(2), mat({{3}, {4}})), mat({{3}, {4}})) < 1e-15);

  num::Rng rng(5);
  const Matrix a = num::sample_gaussian(rng, 8, 3);
  const Matrix x = num::sample_gaussian(rng, 3, 2);
  const Matrix b = a * x;
  const Matrix got = num::least_squares(a, b);
  CHECK(max_abs_diff(got, x) < 1e-10);
  CHECK((a * got - b).norm() < 1e-10);

  const Matrix wide = num::sample_gaussian(rng, 3, 7);
  const Matrix rhs = num::sample_gaussian(rng, 3, 2);
  CHECK(max_abs_diff(num::least_squares(wide, rhs), num::pseudoinverse(wide) * rhs) < 1e-10);
}

TEST_CASE("least squares shape mismatch") {
  CHECK(testutil::error_code_of([] { num::least_squares(num::identity(2), Matrix::Zero(3, 1)); }) ==
        ErrorCode::validation);
}

TEST_CASE("adam leaves the variable alone for a zero gradient") {
  num::AdamState adam;
  const Matrix x = mat({{1, -2, 3}});
  CHECK(max_abs_diff(adam.step(x, Matrix::Zero(1, 3)), x) == 0.0);
}

TEST_CASE("adam moves against a constant gradient") {
  num::AdamState adam({0.01, 0.9, 0.999, 1e-8});
  Matrix x = mat({{0.0, 0.0}});
  const Matrix g = mat({{2.0, -3.0}});
  double prev0 = x(0, 0), prev1 = x(0, 1);
  for (int i = 0; i < 100; ++i) {
    x = adam.step(x, g);
    CHECK(x(0, 0) < prev0);
    CHECK(x(0, 1) > prev1);
    prev0 = x(0, 0);
    prev1 = x(0, 1);
  }
}

TEST_CASE("first adam step has magnitude lr") {
  num::AdamState adam({0.05, 0.9, 0.999, 1e-8});
  const Matrix g = mat({{1e-3, -7.0, 0.0}});
  const Matrix x = adam.step(Matrix::Zero(1, 3), g);
  CHECK(x(0, 0) == doctest::Approx(-0.05).epsilon(1e-4));
  CHECK(x(0, 1) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(x(0, 2) == 0.0);
}

TEST_CASE("adam rejects a shape change") {
  num::AdamState adam;
  adam.step(Matrix::Zero(2, 2), Matrix::Ones(2, 2));
  CHECK(testutil::error_code_of([&] { adam.step(Matrix::Zero(1, 2), Matrix::Ones(1, 2)); }) ==
        ErrorCode::validation);
}

TEST_CASE("hungarian on fixed costs") {
  Matrix c = Matrix::Ones(3, 3) - num::identity(3);
  CHECK(num::hungarian_assign(c) == std::vector<int>{0, 1, 2});
  const auto p = num::hungarian_assign(mat({{4, 1}, {2, 3}}));
  CHECK(p == std::vector<int>{1, 0});
  CHECK(num::assignment_cost(mat({{4, 1}, {2, 3}}), p) == 3.0);
}

TEST_CASE("hungarian matches exhaustive search") {
  num::Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    const int n = 1 + t % 6;
    Matrix c(n, n);
    for (int i = 0; i < c.size(); ++i) c.data()[i] = std::floor(10 * rng.uniform());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do best = std::min(best, num::assignment_cost(c, perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(num::assignment_cost(c, num::hungarian_assign(c)) == doctest::Approx(best));
  }
}

TEST_CASE("rng is reproducible and forks are independent") {
  num::Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  num::Rng f1 = num::Rng(42).fork(1), f2 = num::Rng(42).fork(2);
  CHECK(f1.next_u64() != f2.next_u64());
  num::Rng c(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    const long k = c.uniform_int(-2, 3);
    CHECK((k >= -2 && k <= 3));
  }
}

TEST_CASE("rng normal moments") {
  num::Rng rng(9);
  const Matrix z = num::sample_gaussian(rng, 200, 100);
  CHECK(std::abs(z.mean()) < 0.02);
  CHECK(std::abs(z.squaredNorm() / z.size() - 1.0) < 0.03);
}

TEST_CASE("bernoulli sampling") {
  num::Rng rng(1);
  CHECK(num::sample_bernoulli(rng, Matrix::Zero(3, 3)).sum() == 0.0);
  CHECK(num::sample_bernoulli(rng, Matrix::Ones(3, 3)).sum() == 9.0);
  const Matrix draws = num::sample_bernoulli(rng, Matrix::Constant(100, 100, 0.5));
  CHECK(std::abs(draws.mean() - 0.5) < 0.02);
}
