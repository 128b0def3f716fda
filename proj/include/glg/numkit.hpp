#pragma once

// Dense numeric kernel shared by every other module: matrix aliases,
// SVD-based pseudoinverse and least squares, Adam, Hungarian assignment and a
// platform-independent seeded random source.

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>
#include <vector>

namespace glg::num {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

inline constexpr double kDefaultPinvTol = 1e-10;

bool all_finite(const Matrix& m);
// Throws a numeric error naming `what` when `m` holds NaN or Inf.
void require_finite(const Matrix& m, std::string_view what);
void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what);

Matrix identity(int n);

/// Moore-Penrose pseudoinverse through a thin SVD.
///
/// Singular values at or below `tol * sigma_max` are treated as zero, so a
/// matrix that is exactly rank deficient in exact arithmetic gets the
/// pseudoinverse of its numerical rank.
Matrix pseudoinverse(const Matrix& m, double tol = kDefaultPinvTol);

/// Singular values in decreasing order.
Eigen::VectorXd singular_values(const Matrix& m);

/// Number of singular values above `tol * sigma_max`.
int numerical_rank(const Matrix& m, double tol = kDefaultPinvTol);

/// Minimum-norm solution of a * x ~= b.
Matrix least_squares(const Matrix& a, const Matrix& b, double tol = kDefaultPinvTol);

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment buffers for one optimized variable. Buffers are sized on the first
// step; later steps must present the same shape.
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  Matrix step(const Matrix& var, const Matrix& grad);

  const AdamConfig& config() const { return config_; }
  long steps() const { return step_; }
  const Matrix& first_moment() const { return m_; }
  const Matrix& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Matrix m_;
  Matrix v_;
  long step_ = 0;
};

/// Optimal assignment for a square cost matrix: result[row] = column.
std::vector<int> hungarian_assign(const Matrix& cost);

double assignment_cost(const Matrix& cost, const std::vector<int>& perm);

// splitmix64-seeded xoshiro256** generator. The distributions are
// implemented here rather than taken from <random> because the standard
// distributions are not specified bit-for-bit across library vendors.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();
  // Uniform integer on the closed range [lo, hi].
  long uniform_int(long lo, long hi);

  std::uint64_t seed() const { return seed_; }

  // Independent stream derived from this generator's seed and `stream`.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

Matrix sample_gaussian(Rng& rng, int rows, int cols, double stddev = 1.0);
Matrix sample_bernoulli(Rng& rng, const Matrix& probs);
long sample_uniform_int(Rng& rng, long lo, long hi);

}  // namespace glg::num
