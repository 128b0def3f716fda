#include "glg/numkit.hpp"

#include "glg/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace glg::num {

bool all_finite(const Matrix& m) { return m.allFinite(); }

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) fail(ErrorCode::numeric, std::string(what) + ": non-finite entries");
}

void require_same_shape(const Matrix& a, const Matrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::validation,
         std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()));
  }
}

Matrix identity(int n) { return Matrix::Identity(n, n); }

namespace {

using ColMatrix = Eigen::MatrixXd;

Eigen::BDCSVD<ColMatrix> thin_svd(const Matrix& m) {
  require_finite(m, "svd input");
  Eigen::BDCSVD<ColMatrix> svd(ColMatrix(m), Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) fail(ErrorCode::numeric, "SVD did not converge");
  return svd;
}

}  // namespace

Matrix pseudoinverse(const Matrix& m, double tol) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  const auto svd = thin_svd(m);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff && s(i) > 0.0) inv(i) = 1.0 / s(i);
  }
  const auto k = s.size();
  Matrix out = svd.matrixV().leftCols(k) * inv.asDiagonal() * svd.matrixU().leftCols(k).transpose();
  require_finite(out, "pseudoinverse");
  return out;
}

Eigen::VectorXd singular_values(const Matrix& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  require_finite(m, "svd input");
  const Eigen::BDCSVD<ColMatrix> svd{ColMatrix(m)};
  if (svd.info() != Eigen::Success) fail(ErrorCode::numeric, "SVD did not converge");
  return svd.singularValues();
}

int numerical_rank(const Matrix& m, double tol) {
  const Eigen::VectorXd s = singular_values(m);
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++r;
  }
  return r;
}

Matrix least_squares(const Matrix& a, const Matrix& b, double tol) {
  if (a.rows() != b.rows()) {
    fail(ErrorCode::validation, "least_squares: a has " + std::to_string(a.rows()) +
                                    " rows but b has " + std::to_string(b.rows()));
  }
  return pseudoinverse(a, tol) * b;
}

Matrix AdamState::step(const Matrix& var, const Matrix& grad) {
  require_same_shape(var, grad, "adam_step");
  if (step_ == 0) {
    m_ = Matrix::Zero(var.rows(), var.cols());
    v_ = Matrix::Zero(var.rows(), var.cols());
  } else {
    require_same_shape(m_, var, "adam_step buffers");
  }
  ++step_;
  const auto& c = config_;
  m_ = c.beta1 * m_ + (1.0 - c.beta1) * grad;
  v_ = c.beta2 * v_ + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step_));
  Matrix out = var;
  out.array() -= c.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + c.eps);
  return out;
}

// Shortest augmenting path with row/column potentials, O(n^3).
std::vector<int> hungarian_assign(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    fail(ErrorCode::validation, "hungarian_assign: cost matrix must be square, got " +
                                    std::to_string(cost.rows()) + "x" +
                                    std::to_string(cost.cols()));
  }
  require_finite(cost, "hungarian_assign");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based bookkeeping; index 0 is the virtual start column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(n, -1);
  for (int j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double assignment_cost(const Matrix& cost, const std::vector<int>& perm) {
  double total = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) total += cost(static_cast<Eigen::Index>(i), perm[i]);
  return total;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

// Marsaglia polar method; the second variate of each pair is cached.
double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double a, b, s;
  do {
    a = 2.0 * uniform() - 1.0;
    b = 2.0 * uniform() - 1.0;
    s = a * a + b * b;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = b * scale;
  has_spare_ = true;
  return a * scale;
}

long Rng::uniform_int(long lo, long hi) {
  if (lo > hi) fail(ErrorCode::validation, "uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<long>(next_u64());
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return lo + static_cast<long>(x % span);
}

Rng Rng::fork(std::uint64_t stream) const {
  std::uint64_t state = seed_ ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  return Rng(splitmix64(state));
}

Matrix sample_gaussian(Rng& rng, int rows, int cols, double stddev) {
  require(rows >= 0 && cols >= 0, "sample_gaussian: negative shape");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
  return m;
}

Matrix sample_bernoulli(Rng& rng, const Matrix& probs) {
  Matrix m(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs.data()[i];
    if (!(p >= 0.0 && p <= 1.0)) {
      fail(ErrorCode::validation, "sample_bernoulli: probability " + std::to_string(p) +
                                      " outside [0,1]");
    }
    m.data()[i] = rng.uniform() < p ? 1.0 : 0.0;
  }
  return m;
}

long sample_uniform_int(Rng& rng, long lo, long hi) { return rng.uniform_int(lo, hi); }

}  // namespace glg::num
