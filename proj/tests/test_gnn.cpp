#include "glg/gnn.hpp"

#include "glg/selftest.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace glg;
using gnn::Architecture;
using gnn::Framework;
using gnn::Task;
using num::Matrix;
using testutil::mat;
using testutil::max_abs_diff;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Architecture arch_of(Framework fw, Task task, int layers, int d, int f, int k, int n = 0) {
  Architecture a;
  a.framework = fw;
  a.task = task;
  a.layers = layers;
  a.in_dim = d;
  a.hidden = f;
  a.classes = k;
  a.num_nodes = task == Task::graph ? n : 0;
  return a;
}

// Scalar-loop evaluation of the model, independent of the vectorized code.
std::vector<double> oracle_logits(const gnn::ModelParams& p, const Matrix& x, const Matrix& s, int target) {
  const auto& arch = p.arch;
  const int n = static_cast<int>(x.rows());
  std::vector<std::vector<double>> h(n, std::vector<double>(x.cols()));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < x.cols(); ++j) h[i][j] = x(i, j);
  for (int l = 0; l < arch.layers; ++l) {
    const auto& t = p.weights.layers[l];
    const int out = static_cast<int>(t.w_agg.rows());
    const int in = static_cast<int>(t.w_agg.cols());
    const bool last_linear = arch.task == Task::node && l == arch.layers - 1;
    std::vector<std::vector<double>> next(n, std::vector<double>(out));
    for (int u = 0; u < n; ++u)
      for (int f = 0; f < out; ++f) {
        double z = t.bias(0, f);
        for (int v = 0; v < n; ++v)
          for (int d = 0; d < in; ++d) z += s(u, v) * h[v][d] * t.w_agg(f, d);
        if (t.w_self.size())
          for (int d = 0; d < in; ++d) z += h[u][d] * t.w_self(f, d);
        next[u][f] = last_linear ? z : sigmoid(z);
      }
    h = next;
  }
  if (arch.task == Task::node) return h[target];
  std::vector<double> logits(arch.classes);
  const int width = static_cast<int>(h[0].size());
  for (int k = 0; k < arch.classes; ++k) {
    double z = p.weights.mlp_bias(0, k);
    for (int u = 0; u < n; ++u)
      for (int f = 0; f < width; ++f) z += p.weights.mlp_weight(k, u * width + f) * h[u][f];
    logits[k] = z;
  }
  return logits;
}

double oracle_loss(const std::vector<double>& logits, int label) {
  double mx = logits[0];
  for (double z : logits) mx = std::max(mx, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return -(logits[label] - mx - std::log(sum));
}

graph::Graph random_graph(num::Rng& rng, int n, int d, int k) {
  auto g = graph::synthetic_graph(rng, n, std::min(2.0, n - 1.0), d, k);
  g.graph_label = static_cast<int>(rng.uniform_int(0, k - 1));
  return g;
}

}  // namespace

TEST_CASE("zero parameters give the uniform loss") {
  num::Rng rng(1);
  for (auto task : {Task::node, Task::graph}) {
    auto arch = arch_of(Framework::sage, task, 2, 3, 4, 5, 6);
    auto p = gnn::init_params(arch, rng);
    for (auto* m : p.weights.list()) m->setZero();
    const auto g = random_graph(rng, 6, 3, 5);
    const auto norm = graph::normalize_adjacency(g, graph::AdjNorm::sage_mean);
    const auto tr = task == Task::node ? gnn::forward_node(p, g, norm, 2) : gnn::forward_graph(p, g, norm);
    CHECK(tr.loss == doctest::Approx(std::log(5.0)).epsilon(1e-14));
  }
}

TEST_CASE("zero readout gives the uniform loss on any graph") {
  num::Rng rng(2);
  auto arch = arch_of(Framework::gcn, Task::graph, 2, 3, 4, 3, 5);
  auto p = gnn::init_params(arch, rng);
  p.weights.mlp_weight.setZero();
  p.weights.mlp_bias.setZero();
  for (int t = 0; t < 3; ++t) {
    const auto g = random_graph(rng, 5, 3, 3);
    const auto tr = gnn::forward_graph(p, g, graph::normalize_adjacency(g, graph::AdjNorm::gcn));
    CHECK(tr.loss == doctest::Approx(std::log(3.0)));
  }
}

TEST_CASE("an isolated node under gcn aggregates only itself") {
  const Matrix s = graph::normalize_adjacency(Matrix::Zero(1, 1), graph::AdjNorm::gcn).matrix;
  CHECK(s(0, 0) == 1.0);
  num::Rng rng(3);
  auto p = gnn::init_params(arch_of(Framework::gcn, Task::node, 1, 3, 4, 2), rng);
  const Matrix x = num::sample_gaussian(rng, 1, 3);
  const auto tr = gnn::forward(p, x, s, 0, 0);
  CHECK(max_abs_diff(tr.layers[0].agg, x) == 0.0);
}

TEST_CASE("sage with an empty graph uses only the self term") {
  num::Rng rng(4);
  auto p = gnn::init_params(arch_of(Framework::sage, Task::node, 1, 3, 4, 3), rng);
  const Matrix x = num::sample_gaussian(rng, 4, 3);
  const Matrix s = Matrix::Zero(4, 4);
  const auto tr = gnn::forward(p, x, s, 1, 0);
  const auto& l = p.weights.layers[0];
  const Matrix want = x.row(1) * l.w_self.transpose() + l.bias;
  CHECK(max_abs_diff(tr.logits, want) < 1e-14);
}

TEST_CASE("forward matches a scalar-loop oracle") {
  num::Rng rng(5);
  for (auto fw : {Framework::gcn, Framework::sage})
    for (auto task : {Task::node, Task::graph})
      for (int layers = 1; layers <= 2; ++layers)
        for (int t = 0; t < 5; ++t) {
          const int n = 5, k = 3;
          auto arch = arch_of(fw, task, layers, 4, 3, k, n);
          auto p = gnn::init_params(arch, rng);
          const auto g = random_graph(rng, n, 4, k);
          const auto norm = graph::normalize_adjacency(g, gnn::adjacency_mode(fw));
          const int target = t % n;
          const auto tr = task == Task::node ? gnn::forward_node(p, g, norm, target)
                                             : gnn::forward_graph(p, g, norm);
          const auto want = oracle_logits(p, g.features, norm.matrix, target);
          for (int c = 0; c < k; ++c) CHECK(tr.logits(c) == doctest::Approx(want[c]).epsilon(1e-12));
          const int label = task == Task::node ? (*g.labels)[target] : *g.graph_label;
          CHECK(tr.loss == doctest::Approx(oracle_loss(want, label)).epsilon(1e-12));
        }
}

TEST_CASE("cross entropy") {
  CHECK(gnn::cross_entropy(gnn::RowVector::Zero(4), 2) == doctest::Approx(std::log(4.0)));
  gnn::RowVector p(3);
  p << 10, 0, 0;
  CHECK(gnn::cross_entropy(p, 0) == doctest::Approx(9.0797e-5).epsilon(1e-3));
  gnn::RowVector q(4);
  q << 0.3, -1.2, 2.5, 0.0;
  for (double c : {-50.0, 3.0, 700.0})
    CHECK(gnn::cross_entropy(q.array() + c, 1) == doctest::Approx(gnn::cross_entropy(q, 1)).epsilon(1e-12));
}

TEST_CASE("a confident correct prediction has vanishing gradients") {
  num::Rng rng(6);
  auto p = gnn::init_params(arch_of(Framework::sage, Task::node, 1, 3, 4, 2), rng);
  auto& l = p.weights.layers[0];
  l.w_agg.setZero();
  l.w_self.setZero();
  l.bias << 60.0, -60.0;
  auto g = random_graph(rng, 4, 3, 2);
  (*g.labels)[1] = 0;
  const auto b = gnn::sample_gradients(p, g, 1);
  CHECK(std::sqrt(b.squared_norm()) < 1e-40);
}

TEST_CASE("first sage layer gradients are rank one in the target features") {
  num::Rng rng(7);
  for (int t = 0; t < 20; ++t) {
    auto p = gnn::init_params(arch_of(Framework::sage, Task::node, 1, 5, 4, 3), rng);
    const auto g = random_graph(rng, 6, 5, 3);
    const int v = t % 6;
    const auto b = gnn::sample_gradients(p, g, v);
    const auto& l = b.grads.layers[0];
    const Matrix s = graph::normalize_adjacency(g, graph::AdjNorm::sage_mean).matrix;
    const Matrix agg = s.row(v) * g.features;
    for (int i = 0; i < l.bias.cols(); ++i) {
      CHECK(max_abs_diff(l.w_self.row(i), l.bias(0, i) * g.features.row(v)) < 1e-12);
      CHECK(max_abs_diff(l.w_agg.row(i), l.bias(0, i) * agg) < 1e-12);
    }
  }
}

TEST_CASE("first gcn layer gradient is rank one in the aggregated features") {
  num::Rng rng(8);
  auto p = gnn::init_params(arch_of(Framework::gcn, Task::node, 1, 4, 4, 3), rng);
  const auto g = random_graph(rng, 7, 4, 3);
  const auto b = gnn::sample_gradients(p, g, 2);
  const Matrix agg = graph::normalize_adjacency(g, graph::AdjNorm::gcn).matrix.row(2) * g.features;
  const auto& l = b.grads.layers[0];
  for (int i = 0; i < l.bias.cols(); ++i) CHECK(max_abs_diff(l.w_agg.row(i), l.bias(0, i) * agg) < 1e-10);
}

TEST_CASE("backward agrees with finite differences") {
  const auto r = selftest::model_gradients(21, 10);
  INFO(r.first_failure);
  CHECK(r.cases == 40);
  CHECK(r.passed());
}

TEST_CASE("the finite-difference check catches a wrong gradient") {
  Matrix x = mat({{0.3, -0.7}});
  auto f = [&] { return x(0, 0) * x(0, 0) + 3.0 * x(0, 1); };
  selftest::FdStats ok, bad;
  selftest::fd_compare(x, f, mat({{0.6, 3.0}}), {}, "right", ok);
  selftest::fd_compare(x, f, mat({{0.6, 3.001}}), {}, "wrong", bad);
  CHECK(ok.failures == 0);
  CHECK(bad.failures == 1);
  CHECK(x(0, 0) == 0.3);
}

TEST_CASE("label inference") {
  num::Rng rng(9);
  int wrong = 0;
  for (int t = 0; t < 1000; ++t) {
    auto arch = arch_of(t % 2 ? Framework::sage : Framework::gcn, Task::node, 1 + t % 2, 3, 4, 2);
    auto p = gnn::init_params(arch, rng);
    auto g = random_graph(rng, 5, 3, 2);
    const int v = t % 5;
    (*g.labels)[v] = 0;
    wrong += gnn::infer_label(gnn::sample_gradients(p, g, v), arch) != 0;
  }
  CHECK(wrong == 0);
}

TEST_CASE("label inference on manufactured gradients") {
  const Matrix x = mat({{0.5, -1.0, 2.0}});
  gnn::RowVector g(3);
  g << -0.7, 0.3, 0.4;
  const Matrix w = g.transpose() * x;
  CHECK(gnn::infer_label(w, &g) == 0);
  CHECK(gnn::infer_label(w, nullptr) == 0);
  gnn::RowVector z = gnn::RowVector::Zero(3);
  CHECK(testutil::error_code_of([&] { gnn::infer_label(Matrix::Zero(3, 3), &z); }) == ErrorCode::ambiguous_label);
}

TEST_CASE("architecture validation") {
  auto a = arch_of(Framework::sage, Task::graph, 2, 3, 4, 2, 0);
  CHECK(testutil::error_code_of([&] { a.validate(); }) == ErrorCode::validation);
  a = arch_of(Framework::sage, Task::node, 2, 3, 4, 1);
  CHECK(testutil::error_code_of([&] { a.validate(); }) == ErrorCode::validation);
}

TEST_CASE("tensor arithmetic") {
  num::Rng rng(10);
  auto p = gnn::init_params(arch_of(Framework::sage, Task::graph, 2, 3, 4, 2, 5), rng);
  gnn::Tensors t = p.weights;
  t += p.weights;
  t *= 0.5;
  const auto a = t.list();
  const auto b = p.weights.list();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(max_abs_diff(*a[i], *b[i]) < 1e-15);
  CHECK(p.weights.names().size() == a.size());
  CHECK(p.weights.zeros_like().same_shape(p.weights));
}
