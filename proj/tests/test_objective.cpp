#include "glg/objective.hpp"

#include "glg/graph.hpp"
#include "glg/selftest.hpp"
#include "test_util.hpp"

using namespace glg;
using attack::Distance;
using gnn::GradientBundle;
using num::Matrix;
using testutil::mat;
using testutil::max_abs_diff;

namespace {

GradientBundle random_bundle(num::Rng& rng) {
  gnn::Architecture a;
  a.in_dim = 3;
  a.hidden = 4;
  a.classes = 2;
  GradientBundle b{gnn::init_params(a, rng).weights};
  for (auto* m : b.grads.list()) *m = num::sample_gaussian(rng, m->rows(), m->cols());
  return b;
}

Eigen::VectorXd flat(const GradientBundle& b) {
  std::vector<double> v;
  for (const auto* m : b.grads.list()) v.insert(v.end(), m->data(), m->data() + m->size());
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

TEST_CASE("squared l2 matching") {
  num::Rng rng(1);
  const auto g = random_bundle(rng);
  CHECK(attack::grad_match_l2(g, g).value == 0.0);
  auto bumped = g;
  bumped.grads.layers[0].bias(0, 1) += 1.0;
  CHECK(attack::grad_match_l2(bumped, g).value == doctest::Approx(1.0));
  const auto h = random_bundle(rng);
  CHECK(attack::grad_match_l2(h, g).value == doctest::Approx((flat(h) - flat(g)).squaredNorm()));
}

TEST_CASE("cosine matching") {
  num::Rng rng(2);
  const auto g = random_bundle(rng);
  CHECK(attack::grad_match_cosine(g, g).value == 0.0);
  auto neg = g;
  neg.grads *= -1.0;
  CHECK(attack::grad_match_cosine(neg, g).value == doctest::Approx(2.0));
  auto scaled = g;
  scaled.grads *= 3.0;
  CHECK(attack::grad_match_cosine(scaled, g).value == doctest::Approx(0.0).epsilon(1e-15));
  const auto h = random_bundle(rng);
  const auto u = flat(h), v = flat(g);
  CHECK(attack::grad_match_cosine(h, g).value == doctest::Approx(1.0 - u.dot(v) / (u.norm() * v.norm())));
  GradientBundle zero{g.grads.zeros_like()};
  CHECK(testutil::error_code_of([&] { attack::grad_match_cosine(zero, g); }) == ErrorCode::degenerate);
}

TEST_CASE("matching gradients with respect to the dummy bundle") {
  num::Rng rng(3);
  const auto g = random_bundle(rng);
  for (auto d : {Distance::l2, Distance::cosine}) {
    auto h = random_bundle(rng);
    const auto mv = attack::grad_match(d, h, g);
    selftest::FdStats s;
    auto hs = h.grads.list();
    const auto gs = mv.grad.list();
    for (std::size_t i = 0; i < hs.size(); ++i)
      selftest::fd_compare(*hs[i], [&] { return attack::grad_match(d, h, g).value; }, *gs[i], {}, "bundle", s);
    INFO(s.first_failure);
    CHECK(s.failures == 0);
  }
}

TEST_CASE("smoothness") {
  num::Rng rng(4);
  CHECK(attack::smoothness(num::sample_gaussian(rng, 4, 3), Matrix::Zero(4, 4)).value == 0.0);

  // 4-cycle: 2-regular, so equal features are equally scaled.
  const Matrix cycle = mat({{0, 1, 0, 1}, {1, 0, 1, 0}, {0, 1, 0, 1}, {1, 0, 1, 0}});
  const Matrix same = Matrix::Ones(4, 1) * num::sample_gaussian(rng, 1, 3);
  CHECK(attack::smoothness(same, cycle).value == doctest::Approx(0.0).epsilon(1e-14));

  for (int t = 0; t < 10; ++t) {
    graph::Graph g;
    do g = graph::er_graph(rng, 8, 0.4, 3);
    while ([&] {
      for (int i = 0; i < 8; ++i)
        if (g.degree(i) == 0) return true;
      return false;
    }());
    const double want = (g.features.transpose() * graph::laplacian(g) * g.features).trace();
    CHECK(attack::smoothness(g.features, g.adjacency).value == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("regularizer gradients") {
  const auto r = selftest::regularizer_gradients(5, 30);
  INFO(r.first_failure);
  CHECK(r.passed());
}

TEST_CASE("frobenius penalty") {
  num::Rng rng(6);
  CHECK(attack::frobenius_penalty(Matrix::Zero(3, 3)) == 0.0);
  CHECK(attack::frobenius_penalty(num::identity(3)) == 3.0);
  const Matrix m = num::sample_gaussian(rng, 4, 4);
  CHECK(attack::frobenius_penalty(m) == doctest::Approx(m.array().square().sum()));
}

TEST_CASE("projection") {
  const Matrix p = attack::project_interval(mat({{0, 1.5}, {-0.2, 0.4}}));
  CHECK(p(0, 1) == 1.0);
  CHECK(p(1, 0) == 0.0);
  const Matrix q = attack::project_interval(mat({{0, 0.4, 1.5}, {0.4, 0, -0.2}, {1.5, -0.2, 0}}));
  CHECK(q(0, 1) == 0.4);
  const Matrix in = mat({{0, 0.3}, {0.7, 0}});
  CHECK(max_abs_diff(attack::project_interval(in), in) == 0.0);
  CHECK(max_abs_diff(attack::project_interval(q), q) == 0.0);
  CHECK(attack::project_interval(mat({{0.5, 0}, {0, 2}})).diagonal().norm() == 0.0);
}

TEST_CASE("finalization") {
  num::Rng rng(7);
  using attack::FinalizeRule;
  for (auto rule : {FinalizeRule::bernoulli, FinalizeRule::threshold})
    CHECK(attack::finalize_adjacency(Matrix::Zero(4, 4), {rule, 0.5}, rng).sum() == 0.0);
  const Matrix full = attack::finalize_adjacency(Matrix::Ones(4, 4), {FinalizeRule::bernoulli, 0.5}, rng);
  CHECK(max_abs_diff(full, Matrix::Ones(4, 4) - num::identity(4)) == 0.0);
  const Matrix t = attack::finalize_adjacency(mat({{0, 0.9}, {0.9, 0}}), {FinalizeRule::threshold, 0.5}, rng);
  CHECK(max_abs_diff(t, mat({{0, 1}, {1, 0}})) == 0.0);

  const Matrix probs = mat({{0, 0.2, 0.6}, {0.2, 0, 0.45}, {0.6, 0.45, 0}});
  const Matrix th = attack::finalize_adjacency(probs, {FinalizeRule::threshold, 0.5}, rng);
  // Min-max over the off-diagonal maps 0.2 -> 0, 0.45 -> 0.625 and 0.6 -> 1.
  CHECK(th(0, 2) == 1.0);
  CHECK(th(1, 2) == 1.0);
  CHECK(th(0, 1) == 0.0);
  for (int s = 0; s < 20; ++s) {
    const Matrix b = attack::finalize_adjacency(probs, {FinalizeRule::bernoulli, 0.5}, rng);
    CHECK(max_abs_diff(b, b.transpose()) == 0.0);
    CHECK(b.diagonal().norm() == 0.0);
  }
}
