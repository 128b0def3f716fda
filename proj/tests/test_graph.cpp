#include "glg/graph.hpp"

#include "test_util.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace glg;
using graph::AdjNorm;
using graph::Graph;
using num::Matrix;
using testutil::mat;
using testutil::max_abs_diff;

namespace {

Graph from_adjacency(const Matrix& a, int dim = 2) {
  Graph g;
  g.adjacency = a;
  g.features = Matrix::Zero(a.rows(), dim);
  return g;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("glg_test_graph_" + name)).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

TEST_CASE("normalization of a two-node path") {
  const Matrix a = mat({{0, 1}, {1, 0}});
  CHECK(max_abs_diff(graph::normalize_adjacency(a, AdjNorm::gcn).matrix, mat({{0.5, 0.5}, {0.5, 0.5}})) < 1e-15);
  CHECK(max_abs_diff(graph::normalize_adjacency(a, AdjNorm::sage_mean).matrix, mat({{0, 1}, {1, 0}})) == 0.0);
}

TEST_CASE("gcn normalization matches the entrywise formula") {
  num::Rng rng(4);
  const auto g = graph::er_graph(rng, 6, 0.5, 3);
  const Matrix s = graph::normalize_adjacency(g, AdjNorm::gcn).matrix;
  const Matrix ai = g.adjacency + num::identity(6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      const double di = ai.row(i).sum(), dj = ai.row(j).sum();
      CHECK(s(i, j) == doctest::Approx(ai(i, j) / std::sqrt(di * dj)).epsilon(1e-14));
    }
}

TEST_CASE("sage normalization keeps isolated rows at zero") {
  const Matrix a = mat({{0, 1, 0}, {1, 0, 0}, {0, 0, 0}});
  const Matrix s = graph::normalize_adjacency(a, AdjNorm::sage_mean).matrix;
  CHECK(s.row(2).norm() == 0.0);
  CHECK(s(0, 1) == 1.0);
}

TEST_CASE("sage normalization clamps small relaxed degrees") {
  const Matrix a = mat({{0, 0.25}, {0.25, 0}});
  CHECK(max_abs_diff(graph::normalize_adjacency(a, AdjNorm::sage_mean).matrix, a) == 0.0);
}

TEST_CASE("laplacian") {
  CHECK(max_abs_diff(graph::laplacian(Matrix::Zero(3, 3)), num::identity(3)) == 0.0);
  CHECK(max_abs_diff(graph::laplacian(mat({{0, 1}, {1, 0}})), mat({{1, -1}, {-1, 1}})) < 1e-15);

  num::Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto g = graph::er_graph(rng, 7, 0.4, 1);
    const Matrix x = num::sample_gaussian(rng, 7, 1);
    double energy = 0.0;
    for (int i = 0; i < 7; ++i)
      for (int j = i + 1; j < 7; ++j)
        if (g.adjacency(i, j) != 0.0) {
          const double d = x(i, 0) / std::sqrt(g.degree(i)) - x(j, 0) / std::sqrt(g.degree(j));
          energy += d * d;
        }
    const double quad = (x.transpose() * graph::laplacian(g) * x)(0, 0);
    // Isolated nodes keep an identity row, which adds x_i^2.
    double iso = 0.0;
    for (int i = 0; i < 7; ++i)
      if (g.degree(i) == 0) iso += x(i, 0) * x(i, 0);
    CHECK(quad == doctest::Approx(energy + iso).epsilon(1e-10));
  }
}

TEST_CASE("erdos-renyi extremes and edge count") {
  num::Rng rng(2);
  CHECK(graph::er_graph(rng, 10, 0.0, 2).num_edges() == 0);
  CHECK(graph::er_graph(rng, 10, 1.0, 2).num_edges() == 45);
  double total = 0.0;
  for (int t = 0; t < 200; ++t) total += graph::er_graph(rng, 50, 4.0 / 49.0, 1).num_edges();
  CHECK(std::abs(total / 200 - 100.0) < 15.0);
}

TEST_CASE("synthetic graph") {
  num::Rng rng(6);
  const auto g = graph::synthetic_graph(rng, 50, 4, 10, 2);
  CHECK(g.num_edges() == 100);
  CHECK(g.feature_dim() == 10);
  g.validate(2);

  const auto empty = graph::synthetic_graph(rng, 5, 0, 3, 3);
  CHECK(empty.num_edges() == 0);
  REQUIRE(empty.labels);
  CHECK(empty.labels->size() == 5);

  const auto big = graph::synthetic_graph(rng, 10000, 0, 1, 4);
  std::vector<int> hist(4, 0);
  for (int y : *big.labels) ++hist[y];
  for (int h : hist) CHECK(std::abs(h / 10000.0 - 0.25) < 0.03);
}

TEST_CASE("dummy tree") {
  num::Rng rng(1);
  const auto path = graph::dummy_tree(rng, 2, 1, 3);
  CHECK(max_abs_diff(path.adjacency, mat({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}})) == 0.0);

  const auto t = graph::dummy_tree(rng, 2, 10, 4);
  CHECK(t.num_nodes() == 111);
  CHECK(t.num_edges() == 110);
  CHECK(t.degree(0) == 10);
  for (int v = 1; v <= 10; ++v) CHECK(t.degree(v) == 11);
  for (int v = 11; v < 111; ++v) CHECK(t.degree(v) == 1);
}

TEST_CASE("k-hop egonet") {
  num::Rng rng(12);
  const auto g = graph::er_graph(rng, 15, 0.15, 2);
  const auto single = graph::khop_egonet(g, 3, 0);
  CHECK(single.graph.num_nodes() == 1);
  CHECK(single.index == std::vector<int>{3});

  Matrix star = Matrix::Zero(5, 5);
  for (int v = 1; v < 5; ++v) star(0, v) = star(v, 0) = 1;
  CHECK(graph::khop_egonet(from_adjacency(star), 0, 1).graph.num_nodes() == 5);

  // Floyd-Warshall oracle for the node set.
  const int n = g.num_nodes();
  Matrix d = Matrix::Constant(n, n, 1e9);
  for (int i = 0; i < n; ++i) {
    d(i, i) = 0;
    for (int j = 0; j < n; ++j)
      if (g.adjacency(i, j) != 0.0) d(i, j) = 1;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  for (int c = 0; c < n; ++c) {
    const auto ego = graph::khop_egonet(g, c, 3);
    CHECK(ego.index.front() == c);
    std::set<int> got(ego.index.begin(), ego.index.end()), want;
    for (int j = 0; j < n; ++j)
      if (d(c, j) <= 3) want.insert(j);
    CHECK(got == want);
    for (int i = 0; i < ego.graph.num_nodes(); ++i)
      for (int j = 0; j < ego.graph.num_nodes(); ++j)
        CHECK(ego.graph.adjacency(i, j) == g.adjacency(ego.index[i], ego.index[j]));
  }
}

TEST_CASE("graph files") {
  const auto fx = temp_path("x.csv"), fe = temp_path("e.txt"), fl = temp_path("y.txt");
  write_text(fx, "1,2\n3,4\n");
  write_text(fe, "0 1\n");
  auto g = graph::load_graph({fx, fe, ""});
  CHECK(max_abs_diff(g.adjacency, mat({{0, 1}, {1, 0}})) == 0.0);
  CHECK(g.features(1, 0) == 3.0);

  write_text(fe, "0 1\n1 0\n");
  CHECK(graph::load_graph({fx, fe, ""}).num_edges() == 1);

  write_text(fe, "0 5\n");
  CHECK(testutil::error_code_of([&] { graph::load_graph({fx, fe, ""}); }) == ErrorCode::validation);
  write_text(fe, "0 1\nzero one\n");
  try {
    graph::load_graph({fx, fe, ""});
    FAIL("malformed edge line accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  write_text(fe, "0 1\n");
  write_text(fl, "0\n");
  CHECK(testutil::error_code_of([&] { graph::load_graph({fx, fe, fl}); }) == ErrorCode::validation);
  CHECK(testutil::error_code_of([&] { graph::load_graph({temp_path("missing"), fe, ""}); }) == ErrorCode::io);

  num::Rng rng(3);
  const auto s = graph::synthetic_graph(rng, 12, 3, 4, 3);
  graph::write_graph(s, {fx, fe, fl});
  const auto back = graph::load_graph({fx, fe, fl});
  CHECK(max_abs_diff(back.adjacency, s.adjacency) == 0.0);
  CHECK(max_abs_diff(back.features, s.features) == 0.0);
  CHECK(*back.labels == *s.labels);
}

TEST_CASE("graph validation") {
  Graph g = from_adjacency(mat({{0, 1}, {0, 0}}));
  CHECK(testutil::error_code_of([&] { g.validate(); }) == ErrorCode::validation);
  g = from_adjacency(mat({{1, 0}, {0, 0}}));
  CHECK(testutil::error_code_of([&] { g.validate(); }) == ErrorCode::validation);
  g = from_adjacency(mat({{0, 1}, {1, 0}}));
  g.labels = std::vector<int>{0, 3};
  CHECK(testutil::error_code_of([&] { g.validate(2); }) == ErrorCode::validation);
}
