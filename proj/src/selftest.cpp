#include "glg/selftest.hpp"

#include "glg/analytic.hpp"
#include "glg/error.hpp"
#include "glg/gnn.hpp"
#include "glg/graph.hpp"
#include "glg/inversion.hpp"
#include "glg/objective.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace glg::selftest {

using num::Matrix;
using num::Rng;

namespace {

int pick(Rng& rng, int lo, int hi) { return static_cast<int>(rng.uniform_int(lo, hi)); }

double rel_error(const Matrix& truth, const Matrix& got) {
  const double n = truth.norm();
  return n > 0.0 ? (truth - got).norm() / n : (truth - got).norm();
}

// Symmetric weights in [0.2, 1] on a random support, zero diagonal, with
// every row sum kept away from 1 so that the sage degree clamp is smooth.
// `connected_rows` also rules out isolated nodes.
Matrix relaxed_adjacency(Rng& rng, int n, bool connected_rows = false) {
  for (;;) {
    Matrix a = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j)
        if (rng.uniform() < 0.6) a(i, j) = a(j, i) = 0.2 + 0.8 * rng.uniform();
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      const double d = a.row(i).sum();
      ok &= std::abs(d - 1.0) > 1e-3 && (!connected_rows || d > 0.0);
    }
    if (ok) return a;
  }
}

gnn::Architecture random_arch(Rng& rng, gnn::Framework fw, gnn::Task task, int n) {
  gnn::Architecture a;
  a.framework = fw;
  a.task = task;
  a.layers = pick(rng, 1, 2);
  a.in_dim = pick(rng, 1, 6);
  a.hidden = pick(rng, 1, 5);
  a.classes = pick(rng, 2, 4);
  if (task == gnn::Task::graph) a.num_nodes = n;
  return a;
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

void note(SuiteResult& r, bool ok, double err, const std::string& what) {
  ++r.cases;
  r.worst = std::max(r.worst, err);
  if (!ok) {
    if (r.failures == 0) r.first_failure = what;
    ++r.failures;
  }
}

void merge_fd(SuiteResult& r, const FdStats& s) {
  ++r.cases;
  r.worst = std::max(r.worst, s.worst_relative);
  if (s.failures > 0) {
    if (r.failures == 0) r.first_failure = s.first_failure;
    ++r.failures;
  }
}

constexpr gnn::Framework kFrameworks[] = {gnn::Framework::gcn, gnn::Framework::sage};
constexpr gnn::Task kTasks[] = {gnn::Task::node, gnn::Task::graph};

}  // namespace

void fd_compare(Matrix& x, const std::function<double()>& f, const Matrix& analytic,
                const FdTolerance& tol, const std::string& what, FdStats& stats) {
  require(analytic.rows() == x.rows() && analytic.cols() == x.cols(),
          "fd_compare: gradient shape mismatch for " + what);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double& v = x.data()[k];
    const double v0 = v;
    v = v0 + tol.step;
    const double fp = f();
    v = v0 - tol.step;
    const double fm = f();
    v = v0;
    const double fd = (fp - fm) / (2.0 * tol.step);
    const double an = analytic.data()[k];
    const double abs_err = std::abs(fd - an);
    const double scale = std::max(std::abs(fd), std::abs(an));
    const double rel = scale > 0.0 ? abs_err / scale : 0.0;
    ++stats.coordinates;
    const bool ok = abs_err < tol.absolute || rel < tol.relative;
    if (!ok) {
      if (stats.failures == 0) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%s[%ld]: analytic %.10g, finite difference %.10g",
                      what.c_str(), static_cast<long>(k), an, fd);
        stats.first_failure = buf;
      }
      ++stats.failures;
    }
    if (abs_err >= tol.absolute) stats.worst_relative = std::max(stats.worst_relative, rel);
  }
}

SuiteResult model_gradients(std::uint64_t seed, int per_config) {
  SuiteResult r;
  r.name = "model gradients";
  Timer t;
  Rng rng(seed);
  const FdTolerance tol;
  for (auto fw : kFrameworks)
    for (auto task : kTasks)
      for (int c = 0; c < per_config; ++c) {
        const int n = pick(rng, 2, 10);
        const auto arch = random_arch(rng, fw, task, n);
        gnn::ModelParams params = gnn::init_params(arch, rng);
        Matrix x = num::sample_gaussian(rng, n, arch.in_dim);
        Matrix a = relaxed_adjacency(rng, n);
        const auto mode = gnn::adjacency_mode(fw);
        const int target = task == gnn::Task::node ? pick(rng, 0, n - 1) : -1;
        const int label = pick(rng, 0, arch.classes - 1);
        const std::string tag = std::string(gnn::to_string(fw)) + "/" + gnn::to_string(task) +
                                " case " + std::to_string(c);

        const auto norm = graph::normalize_adjacency(a, mode);
        const auto trace = gnn::forward(params, x, norm.matrix, target, label);
        const auto g = gnn::backward(params, trace, x, norm, {true, true, true}, &a);

        FdStats s;
        Matrix s_mat = norm.matrix;
        auto loss_params = [&] { return gnn::forward(params, x, s_mat, target, label).loss; };
        auto ws = params.weights.list();
        const auto gs = g.params.grads.list();
        const auto names = params.weights.names();
        for (std::size_t k = 0; k < ws.size(); ++k)
          fd_compare(*ws[k], loss_params, *gs[k], tol, tag + " " + names[k], s);
        fd_compare(x, loss_params, *g.features, tol, tag + " features", s);
        fd_compare(s_mat, loss_params, *g.normalized, tol, tag + " normalized", s);
        auto loss_raw = [&] {
          return gnn::forward(params, x, graph::normalize_adjacency(a, mode).matrix, target, label).loss;
        };
        fd_compare(a, loss_raw, *g.adjacency, tol, tag + " adjacency", s);
        merge_fd(r, s);
      }
  r.seconds = t.seconds();
  return r;
}

SuiteResult matching_gradients(std::uint64_t seed, int per_config) {
  SuiteResult r;
  r.name = "matching gradients";
  Timer t;
  Rng rng(seed);
  const FdTolerance tol;
  for (auto fw : kFrameworks)
    for (auto task : kTasks)
      for (int c = 0; c < per_config; ++c) {
        const int n = pick(rng, 3, 7);
        const auto arch = random_arch(rng, fw, task, n);
        const auto params = gnn::init_params(arch, rng);
        const auto mode = gnn::adjacency_mode(fw);
        // Alternate between the dense relaxed path and a fixed sparse one.
        const bool sparse = c % 2 == 1;
        attack::MatchProblem pb;
        pb.params = &params;
        pb.distance = c % 3 == 2 ? attack::Distance::l2 : attack::Distance::cosine;
        std::vector<Matrix> raw;
        const int instances = pick(rng, 1, 2);
        for (int i = 0; i < instances; ++i) {
          attack::DummyInstance d;
          d.features = num::sample_gaussian(rng, n, arch.in_dim);
          const Matrix a = sparse ? graph::er_graph(rng, n, 0.4, 1).adjacency : relaxed_adjacency(rng, n);
          d.normalized = graph::normalize_adjacency(a, mode).matrix;
          d.want_features = true;
          d.want_normalized = !sparse;
          if (sparse) d.normalized_sparse = attack::to_sparse(d.normalized);
          pb.instances.push_back(d);
          const int samples = task == gnn::Task::node ? pick(rng, 1, 2) : 1;
          for (int s = 0; s < samples; ++s)
            pb.samples.push_back({i, task == gnn::Task::node ? pick(rng, 0, n - 1) : -1,
                                  pick(rng, 0, arch.classes - 1)});
        }
        gnn::GradientBundle leaked{params.weights.zeros_like()};
        for (auto* m : leaked.grads.list()) *m = num::sample_gaussian(rng, m->rows(), m->cols());
        attack::MatchGroup group{&leaked, {}};
        for (int s = 0; s < static_cast<int>(pb.samples.size()); ++s) group.samples.push_back(s);
        pb.groups.push_back(group);

        const auto ev = attack::evaluate_match(pb, true);
        const std::string tag = std::string(gnn::to_string(fw)) + "/" + gnn::to_string(task) +
                                (sparse ? " sparse" : " dense") + " case " + std::to_string(c);
        FdStats s;
        auto value = [&] {
          if (sparse)
            for (auto& d : pb.instances) d.normalized_sparse = attack::to_sparse(d.normalized);
          return attack::evaluate_match(pb, false).value;
        };
        for (int i = 0; i < instances; ++i) {
          auto& d = pb.instances[i];
          fd_compare(d.features, value, *ev.grad_features[i], tol, tag + " features", s);
          if (d.want_normalized)
            fd_compare(d.normalized, value, *ev.grad_normalized[i], tol, tag + " normalized", s);
        }
        merge_fd(r, s);
      }
  r.seconds = t.seconds();
  return r;
}

SuiteResult regularizer_gradients(std::uint64_t seed, int cases) {
  SuiteResult r;
  r.name = "regularizer gradients";
  Timer t;
  Rng rng(seed);
  const FdTolerance tol;
  for (int c = 0; c < cases; ++c) {
    const int n = pick(rng, 2, 9);
    Matrix x = num::sample_gaussian(rng, n, pick(rng, 1, 5));
    // The normalization is singular at isolated nodes.
    Matrix a = relaxed_adjacency(rng, n, true);
    const auto sm = attack::smoothness(x, a, true, true);
    FdStats s;
    auto value = [&] { return attack::smoothness(x, a).value; };
    fd_compare(x, value, *sm.grad_features, tol, "smoothness features", s);
    fd_compare(a, value, *sm.grad_adjacency, tol, "smoothness adjacency", s);
    auto frob = [&] { return attack::frobenius_penalty(a); };
    fd_compare(a, frob, 2.0 * a, tol, "frobenius", s);
    merge_fd(r, s);
  }
  r.seconds = t.seconds();
  return r;
}

SuiteResult label_inference(std::uint64_t seed, int per_task) {
  SuiteResult r;
  r.name = "label inference";
  Timer t;
  Rng rng(seed);
  for (auto task : kTasks)
    for (int c = 0; c < per_task; ++c) {
      const auto fw = kFrameworks[c % 2];
      const int n = pick(rng, 2, 10);
      auto arch = random_arch(rng, fw, task, n);
      arch.classes = pick(rng, 2, 10);
      const auto params = gnn::init_params(arch, rng);
      auto g = graph::synthetic_graph(rng, n, std::min(2.0, n - 1.0), arch.in_dim, arch.classes);
      g.graph_label = pick(rng, 0, arch.classes - 1);
      const int target = task == gnn::Task::node ? pick(rng, 0, n - 1) : -1;
      const int truth = task == gnn::Task::node ? (*g.labels)[target] : *g.graph_label;
      const auto bundle = gnn::sample_gradients(params, g, target);
      int got = -1;
      try {
        got = gnn::infer_label(bundle, arch);
      } catch (const Error&) {
      }
      note(r, got == truth, got == truth ? 0.0 : 1.0,
           std::string(gnn::to_string(task)) + " case " + std::to_string(c) + ": inferred " +
               std::to_string(got) + ", true " + std::to_string(truth));
    }
  r.seconds = t.seconds();
  return r;
}

SuiteResult node_feature_recovery(std::uint64_t seed, int cases) {
  SuiteResult r;
  r.name = "node feature recovery";
  Timer t;
  Rng rng(seed);
  constexpr double kTol = 1e-8;
  for (auto fw : kFrameworks)
    for (int c = 0; c < cases; ++c) {
      const int n = pick(rng, 2, 12);
      auto arch = random_arch(rng, fw, gnn::Task::node, n);
      arch.layers = 1;
      const auto params = gnn::init_params(arch, rng);
      const auto g = graph::synthetic_graph(rng, n, std::min(3.0, n - 1.0), arch.in_dim, arch.classes);
      const int v = pick(rng, 0, n - 1);
      const auto bundle = gnn::sample_gradients(params, g, v);
      const Matrix s = graph::normalize_adjacency(g, gnn::adjacency_mode(fw)).matrix;
      const Matrix agg = s.row(v) * g.features;
      const std::string tag = std::string(gnn::to_string(fw)) + " case " + std::to_string(c);
      const double e_agg = rel_error(agg, attack::recover_agg_features(bundle, fw));
      note(r, e_agg < kTol, e_agg, tag + " aggregated features");
      if (fw == gnn::Framework::sage) {
        const double e_x = rel_error(g.features.row(v), attack::recover_target_features(bundle, fw));
        note(r, e_x < kTol, e_x, tag + " target features");
      }
    }
  r.seconds = t.seconds();
  return r;
}

SuiteResult node_structure_recovery(std::uint64_t seed, int cases) {
  SuiteResult r;
  r.name = "node structure recovery";
  Timer t;
  Rng rng(seed);
  constexpr double kTol = 1e-6;
  auto entrywise = [](const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); };
  for (auto fw : kFrameworks)
    for (int c = 0; c < cases; ++c) {
      const int n = pick(rng, 2, 12);
      auto arch = random_arch(rng, fw, gnn::Task::node, n);
      arch.layers = 1;
      arch.in_dim = pick(rng, n, n + 4);
      const auto params = gnn::init_params(arch, rng);
      const auto mode = gnn::adjacency_mode(fw);
      // Resample until A~ is invertible so that every recovery is unique.
      graph::Graph g;
      Matrix s;
      // Small dense graphs are often singular, so the density varies too.
      do {
        g = graph::er_graph(rng, n, rng.uniform(), arch.in_dim);
        s = graph::normalize_adjacency(g, mode).matrix;
      } while (num::numerical_rank(s) < n);
      std::vector<int> labels(n);
      for (auto& y : labels) y = pick(rng, 0, arch.classes - 1);
      g.labels = labels;
      std::vector<gnn::GradientBundle> per_node;
      Matrix x_agg(n, arch.in_dim);
      for (int v = 0; v < n; ++v) {
        per_node.push_back(gnn::sample_gradients(params, g, v));
        x_agg.row(v) = attack::recover_agg_features(per_node.back(), fw);
      }
      const std::string tag = std::string(gnn::to_string(fw)) + " case " + std::to_string(c);
      const auto ra = attack::recover_adjacency_given_X(x_agg, g.features);
      const double ea = entrywise(s, ra.value);
      note(r, ea < kTol && ra.well_conditioned(), ea, tag + " adjacency from features");
      const auto rx = attack::recover_X_given_adjacency(x_agg, s);
      const double ex = entrywise(g.features, rx.value);
      note(r, ex < kTol && rx.well_conditioned(), ex, tag + " features from adjacency");
      if (fw == gnn::Framework::sage) {
        const auto both = attack::recover_both_sage(per_node, fw);
        const double eb = std::max(entrywise(g.features, both.features), entrywise(s, both.adjacency.value));
        note(r, eb < kTol, eb, tag + " joint recovery");
      }
    }
  r.seconds = t.seconds();
  return r;
}

SuiteResult graph_structure_recovery(std::uint64_t seed, int cases) {
  SuiteResult r;
  r.name = "graph structure recovery";
  Timer t;
  Rng rng(seed);
  constexpr double kTol = 1e-6;
  for (int c = 0; c < cases; ++c) {
    const int n = pick(rng, 2, 8);
    gnn::Architecture arch;
    arch.framework = gnn::Framework::sage;
    arch.task = gnn::Task::graph;
    arch.layers = pick(rng, 1, 2);
    arch.num_nodes = n;
    arch.in_dim = pick(rng, n, n + 3);
    arch.hidden = pick(rng, n, n + 3);
    arch.classes = pick(rng, 2, 4);
    const auto params = gnn::init_params(arch, rng);
    auto g = graph::synthetic_graph(rng, n, std::min(3.0, n - 1.0), arch.in_dim, arch.classes);
    g.graph_label = pick(rng, 0, arch.classes - 1);
    const auto bundle = gnn::sample_gradients(params, g);
    const Matrix s = graph::normalize_adjacency(g, graph::AdjNorm::sage_mean).matrix;
    const auto rec = attack::recover_adjacency_graph_sage(bundle, g.features);
    const double e = (s - rec.value).cwiseAbs().maxCoeff();
    note(r, e < kTol && rec.well_conditioned(), e, "case " + std::to_string(c));

    // Binary features narrower than the graph cannot be inverted.
    if (n >= 3) {
      arch.in_dim = pick(rng, 1, n - 1);
      arch.layers = 1;
      const auto p2 = gnn::init_params(arch, rng);
      auto gb = g;
      gb.features = num::sample_bernoulli(rng, Matrix::Constant(n, arch.in_dim, 0.5));
      const auto rb = attack::recover_adjacency_graph_sage(gnn::sample_gradients(p2, gb), gb.features);
      note(r, !rb.well_conditioned(), 0.0, "case " + std::to_string(c) + " binary narrow features: no warning");
    }
  }
  r.seconds = t.seconds();
  return r;
}

std::vector<SuiteResult> run_all(std::ostream& out, std::uint64_t seed, int scale) {
  std::vector<SuiteResult> all;
  auto run = [&](SuiteResult res) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-26s %5d cases  %d failed  worst %.3g  %.2fs",
                  res.passed() ? "ok" : "FAIL", res.name.c_str(), res.cases, res.failures, res.worst,
                  res.seconds);
    out << buf << std::endl;
    if (!res.passed() && !res.first_failure.empty()) out << "     first failure: " << res.first_failure << '\n';
    all.push_back(std::move(res));
  };
  run(model_gradients(seed, 5 * scale));
  run(matching_gradients(seed + 1, 3 * scale));
  run(regularizer_gradients(seed + 2, 10 * scale));
  run(label_inference(seed + 3, 100 * scale));
  run(node_feature_recovery(seed + 4, 20 * scale));
  run(node_structure_recovery(seed + 5, 10 * scale));
  run(graph_structure_recovery(seed + 6, 10 * scale));
  return all;
}

}  // namespace glg::selftest
