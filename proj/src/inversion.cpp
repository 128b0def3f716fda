#include "glg/inversion.hpp"

#include "glg/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace glg::attack {

namespace {

using gnn::Task;

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

struct LayerState {
  Matrix agg, act;
  Matrix dact;  // sigma'(pre); empty for the linear node-task output
};

struct InstanceState {
  std::vector<LayerState> layers;
  // adjoints
  std::vector<Matrix> act_bar, agg_bar;
  Matrix x_bar, s_bar;
};

struct SampleState {
  gnn::GradientBundle bundle;
  gnn::Tensors adjoint;  // d objective / d bundle of this sample
  RowVector probs, g;
  std::vector<Matrix> grad_h, delta, grad_agg;
};

// Row layout of one instance. Layer l maps the rows in_rows[l] of H_{l-1}
// to the rows in_rows[l + 1] of H_l (the target rows after the last layer)
// through s[l]; every layer's output rows are a prefix of its input rows so
// that the self term reads H_{l-1}.topRows(). Without restriction all rows
// are kept and every layer shares the instance's matrix.
template <class S>
struct Plan {
  std::vector<const S*> s;
  std::vector<S> storage;
  std::vector<int> input_rows;  // original ids of the rows of the local X; empty = identity
  std::vector<int> local;       // original id -> row of the last layer's output
  Matrix x_local;
  const Matrix* x_full = nullptr;

  const Matrix& x() const { return input_rows.empty() ? *x_full : x_local; }
  long rows_out(int l) const { return s[l]->rows(); }
};

template <class S>
Plan<S> full_plan(const S& s, const Matrix& x, int layers) {
  Plan<S> p;
  p.s.assign(layers, &s);
  p.x_full = &x;
  p.local.resize(x.rows());
  for (long i = 0; i < x.rows(); ++i) p.local[i] = static_cast<int>(i);
  return p;
}

// Keeps only the receptive field of `targets`.
Plan<SparseMatrix> restricted_plan(const SparseMatrix& s, const Matrix& x, int layers,
                                   const std::vector<int>& targets) {
  const long n = s.rows();
  std::vector<std::vector<int>> rows(layers + 1);
  std::vector<char> seen(n, 0);
  for (int t : targets)
    if (!seen[t]) {
      seen[t] = 1;
      rows[layers].push_back(t);
    }
  for (int l = layers - 1; l >= 0; --l) {
    rows[l] = rows[l + 1];
    std::vector<char> in(n, 0);
    for (int u : rows[l]) in[u] = 1;
    std::vector<int> extra;
    for (int u : rows[l + 1])
      for (SparseMatrix::InnerIterator it(s, u); it; ++it)
        if (!in[it.col()]) {
          in[it.col()] = 1;
          extra.push_back(static_cast<int>(it.col()));
        }
    std::sort(extra.begin(), extra.end());
    rows[l].insert(rows[l].end(), extra.begin(), extra.end());
  }
  Plan<SparseMatrix> p;
  p.storage.resize(layers);
  std::vector<int> pos(n, -1);
  for (int l = 0; l < layers; ++l) {
    std::fill(pos.begin(), pos.end(), -1);
    for (std::size_t c = 0; c < rows[l].size(); ++c) pos[rows[l][c]] = static_cast<int>(c);
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < rows[l + 1].size(); ++r)
      for (SparseMatrix::InnerIterator it(s, rows[l + 1][r]); it; ++it)
        trip.emplace_back(static_cast<int>(r), pos[it.col()], it.value());
    p.storage[l].resize(static_cast<long>(rows[l + 1].size()), static_cast<long>(rows[l].size()));
    p.storage[l].setFromTriplets(trip.begin(), trip.end());
  }
  for (int l = 0; l < layers; ++l) p.s.push_back(&p.storage[l]);
  p.input_rows = rows[0];
  p.x_local.resize(static_cast<long>(rows[0].size()), x.cols());
  for (std::size_t r = 0; r < rows[0].size(); ++r) p.x_local.row(r) = x.row(rows[0][r]);
  p.local.assign(n, -1);
  for (std::size_t r = 0; r < rows[layers].size(); ++r) p.local[rows[layers][r]] = static_cast<int>(r);
  return p;
}

Eigen::Map<const RowVector> flat(const Matrix& m) { return {m.data(), m.size()}; }

template <class S>
void run_forward(const gnn::ModelParams& params, const Plan<S>& plan, InstanceState& st) {
  const auto& arch = params.arch;
  st.layers.resize(arch.layers);
  const Matrix* h = &plan.x();
  for (int l = 0; l < arch.layers; ++l) {
    const auto& w = params.weights.layers[l];
    auto& ls = st.layers[l];
    ls.agg = (*plan.s[l]) * (*h);
    Matrix pre = ls.agg * w.w_agg.transpose();
    if (w.w_self.size() > 0) pre.noalias() += h->topRows(plan.rows_out(l)) * w.w_self.transpose();
    pre.rowwise() += w.bias.row(0);
    if (arch.task == Task::node && l == arch.layers - 1) {
      ls.act = std::move(pre);
      ls.dact.resize(0, 0);
    } else {
      ls.act = sigmoid(pre);
      ls.dact = ls.act.cwiseProduct((1.0 - ls.act.array()).matrix());
    }
    h = &ls.act;
  }
}

Matrix times_dact(const Matrix& m, const LayerState& ls) {
  return ls.dact.size() == 0 ? m : Matrix(m.cwiseProduct(ls.dact));
}

template <class S>
void run_backward(const gnn::ModelParams& params, const Plan<S>& plan, const InstanceState& st,
                  const DummySample& smp, bool keep, SampleState& out) {
  const auto& arch = params.arch;
  const int last = arch.layers - 1;
  const Matrix& x = plan.x();
  const int t = arch.task == Task::node ? plan.local[smp.target] : -1;
  const RowVector logits =
      arch.task == Task::node
          ? RowVector(st.layers[last].act.row(t))
          : RowVector(flat(st.layers[last].act) * params.weights.mlp_weight.transpose() +
                      params.weights.mlp_bias);
  out.probs = gnn::softmax(logits);
  out.g = out.probs;
  out.g(smp.label) -= 1.0;

  gnn::Tensors& gr = out.bundle.grads;
  gr = params.weights.zeros_like();
  out.grad_h.assign(arch.layers, Matrix());
  out.delta.assign(arch.layers, Matrix());
  out.grad_agg.assign(arch.layers, Matrix());

  Matrix grad_h = Matrix::Zero(plan.rows_out(last), arch.out_dim(last));
  if (arch.task == Task::node) {
    grad_h.row(t) = out.g;
  } else {
    gr.mlp_weight = out.g.transpose() * flat(st.layers[last].act);
    gr.mlp_bias = out.g;
    const RowVector gh = out.g * params.weights.mlp_weight;
    grad_h = Eigen::Map<const Matrix>(gh.data(), plan.rows_out(last), arch.hidden);
  }
  for (int l = last; l >= 0; --l) {
    const auto& ls = st.layers[l];
    const auto& w = params.weights.layers[l];
    const Matrix& h_in = l == 0 ? x : st.layers[l - 1].act;
    const long nout = plan.rows_out(l);
    Matrix delta = times_dact(grad_h, ls);
    auto& gl = gr.layers[l];
    gl.w_agg = delta.transpose() * ls.agg;
    if (w.w_self.size() > 0) gl.w_self = delta.transpose() * h_in.topRows(nout);
    gl.bias = delta.colwise().sum();
    if (keep) out.grad_h[l] = grad_h;
    if (l > 0) {
      Matrix grad_agg = delta * w.w_agg;
      grad_h = plan.s[l]->transpose() * grad_agg;
      if (w.w_self.size() > 0) grad_h.topRows(nout).noalias() += delta * w.w_self;
      if (keep) out.grad_agg[l] = std::move(grad_agg);
    }
    if (keep) out.delta[l] = std::move(delta);
  }
}

// Reverse of run_backward for one sample. Accumulates the adjoints of the
// instance's forward quantities (act_bar, agg_bar, x_bar, s_bar).
template <class S>
void reverse_backward(const gnn::ModelParams& params, const Plan<S>& plan, InstanceState& st,
                      const DummySample& smp, const SampleState& ss, bool want_s) {
  const auto& arch = params.arch;
  const int last = arch.layers - 1;
  const Matrix& x = plan.x();
  const auto& gbar = ss.adjoint;
  RowVector g_bar = RowVector::Zero(arch.classes);
  std::vector<Matrix> delta_bar(arch.layers);
  delta_bar[0] = Matrix::Zero(plan.rows_out(0), arch.out_dim(0));

  for (int l = 0; l <= last; ++l) {
    const auto& ls = st.layers[l];
    const auto& w = params.weights.layers[l];
    const auto& gl = gbar.layers[l];
    const long nout = plan.rows_out(l);
    const Matrix& h_in = l == 0 ? x : st.layers[l - 1].act;
    Matrix& h_in_bar = l == 0 ? st.x_bar : st.act_bar[l - 1];
    const Matrix& delta = ss.delta[l];

    delta_bar[l].noalias() += ls.agg * gl.w_agg.transpose();
    if (w.w_self.size() > 0) delta_bar[l].noalias() += h_in.topRows(nout) * gl.w_self.transpose();
    delta_bar[l].rowwise() += gl.bias.row(0);
    st.agg_bar[l].noalias() += delta * gl.w_agg;
    if (w.w_self.size() > 0) h_in_bar.topRows(nout).noalias() += delta * gl.w_self;

    Matrix grad_h_bar;
    if (ls.dact.size() == 0) {
      grad_h_bar = delta_bar[l];
    } else {
      grad_h_bar = delta_bar[l].cwiseProduct(ls.dact);
      st.act_bar[l].array() +=
          delta_bar[l].array() * ss.grad_h[l].array() * (1.0 - 2.0 * ls.act.array());
    }

    if (l < last) {
      // grad_h[l] = S_{l+1}^T grad_agg[l+1] + delta[l+1] W2_{l+1} (top rows)
      const auto& wn = params.weights.layers[l + 1];
      const long nn = plan.rows_out(l + 1);
      if (want_s) st.s_bar.noalias() += ss.grad_agg[l + 1] * grad_h_bar.transpose();
      const Matrix grad_agg_bar = (*plan.s[l + 1]) * grad_h_bar;
      delta_bar[l + 1] = grad_agg_bar * wn.w_agg.transpose();
      if (wn.w_self.size() > 0)
        delta_bar[l + 1].noalias() += grad_h_bar.topRows(nn) * wn.w_self.transpose();
    } else if (arch.task == Task::node) {
      g_bar += grad_h_bar.row(plan.local[smp.target]);
    } else {
      const Matrix& wm = params.weights.mlp_weight;
      g_bar.noalias() += flat(grad_h_bar) * wm.transpose();
      g_bar.noalias() += flat(ls.act) * gbar.mlp_weight.transpose();
      g_bar += gbar.mlp_bias;
    }
  }

  // g = softmax(logits) - onehot
  const RowVector p_bar = ss.probs.cwiseProduct((g_bar.array() - g_bar.dot(ss.probs)).matrix());
  if (arch.task == Task::node) {
    st.act_bar[last].row(plan.local[smp.target]) += p_bar;
  } else {
    RowVector h_bar = ss.g * gbar.mlp_weight;
    h_bar.noalias() += p_bar * params.weights.mlp_weight;
    st.act_bar[last] += Eigen::Map<const Matrix>(h_bar.data(), plan.rows_out(last), arch.hidden);
  }
}

template <class S>
void reverse_forward(const gnn::ModelParams& params, const Plan<S>& plan, InstanceState& st,
                     bool want_s) {
  for (int l = params.arch.layers - 1; l >= 0; --l) {
    const auto& ls = st.layers[l];
    const auto& w = params.weights.layers[l];
    const long nout = plan.rows_out(l);
    const Matrix& h_in = l == 0 ? plan.x() : st.layers[l - 1].act;
    Matrix& h_in_bar = l == 0 ? st.x_bar : st.act_bar[l - 1];
    const Matrix pre_bar = times_dact(st.act_bar[l], ls);
    st.agg_bar[l].noalias() += pre_bar * w.w_agg;
    if (w.w_self.size() > 0) h_in_bar.topRows(nout).noalias() += pre_bar * w.w_self;
    if (want_s) st.s_bar.noalias() += st.agg_bar[l] * h_in.transpose();
    h_in_bar.noalias() += plan.s[l]->transpose() * st.agg_bar[l];
  }
}

template <class S>
void init_adjoints(const gnn::ModelParams& params, const Plan<S>& plan, InstanceState& st,
                   bool want_s) {
  const auto& arch = params.arch;
  st.act_bar.assign(arch.layers, Matrix());
  st.agg_bar.assign(arch.layers, Matrix());
  for (int l = 0; l < arch.layers; ++l) {
    st.act_bar[l] = Matrix::Zero(plan.rows_out(l), arch.out_dim(l));
    st.agg_bar[l] = Matrix::Zero(plan.rows_out(l), arch.in_width(l));
  }
  st.x_bar = Matrix::Zero(plan.x().rows(), plan.x().cols());
  if (want_s) {
    const long n = plan.x().rows();
    st.s_bar = Matrix::Zero(n, n);
  }
}


}  // namespace

SparseMatrix to_sparse(const Matrix& m) { return m.sparseView(); }

void MatchProblem::validate() const {
  require(params != nullptr, "match problem: no model");
  params->validate();
  const auto& arch = params->arch;
  require(!instances.empty() && !samples.empty() && !groups.empty(), "match problem: empty");
  for (const auto& inst : instances) {
    const long n = inst.features.rows();
    require(inst.features.cols() == arch.in_dim, "match problem: feature width mismatch");
    if (inst.normalized_sparse) {
      require(!inst.want_normalized, "match problem: a sparse adjacency cannot be optimized");
      require(inst.normalized_sparse->rows() == n && inst.normalized_sparse->cols() == n,
              "match problem: adjacency size mismatch");
    } else {
      require(inst.normalized.rows() == n && inst.normalized.cols() == n,
              "match problem: adjacency size mismatch");
    }
    if (arch.task == Task::graph)
      require(n == arch.num_nodes, "match problem: graph size differs from the readout's");
  }
  for (const auto& s : samples) {
    require(s.instance >= 0 && s.instance < static_cast<int>(instances.size()),
            "match problem: sample refers to a missing instance");
    require(s.label >= 0 && s.label < arch.classes, "match problem: label out of range");
    if (arch.task == Task::node)
      require(s.target >= 0 && s.target < instances[s.instance].features.rows(),
              "match problem: target out of range");
  }
  for (const auto& g : groups) {
    require(g.leaked != nullptr && !g.samples.empty(), "match problem: empty group");
    require(params->weights.same_shape(g.leaked->grads),
            "match problem: leaked bundle does not match the model");
    for (int i : g.samples)
      require(i >= 0 && i < static_cast<int>(samples.size()),
              "match problem: group refers to a missing sample");
  }
}

MatchEvaluation evaluate_match(const MatchProblem& pb, bool with_gradients) {
  const auto& params = *pb.params;
  const int layers = params.arch.layers;
  const std::size_t ni = pb.instances.size();
  std::vector<InstanceState> inst(ni);
  std::vector<SampleState> smp(pb.samples.size());

  // A fixed sparse adjacency on the node task only needs the targets'
  // receptive fields.
  std::vector<std::vector<int>> targets(ni);
  if (params.arch.task == Task::node)
    for (const auto& s : pb.samples) targets[s.instance].push_back(s.target);
  std::vector<std::optional<Plan<SparseMatrix>>> sparse_plans(ni);
  std::vector<std::optional<Plan<Matrix>>> dense_plans(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    const auto& d = pb.instances[i];
    if (!d.normalized_sparse)
      dense_plans[i] = full_plan(d.normalized, d.features, layers);
    else if (params.arch.task == Task::node && !d.want_normalized)
      sparse_plans[i] = restricted_plan(*d.normalized_sparse, d.features, layers, targets[i]);
    else
      sparse_plans[i] = full_plan(*d.normalized_sparse, d.features, layers);
  }
  auto dispatch = [&](std::size_t i, auto&& fn) {
    if (sparse_plans[i])
      fn(*sparse_plans[i]);
    else
      fn(*dense_plans[i]);
  };

  for (std::size_t i = 0; i < ni; ++i)
    dispatch(i, [&](const auto& plan) { run_forward(params, plan, inst[i]); });
  for (std::size_t k = 0; k < pb.samples.size(); ++k) {
    const auto& ds = pb.samples[k];
    const auto& d = pb.instances[ds.instance];
    const bool keep = with_gradients && (d.want_features || d.want_normalized);
    dispatch(ds.instance, [&](const auto& plan) {
      run_backward(params, plan, inst[ds.instance], ds, keep, smp[k]);
    });
  }

  MatchEvaluation ev;
  for (const auto& grp : pb.groups) {
    gnn::GradientBundle mean{params.weights.zeros_like()};
    for (int k : grp.samples) mean.grads += smp[k].bundle.grads;
    mean.grads *= 1.0 / static_cast<double>(grp.samples.size());
    MatchValue mv = grad_match(pb.distance, mean, *grp.leaked);
    ev.value += mv.value;
    if (with_gradients) {
      mv.grad *= 1.0 / static_cast<double>(grp.samples.size());
      for (int k : grp.samples) {
        if (smp[k].adjoint.layers.empty())
          smp[k].adjoint = mv.grad;
        else
          smp[k].adjoint += mv.grad;
      }
    }
    ev.dummy.push_back(std::move(mean));
  }
  if (!std::isfinite(ev.value)) fail(ErrorCode::numeric, "gradient matching objective is not finite");

  ev.grad_features.assign(ni, std::nullopt);
  ev.grad_normalized.assign(ni, std::nullopt);
  if (!with_gradients) return ev;

  for (std::size_t i = 0; i < ni; ++i) {
    const auto& d = pb.instances[i];
    if (d.want_features || d.want_normalized)
      dispatch(i, [&](const auto& plan) { init_adjoints(params, plan, inst[i], d.want_normalized); });
  }
  for (std::size_t k = 0; k < pb.samples.size(); ++k) {
    const auto& ds = pb.samples[k];
    const auto& d = pb.instances[ds.instance];
    if (!(d.want_features || d.want_normalized) || smp[k].adjoint.layers.empty()) continue;
    dispatch(ds.instance, [&](const auto& plan) {
      reverse_backward(params, plan, inst[ds.instance], ds, smp[k], d.want_normalized);
    });
  }
  for (std::size_t i = 0; i < ni; ++i) {
    const auto& d = pb.instances[i];
    if (!(d.want_features || d.want_normalized)) continue;
    dispatch(i, [&](const auto& plan) {
      reverse_forward(params, plan, inst[i], d.want_normalized);
      if (!d.want_features) return;
      if (plan.input_rows.empty()) {
        ev.grad_features[i] = std::move(inst[i].x_bar);
      } else {
        Matrix full = Matrix::Zero(d.features.rows(), d.features.cols());
        for (std::size_t r = 0; r < plan.input_rows.size(); ++r)
          full.row(plan.input_rows[r]) = inst[i].x_bar.row(r);
        ev.grad_features[i] = std::move(full);
      }
    });
    if (d.want_normalized) ev.grad_normalized[i] = std::move(inst[i].s_bar);
  }
  return ev;
}

}  // namespace glg::attack
