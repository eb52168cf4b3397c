#pragma once

#include <optional>

#include "graphattacker/gcn.hpp"
#include "graphattacker/graph.hpp"
#include "graphattacker/optim.hpp"
#include "graphattacker/strategy.hpp"

namespace gat {

// Multi-strategy attack generator: a GCN feature extractor (softmax output)
// plus dimension-expansion matrices that reconstruct a continuous adversarial
// adjacency and/or attribute matrix of the same size as the subgraph.
struct MagModel {
  DenseMatrix ex_w0;  // D x H
  DenseMatrix ex_w1;  // H x d
  DenseMatrix wex_a;  // d x n_sub
  DenseMatrix wex_x;  // d x D

  static MagModel create(int attr_dim, int hidden, int embedding, int n_sub, Rng& rng) {
    MagModel m;
    m.ex_w0 = glorot_uniform(attr_dim, hidden, rng);
    m.ex_w1 = glorot_uniform(hidden, embedding, rng);
    m.wex_a = glorot_uniform(embedding, n_sub, rng);
    m.wex_x = glorot_uniform(embedding, attr_dim, rng);
    return m;
  }

  ParameterSet params() const {
    ParameterSet p;
    p.add("EX_W0", ex_w0);
    p.add("EX_W1", ex_w1);
    p.add("WEX_A", wex_a);
    p.add("WEX_X", wex_x);
    return p;
  }

  void load(const ParameterSet& p) {
    ex_w0 = p.at("EX_W0");
    ex_w1 = p.at("EX_W1");
    wex_a = p.at("WEX_A");
    wex_x = p.at("WEX_X");
  }
};

// Eq.5-style discretization: entries strictly greater than 0.5 become 1, the
// rest 0. Idempotent on binary input.
inline DenseMatrix discretize(const DenseMatrix& m, bool zero_diagonal = false) {
  DenseMatrix out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.size(); ++i) out.data[i] = m.data[i] > 0.5 ? 1.0 : 0.0;
  if (zero_diagonal) {
    if (m.rows != m.cols) throw ContractError("discretize: zero_diagonal needs square input");
    for (int i = 0; i < m.rows; ++i) out(i, i) = 0.0;
  }
  return out;
}

// Clean-subgraph quantities that stay constant across one attack.
struct MagContext {
  DenseMatrix ahat;     // normalized clean subgraph adjacency
  DenseMatrix a_clean;  // dense clean adjacency
  const DenseMatrix* x_clean = nullptr;
  SparseAttr x_sparse;  // row structure of x_clean when binary

  const SparseAttr* sparse() const { return x_sparse.sparse ? &x_sparse : nullptr; }

  static MagContext build(const Graph& sub) {
    MagContext c;
    c.ahat = normalize_adjacency(sub);
    c.a_clean = sub.dense_adjacency();
    c.x_clean = &sub.attributes();
    c.x_sparse = SparseAttr::build(sub);
    return c;
  }
};

struct MagForward {
  AttackStrategy strategy = AttackStrategy::structure;
  Gcn2Dense ex;           // extractor on the clean subgraph
  DenseMatrix ma;         // Z * WexA
  DenseMatrix a_sig;      // sigmoid of symmetrized ma, diagonal untouched
  DenseMatrix a_cont;     // a_sig with zero diagonal (clean A under attribute strategy)
  DenseMatrix ahat_disc;  // hybrid: normalized discretized structure
  Gcn2Dense ex2;          // hybrid: extractor on (ahat_disc, X)
  DenseMatrix x_sig;      // sigmoid(Z' * WexX)
  DenseMatrix x_cont;     // generated attributes (clean X under structure strategy)
};

inline MagForward mag_forward(const MagModel& mag, const MagContext& ctx,
                              AttackStrategy strategy) {
  MagForward f;
  f.strategy = strategy;
  f.ex = gcn2_forward_dense(ctx.ahat, *ctx.x_clean, mag.ex_w0, mag.ex_w1, GcnFinal::softmax,
                            ctx.sparse());
  const DenseMatrix& z = f.ex.out;
  const int n = z.rows;

  const bool gen_structure = strategy != AttackStrategy::attribute;
  const bool gen_attributes = strategy != AttackStrategy::structure;

  if (gen_structure) {
    if (mag.wex_a.cols != n) throw ContractError("mag_forward: WexA width != subgraph size");
    f.ma = matmul(z, mag.wex_a);
    DenseMatrix pre(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) pre(i, j) = 0.5 * (f.ma(i, j) + f.ma(j, i));
    f.a_sig = sigmoid(pre);
    f.a_cont = f.a_sig;
    for (int i = 0; i < n; ++i) f.a_cont(i, i) = 0.0;
  } else {
    f.a_cont = ctx.a_clean;
  }

  if (gen_attributes) {
    const DenseMatrix* z_for_x = &z;
    if (strategy == AttackStrategy::hybrid) {
      // attributes are regenerated from the embedding of the discretized
      // adversarial structure
      f.ahat_disc = normalize_dense_adjacency(discretize(f.a_cont, true));
      f.ex2 = gcn2_forward_dense(f.ahat_disc, *ctx.x_clean, mag.ex_w0, mag.ex_w1,
                                 GcnFinal::softmax, ctx.sparse());
      z_for_x = &f.ex2.out;
    }
    f.x_sig = sigmoid(matmul(*z_for_x, mag.wex_x));
    f.x_cont = f.x_sig;
  } else {
    f.x_cont = *ctx.x_clean;
  }
  return f;
}

// Backward from gradients on the continuous outputs to MAG parameter
// gradients. Pass empty matrices for paths the objective does not touch.
inline ParameterSet mag_backward(const MagModel& mag, const MagContext& ctx,
                                 const MagForward& f, const DenseMatrix& d_a_cont,
                                 const DenseMatrix& d_x_cont) {
  ParameterSet grads = mag.params().zeros_like();
  DenseMatrix d_z_structure;
  DenseMatrix d_z_attr;

  if (d_a_cont.size() > 0) {
    if (f.strategy == AttackStrategy::attribute)
      throw ContractError("mag_backward: structure gradient under attribute strategy");
    const int n = d_a_cont.rows;
    DenseMatrix d_pre(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;  // diagonal is clamped to zero in the forward
        const double s = f.a_sig(i, j);
        d_pre(i, j) = d_a_cont(i, j) * s * (1.0 - s);
      }
    DenseMatrix d_ma(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d_ma(i, j) = 0.5 * (d_pre(i, j) + d_pre(j, i));
    accumulate(grads.at("WEX_A"), matmul_at_b(f.ex.out, d_ma));
    d_z_structure = matmul_a_bt(d_ma, mag.wex_a);
  }

  if (d_x_cont.size() > 0) {
    if (f.strategy == AttackStrategy::structure)
      throw ContractError("mag_backward: attribute gradient under structure strategy");
    DenseMatrix d_xpre = d_x_cont;
    for (std::size_t i = 0; i < d_xpre.size(); ++i) {
      const double s = f.x_sig.data[i];
      d_xpre.data[i] *= s * (1.0 - s);
    }
    const DenseMatrix& z_for_x =
        f.strategy == AttackStrategy::hybrid ? f.ex2.out : f.ex.out;
    accumulate(grads.at("WEX_X"), matmul_at_b(z_for_x, d_xpre));
    d_z_attr = matmul_a_bt(d_xpre, mag.wex_x);
  }

  // Route embedding gradients through the extractor pass(es).
  if (f.strategy == AttackStrategy::hybrid) {
    if (d_z_structure.size() > 0) {
      const auto g = gcn2_backward_dense(f.ex, ctx.ahat, *ctx.x_clean, mag.ex_w0, mag.ex_w1,
                                         GcnFinal::softmax, d_z_structure, true, false,
                                         ctx.sparse());
      accumulate(grads.at("EX_W0"), g.d_w0);
      accumulate(grads.at("EX_W1"), g.d_w1);
    }
    if (d_z_attr.size() > 0) {
      const auto g = gcn2_backward_dense(f.ex2, f.ahat_disc, *ctx.x_clean, mag.ex_w0,
                                         mag.ex_w1, GcnFinal::softmax, d_z_attr, true, false,
                                         ctx.sparse());
      accumulate(grads.at("EX_W0"), g.d_w0);
      accumulate(grads.at("EX_W1"), g.d_w1);
    }
  } else {
    DenseMatrix d_z;
    if (d_z_structure.size() > 0) d_z = d_z_structure;
    if (d_z_attr.size() > 0)
      d_z = d_z.size() > 0 ? add(d_z, d_z_attr) : d_z_attr;
    if (d_z.size() > 0) {
      const auto g = gcn2_backward_dense(f.ex, ctx.ahat, *ctx.x_clean, mag.ex_w0, mag.ex_w1,
                                         GcnFinal::softmax, d_z, true, false, ctx.sparse());
      accumulate(grads.at("EX_W0"), g.d_w0);
      accumulate(grads.at("EX_W1"), g.d_w1);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Scale masks

// Entries the scale forbids are reset to the original values. The adjacency
// mask is symmetric by construction; symmetry and the empty diagonal are
// re-enforced on the result.
struct MaskedCandidate {
  DenseMatrix a;
  DenseMatrix x;
};

inline MaskedCandidate apply_scale_mask(const DenseMatrix& a_orig, const DenseMatrix& x_orig,
                                        const DenseMatrix& a_cand, const DenseMatrix& x_cand,
                                        AttackScale scale, const std::vector<int>& hop_distance,
                                        const std::vector<int>& targets, int k_hops) {
  const int n = a_orig.rows;
  if (a_cand.rows != n || a_cand.cols != n)
    throw ContractError("apply_scale_mask: adjacency shape mismatch");
  require_same_shape(x_orig, x_cand, "apply_scale_mask");

  std::vector<char> is_target(n, 0);
  for (int t : targets) is_target[t] = 1;

  const auto link_allowed = [&](int i, int j) {
    switch (scale) {
      case AttackScale::direct: return is_target[i] || is_target[j];
      case AttackScale::indirect:
        return hop_distance[i] >= 2 && hop_distance[i] <= k_hops && hop_distance[j] >= 2 &&
               hop_distance[j] <= k_hops;
      case AttackScale::unlimited: return true;
    }
    return false;
  };
  const auto row_allowed = [&](int i) {
    switch (scale) {
      case AttackScale::direct: return static_cast<bool>(is_target[i]);
      case AttackScale::indirect:
        return hop_distance[i] >= 2 && hop_distance[i] <= k_hops;
      case AttackScale::unlimited: return true;
    }
    return false;
  };

  MaskedCandidate out{a_orig, x_orig};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double v = link_allowed(i, j) ? a_cand(i, j) : a_orig(i, j);
      out.a(i, j) = v;
      out.a(j, i) = v;
    }
  for (int i = 0; i < n; ++i) out.a(i, i) = 0.0;
  for (int i = 0; i < x_orig.rows; ++i)
    if (row_allowed(i))
      for (int c = 0; c < x_orig.cols; ++c) out.x(i, c) = x_cand(i, c);
  return out;
}

// Rebuilds a Graph from masked dense candidate matrices, keeping the clean
// subgraph's labels.
inline Graph graph_from_candidate(const Graph& clean_sub, const DenseMatrix& a,
                                  const DenseMatrix& x) {
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < a.rows; ++i)
    for (int j = i + 1; j < a.cols; ++j)
      if (a(i, j) != 0.0) edges.emplace_back(i, j);
  AttributeKind kind = AttributeKind::binary;
  for (double v : x.data)
    if (v != 0.0 && v != 1.0) kind = AttributeKind::continuous;
  return Graph::from_edges(clean_sub.n(), std::move(edges), x, kind,
                           clean_sub.node_labels());
}

}  // namespace gat
