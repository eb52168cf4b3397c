#pragma once

#include <vector>

#include "graphattacker/graph.hpp"
#include "graphattacker/matrix.hpp"

namespace gat {

// Final map applied to the second-layer preactivation of the 2-layer GCN
// A_hat * relu(A_hat * X * W0) * W1.
enum class GcnFinal { softmax, identity, relu };

inline DenseMatrix apply_gcn_final(const DenseMatrix& h2pre, GcnFinal fin) {
  switch (fin) {
    case GcnFinal::softmax: return softmax_rows(h2pre);
    case GcnFinal::identity: return h2pre;
    case GcnFinal::relu: return relu(h2pre);
  }
  throw ContractError("apply_gcn_final: bad enum");
}

// ---------------------------------------------------------------------------
// Dense path (subgraph scale): full caches, input gradients available.

struct Gcn2Dense {
  DenseMatrix m0;     // X * W0
  DenseMatrix h1pre;  // A_hat * m0
  DenseMatrix h1;     // relu(h1pre)
  DenseMatrix m1;     // h1 * W1
  DenseMatrix h2pre;  // A_hat * m1
  DenseMatrix out;    // final(h2pre)
};

struct SparseAttr;  // defined below
inline DenseMatrix sparse_attr_times(const SparseAttr& xs, const DenseMatrix& w);
inline DenseMatrix sparse_attr_t_times(const SparseAttr& xs, const DenseMatrix& m);

// x_sparse, when given, must view the same matrix as x; it only accelerates
// the X products.
inline Gcn2Dense gcn2_forward_dense(const DenseMatrix& ahat, const DenseMatrix& x,
                                    const DenseMatrix& w0, const DenseMatrix& w1,
                                    GcnFinal fin, const SparseAttr* x_sparse = nullptr) {
  Gcn2Dense c;
  c.m0 = x_sparse ? sparse_attr_times(*x_sparse, w0) : matmul(x, w0);
  c.h1pre = matmul(ahat, c.m0);
  c.h1 = relu(c.h1pre);
  c.m1 = matmul(c.h1, w1);
  c.h2pre = matmul(ahat, c.m1);
  c.out = apply_gcn_final(c.h2pre, fin);
  return c;
}

struct Gcn2DenseGrads {
  DenseMatrix d_w0;
  DenseMatrix d_w1;
  DenseMatrix d_x;     // populated only when input grads requested
  DenseMatrix d_ahat;  // populated only when input grads requested
};

inline Gcn2DenseGrads gcn2_backward_dense(const Gcn2Dense& c, const DenseMatrix& ahat,
                                          const DenseMatrix& x, const DenseMatrix& w0,
                                          const DenseMatrix& w1, GcnFinal fin,
                                          const DenseMatrix& d_out, bool want_weight_grads,
                                          bool want_input_grads,
                                          const SparseAttr* x_sparse = nullptr) {
  DenseMatrix d_h2pre;
  switch (fin) {
    case GcnFinal::softmax: d_h2pre = softmax_rows_backward(c.out, d_out); break;
    case GcnFinal::identity: d_h2pre = d_out; break;
    case GcnFinal::relu: d_h2pre = relu_backward(c.h2pre, d_out); break;
  }

  Gcn2DenseGrads g;
  const DenseMatrix d_m1 = matmul(ahat, d_h2pre);  // A_hat symmetric
  const DenseMatrix d_h1 = matmul_a_bt(d_m1, w1);
  const DenseMatrix d_h1pre = relu_backward(c.h1pre, d_h1);
  const DenseMatrix d_m0 = matmul(ahat, d_h1pre);
  if (want_weight_grads) {
    g.d_w1 = matmul_at_b(c.h1, d_m1);
    g.d_w0 = x_sparse ? sparse_attr_t_times(*x_sparse, d_m0) : matmul_at_b(x, d_m0);
  }
  if (want_input_grads) {
    g.d_x = matmul_a_bt(d_m0, w0);
    g.d_ahat = add(matmul_a_bt(d_h2pre, c.m1), matmul_a_bt(d_h1pre, c.m0));
  }
  return g;
}

// Backward through A_hat = D~^{-1/2} (A + I) D~^{-1/2} for a dense continuous
// adjacency a with zero diagonal. Returns dL/da with a zeroed diagonal.
inline DenseMatrix normalize_dense_adjacency_backward(const DenseMatrix& a,
                                                      const DenseMatrix& ahat,
                                                      const DenseMatrix& d_ahat) {
  const int n = a.rows;
  std::vector<double> deg(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;
    for (int j = 0; j < n; ++j) d += a(i, j);
    deg[i] = d;
  }
  // dL/dd_p = -(1/(2 d_p)) * (sum_j S_pj Ahat_pj + sum_i S_ip Ahat_ip)
  std::vector<double> d_deg(n, 0.0);
  for (int p = 0; p < n; ++p) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) acc += d_ahat(p, j) * ahat(p, j) + d_ahat(j, p) * ahat(j, p);
    d_deg[p] = -acc / (2.0 * deg[p]);
  }
  DenseMatrix d_a(n, n);
  for (int p = 0; p < n; ++p) {
    const double sp = 1.0 / std::sqrt(deg[p]);
    for (int q = 0; q < n; ++q) {
      if (p == q) continue;
      const double sq = 1.0 / std::sqrt(deg[q]);
      d_a(p, q) = d_ahat(p, q) * sp * sq + d_deg[p];
    }
  }
  return d_a;
}

// ---------------------------------------------------------------------------
// Sparse path (parent scale): adjacency as SparseNormAdj, binary attributes
// multiplied through their nonzero structure.

// Row-sparse view of a binary attribute matrix; falls back to dense products
// for continuous attributes.
struct SparseAttr {
  const DenseMatrix* x = nullptr;
  std::vector<std::vector<int>> nz;
  bool sparse = false;

  static SparseAttr build(const Graph& g) {
    SparseAttr s;
    s.x = &g.attributes();
    if (g.attribute_kind() == AttributeKind::binary) {
      s.sparse = true;
      s.nz.resize(s.x->rows);
      for (int i = 0; i < s.x->rows; ++i)
        for (int j = 0; j < s.x->cols; ++j)
          if ((*s.x)(i, j) != 0.0) s.nz[i].push_back(j);
    }
    return s;
  }

  // X * w
  DenseMatrix times(const DenseMatrix& w) const {
    if (x->cols != w.rows) throw ContractError("SparseAttr::times: shape mismatch");
    if (!sparse) return matmul(*x, w);
    DenseMatrix out(x->rows, w.cols);
    for (int i = 0; i < x->rows; ++i) {
      double* orow = &out.data[static_cast<std::size_t>(i) * w.cols];
      for (int c : nz[i]) {
        const double* wrow = &w.data[static_cast<std::size_t>(c) * w.cols];
        for (int j = 0; j < w.cols; ++j) orow[j] += wrow[j];
      }
    }
    return out;
  }

  // X^T * m
  DenseMatrix t_times(const DenseMatrix& m) const {
    if (x->rows != m.rows) throw ContractError("SparseAttr::t_times: shape mismatch");
    if (!sparse) return matmul_at_b(*x, m);
    DenseMatrix out(x->cols, m.cols);
    for (int i = 0; i < x->rows; ++i) {
      const double* mrow = &m.data[static_cast<std::size_t>(i) * m.cols];
      for (int c : nz[i]) {
        double* orow = &out.data[static_cast<std::size_t>(c) * m.cols];
        for (int j = 0; j < m.cols; ++j) orow[j] += mrow[j];
      }
    }
    return out;
  }
};

inline DenseMatrix sparse_attr_times(const SparseAttr& xs, const DenseMatrix& w) {
  return xs.times(w);
}
inline DenseMatrix sparse_attr_t_times(const SparseAttr& xs, const DenseMatrix& m) {
  return xs.t_times(m);
}

struct Gcn2Sparse {
  DenseMatrix h1pre;
  DenseMatrix h1;
  DenseMatrix h2pre;
  DenseMatrix out;
};

inline Gcn2Sparse gcn2_forward_sparse(const SparseNormAdj& ahat, const SparseAttr& x,
                                      const DenseMatrix& w0, const DenseMatrix& w1,
                                      GcnFinal fin) {
  Gcn2Sparse c;
  c.h1pre = ahat.multiply(x.times(w0));
  c.h1 = relu(c.h1pre);
  c.h2pre = ahat.multiply(matmul(c.h1, w1));
  c.out = apply_gcn_final(c.h2pre, fin);
  return c;
}

struct Gcn2SparseGrads {
  DenseMatrix d_w0;
  DenseMatrix d_w1;
};

inline Gcn2SparseGrads gcn2_backward_sparse(const Gcn2Sparse& c, const SparseNormAdj& ahat,
                                            const SparseAttr& x, const DenseMatrix& w1,
                                            GcnFinal fin, const DenseMatrix& d_out) {
  DenseMatrix d_h2pre;
  switch (fin) {
    case GcnFinal::softmax: d_h2pre = softmax_rows_backward(c.out, d_out); break;
    case GcnFinal::identity: d_h2pre = d_out; break;
    case GcnFinal::relu: d_h2pre = relu_backward(c.h2pre, d_out); break;
  }
  const DenseMatrix d_m1 = ahat.multiply(d_h2pre);
  Gcn2SparseGrads g;
  g.d_w1 = matmul_at_b(c.h1, d_m1);
  const DenseMatrix d_h1 = matmul_a_bt(d_m1, w1);
  const DenseMatrix d_h1pre = relu_backward(c.h1pre, d_h1);
  g.d_w0 = x.t_times(ahat.multiply(d_h1pre));
  return g;
}

}  // namespace gat
