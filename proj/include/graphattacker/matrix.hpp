#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "graphattacker/common.hpp"

namespace gat {

// Row-major dense matrix of doubles. The workhorse value type of the whole
// library; everything trainable is a collection of these.
struct DenseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw ContractError("DenseMatrix: negative dimension");
  }

  double& operator()(int i, int j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return data[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const DenseMatrix& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const DenseMatrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* where) {
  if (!a.same_shape(b)) throw ContractError(std::string(where) + ": shape mismatch");
}

inline bool all_finite(const DenseMatrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

inline DenseMatrix identity_matrix(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

// c = a * b
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw ContractError("matmul: inner dimension mismatch");
  DenseMatrix c(a.rows, b.cols);
  // i-k-j order keeps the inner loop sequential over both b and c.
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// c = a^T * b
inline DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows) throw ContractError("matmul_at_b: dimension mismatch");
  DenseMatrix c(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.data[static_cast<std::size_t>(k) * a.cols];
    const double* brow = &b.data[static_cast<std::size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = &c.data[static_cast<std::size_t>(i) * c.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

// c = a * b^T
inline DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) throw ContractError("matmul_a_bt: dimension mismatch");
  DenseMatrix c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<std::size_t>(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.data[static_cast<std::size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
  return t;
}

inline DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
  return c;
}

inline DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "sub");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
  return c;
}

inline DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix c = a;
  for (double& v : c.data) v *= s;
  return c;
}

inline DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
  return c;
}

inline void accumulate(DenseMatrix& into, const DenseMatrix& d, double w = 1.0) {
  require_same_shape(into, d, "accumulate");
  for (std::size_t i = 0; i < into.size(); ++i) into.data[i] += w * d.data[i];
}

// ---------------------------------------------------------------------------
// Activations

inline DenseMatrix relu(const DenseMatrix& m) {
  DenseMatrix r = m;
  for (double& v : r.data) v = v > 0.0 ? v : 0.0;
  return r;
}

// Gradient of relu routed through its input: d_in = d_out where in > 0.
inline DenseMatrix relu_backward(const DenseMatrix& input, const DenseMatrix& d_out) {
  require_same_shape(input, d_out, "relu_backward");
  DenseMatrix d = d_out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (input.data[i] <= 0.0) d.data[i] = 0.0;
  return d;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline DenseMatrix sigmoid(const DenseMatrix& m) {
  DenseMatrix r = m;
  for (double& v : r.data) v = sigmoid(v);
  return r;
}

// Row-wise softmax with max subtraction for stability.
inline DenseMatrix softmax_rows(const DenseMatrix& m) {
  DenseMatrix r = m;
  for (int i = 0; i < m.rows; ++i) {
    double mx = -1e300;
    for (int j = 0; j < m.cols; ++j) mx = std::max(mx, m(i, j));
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) {
      r(i, j) = std::exp(m(i, j) - mx);
      s += r(i, j);
    }
    for (int j = 0; j < m.cols; ++j) r(i, j) /= s;
  }
  return r;
}

// Backward of softmax applied row-wise: given p = softmax(x) and dL/dp,
// dL/dx_ij = p_ij * (dp_ij - sum_k dp_ik p_ik).
inline DenseMatrix softmax_rows_backward(const DenseMatrix& p, const DenseMatrix& d_p) {
  require_same_shape(p, d_p, "softmax_rows_backward");
  DenseMatrix dx(p.rows, p.cols);
  for (int i = 0; i < p.rows; ++i) {
    double dot = 0.0;
    for (int j = 0; j < p.cols; ++j) dot += d_p(i, j) * p(i, j);
    for (int j = 0; j < p.cols; ++j) dx(i, j) = p(i, j) * (d_p(i, j) - dot);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Losses

constexpr double kProbClamp = 1e-12;

inline double clamp_prob(double p) {
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, p));
}

// Mean negative log-likelihood over rows; pred rows must be probability
// distributions, onehot the matching indicator matrix.
inline double cross_entropy(const DenseMatrix& pred, const DenseMatrix& onehot) {
  require_same_shape(pred, onehot, "cross_entropy");
  if (pred.rows == 0) throw ContractError("cross_entropy: empty input");
  double loss = 0.0;
  for (int i = 0; i < pred.rows; ++i)
    for (int j = 0; j < pred.cols; ++j)
      if (onehot(i, j) != 0.0) loss -= onehot(i, j) * std::log(clamp_prob(pred(i, j)));
  return loss / pred.rows;
}

inline double binary_cross_entropy(double p, double y) {
  p = clamp_prob(p);
  return -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
}

inline double binary_cross_entropy(const DenseMatrix& p, const DenseMatrix& y) {
  require_same_shape(p, y, "binary_cross_entropy");
  if (p.size() == 0) throw ContractError("binary_cross_entropy: empty input");
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    loss += binary_cross_entropy(p.data[i], y.data[i]);
  return loss / static_cast<double>(p.size());
}

// ---------------------------------------------------------------------------
// Initialization

inline DenseMatrix glorot_uniform(int rows, int cols, Rng& rng) {
  double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  DenseMatrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

inline DenseMatrix onehot_rows(const std::vector<int>& labels, int num_classes) {
  DenseMatrix m(static_cast<int>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ContractError("onehot_rows: label out of range");
    m(static_cast<int>(i), labels[i]) = 1.0;
  }
  return m;
}

inline std::vector<int> argmax_rows(const DenseMatrix& m) {
  std::vector<int> out(m.rows, 0);
  for (int i = 0; i < m.rows; ++i) {
    double best = m(i, 0);
    for (int j = 1; j < m.cols; ++j)
      if (m(i, j) > best) {
        best = m(i, j);
        out[i] = j;
      }
  }
  return out;
}

}  // namespace gat
