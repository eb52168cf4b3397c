#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "graphattacker/matrix.hpp"

namespace gat {

// Ordered collection of named parameter matrices. Order is fixed at insertion
// time so traversal (and therefore optimization and checkpointing) is
// deterministic.
struct ParameterSet {
  std::vector<std::pair<std::string, DenseMatrix>> items;

  DenseMatrix& add(const std::string& name, DenseMatrix m) {
    if (has(name)) throw ContractError("ParameterSet: duplicate name " + name);
    items.emplace_back(name, std::move(m));
    return items.back().second;
  }

  bool has(const std::string& name) const {
    for (const auto& [n, _] : items)
      if (n == name) return true;
    return false;
  }

  DenseMatrix& at(const std::string& name) {
    for (auto& [n, m] : items)
      if (n == name) return m;
    throw ContractError("ParameterSet: unknown name " + name);
  }

  const DenseMatrix& at(const std::string& name) const {
    for (const auto& [n, m] : items)
      if (n == name) return m;
    throw ContractError("ParameterSet: unknown name " + name);
  }

  std::size_t count() const { return items.size(); }

  // Same names, same order, same shapes.
  bool shape_matches(const ParameterSet& o) const {
    if (items.size() != o.items.size()) return false;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (items[i].first != o.items[i].first ||
          !items[i].second.same_shape(o.items[i].second))
        return false;
    return true;
  }

  ParameterSet zeros_like() const {
    ParameterSet z;
    for (const auto& [n, m] : items) z.add(n, DenseMatrix(m.rows, m.cols));
    return z;
  }
};

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  ParameterSet m;  // first moments
  ParameterSet v;  // second moments

  static AdamState create(const ParameterSet& params, double lr) {
    AdamState s;
    s.learning_rate = lr;
    s.m = params.zeros_like();
    s.v = params.zeros_like();
    return s;
  }
};

// Standard Adam update with bias correction. Mutates params and state.
inline void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (!params.shape_matches(grads)) throw ContractError("adam_step: gradient shape mismatch");
  if (!params.shape_matches(state.m)) throw ContractError("adam_step: state shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.items.size(); ++p) {
    auto& w = params.items[p].second.data;
    const auto& g = grads.items[p].second.data;
    auto& m = state.m.items[p].second.data;
    auto& v = state.v.items[p].second.data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle

struct FdCoordinate {
  std::string param;
  int index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  FdCoordinate worst;

  bool within(double tol) const { return max_rel_error < tol; }
};

// Central-difference check of analytic gradients. Samples up to max_coords
// coordinates (all of them when the parameter set is small). loss_fn must be
// a deterministic function of the parameters.
inline FdReport finite_difference_check(
    const std::function<double(const ParameterSet&)>& loss_fn, ParameterSet params,
    const ParameterSet& analytic_grads, double h = 1e-4, std::size_t max_coords = 400,
    std::uint64_t seed = 0) {
  if (!params.shape_matches(analytic_grads))
    throw ContractError("finite_difference_check: gradient shape mismatch");
  if (!(h > 0.0)) throw ContractError("finite_difference_check: h must be positive");

  std::size_t total = 0;
  for (const auto& [_, m] : params.items) total += m.size();

  std::vector<std::pair<std::size_t, std::size_t>> coords;  // (param idx, flat idx)
  if (total <= max_coords) {
    for (std::size_t p = 0; p < params.items.size(); ++p)
      for (std::size_t i = 0; i < params.items[p].second.size(); ++i)
        coords.emplace_back(p, i);
  } else {
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    std::vector<std::size_t> offsets(params.items.size() + 1, 0);
    for (std::size_t p = 0; p < params.items.size(); ++p)
      offsets[p + 1] = offsets[p] + params.items[p].second.size();
    for (std::size_t k = 0; k < max_coords; ++k) {
      std::size_t flat = pick(rng);
      std::size_t p = 0;
      while (flat >= offsets[p + 1]) ++p;
      coords.emplace_back(p, flat - offsets[p]);
    }
  }

  FdReport report;
  for (const auto& [p, i] : coords) {
    double& w = params.items[p].second.data[i];
    const double saved = w;
    w = saved + h;
    const double f_plus = loss_fn(params);
    w = saved - h;
    const double f_minus = loss_fn(params);
    w = saved;
    if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
      throw OracleError("finite_difference_check: non-finite loss");
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double analytic = analytic_grads.items[p].second.data[i];
    const double rel = std::fabs(analytic - numeric) / std::max(std::fabs(numeric), 1e-6);
    ++report.coords_checked;
    if (rel >= report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst = {params.items[p].first, static_cast<int>(i), analytic, numeric, rel};
    }
  }
  return report;
}

}  // namespace gat
