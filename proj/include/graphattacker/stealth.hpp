#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "graphattacker/graph.hpp"
#include "graphattacker/matrix.hpp"
#include "graphattacker/models.hpp"
#include "graphattacker/strategy.hpp"

namespace gat {

// Produces node embeddings for similarity measurements; typically the clean
// pre-trained feature extractor applied to the given graph.
using EmbeddingFn = std::function<DenseMatrix(const Graph&)>;

// Post-generation stealthiness gate R = {Delta, Lambda, SMR, L2}.
struct ConstraintSet {
  double budget_ratio = 0.05;
  int delta = 0;  // resolved absolute budget
  bool budget_enabled = true;
  std::optional<double> lambda_threshold;  // enabled when set
  std::optional<double> smr_threshold;
  std::optional<double> l2_threshold;
  int lambda_d_min = 2;

  void validate() const {
    if (!budget_enabled) throw ContractError("ConstraintSet: budget must stay enabled");
    if (delta < 0 || budget_ratio < 0) throw ContractError("ConstraintSet: negative budget");
    if ((lambda_threshold && *lambda_threshold < 0) || (smr_threshold && *smr_threshold < 0) ||
        (l2_threshold && *l2_threshold < 0))
      throw ContractError("ConstraintSet: negative threshold");
  }

  // Budget resolution: structure attacks on node/link tasks get r*|E|;
  // graph-classification budgets scale with r*N^2 (structure) or r*N
  // (one-hot attributes).
  static int resolve_delta(double r, TaskKind task, AttackStrategy strategy, int n_nodes,
                           int n_edges) {
    if (task == TaskKind::graph) {
      if (strategy == AttackStrategy::attribute)
        return static_cast<int>(r * n_nodes);
      return static_cast<int>(r * static_cast<double>(n_nodes) * n_nodes);
    }
    return static_cast<int>(r * n_edges);
  }
};

struct PerturbationReport {
  int links_changed = 0;
  int attrs_changed = 0;
  double l2_attr = 0.0;
  std::optional<double> lambda_stat;
  std::optional<double> smr_value;
  bool smr_degenerate = false;  // isolated target, similarity undefined

  bool budget_ok = true;
  std::optional<bool> lambda_ok;
  std::optional<bool> smr_ok;
  std::optional<bool> l2_ok;
  bool pass = true;
};

// ---------------------------------------------------------------------------

// (flipped undirected links, flipped attribute entries)
inline std::pair<int, int> perturbation_delta(const Graph& g, const Graph& g2) {
  if (g.n() != g2.n() || g.attribute_dim() != g2.attribute_dim())
    throw ContractError("perturbation_delta: shape mismatch");
  int links = 0;
  // both edge lists are sorted; count symmetric difference
  std::size_t a = 0, b = 0;
  const auto& e1 = g.edges();
  const auto& e2 = g2.edges();
  while (a < e1.size() || b < e2.size()) {
    if (a == e1.size()) {
      ++links;
      ++b;
    } else if (b == e2.size()) {
      ++links;
      ++a;
    } else if (e1[a] == e2[b]) {
      ++a;
      ++b;
    } else if (e1[a] < e2[b]) {
      ++links;
      ++a;
    } else {
      ++links;
      ++b;
    }
  }
  int attrs = 0;
  for (std::size_t i = 0; i < g.attributes().size(); ++i)
    if (g.attributes().data[i] != g2.attributes().data[i]) ++attrs;
  return {links, attrs};
}

namespace detail {

struct PowerLawSample {
  double n = 0.0;
  double sum_log = 0.0;
};

inline PowerLawSample degree_sample(const Graph& g, int d_min) {
  PowerLawSample s;
  for (int v = 0; v < g.n(); ++v) {
    const int d = g.degree(v);
    if (d >= d_min) {
      s.n += 1.0;
      s.sum_log += std::log(static_cast<double>(d));
    }
  }
  return s;
}

inline double power_law_alpha(const PowerLawSample& s, int d_min) {
  return 1.0 + s.n / (s.sum_log - s.n * std::log(d_min - 0.5));
}

inline double power_law_log_likelihood(const PowerLawSample& s, double alpha, int d_min) {
  return s.n * std::log(alpha) + s.n * alpha * std::log(static_cast<double>(d_min)) -
         (alpha + 1.0) * s.sum_log;
}

}  // namespace detail

// Likelihood-ratio statistic of the power-law degree fit before vs after the
// attack: Lambda = -2 ll(combined) + 2 (ll(g) + ll(g2)), each sample scored
// under its own MLE exponent.
inline double degree_test_statistic(const Graph& g, const Graph& g2, int d_min = 2) {
  if (d_min < 1) throw ContractError("degree_test_statistic: d_min must be >= 1");
  const auto s1 = detail::degree_sample(g, d_min);
  const auto s2 = detail::degree_sample(g2, d_min);
  if (s1.n == 0.0 || s2.n == 0.0)
    throw UndefinedStatisticError("degree_test_statistic: no node with degree >= d_min");
  const detail::PowerLawSample comb{s1.n + s2.n, s1.sum_log + s2.sum_log};
  const double a1 = detail::power_law_alpha(s1, d_min);
  const double a2 = detail::power_law_alpha(s2, d_min);
  const double ac = detail::power_law_alpha(comb, d_min);
  return -2.0 * detail::power_law_log_likelihood(comb, ac, d_min) +
         2.0 * (detail::power_law_log_likelihood(s1, a1, d_min) +
                detail::power_law_log_likelihood(s2, a2, d_min));
}

// Cosine similarity between embedding rows; zero vectors yield 0 by
// convention (degenerate, flagged by callers where it matters).
inline double node_cosine_similarity(const DenseMatrix& z, int i, int j) {
  double dot = 0.0, ni = 0.0, nj = 0.0;
  for (int c = 0; c < z.cols; ++c) {
    dot += z(i, c) * z(j, c);
    ni += z(i, c) * z(i, c);
    nj += z(j, c) * z(j, c);
  }
  if (ni == 0.0 || nj == 0.0) return 0.0;
  return dot / (std::sqrt(ni) * std::sqrt(nj));
}

// Relative drop of the target's average similarity to its neighbors:
// (clean avg - adversarial avg) / clean avg, each average over its own
// neighbor set. Embeddings are recomputed on each graph with the same
// extractor.
inline double smr(const Graph& g, const Graph& g2, const EmbeddingFn& extractor, int target,
                  bool* degenerate = nullptr) {
  if (target < 0 || target >= g.n()) throw ContractError("smr: target out of range");
  if (degenerate) *degenerate = false;
  const auto& clean_nb = g.neighbors(target);
  if (clean_nb.empty()) {
    if (degenerate) *degenerate = true;
    return 0.0;  // attack on isolated node: similarity change undefined
  }
  const DenseMatrix z = extractor(g);
  double clean_avg = 0.0;
  for (int j : clean_nb) clean_avg += node_cosine_similarity(z, target, j);
  clean_avg /= static_cast<double>(clean_nb.size());
  if (clean_avg <= 0.0)
    throw UndefinedStatisticError("smr: clean average similarity not positive");

  const auto& adv_nb = g2.neighbors(target);
  double adv_avg = 0.0;
  if (!adv_nb.empty()) {
    const DenseMatrix z2 = extractor(g2);
    for (int j : adv_nb) adv_avg += node_cosine_similarity(z2, target, j);
    adv_avg /= static_cast<double>(adv_nb.size());
  } else if (degenerate) {
    *degenerate = true;  // target isolated after the attack
  }
  return (clean_avg - adv_avg) / clean_avg;
}

inline double l2_attribute_norm(const DenseMatrix& x, const DenseMatrix& x2) {
  require_same_shape(x, x2, "l2_attribute_norm");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x.data[i] - x2.data[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Evaluates every enabled constraint on the (clean, adversarial) pair.
// Overall pass iff all enabled verdicts are true. For continuous attributes
// the budget counts links only; attribute perturbation goes through the L2
// threshold instead.
inline PerturbationReport check_constraints(const Graph& g, const Graph& g2,
                                            const ConstraintSet& cset,
                                            const EmbeddingFn& extractor = {},
                                            const std::vector<int>& targets = {}) {
  cset.validate();
  PerturbationReport r;
  const auto [links, attrs] = perturbation_delta(g, g2);
  r.links_changed = links;
  r.attrs_changed = attrs;
  r.l2_attr = l2_attribute_norm(g.attributes(), g2.attributes());

  const bool binary_attrs = g.attribute_kind() == AttributeKind::binary &&
                            g2.attribute_kind() == AttributeKind::binary;
  const int budget_used = binary_attrs ? links + attrs : links;
  r.budget_ok = budget_used <= cset.delta;
  r.pass = r.budget_ok;

  if (cset.lambda_threshold) {
    r.lambda_stat = degree_test_statistic(g, g2, cset.lambda_d_min);
    r.lambda_ok = *r.lambda_stat < *cset.lambda_threshold;
    r.pass = r.pass && *r.lambda_ok;
  }
  if (cset.smr_threshold) {
    if (!extractor) throw ContractError("check_constraints: SMR needs an extractor");
    if (targets.empty()) throw ContractError("check_constraints: SMR needs a target");
    double worst = 0.0;
    bool degenerate = false;
    for (int t : targets) {
      bool deg = false;
      const double v = smr(g, g2, extractor, t, &deg);
      degenerate = degenerate || deg;
      if (std::fabs(v) > std::fabs(worst)) worst = v;
    }
    r.smr_value = worst;
    r.smr_degenerate = degenerate;
    r.smr_ok = worst < *cset.smr_threshold;
    r.pass = r.pass && *r.smr_ok;
  }
  if (cset.l2_threshold) {
    r.l2_ok = r.l2_attr < *cset.l2_threshold;
    r.pass = r.pass && *r.l2_ok;
  }
  return r;
}

}  // namespace gat
