#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <thread>

#include "graphattacker/attack.hpp"
#include "graphattacker/models.hpp"
#include "graphattacker/stealth.hpp"

namespace gat {

// Runs fn(i) for i in [0, count) on up to `jobs` worker threads. Exceptions
// propagate; iteration order inside a worker is ascending, results must be
// written to pre-sized slots for determinism.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::max(1, std::min(jobs, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (int w = 0; w < jobs; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Per-target records and aggregate metrics

struct TargetRecord {
  std::vector<int> ids;  // node id, (i, j) link pair, or graph index
  int y_true = 0;
  int y_target = -1;
  bool success = false;
  bool trivial = false;
  int links_changed = 0;
  int attrs_changed = 0;
  double l2_attr = 0.0;
  std::optional<double> lambda_stat;
  std::optional<double> smr_value;
  int epochs_used = 0;
  int restarts_used = 0;
  int subgraph_size = 0;
  bool reverified = false;  // post-hoc stealth check agreed with the attacker
  bool has_candidate = false;
};

struct MetricReport {
  int attacked = 0;
  int successes = 0;
  double asr = 0.0;
  double aml = 0.0;
  double ama = 0.0;
  double l2_mean = 0.0;
  std::vector<TargetRecord> records;
};

constexpr int kPerturbationCap = 100;  // failed attacks count as this many links

inline double asr(const std::vector<TargetRecord>& records) {
  if (records.empty()) throw ContractError("asr: empty input");
  int s = 0;
  for (const auto& r : records) s += r.success ? 1 : 0;
  return static_cast<double>(s) / static_cast<double>(records.size());
}

inline double aml(const std::vector<TargetRecord>& records) {
  if (records.empty()) throw ContractError("aml: empty input");
  double total = 0.0;
  for (const auto& r : records) {
    if (r.success)
      total += r.links_changed;
    else
      total += std::min(r.has_candidate ? r.links_changed : kPerturbationCap,
                        kPerturbationCap);
  }
  return total / static_cast<double>(records.size());
}

inline double ama(const std::vector<TargetRecord>& records) {
  if (records.empty()) throw ContractError("ama: empty input");
  double total = 0.0;
  for (const auto& r : records) {
    if (r.success)
      total += r.attrs_changed;
    else
      total += std::min(r.has_candidate ? r.attrs_changed : kPerturbationCap,
                        kPerturbationCap);
  }
  return total / static_cast<double>(records.size());
}

inline MetricReport aggregate_metrics(std::vector<TargetRecord> records) {
  MetricReport m;
  m.records = std::move(records);
  m.attacked = static_cast<int>(m.records.size());
  for (const auto& r : m.records) m.successes += r.success ? 1 : 0;
  m.asr = asr(m.records);
  m.aml = aml(m.records);
  m.ama = ama(m.records);
  double l2 = 0.0;
  int nl2 = 0;
  for (const auto& r : m.records)
    if (r.success) {
      l2 += r.l2_attr;
      ++nl2;
    }
  m.l2_mean = nl2 > 0 ? l2 / nl2 : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Target selection: per class, correctly classified test instances.

struct SelectedTargets {
  std::vector<std::vector<int>> targets;  // ids (single node / pair / graph index)
  std::vector<int> truths;
  bool shortfall = false;  // some class had fewer correct instances than asked
};

inline SelectedTargets select_node_targets(const NodeClassifier& m, const Graph& g,
                                           const std::vector<int>& test_ids, int per_class,
                                           std::uint64_t seed) {
  const PredictionConfidence c = predict_node_confidence(m, g);
  SelectedTargets sel;
  std::vector<std::vector<int>> by_class(m.num_classes);
  for (int v : test_ids)
    if (c.labels[v] == g.label_of(v)) by_class[g.label_of(v)].push_back(v);
  Rng rng(seed);
  for (int cls = 0; cls < m.num_classes; ++cls) {
    auto& pool = by_class[cls];
    std::shuffle(pool.begin(), pool.end(), rng);
    if (static_cast<int>(pool.size()) < per_class) sel.shortfall = true;
    const int take = std::min<int>(per_class, static_cast<int>(pool.size()));
    for (int k = 0; k < take; ++k) {
      sel.targets.push_back({pool[k]});
      sel.truths.push_back(cls);
    }
  }
  return sel;
}

inline SelectedTargets select_graph_targets(const GraphClassifier& m, const GraphSet& set,
                                            const std::vector<int>& test_ids, int per_class,
                                            std::uint64_t seed) {
  SelectedTargets sel;
  std::vector<std::vector<int>> by_class(m.num_classes);
  for (int gi : test_ids) {
    const PredictionConfidence c = predict_graph_confidence(m, set.graphs[gi]);
    if (c.labels[0] == set.graph_labels[gi]) by_class[set.graph_labels[gi]].push_back(gi);
  }
  Rng rng(seed);
  for (int cls = 0; cls < m.num_classes; ++cls) {
    auto& pool = by_class[cls];
    std::shuffle(pool.begin(), pool.end(), rng);
    if (static_cast<int>(pool.size()) < per_class) sel.shortfall = true;
    const int take = std::min<int>(per_class, static_cast<int>(pool.size()));
    for (int k = 0; k < take; ++k) {
      sel.targets.push_back({pool[k]});
      sel.truths.push_back(cls);
    }
  }
  return sel;
}

// Link targets: correctly predicted held-out positives (class 1) and
// negatives (class 0), per_class from each.
inline SelectedTargets select_link_targets(const LinkPredictor& m, const Graph& g,
                                           const LinkSample& held_out, int per_class,
                                           std::uint64_t seed) {
  const DenseMatrix z = link_embeddings(m, g);
  SelectedTargets sel;
  std::vector<std::vector<int>> pos_pool, neg_pool;
  for (const auto& [i, j] : held_out.positives)
    if (link_probability(z, i, j) > 0.5) pos_pool.push_back({i, j});
  for (const auto& [i, j] : held_out.negatives)
    if (link_probability(z, i, j) <= 0.5) neg_pool.push_back({i, j});
  Rng rng(seed);
  std::shuffle(pos_pool.begin(), pos_pool.end(), rng);
  std::shuffle(neg_pool.begin(), neg_pool.end(), rng);
  if (static_cast<int>(pos_pool.size()) < per_class ||
      static_cast<int>(neg_pool.size()) < per_class)
    sel.shortfall = true;
  for (int k = 0; k < std::min<int>(per_class, static_cast<int>(pos_pool.size())); ++k) {
    sel.targets.push_back(pos_pool[k]);
    sel.truths.push_back(1);
  }
  for (int k = 0; k < std::min<int>(per_class, static_cast<int>(neg_pool.size())); ++k) {
    sel.targets.push_back(neg_pool[k]);
    sel.truths.push_back(0);
  }
  return sel;
}

// ---------------------------------------------------------------------------
// DICE baseline: disconnect b links of the target, connect the target to
// budget - b nodes of different categories.

struct DiceResult {
  Graph graph;
  int applied = 0;
  bool shortfall = false;
};

// budget == 0 gives each target its own clean degree as budget (the paper's
// "M is the original number of links of the target node").
inline DiceResult dice_attack(const Graph& g, const std::vector<int>& targets, int budget,
                              std::uint64_t seed, TaskKind task) {
  if (budget < 0) throw ContractError("dice_attack: budget must be >= 0");
  if (task == TaskKind::graph) throw ContractError("dice_attack: graph task not supported");
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges = g.edges();
  DiceResult res{g, 0, false};

  const auto has = [&edges](int a, int b) {
    const std::pair<int, int> e{std::min(a, b), std::max(a, b)};
    return std::find(edges.begin(), edges.end(), e) != edges.end();
  };
  const auto toggle = [&edges](int a, int b, bool add) {
    const std::pair<int, int> e{std::min(a, b), std::max(a, b)};
    if (add)
      edges.push_back(e);
    else
      edges.erase(std::find(edges.begin(), edges.end(), e));
  };

  for (const int t : targets) {
    const int m = budget > 0 ? budget : std::max(1, g.degree(t));
    std::vector<int> linked = g.neighbors(t);
    std::uniform_int_distribution<int> bdist(0, std::min<int>(m, g.degree(t)));
    const int b = bdist(rng);
    std::shuffle(linked.begin(), linked.end(), rng);
    for (int k = 0; k < b; ++k) {
      toggle(t, linked[k], false);
      ++res.applied;
    }
    // connect to different-category non-neighbors (any non-neighbor when the
    // graph carries no labels)
    std::vector<int> pool;
    for (int v = 0; v < g.n(); ++v) {
      if (v == t || has(t, v)) continue;
      if (g.has_labels() && g.label_of(v) == g.label_of(t)) continue;
      pool.push_back(v);
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    const int want = m - b;
    if (static_cast<int>(pool.size()) < want) res.shortfall = true;
    const int take = std::min<int>(want, static_cast<int>(pool.size()));
    for (int k = 0; k < take; ++k) {
      toggle(t, pool[k], true);
      ++res.applied;
    }
  }
  res.graph = Graph::from_edges(g.n(), std::move(edges), g.attributes(), g.attribute_kind(),
                                g.node_labels());
  return res;
}

// ---------------------------------------------------------------------------
// Similarity analysis

struct SimilarityHistogram {
  std::vector<double> bin_edges;        // bins + 1 edges spanning [-1, 1]
  std::vector<long> linked_counts;     // "before" counts in target mode
  std::vector<long> unlinked_counts;   // "after" counts in target mode
};

namespace detail {

inline SimilarityHistogram make_histogram(int bins) {
  SimilarityHistogram h;
  h.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b) h.bin_edges[b] = -1.0 + 2.0 * b / bins;
  h.linked_counts.assign(bins, 0);
  h.unlinked_counts.assign(bins, 0);
  return h;
}

inline int bin_of(const SimilarityHistogram& h, double v) {
  const int bins = static_cast<int>(h.linked_counts.size());
  int b = static_cast<int>((v + 1.0) / 2.0 * bins);
  return std::max(0, std::min(bins - 1, b));
}

}  // namespace detail

inline std::vector<double> linked_similarity_values(const Graph& g,
                                                    const EmbeddingFn& extractor) {
  const DenseMatrix z = extractor(g);
  std::vector<double> out;
  out.reserve(g.edges().size());
  for (const auto& [i, j] : g.edges()) out.push_back(node_cosine_similarity(z, i, j));
  return out;
}

// Linked pairs vs an equal-size uniform sample of non-edges.
inline SimilarityHistogram similarity_distribution_linked(const Graph& g,
                                                          const EmbeddingFn& extractor,
                                                          int bins, std::uint64_t seed) {
  SimilarityHistogram h = detail::make_histogram(bins);
  const DenseMatrix z = extractor(g);
  for (const auto& [i, j] : g.edges())
    ++h.linked_counts[detail::bin_of(h, node_cosine_similarity(z, i, j))];
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, g.n() - 1);
  std::size_t sampled = 0;
  while (sampled < g.edges().size()) {
    const int i = pick(rng), j = pick(rng);
    if (i == j || g.has_edge(i, j)) continue;
    ++h.unlinked_counts[detail::bin_of(h, node_cosine_similarity(z, i, j))];
    ++sampled;
  }
  return h;
}

// Average similarity of the target to its neighbors before and after an
// attack; embeddings recomputed per graph with the same extractor.
inline std::pair<double, double> average_similarity_shift(const Graph& g,
                                                          const Graph& adversarial,
                                                          const EmbeddingFn& extractor,
                                                          int target) {
  const DenseMatrix z = extractor(g);
  const DenseMatrix z2 = extractor(adversarial);
  double before = 0.0, after = 0.0;
  if (!g.neighbors(target).empty()) {
    for (int j : g.neighbors(target)) before += node_cosine_similarity(z, target, j);
    before /= static_cast<double>(g.neighbors(target).size());
  }
  if (!adversarial.neighbors(target).empty()) {
    for (int j : adversarial.neighbors(target))
      after += node_cosine_similarity(z2, target, j);
    after /= static_cast<double>(adversarial.neighbors(target).size());
  }
  return {before, after};
}

inline SimilarityHistogram similarity_distribution_targets(
    const Graph& g, const std::vector<std::pair<int, const Graph*>>& attacked,
    const EmbeddingFn& extractor, int bins) {
  SimilarityHistogram h = detail::make_histogram(bins);
  for (const auto& [target, adv] : attacked) {
    const auto [before, after] = average_similarity_shift(g, *adv, extractor, target);
    ++h.linked_counts[detail::bin_of(h, before)];
    ++h.unlinked_counts[detail::bin_of(h, after)];
  }
  return h;
}

// ---------------------------------------------------------------------------
// Adversarial-training defense harness (node classification)

// Produces one adversarial parent graph for a target, or nullopt on failure.
using AttackFactory = std::function<std::optional<Graph>(int target, std::uint64_t seed)>;

struct DefenseReport {
  double clean_asr = 0.0;
  double retrained_asr = 0.0;
  double clean_accuracy_before = 0.0;
  double clean_accuracy_after = 0.0;
  int examples_generated = 0;
  int examples_failed = 0;
  NodeClassifier retrained;
};

// Retrains the classifier on the clean graph plus adversarial copies: each
// adversarial graph contributes the target node's cross-entropy term, all
// terms equally weighted with the clean training terms.
inline NodeClassifier retrain_with_adversarial(const Graph& g, const LabeledSplit& split,
                                               const std::vector<std::pair<int, Graph>>& extra,
                                               const TrainConfig& cfg) {
  const int classes = g.num_classes();
  Rng rng(cfg.seed);
  NodeClassifier model;
  model.hidden_dim = cfg.hidden_dim;
  model.num_classes = classes;
  model.w0 = glorot_uniform(g.attribute_dim(), cfg.hidden_dim, rng);
  model.w1 = glorot_uniform(cfg.hidden_dim, classes, rng);

  const SparseNormAdj ahat = SparseNormAdj::build(g);
  const SparseAttr x = SparseAttr::build(g);
  const DenseMatrix y = onehot_rows(g.node_labels(), classes);

  struct AdvEntry {
    SparseNormAdj ahat;
    SparseAttr attr;
    const Graph* graph;
    int target;
    bool shares_clean_x;
  };
  std::vector<AdvEntry> adv;
  adv.reserve(extra.size());
  for (const auto& [target, ag] : extra) {
    AdvEntry e{SparseNormAdj::build(ag), SparseAttr::build(ag), &ag, target,
               ag.attributes() == g.attributes()};
    adv.push_back(std::move(e));
  }

  ParameterSet params;
  params.add("W0", model.w0);
  params.add("W1", model.w1);
  AdamState adam = AdamState::create(params, cfg.learning_rate);
  const double denom = static_cast<double>(split.train.size() + adv.size());

  double best_val = -1.0;
  int stale = 0;
  ParameterSet best = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ParameterSet grads = params.zeros_like();
    double loss = 0.0;

    const Gcn2Sparse c =
        gcn2_forward_sparse(ahat, x, params.at("W0"), params.at("W1"), GcnFinal::softmax);
    DenseMatrix d_logits(g.n(), classes);
    for (int i : split.train)
      for (int j = 0; j < classes; ++j) {
        if (y(i, j) != 0.0) loss -= std::log(clamp_prob(c.out(i, j))) / denom;
        d_logits(i, j) = (c.out(i, j) - y(i, j)) / denom;
      }
    {
      const auto gset =
          gcn2_backward_sparse(c, ahat, x, params.at("W1"), GcnFinal::identity, d_logits);
      accumulate(grads.at("W0"), gset.d_w0);
      accumulate(grads.at("W1"), gset.d_w1);
    }

    const DenseMatrix xw0 = x.times(params.at("W0"));  // shared when X is untouched
    for (const auto& e : adv) {
      Gcn2Sparse ca;
      if (e.shares_clean_x) {
        ca.h1pre = e.ahat.multiply(xw0);
        ca.h1 = relu(ca.h1pre);
        ca.h2pre = e.ahat.multiply(matmul(ca.h1, params.at("W1")));
        ca.out = softmax_rows(ca.h2pre);
      } else {
        ca = gcn2_forward_sparse(e.ahat, e.attr, params.at("W0"), params.at("W1"),
                                 GcnFinal::softmax);
      }
      const int t = e.target;
      const int label = g.label_of(t);
      loss -= std::log(clamp_prob(ca.out(t, label))) / denom;
      DenseMatrix d(g.n(), classes);
      for (int j = 0; j < classes; ++j)
        d(t, j) = (ca.out(t, j) - (j == label ? 1.0 : 0.0)) / denom;
      const auto gset = e.shares_clean_x
                            ? gcn2_backward_sparse(ca, e.ahat, x, params.at("W1"),
                                                   GcnFinal::identity, d)
                            : gcn2_backward_sparse(ca, e.ahat, e.attr, params.at("W1"),
                                                   GcnFinal::identity, d);
      accumulate(grads.at("W0"), gset.d_w0);
      accumulate(grads.at("W1"), gset.d_w1);
    }
    detail::check_finite_loss(loss, cfg.seed, "retrain_with_adversarial");
    adam_step(params, grads, adam);

    const Gcn2Sparse cv =
        gcn2_forward_sparse(ahat, x, params.at("W0"), params.at("W1"), GcnFinal::softmax);
    const std::vector<int> pred = argmax_rows(cv.out);
    const double val = split.validation.empty()
                           ? accuracy_on(pred, g.node_labels(), split.train)
                           : accuracy_on(pred, g.node_labels(), split.validation);
    if (val > best_val) {
      best_val = val;
      best = params;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  model.w0 = best.at("W0");
  model.w1 = best.at("W1");
  model.validation_accuracy = best_val;
  return model;
}

using AsrEvaluator = std::function<double(const NodeClassifier&)>;

inline DefenseReport adversarial_training(const Graph& g, const LabeledSplit& split,
                                          const NodeClassifier& clean_model,
                                          const std::vector<int>& train_targets,
                                          const AttackFactory& factory, int n_per_target,
                                          const TrainConfig& retrain_cfg,
                                          const AsrEvaluator& attack_asr, int jobs = 0) {
  DefenseReport report;
  {
    const PredictionConfidence c = predict_node_confidence(clean_model, g);
    report.clean_accuracy_before = accuracy_on(c.labels, g.node_labels(), split.test);
  }
  report.clean_asr = attack_asr(clean_model);

  std::vector<std::optional<Graph>> generated(train_targets.size() *
                                              static_cast<std::size_t>(n_per_target));
  parallel_for(static_cast<int>(generated.size()), jobs, [&](int k) {
    const int t = train_targets[k / n_per_target];
    const std::uint64_t seed = substream_seed(retrain_cfg.seed, 7000 + k);
    generated[k] = factory(t, seed);
  });
  std::vector<std::pair<int, Graph>> extra;
  for (std::size_t k = 0; k < generated.size(); ++k) {
    if (generated[k]) {
      extra.emplace_back(train_targets[k / n_per_target], std::move(*generated[k]));
      ++report.examples_generated;
    } else {
      ++report.examples_failed;
    }
  }

  report.retrained = retrain_with_adversarial(g, split, extra, retrain_cfg);
  {
    const PredictionConfidence c = predict_node_confidence(report.retrained, g);
    report.clean_accuracy_after = accuracy_on(c.labels, g.node_labels(), split.test);
  }
  report.retrained_asr = attack_asr(report.retrained);
  return report;
}

}  // namespace gat
