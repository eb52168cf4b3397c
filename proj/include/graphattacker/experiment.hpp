#pragma once

#include <chrono>
#include <filesystem>
#include <tuple>

#include "graphattacker/config.hpp"
#include "graphattacker/dataset.hpp"
#include "graphattacker/eval.hpp"

namespace gat {

// Compact delta between a clean graph and an adversarial copy; enough to
// reconstruct the adversarial graph next to the dataset.
struct GraphEdits {
  std::vector<std::pair<int, int>> added_links;
  std::vector<std::pair<int, int>> removed_links;
  std::vector<std::tuple<int, int, double>> attr_changes;  // node, column, new value
};

inline GraphEdits diff_graphs(const Graph& clean, const Graph& adv) {
  GraphEdits e;
  for (const auto& edge : adv.edges())
    if (!clean.has_edge(edge.first, edge.second)) e.added_links.push_back(edge);
  for (const auto& edge : clean.edges())
    if (!adv.has_edge(edge.first, edge.second)) e.removed_links.push_back(edge);
  for (int i = 0; i < clean.n(); ++i)
    for (int c = 0; c < clean.attribute_dim(); ++c)
      if (clean.attributes()(i, c) != adv.attributes()(i, c))
        e.attr_changes.emplace_back(i, c, adv.attributes()(i, c));
  return e;
}

inline Graph apply_edits(const Graph& clean, const GraphEdits& e) {
  std::vector<std::pair<int, int>> edges = clean.edges();
  for (const auto& r : e.removed_links) {
    const std::pair<int, int> key{std::min(r.first, r.second), std::max(r.first, r.second)};
    edges.erase(std::find(edges.begin(), edges.end(), key));
  }
  for (const auto& a : e.added_links) edges.push_back(a);
  DenseMatrix attrs = clean.attributes();
  for (const auto& [i, c, v] : e.attr_changes) attrs(i, c) = v;
  AttributeKind kind = clean.attribute_kind();
  if (kind == AttributeKind::binary)
    for (double v : attrs.data)
      if (v != 0.0 && v != 1.0) kind = AttributeKind::continuous;
  return Graph::from_edges(clean.n(), std::move(edges), std::move(attrs), kind,
                           clean.node_labels());
}

// ---------------------------------------------------------------------------
// Dataset loading per task

struct LoadedData {
  TaskKind task = TaskKind::node;
  Graph graph;          // node / link (observed structure for link)
  Graph full_graph;     // link: the complete graph before edge holdout
  GraphSet set;         // graph task
  LabeledSplit split;   // node ids, graph indices, or unused for link
  LinkSample held_out;  // link: test positives + sampled negatives
};

inline LoadedData load_data(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  LoadedData d;
  d.task = cfg.task_kind();
  const double tr = cfg.effective_train_ratio();
  const double vr = cfg.effective_val_ratio();

  if (d.task == TaskKind::graph) {
    if (cfg.format != "tu")
      throw ContractError("graph task expects --format tu");
    d.set = load_tu_dataset(cfg.dataset, cfg.tu_name);
    d.split = make_split(static_cast<int>(d.set.graphs.size()), tr, vr,
                         substream_seed(cfg.seed, 1));
    return d;
  }

  const fs::path dir(cfg.dataset);
  const std::string edges = (dir / "edges.txt").string();
  const auto opt_file = [&](const char* name) -> std::optional<std::string> {
    const auto p = dir / name;
    if (fs::exists(p)) return p.string();
    return std::nullopt;
  };
  const Graph g = load_edge_list(edges, opt_file("attributes.txt"), opt_file("labels.txt"));

  if (d.task == TaskKind::node) {
    if (!g.has_labels()) throw DatasetError("node task needs labels.txt");
    d.graph = g;
    d.split = make_split(g.n(), tr, vr, substream_seed(cfg.seed, 1));
    return d;
  }

  // link task: hold out validation/test edges from the observed structure
  d.full_graph = g;
  std::vector<std::pair<int, int>> edges_v = g.edges();
  Rng rng(substream_seed(cfg.seed, 2));
  std::shuffle(edges_v.begin(), edges_v.end(), rng);
  const int n_test = static_cast<int>((1.0 - tr - vr) * edges_v.size());
  const int n_val = static_cast<int>(vr * edges_v.size());
  d.held_out.positives.assign(edges_v.begin(), edges_v.begin() + n_test);
  std::vector<std::pair<int, int>> observed(edges_v.begin() + n_test + n_val, edges_v.end());
  // validation positives stay out of the observed graph but are otherwise unused
  d.graph = Graph::from_edges(g.n(), std::move(observed), g.attributes(),
                              g.attribute_kind(), g.node_labels());
  std::uniform_int_distribution<int> pick(0, g.n() - 1);
  while (d.held_out.negatives.size() < d.held_out.positives.size()) {
    const int i = pick(rng), j = pick(rng);
    if (i == j || g.has_edge(i, j)) continue;
    d.held_out.negatives.emplace_back(i, j);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Experiment records and results

struct ExperimentResult {
  ExperimentConfig config;
  double clean_metric = 0.0;  // test accuracy (node/graph) or AUC (link)
  bool target_shortfall = false;
  MetricReport metrics;
  std::vector<GraphEdits> edits;  // parallel to metrics.records
  double wall_seconds = 0.0;
  Checkpoint target_checkpoint;
};

namespace detail {

inline double link_auc(const LinkPredictor& m, const Graph& g, const LinkSample& sample) {
  const DenseMatrix z = link_embeddings(m, g);
  long wins = 0, ties = 0;
  for (const auto& p : sample.positives)
    for (const auto& q : sample.negatives) {
      const double sp = link_probability(z, p.first, p.second);
      const double sq = link_probability(z, q.first, q.second);
      if (sp > sq)
        ++wins;
      else if (sp == sq)
        ++ties;
    }
  const double total =
      static_cast<double>(sample.positives.size()) * sample.negatives.size();
  return total > 0 ? (wins + 0.5 * ties) / total : 0.0;
}

}  // namespace detail

// Trains (or adopts) the target model for the loaded data and reports the
// clean test metric.
struct TrainedTarget {
  TargetModelVariant model;
  double clean_metric = 0.0;
};

inline TrainedTarget train_target(const ExperimentConfig& cfg, const LoadedData& d,
                                  const std::optional<Checkpoint>& checkpoint) {
  TrainConfig tc;
  tc.hidden_dim = cfg.hidden_dim;
  tc.learning_rate = cfg.target_lr;
  tc.epochs = cfg.target_epochs;
  tc.embedding_dim = cfg.embedding_dim;
  tc.seed = substream_seed(cfg.seed, 3);

  TrainedTarget t;
  if (d.task == TaskKind::node) {
    NodeClassifier m = checkpoint ? node_classifier_from(*checkpoint)
                                  : train_node_classifier(d.graph, d.split, tc);
    const PredictionConfidence c = predict_node_confidence(m, d.graph);
    t.clean_metric = accuracy_on(c.labels, d.graph.node_labels(), d.split.test);
    t.model = std::move(m);
  } else if (d.task == TaskKind::graph) {
    GraphClassifier m = checkpoint ? graph_classifier_from(*checkpoint)
                                   : train_graph_classifier(d.set, d.split, tc);
    int hit = 0;
    for (int gi : d.split.test)
      if (predict_graph_confidence(m, d.set.graphs[gi]).labels[0] == d.set.graph_labels[gi])
        ++hit;
    t.clean_metric = d.split.test.empty()
                         ? 0.0
                         : static_cast<double>(hit) / d.split.test.size();
    t.model = std::move(m);
  } else {
    LinkSample train_sample;
    train_sample.positives = d.graph.edges();
    LinkPredictor m = checkpoint ? link_predictor_from(*checkpoint)
                                 : train_link_predictor(d.graph, train_sample, tc);
    t.clean_metric = detail::link_auc(m, d.graph, d.held_out);
    t.model = std::move(m);
  }
  return t;
}

inline AttackEnvironment make_environment(const ExperimentConfig& cfg, const LoadedData& d,
                                          const TrainedTarget& target) {
  AttackEnvironment env;
  if (d.task == TaskKind::graph)
    env.graphs = &d.set;
  else
    env.parent = &d.graph;
  env.target = target.model;
  env.ad_mode = cfg.ad_mode == "frozen_target" ? AdMode::frozen_target
                                               : AdMode::trainable_surrogate;
  if (d.task == TaskKind::node) {
    const auto& m = std::get<NodeClassifier>(target.model);
    env.extractor_w0 = m.w0;
    env.extractor_w1 = m.w1;
  } else if (d.task == TaskKind::graph) {
    const auto& m = std::get<GraphClassifier>(target.model);
    env.extractor_w0 = m.w0;
    env.extractor_w1 = m.w1;
  } else {
    const auto& m = std::get<LinkPredictor>(target.model);
    env.extractor_w0 = m.w0;
    env.extractor_w1 = m.w1;
  }
  return env;
}

// ---------------------------------------------------------------------------
// run_experiment: select targets, attack them in a work pool, aggregate, and
// independently re-verify every success with the stealth module.

inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::optional<Checkpoint>& checkpoint =
                                           std::nullopt) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedData data = load_data(cfg);
  const TrainedTarget target = train_target(cfg, data, checkpoint);
  const AttackEnvironment env = make_environment(cfg, data, target);

  ExperimentResult result;
  result.config = cfg;
  result.clean_metric = target.clean_metric;
  if (data.task == TaskKind::node)
    result.target_checkpoint = checkpoint_of(std::get<NodeClassifier>(target.model));
  else if (data.task == TaskKind::graph)
    result.target_checkpoint = checkpoint_of(std::get<GraphClassifier>(target.model));
  else
    result.target_checkpoint = checkpoint_of(std::get<LinkPredictor>(target.model));

  SelectedTargets sel;
  if (data.task == TaskKind::node)
    sel = select_node_targets(std::get<NodeClassifier>(target.model), data.graph,
                              data.split.test, cfg.per_class, substream_seed(cfg.seed, 4));
  else if (data.task == TaskKind::graph)
    sel = select_graph_targets(std::get<GraphClassifier>(target.model), data.set,
                               data.split.test, cfg.per_class, substream_seed(cfg.seed, 4));
  else
    sel = select_link_targets(std::get<LinkPredictor>(target.model), data.graph,
                              data.held_out, cfg.per_class, substream_seed(cfg.seed, 4));
  result.target_shortfall = sel.shortfall;
  if (sel.targets.empty()) throw TrainingError("run_experiment: no eligible targets");

  const int count = static_cast<int>(sel.targets.size());
  std::vector<TargetRecord> records(count);
  std::vector<GraphEdits> edits(count);
  const EmbeddingFn embedding = env.embedding_fn();

  parallel_for(count, cfg.jobs, [&](int idx) {
    const std::vector<int>& ids = sel.targets[idx];
    const int y_true = sel.truths[idx];
    TargetRecord rec;
    rec.ids = ids;
    rec.y_true = y_true;

    const Graph& clean_parent =
        data.task == TaskKind::graph ? data.set.graphs[ids[0]] : data.graph;
    const ConstraintSet cset =
        cfg.constraints_for(clean_parent.n(), clean_parent.edge_count());

    if (cfg.method == "dice") {
      if (data.task == TaskKind::graph)
        throw ContractError("run_experiment: DICE supports node and link tasks only");
      const DiceResult dice = dice_attack(clean_parent, ids, /*budget=*/0,
                                          substream_seed(cfg.seed, 9000 + idx), data.task);
      const bool mispredicts = detail::target_mispredicts(env.target, data.task, dice.graph,
                                                          ids, y_true);
      const PerturbationReport rep =
          check_constraints(clean_parent, dice.graph, cset, embedding, ids);
      rec.success = mispredicts && rep.pass;
      rec.has_candidate = true;
      rec.links_changed = rep.links_changed;
      rec.attrs_changed = rep.attrs_changed;
      rec.l2_attr = rep.l2_attr;
      rec.lambda_stat = rep.lambda_stat;
      rec.smr_value = rep.smr_value;
      edits[idx] = diff_graphs(clean_parent, dice.graph);
    } else {
      AttackTask task;
      task.task = data.task;
      task.targets = ids;
      task.y_true = y_true;
      task.strategy = cfg.strategy_kind();
      task.scale = cfg.scale_kind();
      task.k_hops = cfg.k_hops;
      task.augmentation = cfg.augmentation();
      task.constraints = cset;
      task.seed = substream_seed(cfg.seed, 5000 + idx);
      task.k_sd = cfg.k_sd;
      task.k_mag = cfg.k_mag;
      task.k_ad = cfg.k_ad;
      task.max_restarts = cfg.examples_per_target;
      task.epochs_per_restart = cfg.epochs_per_restart;
      task.sd_hidden = cfg.sd_hidden;
      task.learning_rate = cfg.attack_lr;

      const AttackResult r = run_attack(task, env);
      rec.success = r.success;
      rec.trivial = r.trivial;
      rec.has_candidate = r.has_candidate;
      rec.y_target = r.y_target;
      rec.links_changed = r.perturbation.links_changed;
      rec.attrs_changed = r.perturbation.attrs_changed;
      rec.l2_attr = r.perturbation.l2_attr;
      rec.lambda_stat = r.perturbation.lambda_stat;
      rec.smr_value = r.perturbation.smr_value;
      rec.epochs_used = r.epochs_used;
      rec.restarts_used = r.restarts_used;
      rec.subgraph_size = r.subgraph_size;
      if (r.has_candidate) edits[idx] = diff_graphs(clean_parent, r.adversarial);
    }
    records[idx] = std::move(rec);
  });

  // Post-hoc verification: every reported success must stand when the stealth
  // module re-checks the reconstructed graph from scratch.
  for (int idx = 0; idx < count; ++idx) {
    TargetRecord& rec = records[idx];
    if (!rec.success) continue;
    const Graph& clean_parent =
        data.task == TaskKind::graph ? data.set.graphs[rec.ids[0]] : data.graph;
    const Graph adv = apply_edits(clean_parent, edits[idx]);
    const ConstraintSet cset =
        cfg.constraints_for(clean_parent.n(), clean_parent.edge_count());
    const bool mispredicts =
        detail::target_mispredicts(env.target, data.task, adv, rec.ids, rec.y_true);
    const PerturbationReport rep = check_constraints(clean_parent, adv, cset, embedding,
                                                     rec.ids);
    if (!mispredicts || !rep.pass)
      throw TrainingError("run_experiment: success failed independent re-verification");
    if (rep.links_changed != rec.links_changed || rep.attrs_changed != rec.attrs_changed)
      throw TrainingError("run_experiment: perturbation accounting mismatch");
    rec.reverified = true;
  }

  result.metrics = aggregate_metrics(std::move(records));
  result.edits = std::move(edits);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Adversarial-training defense driver (node classification). The "ga" method
// mixes strategies and scales across generated examples; "dice" rewires
// randomly. Clean and retrained models are attacked on the same target set
// with fresh seeds.

inline DefenseReport run_defense(const ExperimentConfig& cfg, int n_per_target = 10) {
  cfg.validate();
  if (cfg.task_kind() != TaskKind::node)
    throw ContractError("run_defense: node classification only");
  const LoadedData data = load_data(cfg);
  const TrainedTarget clean = train_target(cfg, data, std::nullopt);
  const NodeClassifier& clean_model = std::get<NodeClassifier>(clean.model);

  const SelectedTargets sel =
      select_node_targets(clean_model, data.graph, data.split.test, cfg.per_class,
                          substream_seed(cfg.seed, 4));
  if (sel.targets.empty()) throw TrainingError("run_defense: no eligible targets");
  std::vector<int> targets;
  for (const auto& ids : sel.targets) targets.push_back(ids[0]);

  const ConstraintSet cset = cfg.constraints_for(data.graph.n(), data.graph.edge_count());

  // strategy/scale combinations cycled across the generated examples
  const std::vector<std::pair<AttackStrategy, AttackScale>> ga_variants = {
      {AttackStrategy::structure, AttackScale::direct},
      {AttackStrategy::structure, AttackScale::unlimited},
      {AttackStrategy::hybrid, AttackScale::direct},
      {AttackStrategy::hybrid, AttackScale::unlimited},
  };

  const auto attack_once = [&](const NodeClassifier& model, int target, std::uint64_t seed,
                               int variant) -> std::optional<Graph> {
    if (cfg.method == "dice") {
      const DiceResult dice = dice_attack(data.graph, {target}, 0, seed, TaskKind::node);
      const bool ok =
          predict_node_confidence(model, dice.graph).labels[target] !=
              data.graph.label_of(target) &&
          check_constraints(data.graph, dice.graph, cset).pass;
      if (ok) return dice.graph;
      return std::nullopt;
    }
    AttackEnvironment env;
    env.parent = &data.graph;
    env.target = model;
    env.ad_mode = AdMode::frozen_target;
    env.extractor_w0 = model.w0;
    env.extractor_w1 = model.w1;
    AttackTask task;
    task.task = TaskKind::node;
    task.targets = {target};
    task.y_true = data.graph.label_of(target);
    const auto& [strategy, scale] = ga_variants[variant % ga_variants.size()];
    task.strategy = strategy;
    task.scale = scale;
    task.k_hops = cfg.k_hops;
    task.augmentation = cfg.augmentation();
    task.constraints = cset;
    task.seed = seed;
    task.k_sd = cfg.k_sd;
    task.k_mag = cfg.k_mag;
    task.k_ad = cfg.k_ad;
    task.max_restarts = cfg.examples_per_target;
    task.epochs_per_restart = cfg.epochs_per_restart;
    task.sd_hidden = cfg.sd_hidden;
    task.learning_rate = cfg.attack_lr;
    const AttackResult r = run_attack(task, env);
    if (r.success && !r.trivial) return r.adversarial;
    return std::nullopt;
  };

  // variant keyed off the seed so parallel generation stays deterministic
  const AttackFactory factory = [&](int target, std::uint64_t seed) {
    return attack_once(clean_model, target, seed,
                       static_cast<int>(seed % ga_variants.size()));
  };

  const AsrEvaluator attack_asr = [&](const NodeClassifier& model) {
    const PredictionConfidence clean_pred = predict_node_confidence(model, data.graph);
    std::vector<int> outcomes(targets.size(), 0);
    parallel_for(static_cast<int>(targets.size()), cfg.jobs, [&](int k) {
      const int t = targets[k];
      if (clean_pred.labels[t] != data.graph.label_of(t)) {
        outcomes[k] = 1;  // already broken by retraining: trivial success
        return;
      }
      const std::uint64_t seed = substream_seed(cfg.seed, 8000 + k);
      outcomes[k] = attack_once(model, t, seed, k).has_value() ? 1 : 0;
    });
    int s = 0;
    for (int o : outcomes) s += o;
    return static_cast<double>(s) / static_cast<double>(targets.size());
  };

  TrainConfig retrain_cfg;
  retrain_cfg.hidden_dim = cfg.hidden_dim;
  retrain_cfg.learning_rate = cfg.target_lr;
  retrain_cfg.epochs = cfg.target_epochs;
  retrain_cfg.seed = substream_seed(cfg.seed, 6);

  return adversarial_training(data.graph, data.split, clean_model, targets, factory,
                              n_per_target, retrain_cfg, attack_asr, cfg.jobs);
}

}  // namespace gat
