#pragma once

#include <optional>
#include <variant>

#include "graphattacker/log.hpp"
#include "graphattacker/mag.hpp"
#include "graphattacker/models.hpp"
#include "graphattacker/sd.hpp"
#include "graphattacker/stealth.hpp"

namespace gat {

enum class AdMode { trainable_surrogate, frozen_target };

using TargetModelVariant = std::variant<NodeClassifier, GraphClassifier, LinkPredictor>;

// The attack discriminator: a confidence-producing model plus the rule for
// whether Eq.-12-style updates may touch it.
struct AdHandle {
  AdMode mode = AdMode::frozen_target;
  TaskKind task = TaskKind::node;
  TargetModelVariant model;

  ParameterSet params() const {
    ParameterSet p;
    if (task == TaskKind::node) {
      const auto& m = std::get<NodeClassifier>(model);
      p.add("AD_W0", m.w0);
      p.add("AD_W1", m.w1);
    } else if (task == TaskKind::graph) {
      const auto& m = std::get<GraphClassifier>(model);
      p.add("AD_W0", m.w0);
      p.add("AD_W1", m.w1);
      p.add("AD_Wc", m.wc);
    } else {
      const auto& m = std::get<LinkPredictor>(model);
      p.add("AD_W0", m.w0);
      p.add("AD_W1", m.w1);
    }
    return p;
  }

  void load(const ParameterSet& p) {
    if (task == TaskKind::node) {
      auto& m = std::get<NodeClassifier>(model);
      m.w0 = p.at("AD_W0");
      m.w1 = p.at("AD_W1");
    } else if (task == TaskKind::graph) {
      auto& m = std::get<GraphClassifier>(model);
      m.w0 = p.at("AD_W0");
      m.w1 = p.at("AD_W1");
      m.wc = p.at("AD_Wc");
    } else {
      auto& m = std::get<LinkPredictor>(model);
      m.w0 = p.at("AD_W0");
      m.w1 = p.at("AD_W1");
    }
  }
};

// Forward of the AD on an explicit (normalized adjacency, attributes) pair,
// exposing the confidence of one class. `locals` is the target's local
// index(es): one node id, a link pair, or empty for the graph task.
struct AdForwardCache {
  double conf = 0.0;
  Gcn2Dense gcn;                // node / link
  GraphClassifierCache gcache;  // graph
};

inline AdForwardCache ad_forward(const AdHandle& ad, const DenseMatrix& ahat,
                                 const DenseMatrix& x, const std::vector<int>& locals,
                                 int cls, const SparseAttr* x_sparse = nullptr) {
  AdForwardCache c;
  if (ad.task == TaskKind::node) {
    const auto& m = std::get<NodeClassifier>(ad.model);
    c.gcn = gcn2_forward_dense(ahat, x, m.w0, m.w1, GcnFinal::softmax, x_sparse);
    c.conf = c.gcn.out(locals.at(0), cls);
  } else if (ad.task == TaskKind::graph) {
    const auto& m = std::get<GraphClassifier>(ad.model);
    c.gcache = graph_classifier_forward(m, ahat, x);
    c.conf = c.gcache.probs(0, cls);
  } else {
    const auto& m = std::get<LinkPredictor>(ad.model);
    c.gcn = gcn2_forward_dense(ahat, x, m.w0, m.w1, GcnFinal::identity, x_sparse);
    const double p = link_probability(c.gcn.out, locals.at(0), locals.at(1));
    c.conf = cls == 1 ? p : 1.0 - p;
  }
  return c;
}

struct AdGrads {
  ParameterSet weights;
  DenseMatrix d_x;
  DenseMatrix d_ahat;
};

// Backward of d_conf = dL/d(conf of cls) through the AD.
inline AdGrads ad_backward(const AdHandle& ad, const AdForwardCache& c, const DenseMatrix& ahat,
                           const DenseMatrix& x, const std::vector<int>& locals, int cls,
                           double d_conf, bool want_weight_grads, bool want_input_grads,
                           const SparseAttr* x_sparse = nullptr) {
  AdGrads out;
  if (ad.task == TaskKind::node) {
    const auto& m = std::get<NodeClassifier>(ad.model);
    DenseMatrix d_out(c.gcn.out.rows, c.gcn.out.cols);
    d_out(locals.at(0), cls) = d_conf;
    const auto g = gcn2_backward_dense(c.gcn, ahat, x, m.w0, m.w1, GcnFinal::softmax, d_out,
                                       want_weight_grads, want_input_grads, x_sparse);
    if (want_weight_grads) {
      out.weights.add("AD_W0", g.d_w0);
      out.weights.add("AD_W1", g.d_w1);
    }
    out.d_x = g.d_x;
    out.d_ahat = g.d_ahat;
  } else if (ad.task == TaskKind::graph) {
    const auto& m = std::get<GraphClassifier>(ad.model);
    DenseMatrix d_probs(1, c.gcache.probs.cols);
    d_probs(0, cls) = d_conf;
    const DenseMatrix d_logits = softmax_rows_backward(c.gcache.probs, d_probs);
    const auto g = graph_classifier_backward(m, c.gcache, ahat, x, d_logits, want_weight_grads,
                                             want_input_grads);
    if (want_weight_grads) {
      out.weights.add("AD_W0", g.d_w0);
      out.weights.add("AD_W1", g.d_w1);
      out.weights.add("AD_Wc", g.d_wc);
    }
    out.d_x = g.d_x;
    out.d_ahat = g.d_ahat;
  } else {
    const auto& m = std::get<LinkPredictor>(ad.model);
    const int vi = locals.at(0), vj = locals.at(1);
    const DenseMatrix& z = c.gcn.out;
    const double p_link = cls == 1 ? c.conf : 1.0 - c.conf;
    const double d_dot = d_conf * p_link * (1.0 - p_link) * (cls == 1 ? 1.0 : -1.0);
    DenseMatrix d_z(z.rows, z.cols);
    for (int k = 0; k < z.cols; ++k) {
      d_z(vi, k) += d_dot * z(vj, k);
      d_z(vj, k) += d_dot * z(vi, k);
    }
    const auto g = gcn2_backward_dense(c.gcn, ahat, x, m.w0, m.w1, GcnFinal::identity, d_z,
                                       want_weight_grads, want_input_grads, x_sparse);
    if (want_weight_grads) {
      out.weights.add("AD_W0", g.d_w0);
      out.weights.add("AD_W1", g.d_w1);
    }
    out.d_x = g.d_x;
    out.d_ahat = g.d_ahat;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Alternating-training steps

// Discriminator update: ascend log AD^c(real) + log(1 - AD^c(fake)) with
// c = argmax(y). No-op (with a warning) in frozen mode.
inline double train_ad_step(AdHandle& ad, AdamState& opt, const DenseMatrix& ahat_real,
                            const DenseMatrix& x_real, const DenseMatrix& ahat_fake,
                            const DenseMatrix& x_fake, const std::vector<int>& locals,
                            int true_class) {
  if (ad.mode == AdMode::frozen_target) {
    log_message(LogLevel::warn, "train_ad_step skipped: AD is frozen_target");
    return 0.0;
  }
  const AdForwardCache cr = ad_forward(ad, ahat_real, x_real, locals, true_class);
  const AdForwardCache cf = ad_forward(ad, ahat_fake, x_fake, locals, true_class);
  const double loss = -std::log(clamp_prob(cr.conf)) - std::log(clamp_prob(1.0 - cf.conf));
  if (!std::isfinite(loss)) throw TrainingError("train_ad_step: non-finite loss");
  const AdGrads gr = ad_backward(ad, cr, ahat_real, x_real, locals, true_class,
                                 -1.0 / clamp_prob(cr.conf), true, false);
  const AdGrads gf = ad_backward(ad, cf, ahat_fake, x_fake, locals, true_class,
                                 1.0 / clamp_prob(1.0 - cf.conf), true, false);
  ParameterSet grads = gr.weights;
  for (std::size_t i = 0; i < grads.items.size(); ++i)
    accumulate(grads.items[i].second, gf.weights.items[i].second);
  ParameterSet p = ad.params();
  adam_step(p, grads, opt);
  ad.load(p);
  return loss;
}

struct MagObjective {
  double loss = 0.0;
  ParameterSet grads;
};

// Generator objective through the similarity discriminator(s):
// L = log(1 - SD(G'_c)), summed over the active channels, with gradients
// flowing through the continuous outputs only.
inline MagObjective mag_sd_objective(const MagModel& mag, const SdModel* sd_structure,
                                     const SdModel* sd_attribute, const MagContext& ctx,
                                     AttackStrategy strategy) {
  const MagForward f = mag_forward(mag, ctx, strategy);
  MagObjective r;
  DenseMatrix d_a, d_x;
  if (strategy != AttackStrategy::attribute) {
    if (!sd_structure) throw ContractError("mag_sd_objective: missing structure SD");
    auto [l, d] = sd_generator_gradient(*sd_structure, f.a_cont);
    r.loss += l;
    d_a = std::move(d);
  }
  if (strategy != AttackStrategy::structure) {
    if (!sd_attribute) throw ContractError("mag_sd_objective: missing attribute SD");
    auto [l, d] = sd_generator_gradient(*sd_attribute, f.x_cont);
    r.loss += l;
    d_x = std::move(d);
  }
  if (!std::isfinite(r.loss)) throw TrainingError("mag_sd_objective: non-finite loss");
  r.grads = mag_backward(mag, ctx, f, d_a, d_x);
  return r;
}

inline double train_mag_sd_step(MagModel& mag, AdamState& opt, const SdModel* sd_structure,
                                const SdModel* sd_attribute, const MagContext& ctx,
                                AttackStrategy strategy) {
  const MagObjective r = mag_sd_objective(mag, sd_structure, sd_attribute, ctx, strategy);
  ParameterSet p = mag.params();
  adam_step(p, r.grads, opt);
  mag.load(p);
  return r.loss;
}

// Generator objective through the attack discriminator:
// L = log(1 - AD^{c'}(G'_c)) with c' = argmax(y_tar). The AD is frozen inside
// this objective; the candidate stays continuous so it is differentiable.
inline MagObjective mag_ad_objective(const MagModel& mag, const AdHandle& ad,
                                     const MagContext& ctx, AttackStrategy strategy,
                                     const std::vector<int>& locals, int target_class,
                                     double* confidence = nullptr) {
  const MagForward f = mag_forward(mag, ctx, strategy);
  const bool structure_path = strategy != AttackStrategy::attribute;
  const DenseMatrix ahat_fake =
      structure_path ? normalize_dense_adjacency(f.a_cont) : ctx.ahat;
  const SparseAttr* xs =
      strategy == AttackStrategy::structure ? ctx.sparse() : nullptr;
  const AdForwardCache c = ad_forward(ad, ahat_fake, f.x_cont, locals, target_class, xs);
  if (confidence) *confidence = c.conf;
  MagObjective r;
  r.loss = std::log(clamp_prob(1.0 - c.conf));
  if (!std::isfinite(r.loss)) throw TrainingError("mag_ad_objective: non-finite loss");
  const double d_conf = -1.0 / clamp_prob(1.0 - c.conf);
  const AdGrads g = ad_backward(ad, c, ahat_fake, f.x_cont, locals, target_class, d_conf,
                                false, true, xs);
  DenseMatrix d_a, d_x;
  if (structure_path)
    d_a = normalize_dense_adjacency_backward(f.a_cont, ahat_fake, g.d_ahat);
  if (strategy != AttackStrategy::structure) d_x = g.d_x;
  r.grads = mag_backward(mag, ctx, f, d_a, d_x);
  return r;
}

inline double train_mag_ad_step(MagModel& mag, AdamState& opt, const AdHandle& ad,
                                const MagContext& ctx, AttackStrategy strategy,
                                const std::vector<int>& locals, int target_class) {
  const MagObjective r = mag_ad_objective(mag, ad, ctx, strategy, locals, target_class);
  ParameterSet p = mag.params();
  adam_step(p, r.grads, opt);
  mag.load(p);
  return r.loss;
}

// ---------------------------------------------------------------------------
// Target label selection

// Default policy: the most confident class other than the true one (for a
// correctly classified target that is the second-highest confidence). Ties
// break toward the lowest class index.
inline int select_target_label(const std::vector<double>& confidence_row, int true_class) {
  if (confidence_row.size() < 2)
    throw ContractError("select_target_label: need at least two classes");
  int best = -1;
  for (int j = 0; j < static_cast<int>(confidence_row.size()); ++j) {
    if (j == true_class) continue;
    if (best < 0 || confidence_row[j] > confidence_row[best]) best = j;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Attack orchestration

struct AttackTask {
  TaskKind task = TaskKind::node;
  std::vector<int> targets;  // node id | (i, j) link pair | graph index
  int y_true = 0;
  std::optional<int> y_target_override;
  AttackStrategy strategy = AttackStrategy::structure;
  AttackScale scale = AttackScale::direct;
  int k_hops = 3;
  AugmentationMode augmentation = AugmentationMode::random_other_class;
  ConstraintSet constraints;
  std::uint64_t seed = 0;
  int k_sd = 10;
  int k_mag = 10;
  int k_ad = 10;
  int max_restarts = 20;       // adversarial examples attempted per instance
  int epochs_per_restart = 20;
  int sd_hidden = 64;
  double learning_rate = 0.03;
};

struct AttackEnvironment {
  const Graph* parent = nullptr;     // node / link tasks
  const GraphSet* graphs = nullptr;  // graph task
  TargetModelVariant target;         // the judge; never mutated
  AdMode ad_mode = AdMode::frozen_target;
  DenseMatrix extractor_w0;  // clean pre-trained feature extractor
  DenseMatrix extractor_w1;

  // Eq.-3 embeddings with the clean extractor weights; used for SMR and
  // high-similarity augmentation.
  DenseMatrix embed(const Graph& g) const {
    const SparseNormAdj ahat = SparseNormAdj::build(g);
    const SparseAttr x = SparseAttr::build(g);
    return gcn2_forward_sparse(ahat, x, extractor_w0, extractor_w1, GcnFinal::softmax).out;
  }

  EmbeddingFn embedding_fn() const {
    return [this](const Graph& g) { return embed(g); };
  }
};

struct AttackResult {
  bool success = false;
  bool trivial = false;  // target was already mispredicted; zero perturbation
  Graph adversarial;     // parent-scale graph (best candidate on failure)
  bool has_candidate = false;
  PerturbationReport perturbation;
  int epochs_used = 0;
  int restarts_used = 0;
  int subgraph_size = 0;
  bool augmentation_fallback = false;
  int y_target = -1;
};

namespace detail {

// The target model's verdict on a full parent-scale (or whole-graph) input.
inline bool target_mispredicts(const TargetModelVariant& target, TaskKind task, const Graph& g,
                               const std::vector<int>& targets, int y_true) {
  if (task == TaskKind::node) {
    const auto& m = std::get<NodeClassifier>(target);
    const PredictionConfidence c = predict_node_confidence(m, g);
    return c.labels[targets.at(0)] != y_true;
  }
  if (task == TaskKind::graph) {
    const auto& m = std::get<GraphClassifier>(target);
    const PredictionConfidence c = predict_graph_confidence(m, g);
    return c.labels[0] != y_true;
  }
  const auto& m = std::get<LinkPredictor>(target);
  const DenseMatrix z = link_embeddings(m, g);
  const double p = link_probability(z, targets.at(0), targets.at(1));
  return (p > 0.5 ? 1 : 0) != y_true;
}

inline std::vector<double> clean_confidence_row(const TargetModelVariant& target, TaskKind task,
                                                const Graph& g,
                                                const std::vector<int>& targets) {
  std::vector<double> row;
  if (task == TaskKind::node) {
    const auto& m = std::get<NodeClassifier>(target);
    const PredictionConfidence c = predict_node_confidence(m, g);
    for (int j = 0; j < c.probs.cols; ++j) row.push_back(c.probs(targets.at(0), j));
  } else if (task == TaskKind::graph) {
    const auto& m = std::get<GraphClassifier>(target);
    const PredictionConfidence c = predict_graph_confidence(m, g);
    for (int j = 0; j < c.probs.cols; ++j) row.push_back(c.probs(0, j));
  } else {
    const auto& m = std::get<LinkPredictor>(target);
    const DenseMatrix z = link_embeddings(m, g);
    const double p = link_probability(z, targets.at(0), targets.at(1));
    row = {1.0 - p, p};
  }
  return row;
}

}  // namespace detail

// Algorithm-1 style orchestration: build the subgraph, alternate SD / MAG /
// AD training, emit one discrete candidate per epoch, and stop at the first
// candidate that both mispredicts and passes the stealthiness constraints.
inline AttackResult run_attack(const AttackTask& task, const AttackEnvironment& env) {
  task.constraints.validate();
  if (task.task == TaskKind::graph && task.scale != AttackScale::unlimited)
    throw ContractError("run_attack: graph task supports only the unlimited scale");

  // The graph under attack at parent scale.
  const Graph* parent = nullptr;
  std::vector<int> parent_targets;
  if (task.task == TaskKind::graph) {
    if (!env.graphs) throw ContractError("run_attack: graph task needs a GraphSet");
    parent = &env.graphs->graphs.at(task.targets.at(0));
  } else {
    if (!env.parent) throw ContractError("run_attack: node/link task needs a parent graph");
    parent = env.parent;
    parent_targets = task.targets;
  }

  AttackResult result;
  result.adversarial = *parent;

  // Trivial case: the clean instance is already mispredicted.
  if (detail::target_mispredicts(env.target, task.task, *parent, parent_targets, task.y_true)) {
    result.success = true;
    result.trivial = true;
    result.perturbation =
        check_constraints(*parent, *parent, task.constraints, env.embedding_fn(),
                          parent_targets);
    result.has_candidate = true;
    return result;
  }

  // Target attack label.
  int y_tar;
  if (task.y_target_override) {
    y_tar = *task.y_target_override;
    if (y_tar == task.y_true)
      throw ContractError("run_attack: target label equals the true label");
  } else {
    y_tar = select_target_label(
        detail::clean_confidence_row(env.target, task.task, *parent, parent_targets),
        task.y_true);
  }
  result.y_target = y_tar;

  // Subgraph under attack (whole graph for the graph task).
  Rng view_rng(substream_seed(task.seed, 5));
  SubgraphView view;
  if (task.task == TaskKind::graph) {
    view.parent_index.resize(parent->n());
    for (int i = 0; i < parent->n(); ++i) view.parent_index[i] = i;
    view.sub = *parent;
    view.ball_size = parent->n();
  } else {
    AugmentationMode aug = task.augmentation;
    if (aug == AugmentationMode::random_other_class && !parent->has_labels()) {
      aug = AugmentationMode::none;  // unlabeled graphs cannot sample by class
      result.augmentation_fallback = true;
    }
    SimilarityProvider sim;
    DenseMatrix z_clean;
    if (aug == AugmentationMode::high_similarity) {
      z_clean = env.embed(*parent);
      sim = [&z_clean](int t, int v) { return node_cosine_similarity(z_clean, t, v); };
    }
    view = k_hop_subgraph(*parent, task.targets, task.k_hops, aug, view_rng, sim);
    result.augmentation_fallback = result.augmentation_fallback || view.augmentation_fallback;
  }
  result.subgraph_size = view.sub.n();

  const MagContext ctx = MagContext::build(view.sub);
  const std::vector<int> hops =
      task.task == TaskKind::graph ? std::vector<int>(view.sub.n(), 0)
                                   : bfs_hops(view.sub, view.target_local);
  const std::vector<int> ad_locals =
      task.task == TaskKind::graph ? std::vector<int>{} : view.target_local;

  const bool binary_attrs = view.sub.attribute_kind() == AttributeKind::binary;
  const DenseMatrix real_a_flat = flatten_rowwise(ctx.a_clean);
  const DenseMatrix real_x_flat = flatten_rowwise(*ctx.x_clean);
  const EmbeddingFn embedding = env.embedding_fn();
  const std::vector<int> constraint_targets =
      task.task == TaskKind::graph ? std::vector<int>{} : parent_targets;

  int best_cost = -1;  // perturbation size of the best mispredicting candidate
  for (int restart = 0; restart < task.max_restarts; ++restart) {
    Rng rng(substream_seed(task.seed, 100 + restart));
    MagModel mag;
    mag.ex_w0 = env.extractor_w0;
    mag.ex_w1 = env.extractor_w1;
    const int d = mag.ex_w1.cols;
    mag.wex_a = glorot_uniform(d, view.sub.n(), rng);
    mag.wex_x = glorot_uniform(d, view.sub.attribute_dim(), rng);
    AdamState mag_opt = AdamState::create(mag.params(), task.learning_rate);

    std::optional<SdModel> sd_structure, sd_attribute;
    std::optional<AdamState> sd_structure_opt, sd_attribute_opt;
    if (task.strategy != AttackStrategy::attribute) {
      sd_structure = SdModel::create(view.sub.n() * view.sub.n(), task.sd_hidden,
                                     SdChannel::structure, rng);
      sd_structure_opt = AdamState::create(sd_structure->params(), task.learning_rate);
    }
    if (task.strategy != AttackStrategy::structure) {
      sd_attribute = SdModel::create(view.sub.n() * view.sub.attribute_dim(), task.sd_hidden,
                                     SdChannel::attributes, rng);
      sd_attribute_opt = AdamState::create(sd_attribute->params(), task.learning_rate);
    }

    AdHandle ad;
    ad.mode = env.ad_mode;
    ad.task = task.task;
    ad.model = env.target;  // frozen reference or surrogate starting point
    std::optional<AdamState> ad_opt;
    if (ad.mode == AdMode::trainable_surrogate)
      ad_opt = AdamState::create(ad.params(), task.learning_rate);

    for (int epoch = 0; epoch < task.epochs_per_restart; ++epoch) {
      for (int s = 0; s < task.k_sd; ++s) {
        const MagForward f = mag_forward(mag, ctx, task.strategy);
        if (sd_structure)
          train_sd_step(*sd_structure, real_a_flat, flatten_rowwise(f.a_cont),
                        *sd_structure_opt);
        if (sd_attribute)
          train_sd_step(*sd_attribute, real_x_flat, flatten_rowwise(f.x_cont),
                        *sd_attribute_opt);
      }
      for (int s = 0; s < task.k_mag; ++s)
        train_mag_sd_step(mag, mag_opt,
                          sd_structure ? &*sd_structure : nullptr,
                          sd_attribute ? &*sd_attribute : nullptr, ctx, task.strategy);
      for (int s = 0; s < task.k_ad; ++s) {
        if (ad.mode == AdMode::trainable_surrogate) {
          const MagForward f = mag_forward(mag, ctx, task.strategy);
          const DenseMatrix ahat_fake = task.strategy != AttackStrategy::attribute
                                            ? normalize_dense_adjacency(f.a_cont)
                                            : ctx.ahat;
          train_ad_step(ad, *ad_opt, ctx.ahat, *ctx.x_clean, ahat_fake, f.x_cont, ad_locals,
                        task.y_true);
        }
        train_mag_ad_step(mag, mag_opt, ad, ctx, task.strategy, ad_locals, y_tar);
      }
      ++result.epochs_used;

      // Discrete candidate for this epoch.
      const MagForward f = mag_forward(mag, ctx, task.strategy);
      const DenseMatrix a_disc = task.strategy != AttackStrategy::attribute
                                     ? discretize(f.a_cont, true)
                                     : ctx.a_clean;
      DenseMatrix x_disc;
      if (task.strategy == AttackStrategy::structure)
        x_disc = *ctx.x_clean;
      else
        x_disc = binary_attrs ? discretize(f.x_cont) : f.x_cont;
      const MaskedCandidate masked =
          apply_scale_mask(ctx.a_clean, *ctx.x_clean, a_disc, x_disc, task.scale, hops,
                           view.target_local, task.k_hops);
      const Graph adv_sub = graph_from_candidate(view.sub, masked.a, masked.x);
      const Graph candidate = task.task == TaskKind::graph
                                  ? adv_sub
                                  : splice_subgraph(*parent, view, adv_sub);

      if (detail::target_mispredicts(env.target, task.task, candidate, parent_targets,
                                     task.y_true)) {
        const PerturbationReport report = check_constraints(
            *parent, candidate, task.constraints, embedding, constraint_targets);
        const int cost = report.links_changed + report.attrs_changed;
        if (report.pass) {
          result.success = true;
          result.adversarial = candidate;
          result.perturbation = report;
          result.has_candidate = true;
          result.restarts_used = restart + 1;
          return result;
        }
        if (best_cost < 0 || cost < best_cost) {
          best_cost = cost;
          result.adversarial = candidate;
          result.perturbation = report;
          result.has_candidate = true;
        }
      }
    }
    result.restarts_used = restart + 1;
  }
  return result;  // budget exhausted; best mispredicting candidate attached
}

}  // namespace gat
