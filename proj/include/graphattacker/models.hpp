#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graphattacker/gcn.hpp"
#include "graphattacker/graph.hpp"
#include "graphattacker/optim.hpp"

namespace gat {

enum class TaskKind { node, graph, link };

inline const char* task_name(TaskKind t) {
  switch (t) {
    case TaskKind::node: return "node";
    case TaskKind::graph: return "graph";
    case TaskKind::link: return "link";
  }
  return "?";
}

inline TaskKind task_from_name(const std::string& s) {
  if (s == "node") return TaskKind::node;
  if (s == "graph") return TaskKind::graph;
  if (s == "link") return TaskKind::link;
  throw ContractError("unknown task: " + s);
}

// Class probabilities (rows for nodes/graphs, full matrix for links) plus the
// argmax labels where those make sense.
struct PredictionConfidence {
  DenseMatrix probs;
  std::vector<int> labels;
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  int hidden_dim = 64;
  int embedding_dim = 16;  // link predictor output width
  int early_stop_patience = 20;
  std::uint64_t seed = 0;
};

inline LabeledSplit make_split(int count, double train_ratio, double val_ratio,
                               std::uint64_t seed) {
  std::vector<int> ids(count);
  for (int i = 0; i < count; ++i) ids[i] = i;
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const int n_train = static_cast<int>(train_ratio * count);
  const int n_val = static_cast<int>(val_ratio * count);
  LabeledSplit s;
  s.train.assign(ids.begin(), ids.begin() + n_train);
  s.validation.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  s.test.assign(ids.begin() + n_train + n_val, ids.end());
  return s;
}

namespace detail {

inline void check_finite_loss(double loss, std::uint64_t seed, const char* what) {
  if (!std::isfinite(loss))
    throw TrainingError(std::string(what) + ": non-finite loss (seed " +
                        std::to_string(seed) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Node classification GCN: softmax(A_hat relu(A_hat X W0) W1).

struct NodeClassifier {
  DenseMatrix w0;
  DenseMatrix w1;
  int hidden_dim = 0;
  int num_classes = 0;
  double validation_accuracy = 0.0;
};

inline PredictionConfidence predict_node_confidence(const NodeClassifier& m, const Graph& g) {
  if (g.attribute_dim() != m.w0.rows)
    throw ContractError("predict_node_confidence: attribute dimension mismatch");
  const SparseNormAdj ahat = SparseNormAdj::build(g);
  const SparseAttr x = SparseAttr::build(g);
  const Gcn2Sparse c = gcn2_forward_sparse(ahat, x, m.w0, m.w1, GcnFinal::softmax);
  return {c.out, argmax_rows(c.out)};
}

inline double accuracy_on(const std::vector<int>& predicted, const std::vector<int>& truth,
                          const std::vector<int>& ids) {
  if (ids.empty()) return 0.0;
  int hit = 0;
  for (int i : ids)
    if (predicted[i] == truth[i]) ++hit;
  return static_cast<double>(hit) / static_cast<double>(ids.size());
}

inline NodeClassifier train_node_classifier(const Graph& g, const LabeledSplit& split,
                                            const TrainConfig& cfg) {
  if (!g.has_labels()) throw ContractError("train_node_classifier: graph has no labels");
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

  ParameterSet params;
  params.add("W0", model.w0);
  params.add("W1", model.w1);
  AdamState adam = AdamState::create(params, cfg.learning_rate);

  double best_val = -1.0;
  int stale = 0;
  ParameterSet best = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Gcn2Sparse c =
        gcn2_forward_sparse(ahat, x, params.at("W0"), params.at("W1"), GcnFinal::softmax);

    double loss = 0.0;
    DenseMatrix d_logits(g.n(), classes);
    const double inv = 1.0 / static_cast<double>(split.train.size());
    for (int i : split.train) {
      for (int j = 0; j < classes; ++j) {
        if (y(i, j) != 0.0) loss -= std::log(clamp_prob(c.out(i, j))) * inv;
        d_logits(i, j) = (c.out(i, j) - y(i, j)) * inv;
      }
    }
    detail::check_finite_loss(loss, cfg.seed, "train_node_classifier");

    // d_logits is already the softmax+CE preactivation gradient.
    const Gcn2SparseGrads grads =
        gcn2_backward_sparse(c, ahat, x, params.at("W1"), GcnFinal::identity, d_logits);
    ParameterSet gset;
    gset.add("W0", grads.d_w0);
    gset.add("W1", grads.d_w1);
    adam_step(params, gset, adam);

    const std::vector<int> pred = argmax_rows(c.out);
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

// ---------------------------------------------------------------------------
// Graph classification: 2-layer GCN, global mean pooling, dense softmax
// readout. A deliberately plain stand-in for hierarchical pooling models;
// the attack only consumes its prediction confidence.

struct GraphClassifier {
  DenseMatrix w0;
  DenseMatrix w1;
  DenseMatrix wc;
  int hidden_dim = 0;
  int num_classes = 0;
  double validation_accuracy = 0.0;
};

struct GraphClassifierCache {
  Gcn2Dense gcn;
  DenseMatrix pooled;  // 1 x H
  DenseMatrix probs;   // 1 x |Y|
};

inline GraphClassifierCache graph_classifier_forward(const GraphClassifier& m,
                                                     const DenseMatrix& ahat,
                                                     const DenseMatrix& x) {
  if (x.rows == 0) throw ContractError("graph_classifier_forward: empty graph");
  GraphClassifierCache c;
  c.gcn = gcn2_forward_dense(ahat, x, m.w0, m.w1, GcnFinal::relu);
  c.pooled = DenseMatrix(1, c.gcn.out.cols);
  for (int i = 0; i < c.gcn.out.rows; ++i)
    for (int j = 0; j < c.gcn.out.cols; ++j) c.pooled(0, j) += c.gcn.out(i, j);
  for (int j = 0; j < c.pooled.cols; ++j) c.pooled(0, j) /= c.gcn.out.rows;
  c.probs = softmax_rows(matmul(c.pooled, m.wc));
  return c;
}

inline PredictionConfidence predict_graph_confidence(const GraphClassifier& m, const Graph& g) {
  if (g.attribute_dim() != m.w0.rows)
    throw ContractError("predict_graph_confidence: attribute dimension mismatch");
  const GraphClassifierCache c =
      graph_classifier_forward(m, normalize_adjacency(g), g.attributes());
  return {c.probs, argmax_rows(c.probs)};
}

struct GraphClassifierGrads {
  DenseMatrix d_w0, d_w1, d_wc;
  DenseMatrix d_x, d_ahat;  // only when input grads requested
};

// d_logits is dL/d(pooled * Wc), i.e. the usual (p - y) style gradient.
inline GraphClassifierGrads graph_classifier_backward(
    const GraphClassifier& m, const GraphClassifierCache& c, const DenseMatrix& ahat,
    const DenseMatrix& x, const DenseMatrix& d_logits, bool want_weight_grads,
    bool want_input_grads) {
  GraphClassifierGrads g;
  if (want_weight_grads) g.d_wc = matmul_at_b(c.pooled, d_logits);
  const DenseMatrix d_pooled = matmul_a_bt(d_logits, m.wc);
  DenseMatrix d_h2(c.gcn.out.rows, c.gcn.out.cols);
  const double inv = 1.0 / c.gcn.out.rows;
  for (int i = 0; i < d_h2.rows; ++i)
    for (int j = 0; j < d_h2.cols; ++j) d_h2(i, j) = d_pooled(0, j) * inv;
  const Gcn2DenseGrads gg = gcn2_backward_dense(c.gcn, ahat, x, m.w0, m.w1, GcnFinal::relu,
                                                d_h2, want_weight_grads, want_input_grads);
  g.d_w0 = gg.d_w0;
  g.d_w1 = gg.d_w1;
  g.d_x = gg.d_x;
  g.d_ahat = gg.d_ahat;
  return g;
}

inline GraphClassifier train_graph_classifier(const GraphSet& gs, const LabeledSplit& split,
                                              const TrainConfig& cfg) {
  gs.validate();
  if (gs.graphs.empty()) throw ContractError("train_graph_classifier: empty graph set");
  const int attr_dim = gs.graphs.front().attribute_dim();
  for (const Graph& g : gs.graphs) {
    if (g.n() == 0) throw ContractError("train_graph_classifier: empty graph");
    if (g.attribute_dim() != attr_dim)
      throw ContractError("train_graph_classifier: non-uniform attribute dimension");
  }

  Rng rng(cfg.seed);
  GraphClassifier model;
  model.hidden_dim = cfg.hidden_dim;
  model.num_classes = gs.num_classes;
  model.w0 = glorot_uniform(attr_dim, cfg.hidden_dim, rng);
  model.w1 = glorot_uniform(cfg.hidden_dim, cfg.hidden_dim, rng);
  model.wc = glorot_uniform(cfg.hidden_dim, gs.num_classes, rng);

  std::vector<DenseMatrix> ahat(gs.graphs.size());
  for (std::size_t i = 0; i < gs.graphs.size(); ++i) ahat[i] = normalize_adjacency(gs.graphs[i]);

  ParameterSet params;
  params.add("W0", model.w0);
  params.add("W1", model.w1);
  params.add("Wc", model.wc);
  AdamState adam = AdamState::create(params, cfg.learning_rate);

  const auto eval_acc = [&](const std::vector<int>& ids) {
    if (ids.empty()) return 0.0;
    int hit = 0;
    for (int i : ids) {
      GraphClassifier cur{params.at("W0"), params.at("W1"), params.at("Wc"),
                          cfg.hidden_dim, gs.num_classes, 0.0};
      const auto c = graph_classifier_forward(cur, ahat[i], gs.graphs[i].attributes());
      if (argmax_rows(c.probs)[0] == gs.graph_labels[i]) ++hit;
    }
    return static_cast<double>(hit) / ids.size();
  };

  double best_val = -1.0;
  int stale = 0;
  ParameterSet best = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ParameterSet grads = params.zeros_like();
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(split.train.size());
    GraphClassifier cur{params.at("W0"), params.at("W1"), params.at("Wc"),
                        cfg.hidden_dim, gs.num_classes, 0.0};
    for (int i : split.train) {
      const auto c = graph_classifier_forward(cur, ahat[i], gs.graphs[i].attributes());
      const int label = gs.graph_labels[i];
      loss -= std::log(clamp_prob(c.probs(0, label))) * inv;
      DenseMatrix d_logits(1, gs.num_classes);
      for (int j = 0; j < gs.num_classes; ++j)
        d_logits(0, j) = (c.probs(0, j) - (j == label ? 1.0 : 0.0)) * inv;
      const auto g = graph_classifier_backward(cur, c, ahat[i], gs.graphs[i].attributes(),
                                               d_logits, true, false);
      accumulate(grads.at("W0"), g.d_w0);
      accumulate(grads.at("W1"), g.d_w1);
      accumulate(grads.at("Wc"), g.d_wc);
    }
    detail::check_finite_loss(loss, cfg.seed, "train_graph_classifier");
    adam_step(params, grads, adam);

    const double val = split.validation.empty() ? eval_acc(split.train)
                                                : eval_acc(split.validation);
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
  model.wc = best.at("Wc");
  model.validation_accuracy = best_val;
  return model;
}

// ---------------------------------------------------------------------------
// Link prediction: GCN encoder (linear second layer) + inner-product decoder.

struct LinkPredictor {
  DenseMatrix w0;
  DenseMatrix w1;
  int hidden_dim = 0;
  int embedding_dim = 0;
};

inline DenseMatrix link_embeddings(const LinkPredictor& m, const Graph& g) {
  if (g.attribute_dim() != m.w0.rows)
    throw ContractError("link_embeddings: attribute dimension mismatch");
  const SparseNormAdj ahat = SparseNormAdj::build(g);
  const SparseAttr x = SparseAttr::build(g);
  return gcn2_forward_sparse(ahat, x, m.w0, m.w1, GcnFinal::identity).out;
}

inline double link_probability(const DenseMatrix& z, int i, int j) {
  double dot = 0.0;
  for (int c = 0; c < z.cols; ++c) dot += z(i, c) * z(j, c);
  return sigmoid(dot);
}

inline PredictionConfidence predict_link_confidence(const LinkPredictor& m, const Graph& g) {
  const DenseMatrix z = link_embeddings(m, g);
  DenseMatrix p(g.n(), g.n());
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j) p(i, j) = link_probability(z, i, j);
  return {p, {}};
}

inline LinkPredictor train_link_predictor(const Graph& g, const LinkSample& sample,
                                          const TrainConfig& cfg) {
  for (const auto& [i, j] : sample.positives) {
    if (i == j) throw ContractError("train_link_predictor: self pair in sample");
    if (!g.has_edge(i, j)) throw ContractError("train_link_predictor: positive not an edge");
  }
  for (const auto& [i, j] : sample.negatives) {
    if (i == j) throw ContractError("train_link_predictor: self pair in sample");
    if (i < 0 || j < 0 || i >= g.n() || j >= g.n())
      throw ContractError("train_link_predictor: negative id out of range");
    if (g.has_edge(i, j)) throw ContractError("train_link_predictor: negative is an edge");
  }

  Rng rng(cfg.seed);
  LinkPredictor model;
  model.hidden_dim = cfg.hidden_dim;
  model.embedding_dim = cfg.embedding_dim;
  model.w0 = glorot_uniform(g.attribute_dim(), cfg.hidden_dim, rng);
  model.w1 = glorot_uniform(cfg.hidden_dim, cfg.embedding_dim, rng);

  const SparseNormAdj ahat = SparseNormAdj::build(g);
  const SparseAttr x = SparseAttr::build(g);

  ParameterSet params;
  params.add("W0", model.w0);
  params.add("W1", model.w1);
  AdamState adam = AdamState::create(params, cfg.learning_rate);

  std::uniform_int_distribution<int> pick(0, g.n() - 1);
  const auto draw_negatives = [&](std::size_t count, Rng& r) {
    std::vector<std::pair<int, int>> out;
    while (out.size() < count) {
      const int i = pick(r), j = pick(r);
      if (i == j || g.has_edge(i, j)) continue;
      out.emplace_back(i, j);
    }
    return out;
  };

  // Fixed evaluation negatives keep the early-stopping signal deterministic.
  std::vector<std::pair<int, int>> eval_negatives = sample.negatives;
  if (eval_negatives.empty()) {
    Rng eval_rng(substream_seed(cfg.seed, 0xe7a1));
    eval_negatives = draw_negatives(sample.positives.size(), eval_rng);
  }

  double best_loss = 1e300;
  int stale = 0;
  ParameterSet best = params;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Training negatives resampled every epoch, one per positive.
    const std::vector<std::pair<int, int>> negatives =
        draw_negatives(sample.positives.size(), rng);

    const Gcn2Sparse c =
        gcn2_forward_sparse(ahat, x, params.at("W0"), params.at("W1"), GcnFinal::identity);
    const DenseMatrix& z = c.out;
    DenseMatrix d_z(z.rows, z.cols);
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(sample.positives.size() + negatives.size());
    const auto absorb = [&](const std::pair<int, int>& pr, double y) {
      double dot = 0.0;
      for (int k = 0; k < z.cols; ++k) dot += z(pr.first, k) * z(pr.second, k);
      const double p = sigmoid(dot);
      loss += binary_cross_entropy(p, y) * inv;
      const double gp = (p - y) * inv;
      for (int k = 0; k < z.cols; ++k) {
        d_z(pr.first, k) += gp * z(pr.second, k);
        d_z(pr.second, k) += gp * z(pr.first, k);
      }
    };
    for (const auto& pr : sample.positives) absorb(pr, 1.0);
    for (const auto& pr : negatives) absorb(pr, 0.0);
    detail::check_finite_loss(loss, cfg.seed, "train_link_predictor");

    const Gcn2SparseGrads grads =
        gcn2_backward_sparse(c, ahat, x, params.at("W1"), GcnFinal::identity, d_z);
    ParameterSet gset;
    gset.add("W0", grads.d_w0);
    gset.add("W1", grads.d_w1);
    adam_step(params, gset, adam);

    // Early stopping on the fixed evaluation pairs.
    const Gcn2Sparse ce =
        gcn2_forward_sparse(ahat, x, params.at("W0"), params.at("W1"), GcnFinal::identity);
    double eval_loss = 0.0;
    for (const auto& [i, j] : sample.positives)
      eval_loss += binary_cross_entropy(link_probability(ce.out, i, j), 1.0);
    for (const auto& [i, j] : eval_negatives)
      eval_loss += binary_cross_entropy(link_probability(ce.out, i, j), 0.0);
    if (eval_loss < best_loss - 1e-9) {
      best_loss = eval_loss;
      best = params;
      stale = 0;
    } else if (++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  model.w0 = best.at("W0");
  model.w1 = best.at("W1");
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints: versioned text dump of a parameter set with shape metadata.
// Values are hexfloats, so save/load round-trips bit-exactly.

struct Checkpoint {
  TaskKind task = TaskKind::node;
  std::map<std::string, std::string> meta;
  ParameterSet params;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write checkpoint: " + path);
  out << "graphattacker-checkpoint v1\n";
  out << "task " << task_name(ck.task) << '\n';
  for (const auto& [k, v] : ck.meta) out << "meta " << k << ' ' << v << '\n';
  char buf[64];
  for (const auto& [name, m] : ck.params.items) {
    out << "param " << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", m.data[i]);
      out << buf << (i + 1 == m.size() ? '\n' : ' ');
    }
    if (m.size() == 0) out << '\n';
  }
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open checkpoint: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "graphattacker-checkpoint v1")
    throw DatasetError("bad checkpoint header in " + path);
  Checkpoint ck;
  std::string word;
  while (in >> word) {
    if (word == "task") {
      in >> word;
      ck.task = task_from_name(word);
    } else if (word == "meta") {
      std::string k, v;
      in >> k >> v;
      ck.meta[k] = v;
    } else if (word == "param") {
      std::string name;
      int rows, cols;
      in >> name >> rows >> cols;
      DenseMatrix m(rows, cols);
      for (std::size_t i = 0; i < m.size(); ++i) {
        std::string tok;
        in >> tok;
        char* end = nullptr;
        m.data[i] = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str()) throw ParseError("bad value in checkpoint " + path);
      }
      ck.params.add(name, std::move(m));
    } else {
      throw ParseError("unknown checkpoint record '" + word + "' in " + path);
    }
  }
  return ck;
}

inline Checkpoint checkpoint_of(const NodeClassifier& m) {
  Checkpoint ck;
  ck.task = TaskKind::node;
  ck.meta["hidden"] = std::to_string(m.hidden_dim);
  ck.meta["classes"] = std::to_string(m.num_classes);
  ck.params.add("W0", m.w0);
  ck.params.add("W1", m.w1);
  return ck;
}

inline Checkpoint checkpoint_of(const GraphClassifier& m) {
  Checkpoint ck;
  ck.task = TaskKind::graph;
  ck.meta["hidden"] = std::to_string(m.hidden_dim);
  ck.meta["classes"] = std::to_string(m.num_classes);
  ck.params.add("W0", m.w0);
  ck.params.add("W1", m.w1);
  ck.params.add("Wc", m.wc);
  return ck;
}

inline Checkpoint checkpoint_of(const LinkPredictor& m) {
  Checkpoint ck;
  ck.task = TaskKind::link;
  ck.meta["hidden"] = std::to_string(m.hidden_dim);
  ck.meta["embedding"] = std::to_string(m.embedding_dim);
  ck.params.add("W0", m.w0);
  ck.params.add("W1", m.w1);
  return ck;
}

inline NodeClassifier node_classifier_from(const Checkpoint& ck) {
  if (ck.task != TaskKind::node) throw ContractError("checkpoint task is not node");
  NodeClassifier m;
  m.w0 = ck.params.at("W0");
  m.w1 = ck.params.at("W1");
  m.hidden_dim = m.w0.cols;
  m.num_classes = m.w1.cols;
  return m;
}

inline GraphClassifier graph_classifier_from(const Checkpoint& ck) {
  if (ck.task != TaskKind::graph) throw ContractError("checkpoint task is not graph");
  GraphClassifier m;
  m.w0 = ck.params.at("W0");
  m.w1 = ck.params.at("W1");
  m.wc = ck.params.at("Wc");
  m.hidden_dim = m.w0.cols;
  m.num_classes = m.wc.cols;
  return m;
}

inline LinkPredictor link_predictor_from(const Checkpoint& ck) {
  if (ck.task != TaskKind::link) throw ContractError("checkpoint task is not link");
  LinkPredictor m;
  m.w0 = ck.params.at("W0");
  m.w1 = ck.params.at("W1");
  m.hidden_dim = m.w0.cols;
  m.embedding_dim = m.w1.cols;
  return m;
}

}  // namespace gat
