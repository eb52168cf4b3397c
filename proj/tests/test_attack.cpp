#include <gtest/gtest.h>

#include <cmath>

#include "graphattacker/attack.hpp"

using namespace gat;

namespace {

Graph small_labeled_graph(int n, double p, std::uint64_t seed, int classes = 3, int d = 4) {
  Rng rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng) < p) edges.emplace_back(i, j);
  DenseMatrix x(n, d);
  for (double& v : x.data) v = coin(rng) < 0.4 ? 1.0 : 0.0;
  std::vector<int> labels(n);
  std::uniform_int_distribution<int> lab(0, classes - 1);
  for (int& l : labels) l = lab(rng);
  return Graph::from_edges(n, std::move(edges), std::move(x), AttributeKind::binary,
                           std::move(labels));
}

MagModel make_mag(const Graph& sub, std::uint64_t seed, int hidden = 5, int d = 3) {
  Rng rng(seed);
  return MagModel::create(sub.attribute_dim(), hidden, d, sub.n(), rng);
}

NodeClassifier make_node_model(const Graph& g, std::uint64_t seed, int hidden, int classes) {
  Rng rng(seed);
  NodeClassifier m;
  m.hidden_dim = hidden;
  m.num_classes = classes;
  m.w0 = glorot_uniform(g.attribute_dim(), hidden, rng);
  m.w1 = glorot_uniform(hidden, classes, rng);
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Discretization

TEST(Discretize, ThresholdIsStrict) {
  DenseMatrix m(1, 3);
  m(0, 0) = 0.51;
  m(0, 1) = 0.49;
  m(0, 2) = 0.5;  // exactly 0.5 goes to 0
  const DenseMatrix d = discretize(m);
  EXPECT_EQ(d(0, 0), 1.0);
  EXPECT_EQ(d(0, 1), 0.0);
  EXPECT_EQ(d(0, 2), 0.0);
}

TEST(Discretize, Idempotent) {
  Rng rng(5);
  DenseMatrix m(4, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : m.data) v = unit(rng);
  const DenseMatrix once = discretize(m, true);
  EXPECT_EQ(discretize(once, true), once);
}

// ---------------------------------------------------------------------------
// MAG forward

TEST(MagForward, ContinuousAdjacencyIsExactlySymmetric) {
  const Graph g = small_labeled_graph(6, 0.4, 11);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 3);
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
  for (int i = 0; i < g.n(); ++i) {
    EXPECT_EQ(f.a_cont(i, i), 0.0);
    for (int j = 0; j < g.n(); ++j) EXPECT_EQ(f.a_cont(i, j), f.a_cont(j, i));
  }
}

TEST(MagForward, ZeroExpansionMatrixGivesHalfEverywhere) {
  const Graph g = small_labeled_graph(5, 0.4, 13);
  const MagContext ctx = MagContext::build(g);
  MagModel mag = make_mag(g, 7);
  mag.wex_a = DenseMatrix(mag.wex_a.rows, mag.wex_a.cols);  // zeros
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      if (i != j) EXPECT_DOUBLE_EQ(f.a_cont(i, j), 0.5);
}

TEST(MagForward, StructureStrategyPreservesAttributesBitExactly) {
  const Graph g = small_labeled_graph(6, 0.4, 17);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 5);
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
  EXPECT_EQ(f.x_cont, g.attributes());
}

TEST(MagForward, AttributeStrategyPreservesAdjacency) {
  const Graph g = small_labeled_graph(6, 0.4, 19);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 5);
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::attribute);
  EXPECT_EQ(f.a_cont, ctx.a_clean);
  for (double v : f.x_cont.data) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Gradient checks for the three-player objectives

TEST(SdGradients, DiscriminatorObjectiveMatchesFiniteDifferences) {
  Rng rng(23);
  SdModel sd = SdModel::create(9, 6, SdChannel::structure, rng);
  DenseMatrix real(1, 9), fake(1, 9);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : real.data) v = unit(rng) < 0.5 ? 1.0 : 0.0;
  for (double& v : fake.data) v = unit(rng);

  const SdStepResult res = sd_discriminator_objective(sd, real, fake);
  const auto loss_fn = [&](const ParameterSet& q) {
    SdModel s = sd;
    s.load(q);
    return sd_discriminator_objective(s, real, fake).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, sd.params(), res.grads, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(MagGradients, SdPathStructureMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(6, 0.4, 29);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 31);
  Rng rng(37);
  const SdModel sd = SdModel::create(g.n() * g.n(), 5, SdChannel::structure, rng);

  const MagObjective obj =
      mag_sd_objective(mag, &sd, nullptr, ctx, AttackStrategy::structure);
  const auto loss_fn = [&](const ParameterSet& q) {
    MagModel m = mag;
    m.load(q);
    return mag_sd_objective(m, &sd, nullptr, ctx, AttackStrategy::structure).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, mag.params(), obj.grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(MagGradients, SdPathAttributeMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(6, 0.4, 41);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 43);
  Rng rng(47);
  const SdModel sd = SdModel::create(g.n() * g.attribute_dim(), 5, SdChannel::attributes, rng);

  const MagObjective obj =
      mag_sd_objective(mag, nullptr, &sd, ctx, AttackStrategy::attribute);
  const auto loss_fn = [&](const ParameterSet& q) {
    MagModel m = mag;
    m.load(q);
    return mag_sd_objective(m, nullptr, &sd, ctx, AttackStrategy::attribute).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, mag.params(), obj.grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(MagGradients, AdPathNodeTaskMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(7, 0.4, 53);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 59);
  AdHandle ad;
  ad.task = TaskKind::node;
  ad.model = make_node_model(g, 61, 5, 3);

  const MagObjective obj =
      mag_ad_objective(mag, ad, ctx, AttackStrategy::structure, {2}, 1);
  const auto loss_fn = [&](const ParameterSet& q) {
    MagModel m = mag;
    m.load(q);
    return mag_ad_objective(m, ad, ctx, AttackStrategy::structure, {2}, 1).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, mag.params(), obj.grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(MagGradients, AdPathLinkTaskMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(7, 0.4, 67);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 71);
  Rng rng(73);
  LinkPredictor lp;
  lp.hidden_dim = 5;
  lp.embedding_dim = 3;
  lp.w0 = glorot_uniform(g.attribute_dim(), 5, rng);
  lp.w1 = glorot_uniform(5, 3, rng);
  AdHandle ad;
  ad.task = TaskKind::link;
  ad.model = lp;

  const MagObjective obj =
      mag_ad_objective(mag, ad, ctx, AttackStrategy::structure, {0, 3}, 0);
  const auto loss_fn = [&](const ParameterSet& q) {
    MagModel m = mag;
    m.load(q);
    return mag_ad_objective(m, ad, ctx, AttackStrategy::structure, {0, 3}, 0).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, mag.params(), obj.grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(MagGradients, AdPathGraphTaskMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(6, 0.4, 79);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 83);
  Rng rng(89);
  GraphClassifier gc;
  gc.hidden_dim = 5;
  gc.num_classes = 2;
  gc.w0 = glorot_uniform(g.attribute_dim(), 5, rng);
  gc.w1 = glorot_uniform(5, 5, rng);
  gc.wc = glorot_uniform(5, 2, rng);
  AdHandle ad;
  ad.task = TaskKind::graph;
  ad.model = gc;

  const MagObjective obj = mag_ad_objective(mag, ad, ctx, AttackStrategy::structure, {}, 1);
  const auto loss_fn = [&](const ParameterSet& q) {
    MagModel m = mag;
    m.load(q);
    return mag_ad_objective(m, ad, ctx, AttackStrategy::structure, {}, 1).loss;
  };
  const FdReport r = finite_difference_check(loss_fn, mag.params(), obj.grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

TEST(AdGradients, TrainableNodeAdMatchesFiniteDifferences) {
  const Graph g = small_labeled_graph(7, 0.4, 97);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 101);
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
  const DenseMatrix ahat_fake = normalize_dense_adjacency(f.a_cont);
  AdHandle ad;
  ad.task = TaskKind::node;
  ad.mode = AdMode::trainable_surrogate;
  ad.model = make_node_model(g, 103, 5, 3);
  const std::vector<int> locals{2};
  const int cls = 1;

  const auto objective = [&](const AdHandle& h) {
    const auto cr = ad_forward(h, ctx.ahat, *ctx.x_clean, locals, cls);
    const auto cf = ad_forward(h, ahat_fake, f.x_cont, locals, cls);
    return -std::log(clamp_prob(cr.conf)) - std::log(clamp_prob(1.0 - cf.conf));
  };
  // analytic grads, mirroring train_ad_step
  const auto cr = ad_forward(ad, ctx.ahat, *ctx.x_clean, locals, cls);
  const auto cf = ad_forward(ad, ahat_fake, f.x_cont, locals, cls);
  const AdGrads gr = ad_backward(ad, cr, ctx.ahat, *ctx.x_clean, locals, cls,
                                 -1.0 / clamp_prob(cr.conf), true, false);
  const AdGrads gf = ad_backward(ad, cf, ahat_fake, f.x_cont, locals, cls,
                                 1.0 / clamp_prob(1.0 - cf.conf), true, false);
  ParameterSet grads = gr.weights;
  for (std::size_t i = 0; i < grads.items.size(); ++i)
    accumulate(grads.items[i].second, gf.weights.items[i].second);

  const auto loss_fn = [&](const ParameterSet& q) {
    AdHandle h = ad;
    h.load(q);
    return objective(h);
  };
  const FdReport r = finite_difference_check(loss_fn, ad.params(), grads, 1e-5, 300);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst.param << "[" << r.worst.index << "]";
}

// ---------------------------------------------------------------------------
// Behavioral checks on the alternating steps

TEST(SdTraining, LossAtHalfIsTwoLogTwo) {
  Rng rng(107);
  SdModel sd = SdModel::create(4, 3, SdChannel::structure, rng);
  sd.w0 = DenseMatrix(4, 3);
  sd.w1 = DenseMatrix(3, 1);  // all-zero weights: output 0.5 everywhere
  const SdStepResult r =
      sd_discriminator_objective(sd, DenseMatrix(1, 4, 1.0), DenseMatrix(1, 4, 0.0));
  EXPECT_NEAR(r.loss, 2.0 * std::log(2.0), 1e-12);
}

TEST(SdTraining, AllZeroWeightsScoreHalf) {
  SdModel sd;
  sd.input_dim = 6;
  sd.w0 = DenseMatrix(6, 4);
  sd.b0 = DenseMatrix(1, 4);
  sd.w1 = DenseMatrix(4, 1);
  sd.b1 = DenseMatrix(1, 1);
  EXPECT_DOUBLE_EQ(sd_forward(sd, DenseMatrix(2, 3, 1.0)), 0.5);
}

TEST(SdTraining, SeparablePairBecomesDistinguishable) {
  Rng rng(109);
  SdModel sd = SdModel::create(8, 6, SdChannel::structure, rng);
  AdamState opt = AdamState::create(sd.params(), 0.03);
  const DenseMatrix real(1, 8, 1.0);
  DenseMatrix fake(1, 8, 0.0);
  for (int s = 0; s < 10; ++s) train_sd_step(sd, real, fake, opt);
  EXPECT_GT(sd_forward_cached(sd, real).prob, sd_forward_cached(sd, fake).prob);
}

TEST(SdTraining, IdenticalPairPushesTowardHalf) {
  Rng rng(113);
  SdModel sd = SdModel::create(8, 6, SdChannel::structure, rng);
  AdamState opt = AdamState::create(sd.params(), 0.03);
  DenseMatrix input(1, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : input.data) v = unit(rng);
  const double before = std::fabs(sd_forward_cached(sd, input).prob - 0.5);
  for (int s = 0; s < 20; ++s) train_sd_step(sd, input, input, opt);
  const double after = std::fabs(sd_forward_cached(sd, input).prob - 0.5);
  EXPECT_LE(after, before + 1e-9);
}

TEST(MagSdTraining, LossDecreasesAndFoolsFrozenSd) {
  const Graph g = small_labeled_graph(6, 0.4, 127);
  const MagContext ctx = MagContext::build(g);
  MagModel mag = make_mag(g, 131);
  Rng rng(137);
  SdModel sd = SdModel::create(g.n() * g.n(), 6, SdChannel::structure, rng);
  // give SD a head start so there is something to fool
  AdamState sd_opt = AdamState::create(sd.params(), 0.03);
  for (int s = 0; s < 5; ++s) {
    const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
    train_sd_step(sd, flatten_rowwise(ctx.a_clean), flatten_rowwise(f.a_cont), sd_opt);
  }
  AdamState mag_opt = AdamState::create(mag.params(), 0.03);
  const MagForward f0 = mag_forward(mag, ctx, AttackStrategy::structure);
  const double sd_before = sd_forward(sd, f0.a_cont);
  double first_loss = 0.0, last_loss = 0.0;
  for (int s = 0; s < 10; ++s) {
    const double l =
        train_mag_sd_step(mag, mag_opt, &sd, nullptr, ctx, AttackStrategy::structure);
    if (s == 0) first_loss = l;
    last_loss = l;
  }
  EXPECT_LT(last_loss, first_loss);
  const MagForward f1 = mag_forward(mag, ctx, AttackStrategy::structure);
  EXPECT_GT(sd_forward(sd, f1.a_cont), sd_before);
}

TEST(AdTraining, FrozenModeLeavesWeightsBitIdentical) {
  const Graph g = small_labeled_graph(6, 0.4, 139);
  const MagContext ctx = MagContext::build(g);
  AdHandle ad;
  ad.task = TaskKind::node;
  ad.mode = AdMode::frozen_target;
  ad.model = make_node_model(g, 149, 5, 3);
  const ParameterSet before = ad.params();
  AdamState opt = AdamState::create(ad.params(), 0.03);
  train_ad_step(ad, opt, ctx.ahat, *ctx.x_clean, ctx.ahat, *ctx.x_clean, {0}, 0);
  const ParameterSet after = ad.params();
  for (std::size_t i = 0; i < before.items.size(); ++i)
    EXPECT_EQ(before.items[i].second, after.items[i].second);
}

TEST(AdTraining, RealConfidenceRisesUnderTrainableMode) {
  const Graph g = small_labeled_graph(7, 0.4, 151);
  const MagContext ctx = MagContext::build(g);
  const MagModel mag = make_mag(g, 157);
  const MagForward f = mag_forward(mag, ctx, AttackStrategy::structure);
  const DenseMatrix ahat_fake = normalize_dense_adjacency(f.a_cont);
  AdHandle ad;
  ad.task = TaskKind::node;
  ad.mode = AdMode::trainable_surrogate;
  ad.model = make_node_model(g, 163, 5, 3);
  AdamState opt = AdamState::create(ad.params(), 0.03);
  const std::vector<int> locals{1};
  const double before = ad_forward(ad, ctx.ahat, *ctx.x_clean, locals, 2).conf;
  for (int s = 0; s < 10; ++s)
    train_ad_step(ad, opt, ctx.ahat, *ctx.x_clean, ahat_fake, f.x_cont, locals, 2);
  const double after = ad_forward(ad, ctx.ahat, *ctx.x_clean, locals, 2).conf;
  EXPECT_GT(after, before);
}

TEST(MagAdTraining, TargetConfidenceRises) {
  const Graph g = small_labeled_graph(7, 0.4, 167);
  const MagContext ctx = MagContext::build(g);
  MagModel mag = make_mag(g, 173);
  AdHandle ad;
  ad.task = TaskKind::node;
  ad.model = make_node_model(g, 179, 5, 3);
  AdamState opt = AdamState::create(mag.params(), 0.03);
  double first = 0.0, last = 0.0;
  for (int s = 0; s < 15; ++s) {
    double conf = 0.0;
    mag_ad_objective(mag, ad, ctx, AttackStrategy::structure, {2}, 1, &conf);
    if (s == 0) first = conf;
    last = conf;
    train_mag_ad_step(mag, opt, ad, ctx, AttackStrategy::structure, {2}, 1);
  }
  EXPECT_GT(last, first);
}

// ---------------------------------------------------------------------------
// Scale masks (exhaustive soundness on small graphs)

TEST(ScaleMask, ExhaustiveSoundnessOnSmallGraphs) {
  Rng rng(181);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = 4 + static_cast<int>(unit(rng) * 5);  // 4..8
    const Graph g = small_labeled_graph(n, 0.4, 1000 + rep, 2, 3);
    const int target = static_cast<int>(unit(rng) * n);
    const std::vector<int> hops = bfs_hops(g, {target});
    const DenseMatrix a_orig = g.dense_adjacency();
    const DenseMatrix& x_orig = g.attributes();

    // random symmetric binary candidate
    DenseMatrix a_cand(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double v = unit(rng) < 0.5 ? 1.0 : 0.0;
        a_cand(i, j) = v;
        a_cand(j, i) = v;
      }
    DenseMatrix x_cand(x_orig.rows, x_orig.cols);
    for (double& v : x_cand.data) v = unit(rng) < 0.5 ? 1.0 : 0.0;

    const int k_hops = 2;
    for (const AttackScale scale :
         {AttackScale::direct, AttackScale::indirect, AttackScale::unlimited}) {
      const MaskedCandidate m =
          apply_scale_mask(a_orig, x_orig, a_cand, x_cand, scale, hops, {target}, k_hops);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          EXPECT_EQ(m.a(i, j), m.a(j, i));
          if (i == j) {
            EXPECT_EQ(m.a(i, j), 0.0);
            continue;
          }
          const bool touched = m.a(i, j) != a_orig(i, j);
          if (scale == AttackScale::direct && touched)
            EXPECT_TRUE(i == target || j == target);
          if (scale == AttackScale::indirect) {
            if (i == target || j == target) EXPECT_FALSE(touched);
            if (touched) {
              EXPECT_TRUE(hops[i] >= 2 && hops[i] <= k_hops);
              EXPECT_TRUE(hops[j] >= 2 && hops[j] <= k_hops);
            }
          }
          if (scale == AttackScale::unlimited) EXPECT_EQ(m.a(i, j), a_cand(i, j));
        }
      for (int i = 0; i < n; ++i)
        for (int c = 0; c < x_orig.cols; ++c) {
          const bool touched = m.x(i, c) != x_orig(i, c);
          if (scale == AttackScale::direct && touched) EXPECT_EQ(i, target);
          if (scale == AttackScale::indirect && touched)
            EXPECT_TRUE(hops[i] >= 2 && hops[i] <= k_hops);
          if (scale == AttackScale::unlimited) EXPECT_EQ(m.x(i, c), x_cand(i, c));
        }
    }
  }
}

// ---------------------------------------------------------------------------
// Target label selection

TEST(SelectTargetLabel, SecondHighestByDefault) {
  EXPECT_EQ(select_target_label({0.7, 0.2, 0.1}, 0), 1);
}

TEST(SelectTargetLabel, TieBreaksTowardLowestIndex) {
  EXPECT_EQ(select_target_label({0.6, 0.2, 0.2}, 0), 1);
}

TEST(SelectTargetLabel, SingleClassThrows) {
  EXPECT_THROW(select_target_label({1.0}, 0), ContractError);
}
