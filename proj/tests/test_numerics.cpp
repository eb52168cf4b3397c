#include <gtest/gtest.h>

#include <cmath>

#include "graphattacker/matrix.hpp"
#include "graphattacker/optim.hpp"

using namespace gat;

TEST(Activations, ReluClampsNegatives) {
  DenseMatrix m(1, 2);
  m(0, 0) = -1.0;
  m(0, 1) = 2.0;
  const DenseMatrix r = relu(m);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(0, 1), 2.0);
}

TEST(Activations, SigmoidAtZero) { EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5); }

TEST(Activations, SoftmaxUniformOnConstantRow) {
  DenseMatrix m(1, 3);
  const DenseMatrix s = softmax_rows(m);
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(s(0, j), 1.0 / 3.0, 1e-12);
}

TEST(Activations, SoftmaxRowsSumToOne) {
  Rng rng(7);
  std::uniform_real_distribution<double> dist(-30.0, 30.0);
  for (int rep = 0; rep < 50; ++rep) {
    DenseMatrix m(4, 6);
    for (double& v : m.data) v = dist(rng);
    const DenseMatrix s = softmax_rows(m);
    for (int i = 0; i < s.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < s.cols; ++j) {
        sum += s(i, j);
        EXPECT_GE(s(i, j), 0.0);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Losses, PerfectPredictionIsNearZero) {
  DenseMatrix pred(1, 3), y(1, 3);
  pred(0, 1) = 1.0;
  y(0, 1) = 1.0;
  EXPECT_NEAR(cross_entropy(pred, y), 0.0, 1e-10);
}

TEST(Losses, UniformThreeClass) {
  DenseMatrix pred(1, 3), y(1, 3);
  for (int j = 0; j < 3; ++j) pred(0, j) = 1.0 / 3.0;
  y(0, 2) = 1.0;
  EXPECT_NEAR(cross_entropy(pred, y), std::log(3.0), 1e-12);
}

TEST(Losses, BinaryCrossEntropyHalf) {
  EXPECT_NEAR(binary_cross_entropy(0.5, 1.0), std::log(2.0), 1e-12);
}

TEST(Losses, ShapeMismatchThrows) {
  DenseMatrix a(1, 3), b(1, 2);
  EXPECT_THROW(cross_entropy(a, b), ContractError);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ParameterSet p;
  p.add("w", DenseMatrix(2, 2, 1.5));
  AdamState st = AdamState::create(p, 0.1);
  const ParameterSet before = p;
  adam_step(p, p.zeros_like(), st);
  EXPECT_EQ(p.at("w"), before.at("w"));
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMatchesHandComputation) {
  // w=0, g=1, lr=0.1: mhat=1, vhat=1 -> w = -0.1/(1+eps)
  ParameterSet p;
  p.add("w", DenseMatrix(1, 1, 0.0));
  ParameterSet g;
  g.add("w", DenseMatrix(1, 1, 1.0));
  AdamState st = AdamState::create(p, 0.1);
  adam_step(p, g, st);
  EXPECT_NEAR(p.at("w")(0, 0), -0.1, 1e-6);
}

TEST(Adam, MomentsDecayGeometricallyOnZeroGrad) {
  ParameterSet p;
  p.add("w", DenseMatrix(1, 1, 0.0));
  ParameterSet g;
  g.add("w", DenseMatrix(1, 1, 1.0));
  AdamState st = AdamState::create(p, 0.1);
  adam_step(p, g, st);
  const double m1 = st.m.at("w")(0, 0);
  const double v1 = st.v.at("w")(0, 0);
  adam_step(p, p.zeros_like(), st);
  adam_step(p, p.zeros_like(), st);
  EXPECT_NEAR(st.m.at("w")(0, 0), m1 * 0.9 * 0.9, 1e-15);
  EXPECT_NEAR(st.v.at("w")(0, 0), v1 * 0.999 * 0.999, 1e-15);
}

TEST(Adam, DeterministicGivenIdenticalInputs) {
  for (int rep = 0; rep < 2; ++rep) {
    ParameterSet p;
    Rng rng(11);
    p.add("w", glorot_uniform(3, 3, rng));
    ParameterSet g;
    Rng rng2(13);
    g.add("w", glorot_uniform(3, 3, rng2));
    AdamState st = AdamState::create(p, 0.05);
    adam_step(p, g, st);
    static DenseMatrix first_run;
    if (rep == 0)
      first_run = p.at("w");
    else
      EXPECT_EQ(p.at("w"), first_run);
  }
}

TEST(FiniteDifference, QuadraticIsExact) {
  ParameterSet p;
  p.add("w", DenseMatrix(1, 1, 3.0));
  ParameterSet g;
  g.add("w", DenseMatrix(1, 1, 3.0));  // d(w^2/2)/dw = w = 3
  const auto loss = [](const ParameterSet& q) {
    const double w = q.at("w")(0, 0);
    return 0.5 * w * w;
  };
  const FdReport r = finite_difference_check(loss, p, g, 1e-4);
  EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(FiniteDifference, DetectsWrongGradient) {
  ParameterSet p;
  p.add("w", DenseMatrix(1, 1, 3.0));
  ParameterSet g;
  g.add("w", DenseMatrix(1, 1, 6.0));  // deliberately 2x the true gradient
  const auto loss = [](const ParameterSet& q) {
    const double w = q.at("w")(0, 0);
    return 0.5 * w * w;
  };
  const FdReport r = finite_difference_check(loss, p, g, 1e-4);
  EXPECT_NEAR(r.max_rel_error, 1.0, 1e-4);
}

TEST(FiniteDifference, NonFiniteLossIsOracleFailure) {
  ParameterSet p;
  p.add("w", DenseMatrix(1, 1, 0.0));
  const auto loss = [](const ParameterSet&) { return std::nan(""); };
  EXPECT_THROW(finite_difference_check(loss, p, p.zeros_like(), 1e-4), OracleError);
}

TEST(Matmul, AgreesWithTransposedVariants) {
  Rng rng(3);
  const DenseMatrix a = glorot_uniform(4, 5, rng);
  const DenseMatrix b = glorot_uniform(5, 3, rng);
  const DenseMatrix c = matmul(a, b);
  const DenseMatrix c2 = matmul_at_b(transpose(a), b);
  const DenseMatrix c3 = matmul_a_bt(a, transpose(b));
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_NEAR(c.data[i], c2.data[i], 1e-12);
    EXPECT_NEAR(c.data[i], c3.data[i], 1e-12);
  }
}
