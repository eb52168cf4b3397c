#pragma once

#include "graphattacker/matrix.hpp"
#include "graphattacker/optim.hpp"

namespace gat {

enum class SdChannel { structure, attributes };

// One-hidden-layer discriminator over a flattened adjacency or attribute
// matrix: SD(h) = sigmoid(W1 (W0 h + b0) + b1); emits a "real" probability.
struct SdModel {
  DenseMatrix w0;  // input_dim x hidden
  DenseMatrix b0;  // 1 x hidden
  DenseMatrix w1;  // hidden x 1
  DenseMatrix b1;  // 1 x 1
  SdChannel channel = SdChannel::structure;
  int input_dim = 0;

  static SdModel create(int input_dim, int hidden, SdChannel channel, Rng& rng) {
    SdModel m;
    m.input_dim = input_dim;
    m.channel = channel;
    m.w0 = glorot_uniform(input_dim, hidden, rng);
    m.b0 = DenseMatrix(1, hidden);
    m.w1 = glorot_uniform(hidden, 1, rng);
    m.b1 = DenseMatrix(1, 1);
    return m;
  }

  ParameterSet params() const {
    ParameterSet p;
    p.add("SD_W0", w0);
    p.add("SD_b0", b0);
    p.add("SD_W1", w1);
    p.add("SD_b1", b1);
    return p;
  }

  void load(const ParameterSet& p) {
    w0 = p.at("SD_W0");
    b0 = p.at("SD_b0");
    w1 = p.at("SD_W1");
    b1 = p.at("SD_b1");
  }
};

// Row-wise flattening of the input channel matrix into a 1 x (rows*cols) row.
inline DenseMatrix flatten_rowwise(const DenseMatrix& m) {
  DenseMatrix v(1, static_cast<int>(m.size()));
  v.data = m.data;
  return v;
}

struct SdForward {
  DenseMatrix input;   // 1 x input_dim
  DenseMatrix hidden;  // 1 x H_SD
  double logit = 0.0;
  double prob = 0.5;
};

inline SdForward sd_forward_cached(const SdModel& sd, const DenseMatrix& input) {
  if (input.cols != sd.input_dim)
    throw ContractError("sd_forward: input length != n_input");
  SdForward f;
  f.input = input;
  f.hidden = add(matmul(input, sd.w0), sd.b0);
  f.logit = matmul(f.hidden, sd.w1)(0, 0) + sd.b1(0, 0);
  f.prob = sigmoid(f.logit);
  return f;
}

inline double sd_forward(const SdModel& sd, const DenseMatrix& channel_matrix) {
  return sd_forward_cached(sd, flatten_rowwise(channel_matrix)).prob;
}

struct SdGrads {
  ParameterSet weights;   // same names as SdModel::params
  DenseMatrix d_input;    // 1 x input_dim
};

// Backward from dL/dlogit; fills weight grads and/or the input gradient.
inline SdGrads sd_backward(const SdModel& sd, const SdForward& f, double d_logit,
                           bool want_weight_grads, bool want_input_grad) {
  SdGrads g;
  const DenseMatrix d_hidden = scale(transpose(sd.w1), d_logit);  // 1 x H
  if (want_weight_grads) {
    g.weights.add("SD_W0", matmul_at_b(f.input, d_hidden));
    g.weights.add("SD_b0", d_hidden);
    g.weights.add("SD_W1", scale(transpose(f.hidden), d_logit));
    g.weights.add("SD_b1", DenseMatrix(1, 1, d_logit));
  }
  if (want_input_grad) g.d_input = matmul_a_bt(d_hidden, sd.w0);
  return g;
}

// Discriminator objective on one (real, fake) pair, as a descent loss:
// L = -log SD(real) - log(1 - SD(fake)). Returns loss and weight gradients.
struct SdStepResult {
  double loss = 0.0;
  ParameterSet grads;
};

inline SdStepResult sd_discriminator_objective(const SdModel& sd, const DenseMatrix& real_in,
                                               const DenseMatrix& fake_in) {
  const SdForward fr = sd_forward_cached(sd, real_in);
  const SdForward ff = sd_forward_cached(sd, fake_in);
  SdStepResult r;
  r.loss = binary_cross_entropy(fr.prob, 1.0) + binary_cross_entropy(ff.prob, 0.0);
  // d/dlogit of BCE with a sigmoid output is (p - y)
  const SdGrads gr = sd_backward(sd, fr, fr.prob - 1.0, true, false);
  const SdGrads gf = sd_backward(sd, ff, ff.prob, true, false);
  r.grads = gr.weights;
  for (std::size_t i = 0; i < r.grads.items.size(); ++i)
    accumulate(r.grads.items[i].second, gf.weights.items[i].second);
  return r;
}

// One Adam ascent step on the discriminator objective (implemented as descent
// on its negation). The fake input is treated as a constant.
inline double train_sd_step(SdModel& sd, const DenseMatrix& real_in, const DenseMatrix& fake_in,
                            AdamState& opt) {
  const SdStepResult r = sd_discriminator_objective(sd, real_in, fake_in);
  if (!std::isfinite(r.loss)) throw TrainingError("train_sd_step: non-finite loss");
  ParameterSet p = sd.params();
  adam_step(p, r.grads, opt);
  sd.load(p);
  return r.loss;
}

// Generator-side objective L = log(1 - SD(fake)) minimized by the generator;
// returns the loss and dL/d(fake input matrix) reshaped to `shape_like`.
inline std::pair<double, DenseMatrix> sd_generator_gradient(const SdModel& sd,
                                                            const DenseMatrix& fake_matrix) {
  const SdForward ff = sd_forward_cached(sd, flatten_rowwise(fake_matrix));
  // d log(1-p) / dlogit = -p
  const SdGrads g = sd_backward(sd, ff, -ff.prob, false, true);
  DenseMatrix d(fake_matrix.rows, fake_matrix.cols);
  d.data = g.d_input.data;
  const double loss = std::log(clamp_prob(1.0 - ff.prob));
  return {loss, d};
}

}  // namespace gat
