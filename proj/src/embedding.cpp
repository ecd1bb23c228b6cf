#include "slim/embedding.hpp"

#include "slim/errors.hpp"

#include <cmath>

namespace slim {

using grad::Tape;
using grad::Var;

Activation parse_activation(std::string_view name) {
  if (name == "logistic" || name == "sigmoid") return Activation::Logistic;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "logistic"; }

EncoderParams EncoderParams::init(Index input_width, Index hidden_width, Index latent_width, Rng& rng) {
  EncoderParams p;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_width));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_width));
  p.T1 = uniform_matrix(input_width, hidden_width, bound1, rng);
  p.b1 = uniform_matrix(1, hidden_width, bound1, rng);
  p.T2 = uniform_matrix(hidden_width, latent_width, bound2, rng);
  p.b2 = uniform_matrix(1, latent_width, bound2, rng);
  return p;
}

EncoderVars as_variables(Tape& tape, const EncoderParams& p) {
  return {tape.variable(p.T1), tape.variable(p.b1), tape.variable(p.T2), tape.variable(p.b2)};
}

EncoderVars as_constants(Tape& tape, const EncoderParams& p) {
  return {tape.constant(p.T1), tape.constant(p.b1), tape.constant(p.T2), tape.constant(p.b2)};
}

Var apply_activation(Var x, Activation act) { return act == Activation::Tanh ? grad::tanh(x) : grad::sigmoid(x); }

Var encode(Var z, const EncoderVars& p, Activation act) {
  if (z.cols() != p.T1.rows()) {
    throw ShapeError("encode: substructure width " + std::to_string(z.cols()) + " but encoder expects " +
                     std::to_string(p.T1.rows()));
  }
  Var hidden = apply_activation(grad::add_row_bias(grad::matmul(z, p.T1), p.b1), act);
  return apply_activation(grad::add_row_bias(grad::matmul(hidden, p.T2), p.b2), act);
}

Mat encode(const Mat& z, const EncoderParams& params, Activation act) {
  Tape tape;
  return encode(tape.constant(z), as_constants(tape, params), act).value();
}

Var cooccurrence_loss(Var h, const Mat& adjacency) {
  if (adjacency.rows() != h.rows() || adjacency.cols() != h.rows()) {
    throw ShapeError("cooccurrence_loss: one embedding row per node required");
  }
  Var scores = grad::matmul_nt(h, h);
  Var log_p = grad::log_softmax_rows(scores);
  return grad::weighted_sum(log_p, -adjacency);
}

double cooccurrence_loss(const Mat& h, const Mat& adjacency) {
  Tape tape;
  return cooccurrence_loss(tape.constant(h), adjacency).scalar();
}

}  // namespace slim
