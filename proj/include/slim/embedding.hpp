#pragma once

#include "slim/grad.hpp"
#include "slim/matrix.hpp"

#include <string>
#include <string_view>

namespace slim {

enum class Activation { Logistic, Tanh };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

// Two-layer encoder H = σ(σ(Z·T1 + b1)·T2 + b2).
struct EncoderParams {
  Mat T1;  // D × h
  Mat b1;  // 1 × h
  Mat T2;  // h × d
  Mat b2;  // 1 × d

  [[nodiscard]] Index input_width() const { return T1.rows(); }
  [[nodiscard]] Index hidden_width() const { return T1.cols(); }
  [[nodiscard]] Index latent_width() const { return T2.cols(); }

  // Uniform in ±1/√fan_in for weights and biases.
  static EncoderParams init(Index input_width, Index hidden_width, Index latent_width, Rng& rng);
};

// Tape leaves standing for one EncoderParams.
struct EncoderVars {
  grad::Var T1, b1, T2, b2;
};

EncoderVars as_variables(grad::Tape& tape, const EncoderParams& params);
EncoderVars as_constants(grad::Tape& tape, const EncoderParams& params);

grad::Var apply_activation(grad::Var x, Activation act);

// Differentiable encode. Throws ShapeError when Z width differs from T1 rows.
grad::Var encode(grad::Var z, const EncoderVars& params, Activation act = Activation::Logistic);
Mat encode(const Mat& z, const EncoderParams& params, Activation act = Activation::Logistic);

// −Σ_i Σ_{j∈N(i)} log softmax_j'(⟨H_i, H_j'⟩)[j], where the softmax runs over
// every node of the graph including i itself.
grad::Var cooccurrence_loss(grad::Var h, const Mat& adjacency);
double cooccurrence_loss(const Mat& h, const Mat& adjacency);

}  // namespace slim
