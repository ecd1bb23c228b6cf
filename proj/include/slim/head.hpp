#pragma once

// Classifier head over pooled interaction features.
//
// The feature of a graph is vec(C_norm) = vec(Ŵᵀ A Ŵ), optionally followed by
// a short tail (p, M). At large K that vector and the first weight matrix are
// the dominant cost, so neither the batch feature matrix nor the full weight
// gradient is ever materialized: features are rebuilt one block of C_norm rows
// at a time and each block's weight gradient is handed to a sink as soon as
// the block's input gradient has been formed. A sink may therefore update the
// weights in place.

#include "slim/embedding.hpp"
#include "slim/matrix.hpp"

#include <functional>
#include <span>
#include <vector>

namespace slim {

inline constexpr Index kClassifierHidden = 64;

struct ClassifierParams {
  Mat W1;  // F × hidden, rows 0..K²-1 follow the row-major C_norm layout
  Mat b1;  // 1 × hidden
  Mat W2;  // hidden × classes
  Mat b2;  // 1 × classes

  [[nodiscard]] Index input_width() const { return W1.rows(); }
  [[nodiscard]] Index class_count() const { return W2.cols(); }

  static ClassifierParams init(Index input_width, Index hidden, Index classes, Rng& rng);
};

// What the head needs from one graph.
struct HeadInput {
  Mat scaled;                     // Ŵ = W diag(p + ε)⁻¹, n × K
  Mat spread;                     // A Ŵ, n × K
  Mat extra;                      // 1 × E tail, E may be 0
  const Mat* adjacency = nullptr;
};

HeadInput make_head_input(const Mat& scaled, const Mat& adjacency, Mat extra = Mat());

// Receives d(loss)/d(W1) for rows [row0, row0 + block.rows()).
using RowBlockSink = std::function<void(Index row0, const Mat& block)>;

// Number of C_norm rows per feature block.
Index head_block_rows(Index K);

Mat head_logits(const ClassifierParams& params, std::span<const HeadInput> inputs, Activation act);

struct HeadGradients {
  double loss = 0.0;             // mean cross-entropy
  Mat logits;
  std::vector<Mat> d_scaled;     // per input, n × K
  std::vector<Mat> d_extra;      // per input, 1 × E
  Mat b1, W2, b2;                // W1 goes to the sink
};

// Mean cross-entropy of the inputs against `targets` and its gradient.
HeadGradients head_backward(const ClassifierParams& params, std::span<const HeadInput> inputs,
                            std::span<const int> targets, Activation act, const RowBlockSink& sink);

// Sink that adds every block into `full`, which must already be sized like W1.
RowBlockSink accumulate_into(Mat& full);

}  // namespace slim
