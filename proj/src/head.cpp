#include "slim/head.hpp"

#include "slim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace slim {

using grad::Tape;
using grad::Var;

ClassifierParams ClassifierParams::init(Index input_width, Index hidden, Index classes, Rng& rng) {
  ClassifierParams p;
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_width));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  p.W1 = uniform_matrix(input_width, hidden, bound1, rng);
  p.b1 = uniform_matrix(1, hidden, bound1, rng);
  p.W2 = uniform_matrix(hidden, classes, bound2, rng);
  p.b2 = uniform_matrix(1, classes, bound2, rng);
  return p;
}

HeadInput make_head_input(const Mat& scaled, const Mat& adjacency, Mat extra) {
  if (adjacency.rows() != scaled.rows() || adjacency.cols() != scaled.rows()) {
    throw ShapeError("head input: adjacency does not match the assignment rows");
  }
  HeadInput in;
  in.scaled = scaled;
  in.spread = adjacency * scaled;
  in.extra = extra.size() == 0 ? Mat(1, 0) : std::move(extra);
  in.adjacency = &adjacency;
  return in;
}

Index head_block_rows(Index K) { return std::max<Index>(1, std::min<Index>(K, 16384 / std::max<Index>(K, 1))); }

RowBlockSink accumulate_into(Mat& full) {
  return [&full](Index row0, const Mat& block) { full.middleRows(row0, block.rows()) += block; };
}

namespace {

struct Layout {
  Index K = 0;
  Index extra = 0;
};

Layout check_inputs(const ClassifierParams& params, std::span<const HeadInput> inputs) {
  if (inputs.empty()) throw ShapeError("head: empty batch");
  Layout l{inputs.front().scaled.cols(), inputs.front().extra.cols()};
  for (const HeadInput& in : inputs) {
    if (in.scaled.cols() != l.K || in.spread.cols() != l.K || in.spread.rows() != in.scaled.rows() ||
        in.extra.cols() != l.extra) {
      throw ShapeError("head: inconsistent input shapes within a batch");
    }
  }
  if (params.W1.rows() != l.K * l.K + l.extra) {
    throw ShapeError("head: classifier expects " + std::to_string(params.W1.rows()) + " features, inputs give " +
                     std::to_string(l.K * l.K + l.extra));
  }
  return l;
}

// Rows k0..k0+bk of every graph's C_norm, one graph per row.
void fill_block(std::span<const HeadInput> inputs, Index K, Index k0, Index bk, Mat& block) {
  block.resize(static_cast<Index>(inputs.size()), bk * K);
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    Eigen::Map<Mat> rows(block.row(static_cast<Index>(g)).data(), bk, K);
    rows.noalias() = inputs[g].scaled.middleCols(k0, bk).transpose() * inputs[g].spread;
  }
}

Mat hidden_preactivation(const ClassifierParams& params, std::span<const HeadInput> inputs, const Layout& l) {
  const Index B = static_cast<Index>(inputs.size());
  Mat pre = params.b1.replicate(B, 1);
  const Index bk = head_block_rows(l.K);
  Mat block;
  for (Index k0 = 0; k0 < l.K; k0 += bk) {
    const Index rows = std::min(bk, l.K - k0);
    fill_block(inputs, l.K, k0, rows, block);
    pre.noalias() += block * params.W1.middleRows(k0 * l.K, rows * l.K);
  }
  if (l.extra > 0) {
    Mat tail(B, l.extra);
    for (Index g = 0; g < B; ++g) tail.row(g) = inputs[static_cast<std::size_t>(g)].extra;
    pre.noalias() += tail * params.W1.bottomRows(l.extra);
  }
  return pre;
}

}  // namespace

Mat head_logits(const ClassifierParams& params, std::span<const HeadInput> inputs, Activation act) {
  const Layout l = check_inputs(params, inputs);
  Tape tape;
  Var hidden = apply_activation(tape.constant(hidden_preactivation(params, inputs, l)), act);
  return grad::add_row_bias(grad::matmul(hidden, tape.constant(params.W2)), tape.constant(params.b2)).value();
}

HeadGradients head_backward(const ClassifierParams& params, std::span<const HeadInput> inputs,
                            std::span<const int> targets, Activation act, const RowBlockSink& sink) {
  const Layout l = check_inputs(params, inputs);
  if (targets.size() != inputs.size()) throw ShapeError("head: one target per input required");
  const Index B = static_cast<Index>(inputs.size());

  Tape tape;
  Var pre = tape.variable(hidden_preactivation(params, inputs, l));
  Var w2 = tape.variable(params.W2);
  Var b2 = tape.variable(params.b2);
  Var logits = grad::add_row_bias(grad::matmul(apply_activation(pre, act), w2), b2);
  Var loss = grad::cross_entropy(logits, targets);
  tape.backward(loss);

  HeadGradients out;
  out.loss = loss.scalar();
  out.logits = logits.value();
  out.W2 = w2.grad();
  out.b2 = b2.grad();
  const Mat& d_pre = pre.grad();
  out.b1 = d_pre.colwise().sum();

  std::vector<Mat> d_spread(inputs.size());
  out.d_scaled.resize(inputs.size());
  for (std::size_t g = 0; g < inputs.size(); ++g) {
    out.d_scaled[g] = Mat::Zero(inputs[g].scaled.rows(), l.K);
    d_spread[g] = Mat::Zero(inputs[g].scaled.rows(), l.K);
  }

  const Index bk = head_block_rows(l.K);
  Mat block;
  Mat d_block;
  Mat g_block;
  for (Index k0 = 0; k0 < l.K; k0 += bk) {
    const Index rows = std::min(bk, l.K - k0);
    const auto w1 = params.W1.middleRows(k0 * l.K, rows * l.K);
    fill_block(inputs, l.K, k0, rows, block);
    d_block.noalias() = d_pre * w1.transpose();
    g_block.noalias() = block.transpose() * d_pre;
    sink(k0 * l.K, g_block);  // may overwrite w1 from here on
    for (Index g = 0; g < B; ++g) {
      const std::size_t gi = static_cast<std::size_t>(g);
      Eigen::Map<const Mat> dc(d_block.row(g).data(), rows, l.K);
      out.d_scaled[gi].middleCols(k0, rows).noalias() += inputs[gi].spread * dc.transpose();
      d_spread[gi].noalias() += inputs[gi].scaled.middleCols(k0, rows) * dc;
    }
  }

  out.d_extra.assign(inputs.size(), Mat(1, l.extra));
  if (l.extra > 0) {
    Mat tail(B, l.extra);
    for (Index g = 0; g < B; ++g) tail.row(g) = inputs[static_cast<std::size_t>(g)].extra;
    const Mat d_tail = d_pre * params.W1.bottomRows(l.extra).transpose();
    const Mat g_tail = tail.transpose() * d_pre;
    sink(l.K * l.K, g_tail);
    for (Index g = 0; g < B; ++g) out.d_extra[static_cast<std::size_t>(g)] = d_tail.row(g);
  }

  for (std::size_t g = 0; g < inputs.size(); ++g) {
    if (inputs[g].adjacency == nullptr) throw ShapeError("head: input without adjacency");
    out.d_scaled[g].noalias() += inputs[g].adjacency->transpose() * d_spread[g];
  }
  return out;
}

}  // namespace slim
