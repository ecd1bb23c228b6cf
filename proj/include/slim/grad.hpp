#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Tape records every operation of one forward pass in creation order, which
// is also a topological order. Gradients are accumulated additively into each
// node, so a value used twice receives both contributions. Nodes that do not
// depend on a variable carry no gradient and are skipped on the way back.
//
//   grad::Tape tape;
//   auto x = tape.variable(x0);
//   auto y = grad::sum(grad::sigmoid(x));
//   tape.backward(y);
//   x.grad();  // dy/dx

#include "slim/matrix.hpp"

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slim::grad {

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] const Mat& value() const;
  // Empty (0×0) when no gradient reached this node.
  [[nodiscard]] const Mat& grad() const;
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] Index rows() const { return value().rows(); }
  [[nodiscard]] Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Receives the node's own output value and its accumulated gradient.
using BackwardFn = std::function<void(Tape&, const Mat& out_value, const Mat& out_grad)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Leaf that receives gradients.
  Var variable(Mat value);
  // Leaf that never receives gradients.
  Var constant(Mat value);

  // Appends the result of an operation. `backward` is invoked with the
  // output value and gradient and must push contributions to the parents
  // through accumulate(). Throws NumericError if `value` is not finite.
  Var record(std::string_view op, Mat value, std::initializer_list<Var> parents, BackwardFn backward);

  [[nodiscard]] const Mat& value(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] const Mat& grad(std::size_t id) const { return nodes_[id].grad; }
  [[nodiscard]] bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  [[nodiscard]] std::string_view op(std::size_t id) const { return nodes_[id].op; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  // Adds `g` to the gradient of `v`; ignored when `v` does not require gradients.
  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = g;
    } else {
      node.grad += g;
    }
  }

  // Seeds d(out)/d(out) = 1 for a 1×1 output and propagates.
  void backward(Var out);
  // Propagates from whatever gradients have been seeded with accumulate().
  void run_backward();
  void zero_grad();

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::string_view op;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

// ---- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
// a · bᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var scale(Var a, double factor);
// a + 1·bias, bias is 1×cols
Var add_row_bias(Var a, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// Mean over rows of −log softmax(logits)[target].
Var cross_entropy(Var logits, std::span<const int> targets);
// Σ p log(p/q) with 0·log 0 = 0. Inputs must be strictly positive where p > 0.
Var kl_div(Var p, Var q);
// (i, k) = ‖a_i − b_k‖²
Var squared_distance_rows(Var a, Var b);
// Elementwise (1 + d/dof)^(−(dof+1)/2)
Var student_t_kernel(Var squared_distance, double dof);
Var normalize_rows(Var a);
// 1×cols vector of column sums
Var column_sums(Var a);
// a(:, k) / (c_k + eps), c is 1×cols
Var scale_columns_inverse(Var a, Var c, double eps);
// wᵀ · A · w for a constant matrix A
Var sandwich(Var w, const Mat& a);
// Σ weights ⊙ a, a 1×1 result
Var weighted_sum(Var a, const Mat& weights);
Var sum(Var a);
// 1×(rows·cols), row-major order
Var flatten(Var a);
Var concat_cols(Var a, Var b);

// ---- finite-difference checking -------------------------------------------

struct GradCheckReport {
  std::string op_name;
  double max_relative_error = 0.0;
  double step = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::size_t coordinates = 0;
};

// Compares `analytic[i]` with central differences of `objective` in every
// coordinate of `params[i]`. Parameters are perturbed in place and restored.
// Relative error uses the denominator max(|analytic|, |numeric|, 1e−8).
GradCheckReport compare_with_finite_differences(std::string name, const std::vector<std::span<double>>& params,
                                                const std::vector<std::span<const double>>& analytic,
                                                const std::function<double()>& objective, double step,
                                                double tolerance);

using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

// Checks the gradient of `f` with respect to every input. Non-scalar outputs
// are scalarized with fixed pseudo-random weights derived from `seed`.
GradCheckReport grad_check(std::string name, const TapeFunction& f, std::vector<Mat> inputs, double step = 1e-5,
                           double tolerance = 1e-4, std::uint64_t seed = 0);

struct RegisteredOp {
  std::string name;
  // Builds random inputs from the seed and runs grad_check.
  std::function<GradCheckReport(std::uint64_t seed, double step, double tolerance)> check;
};

// Every differentiable operation above, with a random-input harness.
std::vector<RegisteredOp> registered_ops();

}  // namespace slim::grad
