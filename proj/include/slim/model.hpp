#pragma once

#include "slim/embedding.hpp"
#include "slim/head.hpp"
#include "slim/landmarks.hpp"
#include "slim/pooling.hpp"
#include "slim/substructure.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace slim {

// Everything needed to turn a graph into class scores.
struct ModelState {
  SubstructureConfig substructure;
  Activation activation = Activation::Logistic;
  FeatureLayout layout;
  int node_types = 0;
  int class_count = 0;

  EncoderParams encoder;
  LandmarkSet landmarks;
  ClassifierParams classifier;

  struct Parameter {
    std::string name;
    Mat* value;
  };
  // Fixed order: encoder T1, b1, T2, b2, landmarks U, classifier W1, b1, W2, b2.
  std::vector<Parameter> parameters();
  [[nodiscard]] std::size_t parameter_count() const;
};

// Index of the classifier's first weight matrix in ModelState::parameters().
inline constexpr std::size_t kClassifierW1 = 5;

enum class OptimizerKind { Sgd, Adagrad };

OptimizerKind parse_optimizer(std::string_view name);
std::string to_string(OptimizerKind kind);

// Initial Adagrad accumulator value.
inline constexpr double kAdagradInitialAccumulator = 1e-8;

// Plain SGD (θ −= lr·g) or Adagrad (G += g², θ −= lr·g/√G).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  // Binds to the parameters; accumulators are sized here.
  void attach(std::vector<Mat*> params);

  void step(std::size_t index, const Mat& grad);
  // Updates rows [row0, row0 + grad.rows()) of parameter `index`.
  void step_rows(std::size_t index, Index row0, const Mat& grad);

  [[nodiscard]] OptimizerKind kind() const { return kind_; }
  [[nodiscard]] double learning_rate() const { return learning_rate_; }
  [[nodiscard]] const Mat& accumulator(std::size_t index) const { return accumulators_.at(index); }

 private:
  template <typename P, typename A>
  void apply(P&& param, A&& acc, const Mat& grad);

  OptimizerKind kind_;
  double learning_rate_;
  std::vector<Mat*> params_;
  std::vector<Mat> accumulators_;
};

}  // namespace slim
