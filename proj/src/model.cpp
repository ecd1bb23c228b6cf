#include "slim/model.hpp"

#include "slim/errors.hpp"

namespace slim {

std::vector<ModelState::Parameter> ModelState::parameters() {
  return {{"encoder.T1", &encoder.T1},       {"encoder.b1", &encoder.b1},       {"encoder.T2", &encoder.T2},
          {"encoder.b2", &encoder.b2},       {"landmarks.U", &landmarks.U},     {"classifier.W1", &classifier.W1},
          {"classifier.b1", &classifier.b1}, {"classifier.W2", &classifier.W2}, {"classifier.b2", &classifier.b2}};
}

std::size_t ModelState::parameter_count() const {
  const Mat* all[] = {&encoder.T1,    &encoder.b1,    &encoder.T2,    &encoder.b2,   &landmarks.U,
                      &classifier.W1, &classifier.b1, &classifier.W2, &classifier.b2};
  std::size_t total = 0;
  for (const Mat* m : all) total += static_cast<std::size_t>(m->size());
  return total;
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd" || name == "SGD") return OptimizerKind::Sgd;
  if (name == "adagrad" || name == "Adagrad") return OptimizerKind::Adagrad;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adagrad)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adagrad"; }

Optimizer::Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), learning_rate_(learning_rate) {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

void Optimizer::attach(std::vector<Mat*> params) {
  params_ = std::move(params);
  accumulators_.clear();
  if (kind_ == OptimizerKind::Adagrad) {
    accumulators_.reserve(params_.size());
    for (const Mat* p : params_) accumulators_.push_back(Mat::Constant(p->rows(), p->cols(), kAdagradInitialAccumulator));
  }
}

template <typename P, typename A>
void Optimizer::apply(P&& param, A&& acc, const Mat& grad) {
  if (kind_ == OptimizerKind::Sgd) {
    param -= learning_rate_ * grad;
  } else {
    acc.array() += grad.array().square();
    param.array() -= learning_rate_ * grad.array() / acc.array().sqrt();
  }
}

void Optimizer::step(std::size_t index, const Mat& grad) {
  Mat& p = *params_.at(index);
  if (grad.rows() != p.rows() || grad.cols() != p.cols()) throw ShapeError("optimizer: gradient shape mismatch");
  if (kind_ == OptimizerKind::Sgd) {
    apply(p, p, grad);
  } else {
    apply(p, accumulators_[index], grad);
  }
}

void Optimizer::step_rows(std::size_t index, Index row0, const Mat& grad) {
  Mat& p = *params_.at(index);
  if (grad.cols() != p.cols() || row0 < 0 || row0 + grad.rows() > p.rows()) {
    throw ShapeError("optimizer: row block outside parameter");
  }
  auto rows = p.middleRows(row0, grad.rows());
  if (kind_ == OptimizerKind::Sgd) {
    apply(rows, rows, grad);
  } else {
    apply(rows, accumulators_[index].middleRows(row0, grad.rows()), grad);
  }
}

}  // namespace slim
