#include "slim/grad.hpp"

#include "slim/errors.hpp"

#include <algorithm>
#include <cmath>

namespace slim::grad {

const Mat& Var::value() const { return tape_->value(id_); }
const Mat& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::variable(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), true, "variable", nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat(), false, "constant", nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Mat value, std::initializer_list<Var> parents, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite value");
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw Error(std::string(op) + ": operands live on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Mat(), needs, op, needs ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var out) {
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("backward() needs a 1×1 output; seed gradients instead");
  accumulate(out, Mat::Ones(1, 1));
  run_backward();
}

void Tape::run_backward() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (node.backward && node.grad.size() != 0) node.backward(*this, node.value, node.grad);
  }
}

void Tape::zero_grad() {
  for (auto& node : nodes_) node.grad.resize(0, 0);
}

namespace {

void require_same_shape(std::string_view op, const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + " differ");
  }
}

void require_finite(std::string_view op, const Mat& a) {
  if (!a.allFinite()) throw NumericError(std::string(op) + ": non-finite input");
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Mat row_softmax(const Mat& x) {
  Mat y = x.colwise() - x.rowwise().maxCoeff();
  y = y.array().exp().matrix();
  y.array().colwise() /= y.rowwise().sum().array();
  return y;
}

Mat row_log_softmax(const Mat& x) {
  const Eigen::VectorXd m = x.rowwise().maxCoeff();
  Mat shifted = x.colwise() - m;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  return shifted.colwise() - lse;
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
                     " differ");
  }
  Mat out = a.value() * b.value();
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Mat&, const Mat& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  Mat out = a.value() * b.value().transpose();
  return a.tape().record("matmul_nt", std::move(out), {a, b}, [a, b](Tape& t, const Mat&, const Mat& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value());
    if (b.requires_grad()) t.accumulate(b, g.transpose() * a.value());
  });
}

Var transpose(Var a) {
  Mat out = a.value().transpose();
  return a.tape().record("transpose", std::move(out), {a},
                         [a](Tape& t, const Mat&, const Mat& g) { t.accumulate(a, g.transpose()); });
}

Var add(Var a, Var b) {
  require_same_shape("add", a.value(), b.value());
  Mat out = a.value() + b.value();
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& t, const Mat&, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var scale(Var a, double factor) {
  Mat out = factor * a.value();
  return a.tape().record("scale", std::move(out), {a},
                         [a, factor](Tape& t, const Mat&, const Mat& g) { t.accumulate(a, factor * g); });
}

Var add_row_bias(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) throw ShapeError("add_row_bias: bias must be 1×cols");
  Mat out = a.value().rowwise() + bias.value().row(0);
  return a.tape().record("add_row_bias", std::move(out), {a, bias}, [a, bias](Tape& t, const Mat&, const Mat& g) {
    t.accumulate(a, g);
    if (bias.requires_grad()) t.accumulate(bias, g.colwise().sum());
  });
}

Var sigmoid(Var a) {
  Mat out = a.value().unaryExpr([](double x) { return logistic(x); });
  return a.tape().record("sigmoid", std::move(out), {a}, [a](Tape& t, const Mat& y, const Mat& g) {
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var tanh(Var a) {
  Mat out = a.value().array().tanh().matrix();
  return a.tape().record("tanh", std::move(out), {a}, [a](Tape& t, const Mat& y, const Mat& g) {
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var softmax_rows(Var a) {
  require_finite("softmax_rows", a.value());
  return a.tape().record("softmax_rows", row_softmax(a.value()), {a}, [a](Tape& t, const Mat& s, const Mat& g) {
    const Eigen::VectorXd dot = (g.array() * s.array()).rowwise().sum();
    t.accumulate(a, (s.array() * (g.colwise() - dot).array()).matrix());
  });
}

Var log_softmax_rows(Var a) {
  require_finite("log_softmax_rows", a.value());
  Mat out = row_log_softmax(a.value());
  return a.tape().record("log_softmax_rows", std::move(out), {a}, [a](Tape& t, const Mat&, const Mat& g) {
    const Mat s = row_softmax(a.value());
    const Eigen::VectorXd row_total = g.rowwise().sum();
    t.accumulate(a, (g - (s.array().colwise() * row_total.array()).matrix()));
  });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
  require_finite("cross_entropy", logits.value());
  const Index rows = logits.rows();
  if (static_cast<Index>(targets.size()) != rows) throw ShapeError("cross_entropy: one target per row required");
  if (rows == 0) throw ShapeError("cross_entropy: empty batch");
  for (int target : targets) {
    if (target < 0 || target >= logits.cols()) {
      throw RangeError("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
  }
  const Mat log_p = row_log_softmax(logits.value());
  double total = 0.0;
  for (Index i = 0; i < rows; ++i) total -= log_p(i, targets[static_cast<std::size_t>(i)]);
  Mat out(1, 1);
  out(0, 0) = total / static_cast<double>(rows);
  std::vector<int> owned(targets.begin(), targets.end());
  return logits.tape().record("cross_entropy", std::move(out), {logits},
                              [logits, owned = std::move(owned)](Tape& t, const Mat&, const Mat& g) {
                                Mat d = row_softmax(logits.value());
                                for (std::size_t i = 0; i < owned.size(); ++i) {
                                  d(static_cast<Index>(i), owned[i]) -= 1.0;
                                }
                                d *= g(0, 0) / static_cast<double>(owned.size());
                                t.accumulate(logits, d);
                              });
}

Var kl_div(Var p, Var q) {
  require_same_shape("kl_div", p.value(), q.value());
  require_finite("kl_div", p.value());
  require_finite("kl_div", q.value());
  const Mat& pv = p.value();
  const Mat& qv = q.value();
  double total = 0.0;
  for (Index i = 0; i < pv.size(); ++i) {
    const double pi = pv.data()[i];
    if (pi < 0.0) throw NumericError("kl_div: negative probability");
    if (pi == 0.0) continue;
    const double qi = qv.data()[i];
    if (!(qi > 0.0)) throw NumericError("kl_div: q must be positive where p > 0");
    total += pi * std::log(pi / qi);
  }
  Mat out(1, 1);
  out(0, 0) = total;
  return p.tape().record("kl_div", std::move(out), {p, q}, [p, q](Tape& t, const Mat&, const Mat& g) {
    const Mat& pv = p.value();
    const Mat& qv = q.value();
    const double s = g(0, 0);
    if (p.requires_grad()) {
      Mat dp = Mat::Zero(pv.rows(), pv.cols());
      for (Index i = 0; i < pv.size(); ++i) {
        if (pv.data()[i] > 0.0) dp.data()[i] = s * (std::log(pv.data()[i] / qv.data()[i]) + 1.0);
      }
      t.accumulate(p, dp);
    }
    if (q.requires_grad()) t.accumulate(q, (-s * pv.array() / qv.array()).matrix());
  });
}

Var squared_distance_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw ShapeError("squared_distance_rows: row widths differ");
  require_finite("squared_distance_rows", a.value());
  require_finite("squared_distance_rows", b.value());
  const Mat& av = a.value();
  const Mat& bv = b.value();
  Mat out(av.rows(), bv.rows());
  for (Index k = 0; k < bv.rows(); ++k) out.col(k) = (av.rowwise() - bv.row(k)).rowwise().squaredNorm();
  return a.tape().record("squared_distance_rows", std::move(out), {a, b}, [a, b](Tape& t, const Mat&, const Mat& g) {
    const Mat& av = a.value();
    const Mat& bv = b.value();
    if (a.requires_grad()) {
      Mat da = 2.0 * (av.array().colwise() * g.rowwise().sum().array()).matrix() - 2.0 * g * bv;
      t.accumulate(a, da);
    }
    if (b.requires_grad()) {
      const Eigen::RowVectorXd col_total = g.colwise().sum();
      Mat db = 2.0 * (bv.array().colwise() * col_total.transpose().array()).matrix() - 2.0 * g.transpose() * av;
      t.accumulate(b, db);
    }
  });
}

Var student_t_kernel(Var squared_distance, double dof) {
  if (!(dof > 0.0)) throw NumericError("student_t_kernel: degrees of freedom must be positive");
  const double power = -(dof + 1.0) / 2.0;
  Mat out = (1.0 + squared_distance.value().array() / dof).pow(power).matrix();
  return squared_distance.tape().record(
      "student_t_kernel", std::move(out), {squared_distance},
      [squared_distance, dof](Tape& t, const Mat& y, const Mat& g) {
        const auto base = 1.0 + squared_distance.value().array() / dof;
        const double factor = -(dof + 1.0) / (2.0 * dof);
        t.accumulate(squared_distance, (g.array() * factor * y.array() / base).matrix());
      });
}

Var normalize_rows(Var a) {
  const Eigen::VectorXd totals = a.value().rowwise().sum();
  if ((totals.array() == 0.0).any()) throw NumericError("normalize_rows: zero row sum");
  Mat out = a.value().array().colwise() / totals.array();
  return a.tape().record("normalize_rows", std::move(out), {a}, [a, totals](Tape& t, const Mat& y, const Mat& g) {
    const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
    t.accumulate(a, ((g.colwise() - dot).array().colwise() / totals.array()).matrix());
  });
}

Var column_sums(Var a) {
  Mat out = a.value().colwise().sum();
  const Index rows = a.rows();
  return a.tape().record("column_sums", std::move(out), {a}, [a, rows](Tape& t, const Mat&, const Mat& g) {
    t.accumulate(a, g.replicate(rows, 1));
  });
}

Var scale_columns_inverse(Var a, Var c, double eps) {
  if (c.rows() != 1 || c.cols() != a.cols()) throw ShapeError("scale_columns_inverse: c must be 1×cols");
  const Eigen::RowVectorXd inv = (c.value().row(0).array() + eps).inverse().matrix();
  Mat out = a.value().array().rowwise() * inv.array();
  return a.tape().record("scale_columns_inverse", std::move(out), {a, c}, [a, c, inv](Tape& t, const Mat&, const Mat& g) {
    if (a.requires_grad()) t.accumulate(a, (g.array().rowwise() * inv.array()).matrix());
    if (c.requires_grad()) {
      const Eigen::RowVectorXd weighted = (g.array() * a.value().array()).colwise().sum();
      t.accumulate(c, (-(weighted.array() * inv.array().square())).matrix());
    }
  });
}

Var sandwich(Var w, const Mat& a) {
  if (a.rows() != w.rows() || a.cols() != w.rows()) throw ShapeError("sandwich: A must be rows(w) square");
  Mat aw = a * w.value();
  Mat out = w.value().transpose() * aw;
  Mat at = a.transpose();
  return w.tape().record("sandwich", std::move(out), {w},
                         [w, aw = std::move(aw), at = std::move(at)](Tape& t, const Mat&, const Mat& g) {
                           t.accumulate(w, aw * g.transpose() + at * w.value() * g);
                         });
}

Var weighted_sum(Var a, const Mat& weights) {
  require_same_shape("weighted_sum", a.value(), weights);
  Mat out(1, 1);
  out(0, 0) = (a.value().array() * weights.array()).sum();
  return a.tape().record("weighted_sum", std::move(out), {a},
                         [a, weights](Tape& t, const Mat&, const Mat& g) { t.accumulate(a, g(0, 0) * weights); });
}

Var sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows();
  const Index c = a.cols();
  return a.tape().record("sum", std::move(out), {a},
                         [a, r, c](Tape& t, const Mat&, const Mat& g) { t.accumulate(a, Mat::Constant(r, c, g(0, 0))); });
}

Var flatten(Var a) {
  const Index r = a.rows();
  const Index c = a.cols();
  Mat out = Eigen::Map<const Mat>(a.value().data(), 1, r * c);
  return a.tape().record("flatten", std::move(out), {a}, [a, r, c](Tape& t, const Mat&, const Mat& g) {
    t.accumulate(a, Eigen::Map<const Mat>(g.data(), r, c));
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols: row counts differ");
  Mat out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Index left = a.cols();
  const Index right = b.cols();
  return a.tape().record("concat_cols", std::move(out), {a, b}, [a, b, left, right](Tape& t, const Mat&, const Mat& g) {
    t.accumulate(a, g.leftCols(left));
    t.accumulate(b, g.rightCols(right));
  });
}

GradCheckReport compare_with_finite_differences(std::string name, const std::vector<std::span<double>>& params,
                                                const std::vector<std::span<const double>>& analytic,
                                                const std::function<double()>& objective, double step,
                                                double tolerance) {
  if (!(step > 0.0)) throw ConfigError("finite-difference step must be positive");
  if (params.size() != analytic.size()) throw ShapeError("one analytic gradient per parameter block required");
  GradCheckReport report;
  report.op_name = std::move(name);
  report.step = step;
  report.tolerance = tolerance;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != analytic[b].size()) throw ShapeError("gradient block size mismatch");
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      double& x = params[b][i];
      const double saved = x;
      x = saved + step;
      const double plus = objective();
      x = saved - step;
      const double minus = objective();
      x = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double exact = analytic[b][i];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(exact - numeric) / denom);
      ++report.coordinates;
    }
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

GradCheckReport grad_check(std::string name, const TapeFunction& f, std::vector<Mat> inputs, double step,
                           double tolerance, std::uint64_t seed) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Mat& m : inputs) vars.push_back(tape.variable(m));
  Var out = f(tape, vars);

  Mat weights = Mat::Ones(1, 1);
  if (out.value().size() != 1) {
    Rng rng(seed);
    weights = uniform_matrix(out.rows(), out.cols(), 1.0, rng);
  }
  tape.accumulate(out, weights);
  tape.run_backward();

  std::vector<Mat> analytic;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const Mat& g = vars[i].grad();
    analytic.push_back(g.size() == 0 ? Mat::Zero(inputs[i].rows(), inputs[i].cols()) : g);
  }

  auto objective = [&]() {
    Tape t;
    std::vector<Var> cs;
    cs.reserve(inputs.size());
    for (const Mat& m : inputs) cs.push_back(t.constant(m));
    return (f(t, cs).value().array() * weights.array()).sum();
  };

  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> grads;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    params.emplace_back(inputs[i].data(), static_cast<std::size_t>(inputs[i].size()));
    grads.emplace_back(analytic[i].data(), static_cast<std::size_t>(analytic[i].size()));
  }
  return compare_with_finite_differences(std::move(name), params, grads, objective, step, tolerance);
}

namespace {

Mat random_positive_stochastic(Index rows, Index cols, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.1, 1.0);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  m.array().colwise() /= m.rowwise().sum().array();
  return m;
}

Mat random_in(Index rows, Index cols, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Mat m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

RegisteredOp make_op(std::string name, std::function<std::vector<Mat>(Rng&)> inputs, TapeFunction f) {
  return RegisteredOp{name, [name, inputs = std::move(inputs), f = std::move(f)](std::uint64_t seed, double step,
                                                                                  double tol) {
                        Rng rng(seed);
                        return grad_check(name, f, inputs(rng), step, tol, derive_seed(seed, 1));
                      }};
}

}  // namespace

std::vector<RegisteredOp> registered_ops() {
  std::vector<RegisteredOp> ops;
  auto unary = [](Var (*op)(Var)) { return [op](Tape&, std::span<const Var> x) { return op(x[0]); }; };

  ops.push_back(make_op(
      "matmul", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r), uniform_matrix(4, 2, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return matmul(x[0], x[1]); }));
  ops.push_back(make_op(
      "matmul_nt", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r), uniform_matrix(2, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return matmul_nt(x[0], x[1]); }));
  ops.push_back(make_op(
      "transpose", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; }, unary(&transpose)));
  ops.push_back(make_op(
      "add", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r), uniform_matrix(3, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return add(x[0], x[1]); }));
  ops.push_back(make_op(
      "scale", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return scale(x[0], 1.7); }));
  ops.push_back(make_op(
      "add_row_bias", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r), uniform_matrix(1, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return add_row_bias(x[0], x[1]); }));
  ops.push_back(make_op(
      "sigmoid", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 2, r)}; }, unary(&sigmoid)));
  ops.push_back(make_op("tanh", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 2, r)}; }, unary(&tanh)));
  ops.push_back(make_op(
      "softmax_rows", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 5, 2, r)}; }, unary(&softmax_rows)));
  ops.push_back(make_op(
      "log_softmax_rows", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 5, 2, r)}; },
      unary(&log_softmax_rows)));
  ops.push_back(make_op(
      "cross_entropy", [](Rng& r) { return std::vector<Mat>{uniform_matrix(4, 3, 2, r)}; },
      [](Tape&, std::span<const Var> x) {
        static const int targets[] = {0, 2, 1, 2};
        return cross_entropy(x[0], targets);
      }));
  ops.push_back(make_op(
      "kl_div",
      [](Rng& r) {
        return std::vector<Mat>{random_positive_stochastic(3, 4, r), random_positive_stochastic(3, 4, r)};
      },
      [](Tape&, std::span<const Var> x) { return kl_div(x[0], x[1]); }));
  ops.push_back(make_op(
      "squared_distance_rows",
      [](Rng& r) { return std::vector<Mat>{uniform_matrix(4, 3, 1, r), uniform_matrix(5, 3, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return squared_distance_rows(x[0], x[1]); }));
  ops.push_back(make_op(
      "student_t_kernel", [](Rng& r) { return std::vector<Mat>{random_in(3, 4, 0.0, 3.0, r)}; },
      [](Tape&, std::span<const Var> x) { return student_t_kernel(x[0], 1.0); }));
  ops.push_back(make_op(
      "student_t_kernel_dof2.5", [](Rng& r) { return std::vector<Mat>{random_in(3, 4, 0.0, 3.0, r)}; },
      [](Tape&, std::span<const Var> x) { return student_t_kernel(x[0], 2.5); }));
  ops.push_back(make_op(
      "normalize_rows", [](Rng& r) { return std::vector<Mat>{random_in(3, 4, 0.2, 2.0, r)}; },
      unary(&normalize_rows)));
  ops.push_back(make_op(
      "column_sums", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; }, unary(&column_sums)));
  ops.push_back(make_op(
      "scale_columns_inverse",
      [](Rng& r) { return std::vector<Mat>{uniform_matrix(4, 3, 1, r), random_in(1, 3, 0.5, 2.0, r)}; },
      [](Tape&, std::span<const Var> x) { return scale_columns_inverse(x[0], x[1], 1e-8); }));
  ops.push_back(make_op(
      "sandwich", [](Rng& r) { return std::vector<Mat>{uniform_matrix(4, 3, 1, r)}; },
      [](Tape&, std::span<const Var> x) {
        Mat a(4, 4);
        a << 0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0, 0;
        return sandwich(x[0], a);
      }));
  ops.push_back(make_op(
      "weighted_sum", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) {
        Mat w = Mat::Zero(3, 4);
        w(0, 1) = 1.0;
        w(2, 3) = -0.5;
        w(1, 0) = 2.0;
        return weighted_sum(x[0], w);
      }));
  ops.push_back(make_op("sum", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; }, unary(&sum)));
  ops.push_back(make_op(
      "flatten", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 4, 1, r)}; }, unary(&flatten)));
  ops.push_back(make_op(
      "concat_cols", [](Rng& r) { return std::vector<Mat>{uniform_matrix(3, 2, 1, r), uniform_matrix(3, 4, 1, r)}; },
      [](Tape&, std::span<const Var> x) { return concat_cols(x[0], x[1]); }));
  return ops;
}

}  // namespace slim::grad
