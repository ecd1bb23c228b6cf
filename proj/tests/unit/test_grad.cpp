#include "doctest.h"

#include "slim/errors.hpp"
#include "slim/grad.hpp"

#include <cmath>
#include <limits>

using namespace slim;
using namespace slim::grad;

TEST_SUITE("grad") {

TEST_CASE("every registered op passes the finite-difference check") {
  const auto ops = registered_ops();
  CHECK(ops.size() >= 20);
  for (const auto& op : ops) {
    for (std::uint64_t seed : {0u, 1u, 2u}) {
      const GradCheckReport r = op.check(seed, 1e-5, 1e-4);
      INFO(op.name << " seed " << seed << " err " << r.max_relative_error);
      CHECK(r.passed);
      CHECK(r.coordinates > 0);
    }
  }
}

TEST_CASE("an impossible tolerance is reported as a failure") {
  const auto ops = registered_ops();
  bool any_failed = false;
  for (const auto& op : ops) any_failed = any_failed || !op.check(0, 1e-2, 1e-14).passed;
  CHECK(any_failed);
}

TEST_CASE("reused value accumulates both contributions") {
  Tape tape;
  Mat x0(1, 3);
  x0 << 1.0, -2.0, 0.5;
  Var x = tape.variable(x0);
  Var y = sum(add(matmul_nt(x, x), scale(sum(x), 3.0)));  // ‖x‖² + 3Σx
  tape.backward(y);
  CHECK(y.scalar() == doctest::Approx(5.25 + 3.0 * -0.5));
  CHECK(x.grad().isApprox((2.0 * x0.array() + 3.0).matrix()));
}

TEST_CASE("constants receive no gradient") {
  Tape tape;
  Var c = tape.constant(Mat::Ones(2, 2));
  Var v = tape.variable(Mat::Ones(2, 2));
  tape.backward(sum(matmul(c, v)));
  CHECK(c.grad().size() == 0);
  CHECK(v.grad().isApprox(Mat::Constant(2, 2, 2.0)));
}

TEST_CASE("hand values") {
  Tape tape;
  CHECK(sigmoid(tape.constant(Mat::Zero(1, 1))).scalar() == 0.5);
  CHECK(tanh(tape.constant(Mat::Zero(1, 1))).scalar() == 0.0);

  const Mat logits = Mat::Zero(2, 4);
  const int targets[] = {0, 3};
  CHECK(cross_entropy(tape.constant(logits), targets).scalar() == doctest::Approx(std::log(4.0)));

  Mat p(1, 3);
  p << 0.2, 0.3, 0.5;
  CHECK(kl_div(tape.constant(p), tape.constant(p)).scalar() == doctest::Approx(0.0));
  Mat q(1, 3);
  q << 0.0, 0.5, 0.5;
  Mat r(1, 3);
  r << 0.25, 0.25, 0.5;
  CHECK(kl_div(tape.constant(q), tape.constant(r)).scalar() == doctest::Approx(0.5 * std::log(2.0)));

  const Mat s = softmax_rows(tape.constant(Mat::Random(3, 5))).value();
  CHECK(s.rowwise().sum().isApprox(Mat::Ones(3, 1)));

  Mat a(2, 1), b(1, 1);
  a << 0.0, 3.0;
  b << 1.0;
  Mat d = squared_distance_rows(tape.constant(a), tape.constant(b)).value();
  CHECK(d(0, 0) == doctest::Approx(1.0));
  CHECK(d(1, 0) == doctest::Approx(4.0));
  Mat kern = student_t_kernel(tape.constant(d), 1.0).value();
  CHECK(kern(0, 0) == doctest::Approx(0.5));
  CHECK(kern(1, 0) == doctest::Approx(0.2));

  Mat m(2, 2);
  m << 1, 2, 3, 4;
  Mat flat = flatten(tape.constant(m)).value();
  CHECK(flat.rows() == 1);
  CHECK(flat(0, 1) == 2.0);
  CHECK(flat(0, 2) == 3.0);
}

TEST_CASE("backward needs a scalar output") {
  Tape tape;
  Var x = tape.variable(Mat::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(x), ShapeError);
}

TEST_CASE("non-finite values are rejected") {
  Tape tape;
  Mat bad = Mat::Ones(1, 1);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(tape.record("test", bad, {}, nullptr), NumericError);
}

TEST_CASE("zero_grad clears accumulated gradients") {
  Tape tape;
  Var x = tape.variable(Mat::Ones(1, 2));
  Var y = sum(x);
  tape.backward(y);
  CHECK(x.grad().size() == 2);
  tape.zero_grad();
  CHECK(x.grad().size() == 0);
}

}  // TEST_SUITE
