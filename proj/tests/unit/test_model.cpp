#include "doctest.h"

#include "slim/errors.hpp"
#include "slim/head.hpp"
#include "slim/model.hpp"
#include "slim/model_io.hpp"
#include "slim/pooling.hpp"
#include "slim/train.hpp"

#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

#include <cmath>
#include <fstream>

using namespace slim;
using testutil::TempDir;

namespace {

struct HeadCase {
  std::vector<Mat> adjacency;
  std::vector<Mat> scaled;
  std::vector<Mat> extra;
  std::vector<int> targets;
  ClassifierParams params;
};

HeadCase make_case(Index K, Index extra_width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Rng init(seed + 1);
  HeadCase hc;
  for (int g = 0; g < 3; ++g) {
    const Index n = 3 + g;
    hc.adjacency.push_back(oracle::random_graph(n, 0.5, rng));
    hc.scaled.push_back(uniform_matrix(n, K, 0.5, rng).cwiseAbs());
    hc.extra.push_back(extra_width > 0 ? uniform_matrix(1, extra_width, 1.0, rng) : Mat());
    hc.targets.push_back(g % 2);
  }
  hc.params = ClassifierParams::init(K * K + extra_width, 8, 2, init);
  hc.params.W1 *= 3.0;
  return hc;
}

std::vector<HeadInput> inputs_of(const HeadCase& hc) {
  std::vector<HeadInput> in;
  for (std::size_t g = 0; g < hc.scaled.size(); ++g) in.push_back(make_head_input(hc.scaled[g], hc.adjacency[g], hc.extra[g]));
  return in;
}

// Unblocked reference built from tape ops.
struct Reference {
  double loss;
  std::vector<Mat> d_scaled, d_extra;
  Mat W1, b1, W2, b2, logits;
};

Reference reference(const HeadCase& hc, Activation act) {
  grad::Tape t;
  auto W1 = t.variable(hc.params.W1), b1 = t.variable(hc.params.b1);
  auto W2 = t.variable(hc.params.W2), b2 = t.variable(hc.params.b2);
  std::vector<grad::Var> scaled, extra;
  grad::Var total;
  Reference r;
  r.logits.resize(static_cast<Index>(hc.scaled.size()), 2);
  for (std::size_t g = 0; g < hc.scaled.size(); ++g) {
    scaled.push_back(t.variable(hc.scaled[g]));
    grad::Var f = grad::flatten(normalized_interaction(scaled.back(), hc.adjacency[g]));
    if (hc.extra[g].size() > 0) {
      extra.push_back(t.variable(hc.extra[g]));
      f = grad::concat_cols(f, extra.back());
    }
    grad::Var hidden = apply_activation(grad::add_row_bias(grad::matmul(f, W1), b1), act);
    grad::Var logits = grad::add_row_bias(grad::matmul(hidden, W2), b2);
    r.logits.row(static_cast<Index>(g)) = logits.value();
    const int target[] = {hc.targets[g]};
    grad::Var ce = grad::scale(grad::cross_entropy(logits, target), 1.0 / static_cast<double>(hc.scaled.size()));
    total = g == 0 ? ce : grad::add(total, ce);
  }
  t.backward(total);
  r.loss = total.scalar();
  for (auto& v : scaled) r.d_scaled.push_back(v.grad());
  for (auto& v : extra) r.d_extra.push_back(v.grad());
  r.W1 = W1.grad();
  r.b1 = b1.grad();
  r.W2 = W2.grad();
  r.b2 = b2.grad();
  return r;
}

double max_diff(const Mat& a, const Mat& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return a.size() == 0 ? 0.0 : (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("head") {

TEST_CASE("blocked head equals the unblocked reference") {
  for (Index K : {3, 150}) {
    for (Index extra : {0, 5}) {
      for (Activation act : {Activation::Logistic, Activation::Tanh}) {
        INFO("K " << K << " extra " << extra);
        const HeadCase hc = make_case(K, extra, static_cast<std::uint64_t>(K + extra));
        const auto in = inputs_of(hc);
        const Reference ref = reference(hc, act);
        Mat w1 = Mat::Zero(hc.params.W1.rows(), hc.params.W1.cols());
        const HeadGradients hg = head_backward(hc.params, in, hc.targets, act, accumulate_into(w1));
        CHECK(hg.loss == doctest::Approx(ref.loss).epsilon(1e-12));
        CHECK(max_diff(head_logits(hc.params, in, act), ref.logits) < 1e-12);
        CHECK(max_diff(w1, ref.W1) < 1e-12);
        CHECK(max_diff(hg.b1, ref.b1) < 1e-12);
        CHECK(max_diff(hg.W2, ref.W2) < 1e-12);
        CHECK(max_diff(hg.b2, ref.b2) < 1e-12);
        for (std::size_t g = 0; g < in.size(); ++g) {
          CHECK(max_diff(hg.d_scaled[g], ref.d_scaled[g]) < 1e-11);
          if (extra > 0) CHECK(max_diff(hg.d_extra[g], ref.d_extra[g]) < 1e-12);
        }
      }
    }
  }
}

TEST_CASE("block size bounds") {
  CHECK(head_block_rows(1) == 1);
  CHECK(head_block_rows(100) == 100);
  CHECK(head_block_rows(2000) == 8);
  CHECK(head_block_rows(20000) == 1);
}

TEST_CASE("fused in-place update equals accumulate then step") {
  const HeadCase hc = make_case(150, 4, 7);
  const auto in = inputs_of(hc);
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adagrad}) {
    ClassifierParams fused = hc.params;
    Optimizer fused_opt(kind, 0.1);
    fused_opt.attach({&fused.W1});
    head_backward(fused, in, hc.targets, Activation::Logistic,
                  [&](Index row0, const Mat& block) { fused_opt.step_rows(0, row0, block); });

    ClassifierParams plain = hc.params;
    Optimizer plain_opt(kind, 0.1);
    plain_opt.attach({&plain.W1});
    Mat g = Mat::Zero(plain.W1.rows(), plain.W1.cols());
    head_backward(plain, in, hc.targets, Activation::Logistic, accumulate_into(g));
    plain_opt.step(0, g);
    CHECK(max_diff(fused.W1, plain.W1) < 1e-15);
  }
}

}  // TEST_SUITE

TEST_SUITE("optimizer") {

TEST_CASE("sgd step") {
  Mat p(1, 2);
  p << 1.0, -1.0;
  Optimizer opt(OptimizerKind::Sgd, 0.1);
  opt.attach({&p});
  Mat g(1, 2);
  g << 2.0, -4.0;
  opt.step(0, g);
  CHECK(p(0, 0) == doctest::Approx(0.8));
  CHECK(p(0, 1) == doctest::Approx(-0.6));
}

TEST_CASE("adagrad steps") {
  Mat p = Mat::Zero(1, 1);
  Optimizer opt(OptimizerKind::Adagrad, 0.5);
  opt.attach({&p});
  Mat g = Mat::Constant(1, 1, 3.0);
  opt.step(0, g);
  CHECK(p(0, 0) == doctest::Approx(-0.5 * 3.0 / std::sqrt(kAdagradInitialAccumulator + 9.0)));
  const double after_one = p(0, 0);
  g(0, 0) = 4.0;
  opt.step(0, g);
  CHECK(p(0, 0) == doctest::Approx(after_one - 0.5 * 4.0 / std::sqrt(kAdagradInitialAccumulator + 25.0)));
  CHECK(opt.accumulator(0)(0, 0) == doctest::Approx(25.0));
}

TEST_CASE("row steps equal a full step with zero elsewhere") {
  std::mt19937_64 rng(3);
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adagrad}) {
    Mat a = uniform_matrix(6, 3, 1.0, rng), b = a;
    const Mat g = uniform_matrix(2, 3, 1.0, rng);
    Optimizer oa(kind, 0.2), ob(kind, 0.2);
    oa.attach({&a});
    ob.attach({&b});
    oa.step_rows(0, 2, g);
    Mat full = Mat::Zero(6, 3);
    full.middleRows(2, 2) = g;
    ob.step(0, full);
    CHECK(max_diff(a, b) < 1e-15);
    CHECK_THROWS_AS(oa.step_rows(0, 5, g), ShapeError);
  }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  Mat p = Mat::Constant(2, 2, 0.3);
  const Mat before = p;
  for (OptimizerKind kind : {OptimizerKind::Sgd, OptimizerKind::Adagrad}) {
    Optimizer opt(kind, 0.0);
    opt.attach({&p});
    opt.step(0, Mat::Constant(2, 2, 5.0));
    CHECK(p == before);
  }
}

TEST_CASE("optimizer names") {
  CHECK(parse_optimizer("sgd") == OptimizerKind::Sgd);
  CHECK(parse_optimizer("adagrad") == OptimizerKind::Adagrad);
  CHECK_THROWS_AS(parse_optimizer("adam"), ConfigError);
  CHECK_THROWS_AS(Optimizer(OptimizerKind::Sgd, -1.0), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("model_io") {

TEST_CASE("save and load round-trip exactly") {
  TrainConfig cfg;
  cfg.K = 5;
  cfg.latent = 3;
  cfg.substructure.variant = Variant::LayerWise;
  cfg.substructure.hops = 2;
  cfg.activation = Activation::Tanh;
  cfg.layout.with_means = true;
  ModelState m = init_model(cfg, 4, 3, 17);
  Rng rng(1);
  m.landmarks.U = uniform_matrix(5, 3, 1.0, rng);
  m.landmarks.dof = 2.0;

  TempDir dir("model");
  save_model(m, dir.path() / "m.slim");
  ModelState back = load_model(dir.path() / "m.slim");
  CHECK(back.substructure.hops == 2);
  CHECK(back.substructure.variant == Variant::LayerWise);
  CHECK(back.activation == Activation::Tanh);
  CHECK(back.layout.with_means);
  CHECK_FALSE(back.layout.with_density);
  CHECK(back.node_types == 4);
  CHECK(back.class_count == 3);
  CHECK(back.landmarks.dof == 2.0);
  auto a = m.parameters();
  auto b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(*a[i].value == *b[i].value);
  }
}

TEST_CASE("foreign, truncated and future files are rejected") {
  TempDir dir("model-bad");
  testutil::write_text(dir.path() / "junk.slim", "not a model at all");
  CHECK_THROWS_AS(load_model(dir.path() / "junk.slim"), IoError);
  CHECK_THROWS_AS(load_model(dir.path() / "absent.slim"), IoError);

  TrainConfig cfg;
  cfg.K = 2;
  ModelState m = init_model(cfg, 2, 2, 1);
  m.landmarks.U = Mat::Zero(2, cfg.latent);
  save_model(m, dir.path() / "ok.slim");
  std::string bytes = testutil::read_text(dir.path() / "ok.slim");

  testutil::write_text(dir.path() / "short.slim", bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_model(dir.path() / "short.slim"), IoError);

  std::string future = bytes;
  future[8] = static_cast<char>(kModelFormatVersion + 1);
  testutil::write_text(dir.path() / "future.slim", future);
  try {
    load_model(dir.path() / "future.slim");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

}  // TEST_SUITE
