#include "doctest.h"

#include "slim/dataset.hpp"
#include "slim/embedding.hpp"
#include "slim/errors.hpp"
#include "slim/landmarks.hpp"
#include "slim/pooling.hpp"
#include "slim/substructure.hpp"

#include "../support/oracles.hpp"

#include <algorithm>
#include <numeric>

using namespace slim;

namespace {

struct Pipeline {
  EncoderParams enc;
  LandmarkSet landmarks;
  SubstructureConfig sub;
  int c = 3;
};

PooledFeatures run(const Pipeline& p, const Graph& g, Mat* w_out = nullptr) {
  const Mat x = one_hot_features(g, p.c);
  const Mat z = build_substructures(g, x, p.sub);
  const Mat w = assign(encode(z, p.enc), p.landmarks);
  if (w_out) *w_out = w;
  return pool(x, w, g.adjacency);
}

Graph permuted(const Graph& g, const std::vector<Index>& perm) {
  const Index n = g.node_count();
  Graph out;
  out.adjacency = Mat(n, n);
  out.node_labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    out.node_labels[static_cast<std::size_t>(i)] = g.node_labels[static_cast<std::size_t>(perm[i])];
    for (Index j = 0; j < n; ++j) out.adjacency(i, j) = g.adjacency(perm[i], perm[j]);
  }
  return out;
}

}  // namespace

TEST_SUITE("pooling") {

TEST_CASE("triangle with one landmark") {
  const Mat a = Mat::Ones(3, 3) - Mat::Identity(3, 3);
  Mat x = Mat::Zero(3, 2);
  x.col(0).setOnes();
  const PooledFeatures pf = pool(x, Mat::Ones(3, 1), a);
  CHECK(pf.p(0) == doctest::Approx(3.0));
  CHECK(pf.C(0, 0) == doctest::Approx(6.0));
  CHECK(pf.C_norm(0, 0) == doctest::Approx(6.0 / 9.0));
  CHECK(pf.M(0, 0) == doctest::Approx(1.0));
  CHECK(pf.M(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("hard assignment of an edge") {
  Mat a(2, 2);
  a << 0, 1, 1, 0;
  const PooledFeatures pf = pool(Mat::Identity(2, 2), Mat::Identity(2, 2), a);
  CHECK(pf.C == a);
  CHECK(pf.C_norm(0, 1) == doctest::Approx(1.0 / ((1 + kDensityEpsilon) * (1 + kDensityEpsilon))));
  CHECK(pf.C_norm(0, 0) == 0.0);
}

TEST_CASE("an empty landmark column stays finite") {
  Mat w = Mat::Zero(3, 2);
  w.col(0).setOnes();
  const Mat a = Mat::Ones(3, 3) - Mat::Identity(3, 3);
  const PooledFeatures pf = pool(Mat::Ones(3, 1), w, a);
  CHECK(pf.p(1) == 0.0);
  CHECK(pf.C_norm.allFinite());
  CHECK(pf.C_norm(1, 1) == 0.0);
  CHECK(pf.M.allFinite());
}

TEST_CASE("plain pooling matches the loop oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Index n = 1 + trial % 10, K = 1 + trial % 6;
    const Mat a = oracle::random_graph(n, 0.4, rng);
    const Mat w = assign(uniform_matrix(n, 2, 1.0, rng), LandmarkSet{uniform_matrix(K, 2, 1.0, rng), 1.0});
    Mat x = uniform_matrix(n, 3, 1.0, rng).cwiseAbs();
    const PooledFeatures pf = pool(x, w, a);
    const oracle::Pooled ref = oracle::pool(x, w, a);
    for (Index k = 0; k < K; ++k) CHECK(pf.p(k) == doctest::Approx(ref.p[static_cast<std::size_t>(k)]));
    CHECK((pf.M - ref.M).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pf.C - ref.C).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((pf.C_norm - ref.C_norm).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("invariants on random graphs") {
  std::mt19937_64 rng(32);
  Rng init(33);
  Pipeline p;
  p.sub.hops = 2;
  p.enc = EncoderParams::init(p.c, p.c, 4, init);
  p.landmarks = LandmarkSet{uniform_matrix(6, 4, 0.5, init), 1.0};
  p.landmarks.U.array() += 0.5;
  std::uniform_int_distribution<int> size(1, 20), label(0, p.c - 1);
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    g.adjacency = oracle::random_graph(size(rng), 0.25, rng, false);
    for (Index v = 0; v < g.node_count(); ++v) g.node_labels.push_back(label(rng));
    Mat w;
    const PooledFeatures pf = run(p, g, &w);
    const double n = static_cast<double>(g.node_count());
    CHECK((w.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-9);
    CHECK(std::abs(pf.p.sum() - n) <= 1e-9 * n);
    CHECK(std::abs(pf.C.sum() - 2.0 * static_cast<double>(g.edge_count())) <= 1e-9 * (1.0 + pf.C.sum()));

    std::vector<Index> perm(static_cast<std::size_t>(g.node_count()));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const PooledFeatures q = run(p, permuted(g, perm));
    CHECK((pf.p - q.p).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pf.M - q.M).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pf.C - q.C).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((pf.C_norm - q.C_norm).cwiseAbs().maxCoeff() <= 1e-6);
  }
}

TEST_CASE("feature layout and flattening") {
  FeatureLayout layout;
  CHECK(layout.width(4, 3) == 16);
  layout.with_density = true;
  CHECK(layout.width(4, 3) == 20);
  layout.with_means = true;
  CHECK(layout.width(4, 3) == 32);
  CHECK(layout.extra_width(4, 3) == 16);

  PooledFeatures pf;
  pf.p = Vec::LinSpaced(2, 10, 11);
  pf.C_norm.resize(2, 2);
  pf.C_norm << 1, 2, 3, 4;
  pf.M.resize(1, 2);
  pf.M << 20, 21;
  const Vec f = graph_feature(pf, layout);
  Vec expect(8);
  expect << 1, 2, 3, 4, 10, 11, 20, 21;
  CHECK(f == expect);
}

TEST_CASE("differentiable feature equals the plain one") {
  std::mt19937_64 rng(34);
  const Mat a = oracle::random_graph(7, 0.4, rng);
  Mat x = Mat::Zero(7, 3);
  for (Index i = 0; i < 7; ++i) x(i, i % 3) = 1.0;
  const Mat w = assign(uniform_matrix(7, 2, 1.0, rng), LandmarkSet{uniform_matrix(4, 2, 1.0, rng), 1.0});
  FeatureLayout layout{true, true};
  grad::Tape tape;
  const Mat got = graph_feature(tape.constant(w), x, a, layout).value();
  const Vec expect = graph_feature(pool(x, w, a), layout);
  REQUIRE(got.size() == expect.size());
  for (Index i = 0; i < expect.size(); ++i) CHECK(got(0, i) == doctest::Approx(expect(i)).epsilon(1e-12));
}

TEST_CASE("interaction shape mismatch") {
  CHECK_THROWS_AS(interaction(Mat::Ones(3, 2), Mat::Zero(2, 2)), ShapeError);
}

}  // TEST_SUITE
