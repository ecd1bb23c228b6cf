#include "slim/pooling.hpp"

#include "slim/errors.hpp"

namespace slim {

using grad::Var;

Vec density(const Mat& w) { return w.colwise().sum().transpose(); }

Mat landmark_means(const Mat& x, const Mat& w, const Vec& p) {
  if (x.rows() != w.rows()) throw ShapeError("landmark_means: X and W row counts differ");
  Mat m = x.transpose() * w;
  m.array().rowwise() /= (p.array() + kDensityEpsilon).transpose();
  return m;
}

Mat interaction(const Mat& w, const Mat& adjacency) {
  if (adjacency.rows() != w.rows() || adjacency.cols() != w.rows()) {
    throw ShapeError("interaction: adjacency is " + std::to_string(adjacency.rows()) + "x" +
                     std::to_string(adjacency.cols()) + " but W has " + std::to_string(w.rows()) + " rows");
  }
  return w.transpose() * adjacency * w;
}

Mat normalized_interaction(const Mat& c, const Vec& p) {
  const Vec inv = (p.array() + kDensityEpsilon).inverse();
  return inv.asDiagonal() * c * inv.asDiagonal();
}

PooledFeatures pool(const Mat& x, const Mat& w, const Mat& adjacency) {
  PooledFeatures pf;
  pf.p = density(w);
  pf.M = landmark_means(x, w, pf.p);
  pf.C = interaction(w, adjacency);
  pf.C_norm = normalized_interaction(pf.C, pf.p);
  return pf;
}

Index FeatureLayout::width(Index K, Index node_types) const {
  return K * K + (with_density ? K : 0) + (with_means ? node_types * K : 0);
}

Vec graph_feature(const PooledFeatures& pf, const FeatureLayout& layout) {
  const Index K = pf.C_norm.rows();
  Vec v(layout.width(K, pf.M.rows()));
  Index at = 0;
  for (Index a = 0; a < K; ++a) {
    for (Index b = 0; b < K; ++b) v(at++) = pf.C_norm(a, b);
  }
  if (layout.with_density) {
    v.segment(at, K) = pf.p;
    at += K;
  }
  if (layout.with_means) {
    for (Index r = 0; r < pf.M.rows(); ++r) {
      for (Index k = 0; k < K; ++k) v(at++) = pf.M(r, k);
    }
  }
  return v;
}

Var scaled_assignment(Var w) { return grad::scale_columns_inverse(w, grad::column_sums(w), kDensityEpsilon); }

Var normalized_interaction(Var scaled, const Mat& adjacency) {
  if (adjacency.rows() != scaled.rows() || adjacency.cols() != scaled.rows()) {
    throw ShapeError("normalized_interaction: adjacency does not match W");
  }
  return grad::sandwich(scaled, adjacency);
}

Var extra_feature(Var w, Var scaled, const Mat& x, const FeatureLayout& layout) {
  grad::Tape& tape = w.tape();
  Var out;
  bool have = false;
  auto append = [&](Var piece) {
    out = have ? grad::concat_cols(out, piece) : piece;
    have = true;
  };
  if (layout.with_density) append(grad::column_sums(w));
  if (layout.with_means) {
    if (x.rows() != w.rows()) throw ShapeError("extra_feature: X and W row counts differ");
    append(grad::flatten(grad::matmul(tape.constant(x.transpose()), scaled)));
  }
  if (!have) throw ConfigError("extra_feature: layout has no density or means block");
  return out;
}

Var graph_feature(Var w, const Mat& x, const Mat& adjacency, const FeatureLayout& layout) {
  Var scaled = scaled_assignment(w);
  Var feature = grad::flatten(normalized_interaction(scaled, adjacency));
  if (layout.with_density || layout.with_means) {
    feature = grad::concat_cols(feature, extra_feature(w, scaled, x, layout));
  }
  return feature;
}

}  // namespace slim
