#pragma once

#include "slim/grad.hpp"
#include "slim/matrix.hpp"

namespace slim {

// Added to every landmark density before it is inverted.
inline constexpr double kDensityEpsilon = 1e-8;

struct PooledFeatures {
  Vec p;       // K, landmark densities
  Mat M;       // c × K, per-landmark mean node-type profile
  Mat C;       // K × K, interaction mass
  Mat C_norm;  // K × K, density-normalized interaction
};

// p = Wᵀ1
Vec density(const Mat& w);
// M = Xᵀ W diag(p + ε)⁻¹
Mat landmark_means(const Mat& x, const Mat& w, const Vec& p);
// C = Wᵀ A W. Throws ShapeError when A is not n × n for the n rows of W.
Mat interaction(const Mat& w, const Mat& adjacency);
// diag(p + ε)⁻¹ C diag(p + ε)⁻¹
Mat normalized_interaction(const Mat& c, const Vec& p);

PooledFeatures pool(const Mat& x, const Mat& w, const Mat& adjacency);

// Which pooled quantities feed the classifier. The default is C_norm alone.
struct FeatureLayout {
  bool with_density = false;  // append p
  bool with_means = false;    // append M, row-major

  [[nodiscard]] Index width(Index K, Index node_types) const;
  [[nodiscard]] Index extra_width(Index K, Index node_types) const { return width(K, node_types) - K * K; }
};

// Row-major flatten of C_norm, then p and M when the layout asks for them.
Vec graph_feature(const PooledFeatures& pf, const FeatureLayout& layout = {});

// Differentiable counterparts. `scaled` is Ŵ = W diag(p + ε)⁻¹, from which
// C_norm = Ŵᵀ A Ŵ and M = Xᵀ Ŵ.
grad::Var scaled_assignment(grad::Var w);
grad::Var normalized_interaction(grad::Var scaled, const Mat& adjacency);
grad::Var graph_feature(grad::Var w, const Mat& x, const Mat& adjacency, const FeatureLayout& layout = {});
// Only the p / M tail of the feature (1 × extra_width); empty layouts are an error.
grad::Var extra_feature(grad::Var w, grad::Var scaled, const Mat& x, const FeatureLayout& layout);

}  // namespace slim
