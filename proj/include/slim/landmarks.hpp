#pragma once

#include "slim/grad.hpp"
#include "slim/matrix.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace slim {

struct LandmarkSet {
  Mat U;             // K × d, one landmark per row
  double dof = 1.0;  // Student-t degrees of freedom

  [[nodiscard]] Index count() const { return U.rows(); }
};

// Student-t soft assignment:
//   W(j,k) ∝ (1 + ‖H_j − μ_k‖²/α)^(−(α+1)/2), rows normalized to 1.
grad::Var assign(grad::Var h, grad::Var landmarks, double dof);
Mat assign(const Mat& h, const LandmarkSet& landmarks);

// Guard added to every column mass before dividing.
inline constexpr double kColumnMassGuard = 1e-12;

// Self-sharpened target: W̃(j,k) ∝ W(j,k)² / Σ_l W(l,k), rows normalized.
// A plain matrix, so no gradient flows through it.
Mat target_distribution(const Mat& w);

// KL(W̃ ‖ W), differentiable in W only.
grad::Var cluster_loss(grad::Var w, const Mat& target);
double cluster_loss(const Mat& w, const Mat& target);

// Σ_j min_k ‖H_j − μ_k‖² (hard-assignment distortion, diagnostic only).
double hard_distortion(const Mat& h, const Mat& landmarks);

struct KMeansOptions {
  int max_iterations = 100;
  double tolerance = 1e-6;  // stop once every centroid moves less than this
  int restarts = 10;        // independent k-means++ seedings; the lowest distortion wins
  double jitter = 1e-4;     // spread applied to duplicated centroids
};

struct KMeansResult {
  LandmarkSet landmarks;
  double distortion = 0.0;  // hard distortion of the returned centroids
  int iterations = 0;
  std::vector<std::string> warnings;
};

// k-means++ seeding followed by Lloyd iterations. Throws ConfigError when
// `points` has fewer rows than K.
KMeansResult init_landmarks(const Mat& points, int K, std::uint64_t seed, const KMeansOptions& options = {});

}  // namespace slim
