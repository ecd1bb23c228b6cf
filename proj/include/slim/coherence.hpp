#pragma once

#include "slim/landmarks.hpp"
#include "slim/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace slim {

// max over i ≠ j of |⟨μ_i, μ_j⟩| / (‖μ_i‖ ‖μ_j‖). Throws RangeError for
// fewer than two landmarks and NumericError naming a zero-norm landmark.
double mutual_coherence(const Mat& landmarks);

// Returned by recovery_support_bound for μ = 0.
inline constexpr double kUnboundedSupport = std::numeric_limits<double>::infinity();

// Largest support size with guaranteed recovery, (1 + 1/μ)/2.
double recovery_support_bound(double mu);

// Volume of the unit ball in d dimensions.
double unit_ball_volume(int d);
// 1 + d ln(d ln d); needs d ≥ 2.
double gamma_constant(int d);
// (3/2)(1 + ln d / d) γ_d V_d
double dimension_constant(int d);

struct BoundParams {
  int d = 2;
  double K = 2;
  double u_max = 1.0;
  double c_p = 1.0;
};

struct BoundValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool vacuous = false;  // the floor term vanished; `value` is NaN
  std::string note;
};

// 1 − 4 C_d C_p / (u_max² K^{1/d}) · (1/⌊(K/2)^{1/d}⌋ + 1), as written. Negative
// values are returned unchanged.
BoundValue theorem1_lower_bound(const BoundParams& bp);
// Same expression with C_d C_p / u_max² supplied as one number.
BoundValue theorem1_lower_bound_scaled(int d, double K, double cd_cp_over_umax2);

// ⌊x^{1/d}⌋ computed exactly for perfect powers.
long long floor_root(double x, int d);

// Mean distance (not squared) from each row of `points` to its nearest landmark.
double distortion(const Mat& points, const Mat& landmarks);

// Isotropic Gaussian mixture with equal weights.
struct MixtureSpec {
  Mat means;                      // components × d
  double covariance_scale = 0.25; // per-axis variance
  int points = 2048;              // samples per draw

  [[nodiscard]] int dimension() const { return static_cast<int>(means.cols()); }
  [[nodiscard]] int components() const { return static_cast<int>(means.rows()); }
  void validate() const;
};

MixtureSpec default_mixture();

// Reads a key = value file. Keys: dimension, components, means (flat list,
// row by row, comma or space separated), covariance_scale, points. Keys may
// sit at top level or under a [generator] section. A missing `means` places
// the components on a ring. Throws IoError / ConfigError.
MixtureSpec load_mixture(const std::filesystem::path& path);

Mat sample_mixture(const MixtureSpec& spec, Rng& rng);
double mixture_density(const MixtureSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x);

// (∫ p^{d/(d+1)})^{(d+1)/d}: grid quadrature for d ≤ 3, Monte Carlo beyond.
double estimate_distribution_factor(const MixtureSpec& spec, std::uint64_t seed = 0);

struct CoherenceRow {
  int K = 0;
  int seed = 0;
  double coherence = std::numeric_limits<double>::quiet_NaN();  // NaN for K = 1
  double distortion = 0.0;
  BoundValue bound;
};

struct CoherenceSweepOptions {
  std::vector<int> ks;
  int seeds = 10;
  std::uint64_t base_seed = 0;
  bool with_bound = true;
  KMeansOptions kmeans;
  int jobs = 1;
};

struct CoherenceSweep {
  std::vector<CoherenceRow> rows;  // ordered by K, then seed
  double c_p = 0.0;
  std::vector<int> ks;
  std::vector<double> mean_coherence;  // per K, NaN when K = 1
  std::vector<double> mean_distortion;
  double spearman = std::numeric_limits<double>::quiet_NaN();  // K vs mean coherence over K ≥ 2
  std::vector<std::string> warnings;
};

CoherenceSweep coherence_sweep(const MixtureSpec& spec, const CoherenceSweepOptions& options);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace slim
