#include "slim/landmarks.hpp"

#include "slim/errors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace slim {

using grad::Tape;
using grad::Var;

Var assign(Var h, Var landmarks, double dof) {
  if (h.cols() != landmarks.cols()) {
    throw ShapeError("assign: embedding width " + std::to_string(h.cols()) + " but landmark width " +
                     std::to_string(landmarks.cols()));
  }
  return grad::normalize_rows(grad::student_t_kernel(grad::squared_distance_rows(h, landmarks), dof));
}

Mat assign(const Mat& h, const LandmarkSet& landmarks) {
  Tape tape;
  return assign(tape.constant(h), tape.constant(landmarks.U), landmarks.dof).value();
}

Mat target_distribution(const Mat& w) {
  const Eigen::RowVectorXd mass = w.colwise().sum().array() + kColumnMassGuard;
  Mat t = w.array().square().rowwise() / mass.array();
  t.array().colwise() /= t.rowwise().sum().array();
  return t;
}

Var cluster_loss(Var w, const Mat& target) {
  Tape& tape = w.tape();
  return grad::kl_div(tape.constant(target), w);
}

double cluster_loss(const Mat& w, const Mat& target) {
  Tape tape;
  return cluster_loss(tape.constant(w), target).scalar();
}

namespace {

// Squared distances from every point to every centroid via the Gram expansion.
Mat pairwise_squared(const Mat& points, const Mat& centroids) {
  const Eigen::VectorXd pn = points.rowwise().squaredNorm();
  const Eigen::RowVectorXd cn = centroids.rowwise().squaredNorm().transpose();
  Mat d = -2.0 * points * centroids.transpose();
  d.colwise() += pn;
  d.rowwise() += cn;
  return d.cwiseMax(0.0);
}

Index count_distinct_rows(const Mat& points) {
  std::vector<Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  auto row_less = [&](Index a, Index b) {
    for (Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  Index distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (row_less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

Mat seed_plus_plus(const Mat& points, int K, double jitter, Rng& rng) {
  const Index n = points.rows();
  Mat centroids(K, points.cols());
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  Eigen::VectorXd nearest = (points.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> noise(-jitter, jitter);
  for (int k = 1; k < K; ++k) {
    const double total = nearest.sum();
    if (total > 0.0) {
      double target = unit(rng) * total;
      Index chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        target -= nearest(i);
        if (target < 0.0 && nearest(i) > 0.0) {
          chosen = i;
          break;
        }
      }
      while (nearest(chosen) <= 0.0 && chosen > 0) --chosen;
      centroids.row(k) = points.row(chosen);
    } else {
      // Every point already coincides with a centroid: duplicate one and jitter it.
      centroids.row(k) = points.row(pick(rng));
      for (Index c = 0; c < points.cols(); ++c) centroids(k, c) += noise(rng);
    }
    nearest = nearest.cwiseMin((points.rowwise() - centroids.row(k)).rowwise().squaredNorm());
  }
  return centroids;
}

struct LloydOutcome {
  Mat centroids;
  int iterations = 0;
};

LloydOutcome lloyd(const Mat& points, Mat centroids, const KMeansOptions& options) {
  const Index n = points.rows();
  const Index K = centroids.rows();
  std::vector<Index> label(static_cast<std::size_t>(n), 0);
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    const Mat d = pairwise_squared(points, centroids);
    for (Index i = 0; i < n; ++i) d.row(i).minCoeff(&label[static_cast<std::size_t>(i)]);
    Mat sums = Mat::Zero(K, points.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
    for (Index i = 0; i < n; ++i) {
      sums.row(label[static_cast<std::size_t>(i)]) += points.row(i);
      counts(label[static_cast<std::size_t>(i)]) += 1.0;
    }
    double max_shift = 0.0;
    for (Index k = 0; k < K; ++k) {
      if (counts(k) == 0.0) continue;  // empty cluster keeps its centroid
      const Eigen::RowVectorXd updated = sums.row(k) / counts(k);
      max_shift = std::max(max_shift, (updated - centroids.row(k)).norm());
      centroids.row(k) = updated;
    }
    if (max_shift < options.tolerance) {
      ++iteration;
      break;
    }
  }
  return {std::move(centroids), iteration};
}

// Hartigan refinement: move single points between clusters while a move
// strictly lowers the within-cluster sum of squares. Lloyd fixed points often
// admit such moves; the result is a fixed point of both.
void hartigan(const Mat& points, Mat& centroids, const KMeansOptions& options) {
  const Index n = points.rows();
  const Index K = centroids.rows();
  std::vector<Index> label(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(K);
  const Mat d = pairwise_squared(points, centroids);
  for (Index i = 0; i < n; ++i) {
    d.row(i).minCoeff(&label[static_cast<std::size_t>(i)]);
    counts(label[static_cast<std::size_t>(i)]) += 1.0;
  }
  // Exact means of the current partition, so the move costs below are exact.
  Mat sums = Mat::Zero(K, points.cols());
  for (Index i = 0; i < n; ++i) sums.row(label[static_cast<std::size_t>(i)]) += points.row(i);
  for (Index k = 0; k < K; ++k)
    if (counts(k) > 0.0) centroids.row(k) = sums.row(k) / counts(k);

  for (int pass = 0; pass < options.max_iterations; ++pass) {
    bool moved = false;
    for (Index i = 0; i < n; ++i) {
      const Index a = label[static_cast<std::size_t>(i)];
      const double na = counts(a);
      if (na <= 1.0) continue;
      const double leave = na / (na - 1.0) * (points.row(i) - centroids.row(a)).squaredNorm();
      Index best = a;
      double join = leave;
      for (Index b = 0; b < K; ++b) {
        if (b == a) continue;
        const double nb = counts(b);
        const double cost = nb / (nb + 1.0) * (points.row(i) - centroids.row(b)).squaredNorm();
        if (cost < join) {
          join = cost;
          best = b;
        }
      }
      if (best == a || join >= leave * (1.0 - 1e-12)) continue;
      const double nb = counts(best);
      centroids.row(a) = (na * centroids.row(a) - points.row(i)) / (na - 1.0);
      centroids.row(best) = (nb * centroids.row(best) + points.row(i)) / (nb + 1.0);
      counts(a) -= 1.0;
      counts(best) += 1.0;
      label[static_cast<std::size_t>(i)] = best;
      moved = true;
    }
    if (!moved) break;
  }
}

}  // namespace

double hard_distortion(const Mat& h, const Mat& landmarks) {
  double total = 0.0;
  for (Index j = 0; j < h.rows(); ++j) {
    total += (landmarks.rowwise() - h.row(j)).rowwise().squaredNorm().minCoeff();
  }
  return total;
}

KMeansResult init_landmarks(const Mat& points, int K, std::uint64_t seed, const KMeansOptions& options) {
  if (K < 1) throw ConfigError("landmark count must be at least 1");
  if (points.rows() < K) {
    throw ConfigError("k-means needs at least K = " + std::to_string(K) + " points, got " +
                      std::to_string(points.rows()));
  }
  KMeansResult result;
  const Index distinct = count_distinct_rows(points);
  if (distinct < K) {
    result.warnings.push_back("only " + std::to_string(distinct) + " distinct points for " + std::to_string(K) +
                              " landmarks; duplicated centroids are jittered by " + std::to_string(options.jitter));
  }
  Rng rng(seed);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    LloydOutcome outcome = lloyd(points, seed_plus_plus(points, K, options.jitter, rng), options);
    hartigan(points, outcome.centroids, options);
    const double distortion = hard_distortion(points, outcome.centroids);
    if (distortion < best) {
      best = distortion;
      result.landmarks.U = std::move(outcome.centroids);
      result.iterations = outcome.iterations;
    }
  }
  result.distortion = best;
  return result;
}

}  // namespace slim
