#include "slim/coherence.hpp"

#include "slim/config.hpp"
#include "slim/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

namespace slim {

double mutual_coherence(const Mat& landmarks) {
  if (landmarks.rows() < 2) throw RangeError("mutual coherence needs at least two landmarks");
  const Eigen::VectorXd norms = landmarks.rowwise().norm();
  for (Index i = 0; i < norms.size(); ++i) {
    if (norms(i) == 0.0) throw NumericError("landmark " + std::to_string(i) + " has zero norm");
  }
  const Mat unit = norms.cwiseInverse().asDiagonal() * landmarks;
  Mat gram = (unit * unit.transpose()).cwiseAbs();
  gram.diagonal().setZero();
  return std::min(1.0, gram.maxCoeff());
}

double recovery_support_bound(double mu) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw RangeError("coherence must lie in [0, 1]");
  if (mu == 0.0) return kUnboundedSupport;
  return (1.0 + 1.0 / mu) / 2.0;
}

double unit_ball_volume(int d) {
  if (d < 1) throw RangeError("dimension must be at least 1");
  return 2.0 * std::pow(std::tgamma(0.5), d) / (d * std::tgamma(d / 2.0));
}

double gamma_constant(int d) {
  if (d < 2) throw ConfigError("the coherence bound needs dimension d >= 2");
  return 1.0 + d * std::log(d * std::log(static_cast<double>(d)));
}

double dimension_constant(int d) {
  return 1.5 * (1.0 + std::log(static_cast<double>(d)) / d) * gamma_constant(d) * unit_ball_volume(d);
}

long long floor_root(double x, int d) {
  if (d < 1) throw RangeError("root order must be at least 1");
  if (!(x >= 1.0)) return 0;
  auto power = [d](long long r) { return std::pow(static_cast<double>(r), d); };
  auto r = static_cast<long long>(std::floor(std::pow(x, 1.0 / d)));
  while (power(r + 1) <= x) ++r;
  while (r > 0 && power(r) > x) --r;
  return r;
}

BoundValue theorem1_lower_bound_scaled(int d, double K, double cd_cp_over_umax2) {
  if (d < 2) throw ConfigError("the coherence bound needs dimension d >= 2");
  if (!(K >= 2.0)) throw RangeError("the coherence bound needs K >= 2");
  BoundValue out;
  const long long f = floor_root(K / 2.0, d);
  if (f == 0) {
    out.vacuous = true;
    out.note = "floor((K/2)^(1/d)) is 0, bound undefined";
    return out;
  }
  out.value = 1.0 - 4.0 * cd_cp_over_umax2 / std::pow(K, 1.0 / d) * (1.0 / static_cast<double>(f) + 1.0);
  if (out.value < 0.0) out.note = "negative, bound is vacuous at this K";
  return out;
}

BoundValue theorem1_lower_bound(const BoundParams& bp) {
  if (!(bp.u_max > 0.0)) throw RangeError("u_max must be positive");
  if (!(bp.c_p > 0.0)) throw RangeError("C_p must be positive");
  return theorem1_lower_bound_scaled(bp.d, bp.K, dimension_constant(bp.d) * bp.c_p / (bp.u_max * bp.u_max));
}

double distortion(const Mat& points, const Mat& landmarks) {
  if (points.rows() == 0) return 0.0;
  if (landmarks.rows() == 0 || landmarks.cols() != points.cols()) throw ShapeError("distortion: landmark shape");
  double total = 0.0;
  for (Index j = 0; j < points.rows(); ++j) {
    total += std::sqrt((landmarks.rowwise() - points.row(j)).rowwise().squaredNorm().minCoeff());
  }
  return total / static_cast<double>(points.rows());
}

void MixtureSpec::validate() const {
  if (means.rows() < 1 || means.cols() < 1) throw ConfigError("mixture needs at least one component and dimension");
  if (!(covariance_scale > 0.0)) throw ConfigError("covariance_scale must be positive");
  if (points < 1) throw ConfigError("points per draw must be positive");
}

namespace {

// Components evenly spaced on a circle of radius 3 around (4, 4, ...), so
// that no centroid sits near the origin.
Mat ring_means(int components, int dimension) {
  Mat m = Mat::Constant(components, dimension, 4.0);
  for (int j = 0; j < components; ++j) {
    const double angle = 2.0 * std::numbers::pi * j / components;
    m(j, 0) += 3.0 * std::cos(angle);
    if (dimension > 1) m(j, 1) += 3.0 * std::sin(angle);
  }
  return m;
}

}  // namespace

MixtureSpec default_mixture() {
  MixtureSpec s;
  s.means = ring_means(4, 2);
  return s;
}

MixtureSpec load_mixture(const std::filesystem::path& path) {
  int dimension = 0;
  int components = 0;
  std::vector<double> means;
  MixtureSpec spec = default_mixture();
  auto as_int = [&](const ConfigEntry& e) {
    const std::vector<int> v = parse_int_list(e.value);
    if (v.size() != 1) throw ConfigError(path.string() + ": " + e.key + " must be a single positive integer");
    return v.front();
  };
  for (const ConfigEntry& e : load_config(path)) {
    if (!e.section.empty() && e.section != "generator") continue;
    if (e.key == "dimension") {
      dimension = as_int(e);
    } else if (e.key == "components") {
      components = as_int(e);
    } else if (e.key == "means") {
      means = parse_number_list(e.value);
    } else if (e.key == "covariance_scale") {
      const std::vector<double> v = parse_number_list(e.value);
      if (v.size() != 1) throw ConfigError(path.string() + ": covariance_scale must be one number");
      spec.covariance_scale = v.front();
    } else if (e.key == "points") {
      spec.points = as_int(e);
    } else {
      throw ConfigError(path.string() + ": unknown generator key '" + e.key + "'");
    }
  }
  if (!means.empty()) {
    if (dimension == 0 && components == 0) dimension = 2;
    if (dimension == 0) dimension = static_cast<int>(means.size()) / components;
    if (components == 0) components = static_cast<int>(means.size()) / dimension;
    if (static_cast<std::size_t>(dimension) * static_cast<std::size_t>(components) != means.size()) {
      throw ConfigError(path.string() + ": means has " + std::to_string(means.size()) + " values, expected " +
                        std::to_string(dimension * components));
    }
    spec.means = Eigen::Map<const Mat>(means.data(), components, dimension);
  } else if (dimension != 0 || components != 0) {
    spec.means = ring_means(components == 0 ? 4 : components, dimension == 0 ? 2 : dimension);
  }
  spec.validate();
  return spec;
}

Mat sample_mixture(const MixtureSpec& spec, Rng& rng) {
  spec.validate();
  std::uniform_int_distribution<int> pick(0, spec.components() - 1);
  std::normal_distribution<double> normal(0.0, std::sqrt(spec.covariance_scale));
  Mat out(spec.points, spec.dimension());
  for (Index i = 0; i < out.rows(); ++i) {
    const int c = pick(rng);
    for (Index j = 0; j < out.cols(); ++j) out(i, j) = spec.means(c, j) + normal(rng);
  }
  return out;
}

double mixture_density(const MixtureSpec& spec, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double s = spec.covariance_scale;
  const double norm = std::pow(2.0 * std::numbers::pi * s, -spec.dimension() / 2.0);
  double total = 0.0;
  for (Index c = 0; c < spec.means.rows(); ++c) total += std::exp(-(x - spec.means.row(c)).squaredNorm() / (2.0 * s));
  return norm * total / spec.components();
}

double estimate_distribution_factor(const MixtureSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int d = spec.dimension();
  const double a = d / (d + 1.0);
  double integral = 0.0;
  if (d <= 3) {
    const int per_axis = d == 1 ? 4000 : (d == 2 ? 600 : 120);
    const double reach = 8.0 * std::sqrt(spec.covariance_scale);
    const Eigen::RowVectorXd lo = spec.means.colwise().minCoeff().array() - reach;
    const Eigen::RowVectorXd hi = spec.means.colwise().maxCoeff().array() + reach;
    const Eigen::RowVectorXd h = (hi - lo) / per_axis;
    const double cell = h.prod();
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    Eigen::RowVectorXd x(d);
    for (;;) {
      for (int j = 0; j < d; ++j) x(j) = lo(j) + (idx[static_cast<std::size_t>(j)] + 0.5) * h(j);
      integral += std::pow(mixture_density(spec, x), a) * cell;
      int j = 0;
      while (j < d && ++idx[static_cast<std::size_t>(j)] == per_axis) idx[static_cast<std::size_t>(j++)] = 0;
      if (j == d) break;
    }
  } else {
    // ∫ p^a = E_p[p^(a−1)]
    MixtureSpec draw = spec;
    draw.points = 200000;
    Rng rng(seed);
    const Mat samples = sample_mixture(draw, rng);
    for (Index i = 0; i < samples.rows(); ++i) integral += std::pow(mixture_density(spec, samples.row(i)), a - 1.0);
    integral /= static_cast<double>(samples.rows());
  }
  return std::pow(integral, 1.0 / a);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

CoherenceSweep coherence_sweep(const MixtureSpec& spec, const CoherenceSweepOptions& options) {
  spec.validate();
  if (options.ks.empty()) throw ConfigError("K list is empty");
  if (options.seeds < 1) throw ConfigError("seed count must be at least 1");
  if (options.with_bound && spec.dimension() < 2) throw ConfigError("the coherence bound needs dimension d >= 2");

  CoherenceSweep out;
  out.ks = options.ks;
  std::sort(out.ks.begin(), out.ks.end());
  out.ks.erase(std::unique(out.ks.begin(), out.ks.end()), out.ks.end());
  if (out.ks.size() != options.ks.size()) out.warnings.push_back("duplicate K values removed");
  if (out.ks.front() < 1) throw ConfigError("K values must be positive");
  if (out.ks.back() > spec.points) {
    throw ConfigError("K = " + std::to_string(out.ks.back()) + " exceeds the " + std::to_string(spec.points) +
                      " points per draw");
  }
  if (options.with_bound) out.c_p = estimate_distribution_factor(spec, options.base_seed);

  std::vector<Mat> data;
  for (int s = 0; s < options.seeds; ++s) {
    Rng rng(derive_seed(options.base_seed, static_cast<std::uint64_t>(s)));
    data.push_back(sample_mixture(spec, rng));
  }

  const std::size_t cells = out.ks.size() * static_cast<std::size_t>(options.seeds);
  out.rows.resize(cells);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next++;
      if (c >= cells) return;
      try {
        const int K = out.ks[c / static_cast<std::size_t>(options.seeds)];
        const int s = static_cast<int>(c % static_cast<std::size_t>(options.seeds));
        const std::uint64_t seed = derive_seed(derive_seed(options.base_seed, static_cast<std::uint64_t>(s)),
                                               static_cast<std::uint64_t>(K));
        KMeansResult km = init_landmarks(data[static_cast<std::size_t>(s)], K, seed, options.kmeans);
        CoherenceRow& row = out.rows[c];
        row.K = K;
        row.seed = s;
        row.distortion = distortion(data[static_cast<std::size_t>(s)], km.landmarks.U);
        if (K >= 2) {
          row.coherence = mutual_coherence(km.landmarks.U);
          if (options.with_bound) {
            const double u_max = km.landmarks.U.rowwise().norm().maxCoeff();
            row.bound = theorem1_lower_bound({spec.dimension(), static_cast<double>(K), u_max, out.c_p});
          }
        }
        if (!km.warnings.empty()) {
          std::lock_guard<std::mutex> lock(mu);
          for (std::string& w : km.warnings) out.warnings.push_back("K=" + std::to_string(K) + ": " + w);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(options.jobs, 1, static_cast<int>(cells));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> kx, cy;
  for (std::size_t k = 0; k < out.ks.size(); ++k) {
    double coh = 0.0, dist = 0.0;
    for (int s = 0; s < options.seeds; ++s) {
      const CoherenceRow& r = out.rows[k * static_cast<std::size_t>(options.seeds) + static_cast<std::size_t>(s)];
      coh += r.coherence;
      dist += r.distortion;
    }
    coh /= options.seeds;
    dist /= options.seeds;
    out.mean_coherence.push_back(coh);
    out.mean_distortion.push_back(dist);
    if (out.ks[k] >= 2) {
      kx.push_back(out.ks[k]);
      cy.push_back(coh);
    }
  }
  out.spearman = spearman(kx, cy);
  return out;
}

}  // namespace slim
