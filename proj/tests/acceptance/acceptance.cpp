// Acceptance checks. Usage: slim_acceptance [criterion ...] (default: all).
// Prints one PASS/FAIL line per criterion and exits 1 if any failed.

#include "slim/coherence.hpp"
#include "slim/dataset.hpp"
#include "slim/embedding.hpp"
#include "slim/errors.hpp"
#include "slim/gradcheck_suite.hpp"
#include "slim/landmarks.hpp"
#include "slim/pooling.hpp"
#include "slim/substructure.hpp"
#include "slim/train.hpp"

#include "../support/oracles.hpp"
#include "../support/test_util.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

using namespace slim;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

DatasetBundle mutag() { return load_tu_dataset(testutil::data_dir(), "MUTAG"); }

CVResult mutag_cv(const DatasetBundle& b, int K, int epochs) {
  TrainConfig cfg;
  cfg.K = K;
  cfg.substructure.hops = 3;
  cfg.epochs = epochs;
  cfg.seed = 0;
  return cross_validate(b, cfg, make_folds(b, 10, 0), 1);
}

Outcome criterion1() {
  const DatasetBundle b = mutag();
  const auto t0 = Clock::now();
  const CVResult r = mutag_cv(b, 100, TrainConfig{}.epochs);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << std::fixed << std::setprecision(4) << "mean accuracy " << r.mean << " ± " << r.std << " at epoch "
    << r.selected_epoch << ", " << std::setprecision(1) << secs << " s on one thread";
  return {r.mean >= 0.85 && secs < 900.0, d.str()};
}

// Epoch budget for the K comparison; the K = 2000 classifier alone holds
// 4·10⁶ × 64 weights, so the full schedule is out of reach on one core.
constexpr int kBellEpochs = 20;

Outcome criterion2() {
  const DatasetBundle b = mutag();
  std::map<int, double> acc;
  std::ostringstream d;
  d << std::fixed << std::setprecision(4);
  for (int K : {2, 100, 2000}) {
    const auto t0 = Clock::now();
    acc[K] = mutag_cv(b, K, kBellEpochs).mean;
    d << "K=" << K << ": " << acc[K] << " (" << std::setprecision(0) << seconds_since(t0) << " s" << std::setprecision(4)
      << ")  ";
  }
  d << kBellEpochs << " epochs, 10 folds, seed 0";
  return {acc[100] > acc[2] && acc[100] > acc[2000], d.str()};
}

Outcome criterion3() {
  CoherenceSweepOptions opt;
  for (int k = 2; k <= 512; k *= 2) opt.ks.push_back(k);
  opt.seeds = 10;
  opt.with_bound = false;
  const CoherenceSweep s = coherence_sweep(default_mixture(), opt);
  bool monotone = true;
  for (std::size_t i = 1; i < s.mean_distortion.size(); ++i) monotone = monotone && s.mean_distortion[i] <= s.mean_distortion[i - 1];
  std::ostringstream d;
  d << std::setprecision(4) << "spearman " << s.spearman << ", coherence " << s.mean_coherence.front() << " -> "
    << s.mean_coherence.back() << ", distortion " << s.mean_distortion.front() << " -> " << s.mean_distortion.back()
    << (monotone ? " (non-increasing)" : " (NOT monotone)");
  return {s.spearman >= 0.9 && monotone, d.str()};
}

Outcome criterion4() {
  const auto reports = run_gradcheck_suite(0, 1e-5, 1e-4);
  double worst = 0.0;
  std::string worst_name;
  int failed = 0;
  for (const auto& r : reports) {
    if (!r.passed) ++failed;
    if (r.max_relative_error > worst) {
      worst = r.max_relative_error;
      worst_name = r.op_name;
    }
  }
  std::ostringstream d;
  d << reports.size() << " checks, " << failed << " failed, worst " << std::setprecision(3) << worst << " ("
    << worst_name << ")";
  return {failed == 0 && !reports.empty(), d.str()};
}

Outcome criterion5() {
  std::mt19937_64 rng(5);
  Rng init(55);
  const int c = 4;
  SubstructureConfig sub;
  sub.hops = 2;
  const EncoderParams enc = EncoderParams::init(c, c, 3, init);
  LandmarkSet lm{uniform_matrix(5, 3, 0.5, init), 1.0};
  lm.U.array() += 0.5;
  std::uniform_int_distribution<int> size(1, 25), label(0, c - 1);

  auto run = [&](const Graph& g, Mat* w_out) {
    const Mat x = one_hot_features(g, c);
    const Mat w = assign(encode(build_substructures(g, x, sub), enc), lm);
    if (w_out) *w_out = w;
    return pool(x, w, g.adjacency);
  };
  double perm_err = 0.0, p_err = 0.0, c_err = 0.0, row_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Graph g;
    g.adjacency = oracle::random_graph(size(rng), 0.2, rng, false);
    for (Index v = 0; v < g.node_count(); ++v) g.node_labels.push_back(label(rng));
    Mat w;
    const PooledFeatures pf = run(g, &w);
    row_err = std::max(row_err, (w.rowwise().sum().array() - 1.0).abs().maxCoeff());
    p_err = std::max(p_err, std::abs(pf.p.sum() - static_cast<double>(g.node_count())));
    c_err = std::max(c_err, std::abs(pf.C.sum() - 2.0 * static_cast<double>(g.edge_count())));

    const Index n = g.node_count();
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Graph h;
    h.adjacency = Mat(n, n);
    for (Index i = 0; i < n; ++i) {
      h.node_labels.push_back(g.node_labels[static_cast<std::size_t>(perm[i])]);
      for (Index j = 0; j < n; ++j) h.adjacency(i, j) = g.adjacency(perm[i], perm[j]);
    }
    const PooledFeatures q = run(h, nullptr);
    perm_err = std::max({perm_err, (pf.p - q.p).cwiseAbs().maxCoeff(), (pf.M - q.M).cwiseAbs().maxCoeff(),
                         (pf.C - q.C).cwiseAbs().maxCoeff(), (pf.C_norm - q.C_norm).cwiseAbs().maxCoeff()});
  }
  std::ostringstream d;
  d << std::setprecision(3) << "100 graphs: permutation " << perm_err << ", |sum p - n| " << p_err << ", |sum C - 2|E|| "
    << c_err << ", |row sum W - 1| " << row_err;
  return {perm_err <= 1e-6 && p_err <= 1e-9 * 25 && c_err <= 1e-9 * 1200 && row_err <= 1e-9, d.str()};
}

Outcome criterion6() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.6);
  std::uniform_int_distribution<int> size(4, 12), dim(1, 3);
  std::uniform_real_distribution<double> sep(1.5, 6.0);
  double worst = 0.0;
  const int instances = 200;
  for (int t = 0; t < instances; ++t) {
    const int n = size(rng), d = dim(rng);
    const double s = sep(rng);
    Mat pts(n, d);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) pts(i, k) = noise(rng) + (i % 2 == 1 && k == 0 ? s : 0.0);
    const KMeansResult r = init_landmarks(pts, 2, static_cast<std::uint64_t>(t));
    worst = std::max(worst, std::abs(r.distortion - oracle::exhaustive_two_means(pts)));
  }
  std::ostringstream d;
  d << instances << " instances of 4..12 points, worst gap to the exhaustive optimum " << std::setprecision(3) << worst;
  return {worst <= 1e-6, d.str()};
}

Outcome criterion7() {
  const DatasetBundle b = mutag();
  testutil::TempDir dir("acceptance-tu");
  write_tu_dataset(b, dir.path());
  const DatasetBundle back = load_tu_dataset(dir.path(), "MUTAG");
  bool same = back.graphs.size() == b.graphs.size() && back.class_count == b.class_count &&
              back.node_label_count == b.node_label_count;
  for (std::size_t i = 0; same && i < b.graphs.size(); ++i) {
    same = b.graphs[i].adjacency == back.graphs[i].adjacency && b.graphs[i].node_labels == back.graphs[i].node_labels &&
           b.graphs[i].class_label == back.graphs[i].class_label;
  }
  std::ostringstream d;
  d << b.graphs.size() << " graphs, " << b.class_count << " classes, " << b.node_label_count << " node labels, round-trip "
    << (same ? "lossless" : "DIFFERS");
  return {b.graphs.size() == 188 && b.class_count == 2 && b.node_label_count == 7 && same, d.str()};
}

Outcome criterion8() {
  const double v2 = unit_ball_volume(2), v3 = unit_ball_volume(3);
  const double bound = theorem1_lower_bound_scaled(2, 8, 1.0).value;
  const double support = recovery_support_bound(0.2);
  std::ostringstream d;
  d << std::setprecision(15) << "V(2)=" << v2 << " V(3)=" << v3 << std::setprecision(6) << " bound=" << bound
    << " support(0.2)=" << support;
  const bool ok = std::abs(v2 - std::numbers::pi) <= 1e-12 && std::abs(v3 - 4.0 * std::numbers::pi / 3.0) <= 1e-12 &&
                  std::abs(bound - -1.1213) <= 5e-5 && std::abs(support - 3.0) <= 1e-12;
  return {ok, d.str()};
}

const std::map<int, std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::map<int, std::pair<std::string, std::function<Outcome()>>> all = {
      {1, {"MUTAG accuracy at K=100 within the time budget", criterion1}},
      {2, {"accuracy peaks at intermediate K", criterion2}},
      {3, {"coherence rises and distortion falls with K", criterion3}},
      {4, {"finite-difference gradient checks", criterion4}},
      {5, {"pooling invariants", criterion5}},
      {6, {"k-means matches the exhaustive optimum for K=2", criterion6}},
      {7, {"MUTAG statistics and TU round-trip", criterion7}},
      {8, {"closed-form spot checks", criterion8}},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::stoi(argv[i]));
  if (wanted.empty())
    for (const auto& [id, c] : criteria()) wanted.push_back(id);

  bool all_ok = true;
  for (int id : wanted) {
    const auto it = criteria().find(id);
    if (it == criteria().end()) {
      std::cout << "FAIL criterion " << id << ": unknown criterion\n";
      all_ok = false;
      continue;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << id << " (" << it->second.first << "): " << o.detail
              << std::endl;
    all_ok = all_ok && o.passed;
  }
  return all_ok ? 0 : 1;
}
