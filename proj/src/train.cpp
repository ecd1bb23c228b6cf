#include "slim/train.hpp"

#include "slim/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace slim {

using grad::Tape;
using grad::Var;

HiddenWidth parse_hidden_width(std::string_view name) {
  if (name == "D") return HiddenWidth::SameAsInput;
  if (name == "D/2") return HiddenWidth::Half;
  if (name == "2D") return HiddenWidth::Double;
  throw ConfigError("unknown encoder hidden width '" + std::string(name) + "' (expected D, D/2 or 2D)");
}

std::string to_string(HiddenWidth w) {
  switch (w) {
    case HiddenWidth::Half:
      return "D/2";
    case HiddenWidth::Double:
      return "2D";
    default:
      return "D";
  }
}

Index hidden_width(HiddenWidth w, Index input_width) {
  switch (w) {
    case HiddenWidth::Half:
      return std::max<Index>(1, input_width / 2);
    case HiddenWidth::Double:
      return 2 * input_width;
    default:
      return input_width;
  }
}

void TrainConfig::validate() const {
  substructure.validate();
  if (K < 1) throw ConfigError("K must be at least 1");
  if (latent < 1) throw ConfigError("latent dimension must be at least 1");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be finite and >= 0");
  if (!(lambda_embed >= 0.0) || !std::isfinite(lambda_embed)) throw ConfigError("lambda_embed must be finite and >= 0");
  if (!(lambda_cluster >= 0.0) || !std::isfinite(lambda_cluster)) {
    throw ConfigError("lambda_cluster must be finite and >= 0");
  }
  if (!(dof > 0.0)) throw ConfigError("Student-t degrees of freedom must be positive");
  if (kmeans.max_iterations < 1 || kmeans.restarts < 1) throw ConfigError("k-means needs iterations and restarts >= 1");
}

std::vector<PreparedGraph> prepare_graphs(const DatasetBundle& bundle, const SubstructureConfig& cfg) {
  cfg.validate();
  std::vector<PreparedGraph> out;
  out.reserve(bundle.graphs.size());
  for (std::size_t i = 0; i < bundle.graphs.size(); ++i) {
    const Graph& g = bundle.graphs[i];
    PreparedGraph p;
    p.index = i;
    p.adjacency = g.adjacency;
    p.x = one_hot_features(g, bundle.node_label_count);
    p.z = build_substructures(g, p.x, cfg);
    p.label = g.class_label;
    out.push_back(std::move(p));
  }
  return out;
}

ModelState init_model(const TrainConfig& cfg, int node_types, int class_count, std::uint64_t seed) {
  if (node_types < 1 || class_count < 1) throw ConfigError("model needs at least one node type and one class");
  ModelState m;
  m.substructure = cfg.substructure;
  m.activation = cfg.activation;
  m.layout = cfg.layout;
  m.node_types = node_types;
  m.class_count = class_count;
  Rng rng(seed);
  const Index D = feature_width(cfg.substructure, node_types);
  m.encoder = EncoderParams::init(D, hidden_width(cfg.hidden, D), cfg.latent, rng);
  m.classifier = ClassifierParams::init(cfg.layout.width(cfg.K, node_types), kClassifierHidden, class_count, rng);
  m.landmarks.U = Mat(0, cfg.latent);
  m.landmarks.dof = cfg.dof;
  return m;
}

namespace {

// One graph's differentiable forward pass.
struct GraphPass {
  Tape tape;
  Var h, cooc, w, cluster, scaled, extra;
  EncoderVars enc;
  Var U;
  bool has_extra = false;
};

std::unique_ptr<GraphPass> forward_pass(const BatchItem& item, const ModelState& model, const TrainConfig& cfg,
                                        bool differentiable) {
  auto pass = std::make_unique<GraphPass>();
  Tape& t = pass->tape;
  const PreparedGraph& g = *item.graph;
  pass->enc = differentiable ? as_variables(t, model.encoder) : as_constants(t, model.encoder);
  pass->U = differentiable ? t.variable(model.landmarks.U) : t.constant(model.landmarks.U);
  pass->h = encode(t.constant(g.z), pass->enc, model.activation);
  pass->cooc = cooccurrence_loss(pass->h, g.adjacency);
  pass->w = assign(pass->h, pass->U, model.landmarks.dof);
  if (item.target == nullptr) throw ShapeError("joint_loss: batch item without a target distribution");
  pass->cluster = cluster_loss(pass->w, *item.target);
  pass->scaled = scaled_assignment(pass->w);
  if (cfg.layout.with_density || cfg.layout.with_means) {
    pass->extra = extra_feature(pass->w, pass->scaled, g.x, cfg.layout);
    pass->has_extra = true;
  }
  return pass;
}

std::vector<std::unique_ptr<GraphPass>> forward_all(std::span<const BatchItem> items, const ModelState& model,
                                                    const TrainConfig& cfg, bool differentiable, LossTerms& terms) {
  if (items.empty()) throw ConfigError("joint_loss: empty batch");
  std::vector<std::unique_ptr<GraphPass>> passes;
  passes.reserve(items.size());
  for (const BatchItem& item : items) {
    try {
      passes.push_back(forward_pass(item, model, cfg, differentiable));
    } catch (const NumericError& e) {
      throw NumericError("graph " + std::to_string(item.graph->index) + ": " + e.what());
    }
    terms.cooccurrence += passes.back()->cooc.scalar();
    terms.cluster += passes.back()->cluster.scalar();
  }
  return passes;
}

double mean_cross_entropy(const Mat& logits, std::span<const int> targets) {
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    total += lse - logits(r, targets[static_cast<std::size_t>(r)]);
  }
  return total / static_cast<double>(logits.rows());
}

void finish(LossTerms& t, const TrainConfig& cfg, std::span<const BatchItem> items) {
  t.total = t.cross_entropy + cfg.lambda_embed * t.cooccurrence + cfg.lambda_cluster * t.cluster;
  if (!std::isfinite(t.total)) {
    std::ostringstream msg;
    msg << "non-finite loss (cross_entropy=" << t.cross_entropy << ", cooccurrence=" << t.cooccurrence
        << ", cluster=" << t.cluster << ") on graphs";
    for (const BatchItem& item : items) msg << ' ' << item.graph->index;
    throw NumericError(msg.str());
  }
}

Mat scale_by_density(const Mat& w) {
  const Eigen::RowVectorXd inv = (w.colwise().sum().array() + kDensityEpsilon).inverse();
  return w.array().rowwise() * inv.array();
}

Mat plain_extra(const Mat& w, const Mat& scaled, const Mat& x, const FeatureLayout& layout) {
  const Index K = w.cols();
  Mat out(1, layout.extra_width(K, x.cols()));
  Index at = 0;
  if (layout.with_density) {
    out.middleCols(at, K) = w.colwise().sum();
    at += K;
  }
  if (layout.with_means) {
    const Mat m = x.transpose() * scaled;
    out.middleCols(at, m.size()) = Eigen::Map<const Mat>(m.data(), 1, m.size());
  }
  return out;
}

HeadInput plain_head_input(const ModelState& model, const PreparedGraph& g) {
  const Mat w = soft_assignment(model, g);
  Mat scaled = scale_by_density(w);
  Mat extra;
  if (model.layout.with_density || model.layout.with_means) extra = plain_extra(w, scaled, g.x, model.layout);
  return make_head_input(scaled, g.adjacency, std::move(extra));
}

std::vector<int> labels_of(std::span<const BatchItem> items, std::vector<HeadInput>* inputs,
                           const std::vector<std::unique_ptr<GraphPass>>& passes) {
  std::vector<int> targets;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].labeled) continue;
    targets.push_back(items[i].graph->label);
    const GraphPass& p = *passes[i];
    inputs->push_back(
        make_head_input(p.scaled.value(), items[i].graph->adjacency, p.has_extra ? p.extra.value() : Mat()));
  }
  return targets;
}

}  // namespace

LossTerms joint_loss(std::span<const BatchItem> items, const ModelState& model, const TrainConfig& cfg) {
  LossTerms t;
  auto passes = forward_all(items, model, cfg, false, t);
  std::vector<HeadInput> inputs;
  const std::vector<int> targets = labels_of(items, &inputs, passes);
  if (!inputs.empty()) t.cross_entropy = mean_cross_entropy(head_logits(model.classifier, inputs, model.activation), targets);
  finish(t, cfg, items);
  return t;
}

LossTerms joint_loss_backward(std::span<const BatchItem> items, const ModelState& model, const TrainConfig& cfg,
                              const RowBlockSink& w1_sink, std::vector<Mat>& grads) {
  LossTerms t;
  auto passes = forward_all(items, model, cfg, true, t);
  std::vector<HeadInput> inputs;
  const std::vector<int> targets = labels_of(items, &inputs, passes);

  const ClassifierParams& cl = model.classifier;
  grads.assign(9, Mat());
  grads[0] = Mat::Zero(model.encoder.T1.rows(), model.encoder.T1.cols());
  grads[1] = Mat::Zero(1, model.encoder.b1.cols());
  grads[2] = Mat::Zero(model.encoder.T2.rows(), model.encoder.T2.cols());
  grads[3] = Mat::Zero(1, model.encoder.b2.cols());
  grads[4] = Mat::Zero(model.landmarks.U.rows(), model.landmarks.U.cols());
  grads[6] = Mat::Zero(1, cl.b1.cols());
  grads[7] = Mat::Zero(cl.W2.rows(), cl.W2.cols());
  grads[8] = Mat::Zero(1, cl.b2.cols());

  HeadGradients hg;
  if (!inputs.empty()) {
    hg = head_backward(cl, inputs, targets, model.activation, w1_sink);
    t.cross_entropy = hg.loss;
    grads[6] = hg.b1;
    grads[7] = hg.W2;
    grads[8] = hg.b2;
  }
  finish(t, cfg, items);

  std::size_t labeled_at = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    GraphPass& p = *passes[i];
    Tape& tape = p.tape;
    tape.accumulate(p.cooc, Mat::Constant(1, 1, cfg.lambda_embed));
    tape.accumulate(p.cluster, Mat::Constant(1, 1, cfg.lambda_cluster));
    if (items[i].labeled) {
      tape.accumulate(p.scaled, hg.d_scaled[labeled_at]);
      if (p.has_extra) tape.accumulate(p.extra, hg.d_extra[labeled_at]);
      ++labeled_at;
    }
    tape.run_backward();
    const Var leaves[] = {p.enc.T1, p.enc.b1, p.enc.T2, p.enc.b2, p.U};
    for (std::size_t k = 0; k < 5; ++k) {
      if (leaves[k].grad().size() != 0) grads[k] += leaves[k].grad();
    }
  }
  return t;
}

Mat embed(const ModelState& model, const PreparedGraph& g) { return encode(g.z, model.encoder, model.activation); }

Mat soft_assignment(const ModelState& model, const PreparedGraph& g) { return assign(embed(model, g), model.landmarks); }

PooledFeatures pooled_features(const ModelState& model, const PreparedGraph& g) {
  return pool(g.x, soft_assignment(model, g), g.adjacency);
}

std::vector<int> predict(const ModelState& model, std::span<const PreparedGraph> graphs,
                         std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  constexpr std::size_t chunk = 32;
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    std::vector<HeadInput> inputs;
    for (std::size_t i = start; i < std::min(indices.size(), start + chunk); ++i) {
      inputs.push_back(plain_head_input(model, graphs[indices[i]]));
    }
    const Mat logits = head_logits(model.classifier, inputs, model.activation);
    for (Index r = 0; r < logits.rows(); ++r) {
      Index best = 0;
      logits.row(r).maxCoeff(&best);
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

double accuracy(const ModelState& model, std::span<const PreparedGraph> graphs, std::span<const std::size_t> indices) {
  if (indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::vector<int> guess = predict(model, graphs, indices);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) hits += guess[i] == graphs[indices[i]].label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

TrainResult train(std::span<const PreparedGraph> graphs, const TrainSplit& split, const TrainConfig& cfg,
                  int node_types, int class_count, int fold, const EpochCallback& on_epoch) {
  cfg.validate();
  if (split.train.empty()) throw ConfigError("training split is empty");
  const std::size_t n = graphs.size();
  std::vector<char> labeled(n, 0);
  for (std::size_t i : split.train) {
    if (i >= n) throw ConfigError("training index " + std::to_string(i) + " out of range");
    labeled[i] = 1;
  }
  std::vector<std::size_t> pool = split.train;
  if (cfg.semi_supervised) {
    for (std::size_t i : split.unlabeled) {
      if (i >= n) throw ConfigError("unlabeled index " + std::to_string(i) + " out of range");
      if (!labeled[i]) pool.push_back(i);
    }
  }

  TrainResult result;
  result.model = init_model(cfg, node_types, class_count, derive_seed(cfg.seed, 1));
  ModelState& model = result.model;

  // Landmarks start as k-means centroids of the initial embeddings.
  {
    std::vector<Mat> hs;
    Index rows = 0;
    for (std::size_t i : pool) {
      hs.push_back(embed(model, graphs[i]));
      rows += hs.back().rows();
    }
    Mat points(rows, cfg.latent);
    Index at = 0;
    for (const Mat& h : hs) {
      points.middleRows(at, h.rows()) = h;
      at += h.rows();
    }
    KMeansResult km = init_landmarks(points, cfg.K, derive_seed(cfg.seed, 2), cfg.kmeans);
    model.landmarks.U = std::move(km.landmarks.U);
    for (std::string& w : km.warnings) result.warnings.push_back(std::move(w));
  }

  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  std::vector<Mat*> ptrs;
  for (auto& p : model.parameters()) ptrs.push_back(p.value);
  opt.attach(ptrs);
  const RowBlockSink sink = [&opt](Index row0, const Mat& g) { opt.step_rows(kClassifierW1, row0, g); };

  std::vector<Mat> targets(n);
  std::vector<Mat> grads;
  std::vector<BatchItem> items;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i : pool) targets[i] = target_distribution(soft_assignment(model, graphs[i]));
    std::vector<std::size_t> order = pool;
    Rng shuffle_rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochMetrics m;
    m.fold = fold;
    m.epoch = epoch;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      items.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size)); ++i) {
        items.push_back({&graphs[order[i]], &targets[order[i]], labeled[order[i]] != 0});
      }
      LossTerms t;
      try {
        t = joint_loss_backward(items, model, cfg, sink, grads);
      } catch (const NumericError& e) {
        throw NumericError("fold " + std::to_string(fold) + " epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (t.total > kDivergenceLoss) {
        std::ostringstream msg;
        msg << "fold " << fold << " epoch " << epoch << ": training diverged, batch loss " << t.total
            << " (cross_entropy=" << t.cross_entropy << ", cooccurrence=" << t.cooccurrence
            << ", cluster=" << t.cluster << ")";
        throw NumericError(msg.str());
      }
      for (std::size_t k = 0; k < grads.size(); ++k) {
        if (k != kClassifierW1 && grads[k].size() != 0) opt.step(k, grads[k]);
      }
      m.train_loss += t.total;
      m.cross_entropy += t.cross_entropy;
      m.cooccurrence += t.cooccurrence;
      m.cluster += t.cluster;
      ++batches;
    }
    m.train_loss /= batches;
    m.cross_entropy /= batches;
    m.cooccurrence /= batches;
    m.cluster /= batches;
    m.val_accuracy = accuracy(model, graphs, split.validation);
    if (on_epoch) on_epoch(m);
    result.epochs.push_back(m);
  }
  return result;
}

CVResult summarize_folds(std::vector<std::vector<double>> fold_curves) {
  if (fold_curves.empty()) throw ConfigError("no folds to summarize");
  const std::size_t epochs = fold_curves.front().size();
  for (const auto& c : fold_curves) {
    if (c.size() != epochs || epochs == 0) throw ShapeError("fold curves differ in length");
  }
  CVResult r;
  const double folds = static_cast<double>(fold_curves.size());
  r.curve.assign(epochs, 0.0);
  for (const auto& c : fold_curves) {
    for (std::size_t e = 0; e < epochs; ++e) r.curve[e] += c[e] / folds;
  }
  r.selected_epoch = static_cast<int>(std::max_element(r.curve.begin(), r.curve.end()) - r.curve.begin());
  for (const auto& c : fold_curves) r.per_fold.push_back(c[static_cast<std::size_t>(r.selected_epoch)]);
  r.mean = std::accumulate(r.per_fold.begin(), r.per_fold.end(), 0.0) / folds;
  double ss = 0.0;
  for (double a : r.per_fold) ss += (a - r.mean) * (a - r.mean);
  r.std = std::sqrt(ss / folds);
  r.fold_curves = std::move(fold_curves);
  return r;
}

CVResult cross_validate(const DatasetBundle& bundle, const TrainConfig& cfg, const FoldPlan& plan, int jobs,
                        const EpochCallback& on_epoch) {
  cfg.validate();
  if (plan.assignments.size() != bundle.graphs.size()) throw ConfigError("fold plan does not cover the dataset");
  const std::vector<PreparedGraph> graphs = prepare_graphs(bundle, cfg.substructure);
  const int folds = plan.fold_count;
  std::vector<std::vector<double>> curves(static_cast<std::size_t>(folds));
  std::vector<std::vector<std::string>> fold_warnings(static_cast<std::size_t>(folds));
  std::mutex mu;
  std::atomic<int> next{0};
  std::exception_ptr failure;

  auto run_fold = [&](int f) {
    TrainSplit split;
    split.train = plan.training_indices(f);
    split.validation = plan.validation_indices(f);
    if (cfg.semi_supervised) split.unlabeled = split.validation;
    TrainConfig fc = cfg;
    fc.seed = derive_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(f));
    EpochCallback cb;
    if (on_epoch) {
      cb = [&](const EpochMetrics& m) {
        std::lock_guard<std::mutex> lock(mu);
        on_epoch(m);
      };
    }
    TrainResult r = train(graphs, split, fc, bundle.node_label_count, bundle.class_count, f, cb);
    auto& curve = curves[static_cast<std::size_t>(f)];
    for (const EpochMetrics& m : r.epochs) curve.push_back(m.val_accuracy);
    for (std::string& w : r.warnings) fold_warnings[static_cast<std::size_t>(f)].push_back("fold " + std::to_string(f) + ": " + w);
  };
  auto worker = [&] {
    for (;;) {
      const int f = next++;
      if (f >= folds) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (failure) return;
      }
      try {
        run_fold(f);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(jobs, 1, folds);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  CVResult r = summarize_folds(std::move(curves));
  r.warnings = plan.warnings;
  for (auto& ws : fold_warnings) {
    for (std::string& w : ws) r.warnings.push_back(std::move(w));
  }
  return r;
}

SweepResult sweep_k(const DatasetBundle& bundle, const TrainConfig& cfg, std::vector<int> ks, const FoldPlan& plan,
                    int jobs, const EpochCallback& on_epoch) {
  if (ks.empty()) throw ConfigError("K list is empty");
  for (int k : ks) {
    if (k < 1) throw ConfigError("K values must be positive, got " + std::to_string(k));
  }
  SweepResult out;
  const std::set<int> unique(ks.begin(), ks.end());
  if (unique.size() != ks.size()) out.warnings.push_back("duplicate K values removed");
  for (int k : unique) {
    TrainConfig c = cfg;
    c.K = k;
    CVResult r = cross_validate(bundle, c, plan, jobs, on_epoch);
    out.rows.push_back({k, r.mean, r.std});
    for (const std::string& w : r.warnings) out.warnings.push_back("K=" + std::to_string(k) + " " + w);
    out.runs.push_back(std::move(r));
  }
  return out;
}

}  // namespace slim
