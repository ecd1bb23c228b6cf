#pragma once

#include "slim/dataset.hpp"
#include "slim/model.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace slim {

// Encoder hidden width relative to the substructure width D.
enum class HiddenWidth { SameAsInput, Half, Double };

HiddenWidth parse_hidden_width(std::string_view name);  // "D", "D/2", "2D"
std::string to_string(HiddenWidth w);
Index hidden_width(HiddenWidth w, Index input_width);

struct TrainConfig {
  SubstructureConfig substructure;
  int K = 100;
  int latent = 32;
  HiddenWidth hidden = HiddenWidth::SameAsInput;
  Activation activation = Activation::Logistic;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double learning_rate = 5e-2;
  int epochs = 300;
  int batch_size = 32;
  double lambda_embed = 0.01;
  double lambda_cluster = 0.01;
  double dof = 1.0;
  bool semi_supervised = false;
  FeatureLayout layout;
  KMeansOptions kmeans;
  std::uint64_t seed = 0;

  // Throws ConfigError on any out-of-range field.
  void validate() const;
};

// The learning rates the optimizer grid is drawn from.
inline constexpr double kLearningRateGrid[] = {1e-2, 5e-2, 1e-3, 5e-3, 1e-4};

// A graph with its substructure matrix built once.
struct PreparedGraph {
  std::size_t index = 0;
  Mat adjacency;
  Mat x;  // one-hot node types
  Mat z;  // substructures
  int label = 0;
};

std::vector<PreparedGraph> prepare_graphs(const DatasetBundle& bundle, const SubstructureConfig& cfg);

// Fresh model with encoder and classifier drawn from `seed`; landmarks empty.
ModelState init_model(const TrainConfig& cfg, int node_types, int class_count, std::uint64_t seed);

struct BatchItem {
  const PreparedGraph* graph = nullptr;
  const Mat* target = nullptr;  // sharpened assignment W̃ for this graph
  bool labeled = true;          // false: the label is never read
};

struct LossTerms {
  double total = 0.0;
  double cross_entropy = 0.0;  // mean over labeled items, 0 when there are none
  double cooccurrence = 0.0;   // summed over items
  double cluster = 0.0;        // summed over items
};

LossTerms joint_loss(std::span<const BatchItem> items, const ModelState& model, const TrainConfig& cfg);

// Same loss plus gradients, one matrix per ModelState::parameters() entry.
// The classifier W1 entry stays empty: its gradient goes to `w1_sink` block
// by block (see head.hpp).
LossTerms joint_loss_backward(std::span<const BatchItem> items, const ModelState& model, const TrainConfig& cfg,
                              const RowBlockSink& w1_sink, std::vector<Mat>& grads);

// Plain forward pieces.
Mat embed(const ModelState& model, const PreparedGraph& g);
Mat soft_assignment(const ModelState& model, const PreparedGraph& g);
PooledFeatures pooled_features(const ModelState& model, const PreparedGraph& g);
std::vector<int> predict(const ModelState& model, std::span<const PreparedGraph> graphs,
                         std::span<const std::size_t> indices);
double accuracy(const ModelState& model, std::span<const PreparedGraph> graphs, std::span<const std::size_t> indices);

struct EpochMetrics {
  int fold = 0;
  int epoch = 0;
  double train_loss = 0.0;  // mean batch loss
  double cross_entropy = 0.0;
  double cooccurrence = 0.0;
  double cluster = 0.0;
  double val_accuracy = 0.0;  // NaN without a validation split
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

struct TrainSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> unlabeled;  // used only in semi-supervised mode
};

struct TrainResult {
  ModelState model;
  std::vector<EpochMetrics> epochs;
  std::vector<std::string> warnings;
};

// Abort threshold on a batch loss.
inline constexpr double kDivergenceLoss = 1e6;

TrainResult train(std::span<const PreparedGraph> graphs, const TrainSplit& split, const TrainConfig& cfg,
                  int node_types, int class_count, int fold = 0, const EpochCallback& on_epoch = {});

struct CVResult {
  std::vector<double> per_fold;  // accuracy at the selected epoch
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  int selected_epoch = 0;
  std::vector<double> curve;  // fold-mean validation accuracy per epoch
  std::vector<std::vector<double>> fold_curves;
  std::vector<std::string> warnings;
};

// Picks the epoch with the best fold-mean accuracy and reports the folds there.
CVResult summarize_folds(std::vector<std::vector<double>> fold_curves);

CVResult cross_validate(const DatasetBundle& bundle, const TrainConfig& cfg, const FoldPlan& plan, int jobs = 1,
                        const EpochCallback& on_epoch = {});

struct SweepRow {
  int K = 0;
  double mean = 0.0;
  double std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending K
  std::vector<CVResult> runs;
  std::vector<std::string> warnings;
};

SweepResult sweep_k(const DatasetBundle& bundle, const TrainConfig& cfg, std::vector<int> ks, const FoldPlan& plan,
                    int jobs = 1, const EpochCallback& on_epoch = {});

}  // namespace slim
