#pragma once

#include "slim/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slim {

// One labeled graph. Adjacency is dense, symmetric, binary with zero diagonal.
struct Graph {
  Mat adjacency;
  std::vector<int> node_labels;
  int class_label = 0;

  [[nodiscard]] Index node_count() const { return adjacency.rows(); }
  // Undirected edge count.
  [[nodiscard]] std::size_t edge_count() const;
};

struct DatasetBundle {
  std::string name;
  std::vector<Graph> graphs;
  int node_label_count = 0;
  int class_count = 0;

  // Raw label values in dense order: raw_class_labels[i] is the file value mapped to i.
  std::vector<long long> raw_class_labels;
  std::vector<long long> raw_node_labels;
  bool node_labels_from_degree = false;
  std::size_t dropped_self_loops = 0;
  std::size_t dropped_duplicate_edges = 0;
  std::vector<std::string> warnings;
};

// Degree cap used to derive node labels when a dataset has no node-label file.
inline constexpr int kDegreeLabelCap = 10;

// Loads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
// and the optional `<name>_node_labels.txt` from `root`, or from `root/<name>`
// when the files are not found directly under `root`. Throws IoError for
// missing mandatory files and ParseError (with file:line) for malformed content.
DatasetBundle load_tu_dataset(const std::filesystem::path& root, const std::string& name);

// Writes the bundle back in TU format (dense labels, both edge directions).
void write_tu_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

// n×c one-hot matrix of node labels. Throws RangeError if a label is outside [0, c).
Mat one_hot_features(const Graph& g, int c);

struct FoldPlan {
  int fold_count = 10;
  std::vector<int> assignments;  // graph index -> fold index
  std::uint64_t seed = 0;
  bool relaxed = false;  // some class had fewer members than folds
  std::vector<std::string> warnings;

  [[nodiscard]] std::vector<std::size_t> validation_indices(int fold) const;
  [[nodiscard]] std::vector<std::size_t> training_indices(int fold) const;
  [[nodiscard]] std::vector<std::size_t> fold_sizes() const;
};

// Stratified, seeded fold assignment. Throws ConfigError when fold_count < 2
// or fold_count exceeds the number of graphs.
FoldPlan make_folds(const DatasetBundle& bundle, int fold_count, std::uint64_t seed);

}  // namespace slim
