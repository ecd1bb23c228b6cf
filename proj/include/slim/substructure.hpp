#pragma once

#include "slim/dataset.hpp"
#include "slim/matrix.hpp"

#include <string>
#include <string_view>

namespace slim {

// How a node's k-hop neighborhood is summarized as a row of Z.
enum class Variant {
  NodeDistribution,  // A^(k) X
  CenterEmphasis,    // [X, A^(k) X]
  LayerWise,         // [Ã^(1) X, ..., Ã^(k) X]
  WeightedLayerSum,  // X + Σ_j γ^j Ã^(j) X
};

Variant parse_variant(std::string_view name);
std::string to_string(Variant v);

inline constexpr int kMaxHops = 10;

struct SubstructureConfig {
  int hops = 3;
  Variant variant = Variant::NodeDistribution;
  double layer_decay = 0.5;

  // Throws ConfigError on hops outside [0, kMaxHops], decay outside (0, 1],
  // or a layered variant with hops == 0.
  void validate() const;
};

// Number of columns of Z for c node types.
int feature_width(const SubstructureConfig& cfg, int node_types);

// All-pairs BFS hop distances truncated at max_hops; -1 marks "farther / unreachable".
Eigen::MatrixXi hop_distances(const Mat& adjacency, int max_hops);

// Entry (p, q) = 1 iff dist(p, q) <= k. The diagonal is always 1.
Mat khop_adjacency(const Mat& adjacency, int k);

// Entry (p, q) = 1 iff dist(p, q) == j, for j >= 1.
Mat exact_layer_adjacency(const Mat& adjacency, int j);

// Z for graph g with node features X (n × c).
Mat build_substructures(const Graph& g, const Mat& features, const SubstructureConfig& cfg);

}  // namespace slim
