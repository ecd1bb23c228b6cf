#include "slim/substructure.hpp"

#include "slim/errors.hpp"

#include <cmath>
#include <vector>

namespace slim {

Variant parse_variant(std::string_view name) {
  if (name == "node-distribution" || name == "NodeDistribution") return Variant::NodeDistribution;
  if (name == "center-emphasis" || name == "CenterEmphasis") return Variant::CenterEmphasis;
  if (name == "layer-wise" || name == "LayerWise") return Variant::LayerWise;
  if (name == "weighted-layer-sum" || name == "WeightedLayerSum") return Variant::WeightedLayerSum;
  throw ConfigError("unknown substructure variant '" + std::string(name) + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::NodeDistribution: return "node-distribution";
    case Variant::CenterEmphasis: return "center-emphasis";
    case Variant::LayerWise: return "layer-wise";
    case Variant::WeightedLayerSum: return "weighted-layer-sum";
  }
  return "unknown";
}

void SubstructureConfig::validate() const {
  if (hops < 0 || hops > kMaxHops) {
    throw ConfigError("hops must lie in [0, " + std::to_string(kMaxHops) + "], got " + std::to_string(hops));
  }
  if (!(layer_decay > 0.0 && layer_decay <= 1.0)) throw ConfigError("layer decay must lie in (0, 1]");
  if (hops == 0 && variant != Variant::NodeDistribution) {
    throw ConfigError("variant " + to_string(variant) + " needs hops >= 1");
  }
}

int feature_width(const SubstructureConfig& cfg, int node_types) {
  switch (cfg.variant) {
    case Variant::NodeDistribution: return node_types;
    case Variant::CenterEmphasis: return 2 * node_types;
    case Variant::LayerWise: return cfg.hops * node_types;
    case Variant::WeightedLayerSum: return node_types;
  }
  return node_types;
}

Eigen::MatrixXi hop_distances(const Mat& adjacency, int max_hops) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeError("adjacency must be square");
  std::vector<std::vector<Index>> neighbors(static_cast<std::size_t>(n));
  for (Index p = 0; p < n; ++p) {
    for (Index q = 0; q < n; ++q) {
      if (adjacency(p, q) != 0.0) neighbors[static_cast<std::size_t>(p)].push_back(q);
    }
  }
  Eigen::MatrixXi dist = Eigen::MatrixXi::Constant(n, n, -1);
  std::vector<Index> frontier;
  std::vector<Index> next;
  for (Index s = 0; s < n; ++s) {
    dist(s, s) = 0;
    frontier.assign(1, s);
    for (int depth = 1; depth <= max_hops && !frontier.empty(); ++depth) {
      next.clear();
      for (Index u : frontier) {
        for (Index v : neighbors[static_cast<std::size_t>(u)]) {
          if (dist(s, v) < 0) {
            dist(s, v) = depth;
            next.push_back(v);
          }
        }
      }
      frontier.swap(next);
    }
  }
  return dist;
}

Mat khop_adjacency(const Mat& adjacency, int k) {
  if (k < 0) throw ConfigError("k must be non-negative");
  const Eigen::MatrixXi dist = hop_distances(adjacency, k);
  return (dist.array() >= 0).cast<double>().matrix();
}

Mat exact_layer_adjacency(const Mat& adjacency, int j) {
  if (j < 1) throw ConfigError("layer index must be >= 1");
  const Eigen::MatrixXi dist = hop_distances(adjacency, j);
  return (dist.array() == j).cast<double>().matrix();
}

Mat build_substructures(const Graph& g, const Mat& features, const SubstructureConfig& cfg) {
  cfg.validate();
  const Index n = g.node_count();
  if (features.rows() != n) {
    throw ShapeError("feature matrix has " + std::to_string(features.rows()) + " rows for " + std::to_string(n) +
                     " nodes");
  }
  const Index c = features.cols();
  const Eigen::MatrixXi dist = hop_distances(g.adjacency, cfg.hops);

  auto layer = [&](int j) -> Mat { return (dist.array() == j).cast<double>().matrix() * features; };
  auto ball = [&]() -> Mat { return (dist.array() >= 0).cast<double>().matrix() * features; };

  switch (cfg.variant) {
    case Variant::NodeDistribution: return ball();
    case Variant::CenterEmphasis: {
      Mat z(n, 2 * c);
      z.leftCols(c) = features;
      z.rightCols(c) = ball();
      return z;
    }
    case Variant::LayerWise: {
      Mat z(n, cfg.hops * c);
      for (int j = 1; j <= cfg.hops; ++j) z.middleCols((j - 1) * c, c) = layer(j);
      return z;
    }
    case Variant::WeightedLayerSum: {
      Mat z = features;
      for (int j = 1; j <= cfg.hops; ++j) z += std::pow(cfg.layer_decay, j) * layer(j);
      return z;
    }
  }
  throw ConfigError("unhandled variant");
}

}  // namespace slim
