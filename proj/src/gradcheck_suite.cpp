#include "slim/gradcheck_suite.hpp"

#include "slim/train.hpp"

namespace slim {

namespace {

PreparedGraph random_graph(Rng& rng, int nodes, int node_types, int hops) {
  std::bernoulli_distribution edge(0.4);
  std::uniform_int_distribution<int> type(0, node_types - 1);
  Graph g;
  g.adjacency = Mat::Zero(nodes, nodes);
  for (int i = 0; i < nodes; ++i) {
    for (int j = i + 1; j < nodes; ++j) {
      if (edge(rng) || j == i + 1) g.adjacency(i, j) = g.adjacency(j, i) = 1.0;  // path keeps it connected
    }
    g.node_labels.push_back(type(rng));
  }
  g.class_label = 1;
  PreparedGraph p;
  p.adjacency = g.adjacency;
  p.x = one_hot_features(g, node_types);
  SubstructureConfig sc;
  sc.hops = hops;
  p.z = build_substructures(g, p.x, sc);
  p.label = g.class_label;
  return p;
}

}  // namespace

grad::GradCheckReport check_joint_loss(std::uint64_t seed, double step, double tolerance, const FeatureLayout& layout,
                                       bool labeled) {
  Rng rng(seed);
  constexpr int kTypes = 3;
  const PreparedGraph g = random_graph(rng, 7, kTypes, 1);
  TrainConfig cfg;
  cfg.substructure.hops = 1;
  cfg.K = 3;
  cfg.latent = 4;
  cfg.layout = layout;
  ModelState model = init_model(cfg, kTypes, 2, derive_seed(seed, 1));
  // Spread the embeddings and move the landmarks off the k-means optimum.
  // With nearly equal embeddings the landmark gradients shrink to ~1e-9,
  // below what central differences of an O(1) loss can resolve.
  model.encoder.T2 *= 3.0;
  model.encoder.b2 *= 3.0;
  model.landmarks.U = init_landmarks(embed(model, g), cfg.K, derive_seed(seed, 2)).landmarks.U +
                      uniform_matrix(cfg.K, cfg.latent, 1.0, rng);
  const Mat target = target_distribution(soft_assignment(model, g));
  const BatchItem items[] = {{&g, &target, labeled}};

  Mat w1_grad = Mat::Zero(model.classifier.W1.rows(), model.classifier.W1.cols());
  std::vector<Mat> grads;
  joint_loss_backward(items, model, cfg, accumulate_into(w1_grad), grads);
  grads[kClassifierW1] = w1_grad;

  std::vector<std::span<double>> params;
  std::vector<std::span<const double>> analytic;
  auto list = model.parameters();
  for (std::size_t k = 0; k < list.size(); ++k) {
    params.emplace_back(list[k].value->data(), static_cast<std::size_t>(list[k].value->size()));
    analytic.emplace_back(grads[k].data(), static_cast<std::size_t>(grads[k].size()));
  }
  std::string name = labeled ? "joint_loss" : "joint_loss_unlabeled";
  if (layout.with_density || layout.with_means) name += "_extended";
  return grad::compare_with_finite_differences(
      name, params, analytic, [&] { return joint_loss(items, model, cfg).total; }, step, tolerance);
}

std::vector<grad::GradCheckReport> run_gradcheck_suite(std::uint64_t seed, double step, double tolerance) {
  std::vector<grad::GradCheckReport> out;
  for (const grad::RegisteredOp& op : grad::registered_ops()) out.push_back(op.check(seed, step, tolerance));

  {
    Rng rng(derive_seed(seed, 7));
    Graph g;
    g.adjacency = Mat::Zero(5, 5);
    for (int i = 0; i + 1 < 5; ++i) g.adjacency(i, i + 1) = g.adjacency(i + 1, i) = 1.0;
    g.adjacency(0, 4) = g.adjacency(4, 0) = 1.0;
    g.node_labels = {0, 1, 0, 1, 1};
    const Mat x = one_hot_features(g, 2);
    const Mat a = g.adjacency;
    FeatureLayout full;
    full.with_density = full.with_means = true;
    out.push_back(grad::grad_check(
        "graph_feature",
        [&](grad::Tape&, std::span<const grad::Var> v) { return graph_feature(assign(v[0], v[1], 1.0), x, a, full); },
        {uniform_matrix(5, 3, 1.0, rng), uniform_matrix(4, 3, 1.0, rng)}, step, tolerance, seed));
  }

  out.push_back(check_joint_loss(seed, step, tolerance));
  out.push_back(check_joint_loss(seed, step, tolerance, {}, false));
  FeatureLayout extended;
  extended.with_density = extended.with_means = true;
  out.push_back(check_joint_loss(seed, step, tolerance, extended));
  return out;
}

}  // namespace slim
