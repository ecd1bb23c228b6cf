#pragma once

#include "slim/grad.hpp"
#include "slim/pooling.hpp"

#include <cstdint>
#include <vector>

namespace slim {

// Finite-difference check of the whole per-graph training loss on a small
// random graph, against every model parameter.
grad::GradCheckReport check_joint_loss(std::uint64_t seed, double step = 1e-5, double tolerance = 1e-4,
                                       const FeatureLayout& layout = {}, bool labeled = true);

// Every registered op, the pooled graph feature as a function of (H, U), and
// the per-graph loss in its labeled, unlabeled and extended-feature forms.
std::vector<grad::GradCheckReport> run_gradcheck_suite(std::uint64_t seed = 0, double step = 1e-5,
                                                       double tolerance = 1e-4);

}  // namespace slim
