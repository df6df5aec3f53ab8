#pragma once

#include <cstdint>
#include <vector>

#include "reid/model.hpp"

namespace reid {

enum class OptimizerKind { kAdam, kMomentum };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // used by the plain-momentum variant
};

// Moment accumulators aligned with the canonical parameter tensor order.
struct OptimizerState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;  // unused by plain momentum
  std::int64_t step = 0;

  static OptimizerState zeros_like(ModelParams& model);
};

// One in-place update of every trainable tensor.
void optimizer_step(ModelParams& model, ParamGrads& grads, OptimizerState& state,
                    const OptimizerConfig& config, double lr);

}  // namespace reid
