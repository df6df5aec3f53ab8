#include "reid/optimizer.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid {

OptimizerState OptimizerState::zeros_like(ModelParams& model) {
  OptimizerState s;
  for (const TensorRef& t : param_tensors(model)) {
    s.m.emplace_back(t.size, 0.0);
    s.v.emplace_back(t.size, 0.0);
  }
  return s;
}

void optimizer_step(ModelParams& model, ParamGrads& grads, OptimizerState& state,
                    const OptimizerConfig& config, double lr) {
  std::vector<TensorRef> params = param_tensors(model);
  std::vector<TensorRef> grad_refs = grad_tensors(grads);
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("optimizer state does not match the model");
  }
  state.step += 1;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size != grad_refs[t].size || state.m[t].size() != params[t].size) {
      throw ConfigError("optimizer tensor size mismatch: " + params[t].name);
    }
    double* p = params[t].data;
    const double* gd = grad_refs[t].data;
    std::vector<double>& m = state.m[t];
    std::vector<double>& v = state.v[t];
    if (config.kind == OptimizerKind::kAdam) {
      double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
      double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
      for (std::size_t i = 0; i < params[t].size; ++i) {
        m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gd[i];
        v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gd[i] * gd[i];
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
      }
    } else {
      for (std::size_t i = 0; i < params[t].size; ++i) {
        m[i] = config.momentum * m[i] + gd[i];
        p[i] -= lr * m[i];
      }
    }
  }
}

}  // namespace reid
