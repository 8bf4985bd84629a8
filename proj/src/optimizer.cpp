#include "capstext/optimizer.hpp"

#include <cmath>

#include "capstext/error.hpp"

namespace capstext::trainer {

void optimizer_step(std::span<double> theta, std::span<const double> grad,
                    OptimizerState& state, const OptimizerConfig& config) {
  if (theta.size() != grad.size()) {
    throw ShapeError("optimizer: parameter and gradient sizes differ");
  }
  if (config.kind == OptimizerKind::sgd) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= config.learning_rate * grad[i];
    }
    ++state.step;
    return;
  }

  if (state.m.size() != theta.size()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bias1;
    const double v_hat = state.v[i] / bias2;
    theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace capstext::trainer
