#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace capstext::trainer {

enum class OptimizerKind { sgd, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::size_t step = 0;
  std::vector<double> m;  // first moment (adam)
  std::vector<double> v;  // second moment (adam)
};

// theta <- theta - lr * g (SGD) or the bias-corrected Adam update.
void optimizer_step(std::span<double> theta, std::span<const double> grad,
                    OptimizerState& state, const OptimizerConfig& config);

}  // namespace capstext::trainer
