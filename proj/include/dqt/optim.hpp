#pragma once

#include "dqt/tensor.hpp"

namespace dqt {

struct OptimizerConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  double clip_max_norm = 1.0;
  double lr_decay = 0.5;     // multiplier applied every `lr_decay_every` episodes
  int lr_decay_every = 500;

  void validate() const;
  /// Step-schedule learning rate for a 0-based episode index.
  double lr_at(int episode) const;
};

/// One AdamW step on every parameter with a gradient:
/// theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
/// Moments are allocated on first use.
void adamw_step(ParamSet& params, const OptimizerConfig& config, double lr);

double global_grad_norm(const ParamSet& params);

/// Scales all gradients by max_norm / g when the global L2 norm g exceeds
/// max_norm. Returns the pre-clip norm.
double clip_global_norm(ParamSet& params, double max_norm);
/// Clip step for a norm already computed by the caller. Returns the factor applied (1 when unclipped).
double scale_gradients_to(ParamSet& params, double norm, double max_norm);

/// target <- (1 - tau) * target + tau * online, parameter by parameter.
void soft_update(ParamSet& target, const ParamSet& online, double tau);

}  // namespace dqt
