#include "dqt/optim.hpp"

#include <cmath>

#include "dqt/error.hpp"
#include "dqt/kernels.hpp"

namespace dqt {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(clip_max_norm > 0.0)) throw ConfigError("clip_max_norm must be > 0");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be > 0");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
}

double OptimizerConfig::lr_at(int episode) const {
  return learning_rate * std::pow(lr_decay, episode / lr_decay_every);
}

void adamw_step(ParamSet& params, const OptimizerConfig& config, double lr) {
  params.step += 1;
  const double t = static_cast<double>(params.step);
  const kernels::AdamWStep s{
      .lr = lr,
      .beta1 = config.beta1,
      .beta2 = config.beta2,
      .eps = config.eps,
      .weight_decay = config.weight_decay,
      .bias_correction1 = 1.0 - std::pow(config.beta1, t),
      .bias_correction2 = 1.0 - std::pow(config.beta2, t),
  };
  for (auto& p : params) {
    Tensor& g = p.ensure_grad();
    if (p.m.size() != p.value.size()) p.m = Tensor(p.value.shape());
    if (p.v.size() != p.value.size()) p.v = Tensor(p.value.shape());
    kernels::adamw(p.value.values(), g.values(), p.m.values(), p.v.values(), s);
  }
}

double global_grad_norm(const ParamSet& params) {
  double ss = 0.0;
  for (const auto& p : params) {
    if (!p.grad.empty()) ss += kernels::sum_squares(p.grad.values());
  }
  return std::sqrt(ss);
}

double scale_gradients_to(ParamSet& params, double norm, double max_norm) {
  if (!(norm > max_norm)) return 1.0;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    if (!p.grad.empty()) kernels::scale(p.grad.values(), factor);
  }
  return factor;
}

double clip_global_norm(ParamSet& params, double max_norm) {
  const double norm = global_grad_norm(params);
  scale_gradients_to(params, norm, max_norm);
  return norm;
}

void soft_update(ParamSet& target, const ParamSet& online, double tau) {
  if (!target.same_layout(online)) throw ShapeError("soft_update: parameter layouts differ");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  for (std::size_t i = 0; i < target.count(); ++i) {
    kernels::polyak(target[i].value.values(), online[i].value.values(), tau);
  }
}

}  // namespace dqt
