#include "ppg2abp/tensorops/adam.hpp"

#include <cmath>

namespace ppg2abp::tensorops {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw DataError("adam: learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw DataError("adam: beta1 and beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw DataError("adam: epsilon must be positive");
}

void adam_step(const ParamList& params, AdamConfig& config) {
  for (const Param* p : params) {
    if (p->trainable && !p->grad.allFinite())
      throw NumericalError("adam: non-finite gradient in " + p->name);
  }
  ++config.step;
  const double t = static_cast<double>(config.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (Param* p : params) {
    if (!p->trainable) continue;
    p->m = config.beta1 * p->m + (1.0 - config.beta1) * p->grad;
    p->v = config.beta2 * p->v + (1.0 - config.beta2) * p->grad.square();
    const Eigen::ArrayXd m_hat = p->m / correction1;
    const Eigen::ArrayXd v_hat = p->v / correction2;
    p->value -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    p->grad.setZero();
  }
}

void zero_grads(const ParamList& params) {
  for (Param* p : params) p->grad.setZero();
}

}  // namespace ppg2abp::tensorops
