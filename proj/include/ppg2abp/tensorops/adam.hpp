#pragma once

#include "ppg2abp/tensorops/param.hpp"

#include <cstdint>

namespace ppg2abp::tensorops {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;

  void validate() const;
};

/// One bias-corrected Adam update over every trainable parameter, then zeroes
/// the gradients. Throws NumericalError naming the parameter on a non-finite
/// gradient (before anything is modified).
void adam_step(const ParamList& params, AdamConfig& config);

void zero_grads(const ParamList& params);

}  // namespace ppg2abp::tensorops
