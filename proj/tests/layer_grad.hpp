#pragma once

#include "helpers.hpp"
#include "ppg2abp/tensorops/gradcheck.hpp"
#include "ppg2abp/tensorops/layers.hpp"

#include <functional>

namespace ppg2abp::test {

using tensorops::GradCheckReport;
using tensorops::Param;
using tensorops::ParamList;

inline double dot(const Tensor& a, const Tensor& b) { return a.cwiseProduct(b).sum(); }

// The input batch as a trainable block, so gradcheck covers input gradients.
struct InputBlock {
  Param param;
  std::size_t batch;
  Index channels, length;

  InputBlock(Rng& rng, std::size_t b, Index c, Index l)
      : param("input", {static_cast<Index>(b), c, l}), batch(b), channels(c), length(l) {
    for (Index i = 0; i < param.size(); ++i) param.value[i] = rng.normal();
  }
  Batch value() const {
    Batch x;
    for (std::size_t b = 0; b < batch; ++b)
      x.push_back(Eigen::Map<const Tensor>(param.value.data() + static_cast<Index>(b) * channels * length, channels,
                                           length));
    return x;
  }
  void accumulate(const Batch& g) {
    for (std::size_t b = 0; b < batch; ++b)
      Eigen::Map<Tensor>(param.grad.data() + static_cast<Index>(b) * channels * length, channels, length) += g[b];
  }
};

// Objective: sum over the batch of <layer(x), probe>, a fixed random readout.
inline GradCheckReport check_layer(InputBlock& input, ParamList params, const std::function<Batch(const Batch&)>& fwd,
                            const std::function<Batch(const Batch&)>& bwd, Rng& rng,
                            const tensorops::GradCheckOptions& options = {}) {
  const Batch probe_shape = fwd(input.value());
  Batch probe;
  for (const auto& t : probe_shape) probe.push_back(random_tensor(rng, t.rows(), t.cols()));
  params.push_back(&input.param);
  auto loss = [&] {
    const Batch out = fwd(input.value());
    double s = 0.0;
    for (std::size_t b = 0; b < out.size(); ++b) s += dot(out[b], probe[b]);
    return s;
  };
  auto backward = [&] {
    fwd(input.value());
    input.accumulate(bwd(probe));
  };
  return tensorops::gradcheck(loss, backward, params, options);
}

}  // namespace ppg2abp::test
