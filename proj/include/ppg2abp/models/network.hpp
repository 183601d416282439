#pragma once

#include "ppg2abp/tensorops/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace ppg2abp::models {

using tensorops::Mode;
using tensorops::ParamList;

/// Single-sample output: final waveform plus subsampled auxiliary outputs,
/// shallowest first (auxiliary k has length input_length / 2^k).
struct NetworkOutput {
  Tensor final;
  std::vector<Tensor> auxiliaries;
};

/// Batched output; auxiliaries[k][b] is auxiliary k+1 of sample b.
struct BatchOutput {
  Batch final;
  std::vector<Batch> auxiliaries;

  NetworkOutput sample(std::size_t b) const;
};

/// A trainable 1-channel-in, 1-channel-out sequence model.
class Network {
 public:
  virtual ~Network() = default;

  virtual BatchOutput forward(const Batch& x, Mode mode) = 0;
  /// Backpropagates from the output gradients of the most recent forward
  /// call, accumulating parameter gradients; returns the input gradient.
  /// Empty auxiliary batches mean "no gradient for that head".
  virtual Batch backward(const BatchOutput& grad) = 0;
  /// Every persistent array, trainable or not, in a stable order.
  virtual ParamList parameters() = 0;
  virtual std::unique_ptr<Network> clone() const = 0;
  virtual Index input_length() const = 0;
  virtual std::size_t auxiliary_count() const = 0;
  virtual std::string kind() const = 0;

  NetworkOutput forward(const Tensor& x, Mode mode = Mode::Infer);
  Index parameter_count();
  /// One line per layer: name, parameter shapes, trainable parameter count.
  std::string summary();
};

}  // namespace ppg2abp::models
