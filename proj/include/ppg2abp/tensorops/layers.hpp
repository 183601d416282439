#pragma once

#include "ppg2abp/random.hpp"
#include "ppg2abp/tensorops/kernels.hpp"
#include "ppg2abp/tensorops/param.hpp"

#include <string>

namespace ppg2abp::tensorops {

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.99;

/// Stride-1 same-padded convolution. Caches its input for backward.
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, Index in_channels, Index out_channels, Index kernel, bool with_bias);

  /// Zero bias; weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = in * kernel.
  void initialize(Rng& rng);

  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }
  Index kernel() const { return kernel_; }

  Param weight;
  Param bias;

 private:
  Eigen::Map<const Tensor> w() const { return weight.value_matrix(out_, in_ * kernel_); }

  Index in_ = 0, out_ = 0, kernel_ = 1;
  bool has_bias_ = false;
  Batch saved_;
};

/// Stride-2 transposed convolution (kernel 2 by default) doubling the length.
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(const std::string& name, Index in_channels, Index out_channels, Index kernel = 2,
                  Index stride = 2);

  /// Zero bias; weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = in * kernel / stride.
  void initialize(Rng& rng);
  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);

  Index out_channels() const { return out_; }

  Param weight;
  Param bias;

 private:
  Eigen::Map<const Tensor> w() const { return weight.value_matrix(out_, in_ * kernel_); }

  Index in_ = 0, out_ = 0, kernel_ = 2, stride_ = 2;
  Batch saved_;
};

class BatchNorm1d {
 public:
  BatchNorm1d() = default;
  BatchNorm1d(const std::string& name, Index channels);

  Batch forward(const Batch& x, Mode mode);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);

  Param gamma;
  Param beta;
  Param running_mean;  // persistent, not trained
  Param running_var;   // persistent, not trained
  /// Number of train-mode batches seen. Until 1 / (1 - momentum) of them the
  /// running statistics are a plain cumulative average.
  Param updates;

 private:
  Index channels_ = 0;
  Mode mode_ = Mode::Train;
  BatchNormCache<double> cache_;
  Batch saved_;  // infer-mode input
};

/// conv (no bias) -> batch norm -> ReLU.
class ConvBnRelu {
 public:
  ConvBnRelu() = default;
  ConvBnRelu(const std::string& name, Index in_channels, Index out_channels, Index kernel);

  void initialize(Rng& rng) { conv.initialize(rng); }
  Batch forward(const Batch& x, Mode mode);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);

  Index out_channels() const { return conv.out_channels(); }

  Conv1d conv;
  BatchNorm1d bn;

 private:
  Batch pre_activation_;
};

/// Channel-wise concatenation of two batches.
Batch concat(const Batch& a, const Batch& b);
/// Inverse of concat on gradients: returns (grad_a, grad_b).
std::pair<Batch, Batch> split(const Batch& grad, Index first_channels);

Batch add(const Batch& a, const Batch& b);

class MaxPool1d {
 public:
  explicit MaxPool1d(Index window = 2) : window_(window) {}
  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);

 private:
  Index window_;
  Index input_length_ = 0;
  std::vector<Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> argmax_;
};

class Relu {
 public:
  Batch forward(const Batch& x);
  Batch backward(const Batch& grad_out);

 private:
  Batch saved_;
};

/// y = offset + scale * z with persistent (untrained) offset and scale. Maps
/// the unit-scale regression output of a network onto mmHg.
class OutputScaling {
 public:
  OutputScaling() = default;
  OutputScaling(const std::string& name, double offset, double scale);

  Tensor forward(const Tensor& z) const;
  Tensor backward(const Tensor& grad_out) const;
  void collect(ParamList& out);

  double offset_value() const { return offset.value[0]; }
  double scale_value() const { return scale.value[0]; }

  Param offset;
  Param scale;
};

}  // namespace ppg2abp::tensorops
