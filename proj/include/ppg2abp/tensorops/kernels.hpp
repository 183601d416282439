#pragma once

// Stateless forward/backward kernels for the 1D layer set. Tensors are
// channels x length; convolution weights are (out x in*k) row-major, i.e. the
// flat out x in x k kernel layout.

#include "ppg2abp/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>

namespace ppg2abp::tensorops {

template <typename T>
using NonDeduced = std::type_identity_t<T>;

enum class Mode { Train, Infer };

/// While installed, piecewise-linear kernels (ReLU masks, max-pool winners)
/// fold their branch decisions into a hash. Finite-difference checks compare
/// hashes to detect steps that cross a non-differentiable point.
class BranchProbe {
 public:
  BranchProbe() : previous_(slot()) { slot() = this; }
  ~BranchProbe() { slot() = previous_; }
  BranchProbe(const BranchProbe&) = delete;
  BranchProbe& operator=(const BranchProbe&) = delete;

  static BranchProbe* active() { return slot(); }
  void mix(std::uint64_t v) { hash_ = (hash_ ^ v) * 0x100000001b3ULL; }
  std::uint64_t value() const { return hash_; }

 private:
  static BranchProbe*& slot() {
    thread_local BranchProbe* current = nullptr;
    return current;
  }
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  BranchProbe* previous_;
};

// ---------------------------------------------------------------------------
// Convolution (stride 1, zero "same" padding, cross-correlation)

/// (C*K) x L patch matrix: cols(c*K + k, j) = x(c, j + k - K/2), zero outside.
template <typename Scalar>
TensorT<Scalar> im2col(const TensorT<Scalar>& x, Index kernel) {
  const Index channels = x.rows(), length = x.cols(), pad = kernel / 2;
  TensorT<Scalar> cols = TensorT<Scalar>::Zero(channels * kernel, length);
  for (Index c = 0; c < channels; ++c) {
    for (Index k = 0; k < kernel; ++k) {
      const Index shift = k - pad;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(length, length - shift);
      if (hi > lo) cols.row(c * kernel + k).segment(lo, hi - lo) = x.row(c).segment(lo + shift, hi - lo);
    }
  }
  return cols;
}

/// Adjoint of im2col.
template <typename Scalar>
TensorT<Scalar> col2im(const TensorT<Scalar>& cols, Index channels, Index kernel) {
  const Index length = cols.cols(), pad = kernel / 2;
  TensorT<Scalar> x = TensorT<Scalar>::Zero(channels, length);
  for (Index c = 0; c < channels; ++c) {
    for (Index k = 0; k < kernel; ++k) {
      const Index shift = k - pad;
      const Index lo = std::max<Index>(0, -shift);
      const Index hi = std::min<Index>(length, length - shift);
      if (hi > lo) x.row(c).segment(lo + shift, hi - lo) += cols.row(c * kernel + k).segment(lo, hi - lo);
    }
  }
  return x;
}

template <typename Scalar, typename WeightDerived>
void check_conv_shapes(const TensorT<Scalar>& x, const Eigen::MatrixBase<WeightDerived>& weight, Index kernel,
                       const char* op) {
  if (kernel < 1) throw ShapeError(std::string(op) + ": kernel size must be positive");
  if (x.rows() * kernel != weight.cols())
    throw ShapeError(std::string(op) + ": input has " + std::to_string(x.rows()) + " channels, weight expects " +
                     std::to_string(weight.cols() / kernel));
}

/// out[c, i] = bias[c] + sum_{c', k} w[c, c', k] x[c', i + k - K/2]. An empty
/// bias vector means no bias.
template <typename Scalar, typename WeightDerived>
TensorT<Scalar> conv1d_forward(const TensorT<Scalar>& x, const Eigen::MatrixBase<WeightDerived>& weight,
                               const NonDeduced<VectorT<Scalar>>& bias, Index kernel) {
  if (kernel % 2 == 0) throw ShapeError("conv1d: kernel size must be odd");
  check_conv_shapes(x, weight, kernel, "conv1d");
  TensorT<Scalar> out = (kernel == 1) ? TensorT<Scalar>(weight * x) : TensorT<Scalar>(weight * im2col(x, kernel));
  if (bias.size() != 0) {
    if (bias.size() != out.rows()) throw ShapeError("conv1d: bias length does not match output channels");
    out.colwise() += bias;
  }
  return out;
}

template <typename Scalar>
struct ConvGrads {
  TensorT<Scalar> input;
  TensorT<Scalar> weight;
  VectorT<Scalar> bias;
};

template <typename Scalar, typename WeightDerived>
ConvGrads<Scalar> conv1d_backward(const TensorT<Scalar>& grad_out, const TensorT<Scalar>& saved_input,
                                  const Eigen::MatrixBase<WeightDerived>& weight, Index kernel) {
  check_conv_shapes(saved_input, weight, kernel, "conv1d_backward");
  if (grad_out.rows() != weight.rows() || grad_out.cols() != saved_input.cols())
    throw ShapeError("conv1d_backward: gradient shape does not match the forward output");
  ConvGrads<Scalar> g;
  if (kernel == 1) {
    g.weight = grad_out * saved_input.transpose();
    g.input = weight.transpose() * grad_out;
  } else {
    const TensorT<Scalar> cols = im2col(saved_input, kernel);
    g.weight = grad_out * cols.transpose();
    g.input = col2im<Scalar>(weight.transpose() * grad_out, saved_input.rows(), kernel);
  }
  g.bias = grad_out.rowwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// Transposed convolution: out[c, s*j + k - crop] += w[c, c', k] x[c', j],
// output length s*L, crop = (K - s) / 2.

template <typename Scalar, typename WeightDerived>
TensorT<Scalar> kernel_tap(const Eigen::MatrixBase<WeightDerived>& weight, Index kernel, Index tap) {
  const Index out = weight.rows(), in = weight.cols() / kernel;
  TensorT<Scalar> w(out, in);
  for (Index o = 0; o < out; ++o)
    for (Index i = 0; i < in; ++i) w(o, i) = weight(o, i * kernel + tap);
  return w;
}

inline void check_transposed(Index kernel, Index stride) {
  if (stride < 1) throw ShapeError("transposed_conv1d: stride must be positive");
  if (kernel < stride || (kernel - stride) % 2 != 0)
    throw ShapeError("transposed_conv1d: kernel must be >= stride with an even difference");
}

template <typename Scalar, typename WeightDerived>
TensorT<Scalar> transposed_conv1d_forward(const TensorT<Scalar>& x, const Eigen::MatrixBase<WeightDerived>& weight,
                                          const NonDeduced<VectorT<Scalar>>& bias, Index kernel,
                                          Index stride = 2) {
  check_transposed(kernel, stride);
  check_conv_shapes(x, weight, kernel, "transposed_conv1d");
  const Index length = x.cols(), out_len = stride * length, crop = (kernel - stride) / 2;
  TensorT<Scalar> out = TensorT<Scalar>::Zero(weight.rows(), out_len);
  for (Index k = 0; k < kernel; ++k) {
    const TensorT<Scalar> y = kernel_tap<Scalar>(weight, kernel, k) * x;
    for (Index j = 0; j < length; ++j) {
      const Index t = stride * j + k - crop;
      if (t >= 0 && t < out_len) out.col(t) += y.col(j);
    }
  }
  if (bias.size() != 0) {
    if (bias.size() != out.rows()) throw ShapeError("transposed_conv1d: bias length does not match output channels");
    out.colwise() += bias;
  }
  return out;
}

template <typename Scalar, typename WeightDerived>
ConvGrads<Scalar> transposed_conv1d_backward(const TensorT<Scalar>& grad_out, const TensorT<Scalar>& saved_input,
                                             const Eigen::MatrixBase<WeightDerived>& weight, Index kernel,
                                             Index stride = 2) {
  check_transposed(kernel, stride);
  check_conv_shapes(saved_input, weight, kernel, "transposed_conv1d_backward");
  const Index length = saved_input.cols(), out_len = stride * length, crop = (kernel - stride) / 2;
  if (grad_out.rows() != weight.rows() || grad_out.cols() != out_len)
    throw ShapeError("transposed_conv1d_backward: gradient shape does not match the forward output");
  ConvGrads<Scalar> g;
  g.input = TensorT<Scalar>::Zero(saved_input.rows(), length);
  g.weight = TensorT<Scalar>::Zero(weight.rows(), weight.cols());
  const Index in = saved_input.rows();
  for (Index k = 0; k < kernel; ++k) {
    TensorT<Scalar> gk = TensorT<Scalar>::Zero(grad_out.rows(), length);
    for (Index j = 0; j < length; ++j) {
      const Index t = stride * j + k - crop;
      if (t >= 0 && t < out_len) gk.col(j) = grad_out.col(t);
    }
    g.input.noalias() += kernel_tap<Scalar>(weight, kernel, k).transpose() * gk;
    const TensorT<Scalar> gw = gk * saved_input.transpose();
    for (Index i = 0; i < in; ++i) g.weight.col(i * kernel + k) += gw.col(i);
  }
  g.bias = grad_out.rowwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// Max pooling (non-overlapping windows, ties to the earliest index)

template <typename Scalar>
struct PoolResult {
  TensorT<Scalar> output;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> argmax;
};

template <typename Scalar>
PoolResult<Scalar> maxpool1d_forward(const TensorT<Scalar>& x, Index window = 2) {
  if (window < 1 || x.cols() % window != 0)
    throw ShapeError("maxpool1d: length " + std::to_string(x.cols()) + " is not divisible by window " +
                     std::to_string(window));
  const Index out_len = x.cols() / window;
  PoolResult<Scalar> r;
  r.output.resize(x.rows(), out_len);
  r.argmax.resize(x.rows(), out_len);
  for (Index c = 0; c < x.rows(); ++c) {
    for (Index j = 0; j < out_len; ++j) {
      Index best = j * window;
      for (Index t = best + 1; t < (j + 1) * window; ++t)
        if (x(c, t) > x(c, best)) best = t;
      r.output(c, j) = x(c, best);
      r.argmax(c, j) = best;
      if (auto* probe = BranchProbe::active()) probe->mix(static_cast<std::uint64_t>(best));
    }
  }
  return r;
}

template <typename Scalar, typename ArgDerived>
TensorT<Scalar> maxpool1d_backward(const TensorT<Scalar>& grad_out, const Eigen::MatrixBase<ArgDerived>& argmax,
                                   Index input_length) {
  if (grad_out.rows() != argmax.rows() || grad_out.cols() != argmax.cols())
    throw ShapeError("maxpool1d_backward: gradient shape does not match the argmax record");
  TensorT<Scalar> g = TensorT<Scalar>::Zero(grad_out.rows(), input_length);
  for (Index c = 0; c < grad_out.rows(); ++c)
    for (Index j = 0; j < grad_out.cols(); ++j) g(c, argmax(c, j)) += grad_out(c, j);
  return g;
}

/// Mean over non-overlapping windows; used to subsample deep-supervision targets.
template <typename Scalar>
TensorT<Scalar> avgpool1d(const TensorT<Scalar>& x, Index window) {
  if (window < 1 || x.cols() % window != 0) throw ShapeError("avgpool1d: length not divisible by window");
  const Index out_len = x.cols() / window;
  TensorT<Scalar> out(x.rows(), out_len);
  for (Index c = 0; c < x.rows(); ++c)
    for (Index j = 0; j < out_len; ++j) out(c, j) = x.row(c).segment(j * window, window).mean();
  return out;
}

// ---------------------------------------------------------------------------
// Activations and channel concatenation

template <typename Scalar>
TensorT<Scalar> relu_forward(const TensorT<Scalar>& x) {
  if (auto* probe = BranchProbe::active())
    for (Index i = 0; i < x.size(); ++i) probe->mix(x.data()[i] > Scalar(0) ? 1 : 0);
  return x.cwiseMax(Scalar(0));
}

/// Subgradient 0 at exactly 0.
template <typename Scalar>
TensorT<Scalar> relu_backward(const TensorT<Scalar>& grad_out, const TensorT<Scalar>& saved_input) {
  if (grad_out.rows() != saved_input.rows() || grad_out.cols() != saved_input.cols())
    throw ShapeError("relu_backward: shape mismatch");
  return (saved_input.array() > Scalar(0)).select(grad_out, Scalar(0));
}

template <typename Scalar>
TensorT<Scalar> linear_activation(const TensorT<Scalar>& x) {
  return x;
}

template <typename Scalar>
TensorT<Scalar> concat_channels(const TensorT<Scalar>& a, const TensorT<Scalar>& b) {
  if (a.rows() == 0) return b;
  if (b.rows() == 0) return a;
  if (a.cols() != b.cols())
    throw ShapeError("concat_channels: lengths differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  TensorT<Scalar> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

template <typename Scalar>
std::pair<TensorT<Scalar>, TensorT<Scalar>> split_channels(const TensorT<Scalar>& x, Index first_channels) {
  if (first_channels < 0 || first_channels > x.rows()) throw ShapeError("split_channels: bad split point");
  return {x.topRows(first_channels), x.bottomRows(x.rows() - first_channels)};
}

// ---------------------------------------------------------------------------
// Batch normalisation over (batch x length) per channel

template <typename Scalar>
struct BatchNormCache {
  BatchT<Scalar> xhat;
  VectorT<Scalar> inv_std;
};

template <typename Scalar>
void check_bn_batch(const BatchT<Scalar>& x, Index channels, const char* op) {
  if (x.empty()) throw ShapeError(std::string(op) + ": empty batch");
  for (const auto& t : x) {
    if (t.rows() != channels || t.cols() != x.front().cols())
      throw ShapeError(std::string(op) + ": inconsistent batch shapes");
  }
}

/// Normalises with the batch statistics (biased variance) and returns them
/// through `mean` / `var` for running-stat updates.
template <typename Scalar>
BatchT<Scalar> batchnorm1d_train_forward(const BatchT<Scalar>& x, const NonDeduced<VectorT<Scalar>>& gamma,
                                         const NonDeduced<VectorT<Scalar>>& beta, Scalar eps,
                                         BatchNormCache<Scalar>& cache, VectorT<Scalar>& mean,
                                         VectorT<Scalar>& var) {
  const Index channels = gamma.size();
  check_bn_batch(x, channels, "batchnorm1d");
  if (x.size() < 2) throw ShapeError("batchnorm1d: training mode needs a batch of at least 2");
  const Scalar count = static_cast<Scalar>(x.size() * static_cast<std::size_t>(x.front().cols()));
  mean = VectorT<Scalar>::Zero(channels);
  for (const auto& t : x) mean += t.rowwise().sum();
  mean /= count;
  var = VectorT<Scalar>::Zero(channels);
  for (const auto& t : x) var += (t.colwise() - mean).rowwise().squaredNorm();
  var /= count;
  cache.inv_std = (var.array() + eps).rsqrt().matrix();
  cache.xhat.clear();
  BatchT<Scalar> out;
  out.reserve(x.size());
  for (const auto& t : x) {
    TensorT<Scalar> xhat = (t.colwise() - mean).array().colwise() * cache.inv_std.array();
    TensorT<Scalar> y = (xhat.array().colwise() * gamma.array()).colwise() + beta.array();
    cache.xhat.push_back(std::move(xhat));
    out.push_back(std::move(y));
  }
  return out;
}

template <typename Scalar>
struct BatchNormGrads {
  BatchT<Scalar> input;
  VectorT<Scalar> gamma;
  VectorT<Scalar> beta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm1d_train_backward(const BatchT<Scalar>& grad_out, const BatchNormCache<Scalar>& cache,
                                                  const NonDeduced<VectorT<Scalar>>& gamma) {
  const Index channels = gamma.size();
  check_bn_batch(grad_out, channels, "batchnorm1d_backward");
  if (grad_out.size() != cache.xhat.size()) throw ShapeError("batchnorm1d_backward: batch size mismatch");
  const Scalar count = static_cast<Scalar>(grad_out.size() * static_cast<std::size_t>(grad_out.front().cols()));
  BatchNormGrads<Scalar> g;
  g.gamma = VectorT<Scalar>::Zero(channels);
  g.beta = VectorT<Scalar>::Zero(channels);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    g.beta += grad_out[b].rowwise().sum();
    g.gamma += grad_out[b].cwiseProduct(cache.xhat[b]).rowwise().sum();
  }
  // dxhat = g * gamma; sum(dxhat) = gamma * dbeta; sum(dxhat * xhat) = gamma * dgamma.
  const VectorT<Scalar> scale = (gamma.array() * cache.inv_std.array() / count).matrix();
  g.input.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    TensorT<Scalar> dx = (grad_out[b] * count).colwise() - g.beta;
    dx -= (cache.xhat[b].array().colwise() * g.gamma.array()).matrix();
    dx = dx.array().colwise() * scale.array();
    g.input.push_back(std::move(dx));
  }
  return g;
}

/// Pure per-channel affine map with the running statistics.
template <typename Scalar>
TensorT<Scalar> batchnorm1d_infer_forward(const TensorT<Scalar>& x, const NonDeduced<VectorT<Scalar>>& gamma,
                                          const NonDeduced<VectorT<Scalar>>& beta,
                                          const NonDeduced<VectorT<Scalar>>& running_mean,
                                          const NonDeduced<VectorT<Scalar>>& running_var, Scalar eps) {
  if (x.rows() != gamma.size()) throw ShapeError("batchnorm1d: channel mismatch");
  const VectorT<Scalar> scale = (gamma.array() * (running_var.array() + eps).rsqrt()).matrix();
  const VectorT<Scalar> shift = beta - (scale.array() * running_mean.array()).matrix();
  return (x.array().colwise() * scale.array()).colwise() + shift.array();
}

}  // namespace ppg2abp::tensorops
