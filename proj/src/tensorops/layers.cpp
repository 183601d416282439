#include "ppg2abp/tensorops/layers.hpp"

#include <algorithm>

namespace ppg2abp::tensorops {

namespace {

void check_same_size(const Batch& a, const Batch& b, const char* op) {
  if (a.size() != b.size())
    throw ShapeError(std::string(op) + ": batch size " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
}

}  // namespace

Conv1d::Conv1d(const std::string& name, Index in_channels, Index out_channels, Index kernel, bool with_bias)
    : weight(name + ".weight", {out_channels, in_channels, kernel}),
      bias(name + ".bias", {with_bias ? out_channels : 0}),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      has_bias_(with_bias) {
  if (in_channels < 1 || out_channels < 1) throw ShapeError(name + ": channel counts must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ShapeError(name + ": kernel size must be odd");
}

void Conv1d::initialize(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_ * kernel_));
  for (Index i = 0; i < weight.size(); ++i) weight.value[i] = rng.uniform(-bound, bound);
  bias.value.setZero();
}

Batch Conv1d::forward(const Batch& x) {
  saved_ = x;
  const Vector b = has_bias_ ? Vector(bias.value.matrix()) : Vector();
  Batch out;
  out.reserve(x.size());
  for (const auto& t : x) out.push_back(conv1d_forward(t, w(), b, kernel_));
  return out;
}

Batch Conv1d::backward(const Batch& grad_out) {
  check_same_size(grad_out, saved_, "conv1d_backward");
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  auto gw = weight.grad_matrix(out_, in_ * kernel_);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    auto g = conv1d_backward(grad_out[b], saved_[b], w(), kernel_);
    gw += g.weight;
    if (has_bias_) bias.grad += g.bias.array();
    grad_in.push_back(std::move(g.input));
  }
  return grad_in;
}

void Conv1d::collect(ParamList& out) {
  out.push_back(&weight);
  if (has_bias_) out.push_back(&bias);
}

ConvTranspose1d::ConvTranspose1d(const std::string& name, Index in_channels, Index out_channels, Index kernel,
                                 Index stride)
    : weight(name + ".weight", {out_channels, in_channels, kernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride) {
  if (in_channels < 1 || out_channels < 1) throw ShapeError(name + ": channel counts must be positive");
  check_transposed(kernel, stride);
}

void ConvTranspose1d::initialize(Rng& rng) {
  // Each output sample sees in * kernel / stride weights.
  const double fan_in = static_cast<double>(in_ * kernel_) / static_cast<double>(stride_);
  const double bound = 1.0 / std::sqrt(fan_in);
  for (Index i = 0; i < weight.size(); ++i) weight.value[i] = rng.uniform(-bound, bound);
  bias.value.setZero();
}

Batch ConvTranspose1d::forward(const Batch& x) {
  saved_ = x;
  const Vector b = bias.value.matrix();
  Batch out;
  out.reserve(x.size());
  for (const auto& t : x) out.push_back(transposed_conv1d_forward(t, w(), b, kernel_, stride_));
  return out;
}

Batch ConvTranspose1d::backward(const Batch& grad_out) {
  check_same_size(grad_out, saved_, "transposed_conv1d_backward");
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  auto gw = weight.grad_matrix(out_, in_ * kernel_);
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    auto g = transposed_conv1d_backward(grad_out[b], saved_[b], w(), kernel_, stride_);
    gw += g.weight;
    bias.grad += g.bias.array();
    grad_in.push_back(std::move(g.input));
  }
  return grad_in;
}

void ConvTranspose1d::collect(ParamList& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

BatchNorm1d::BatchNorm1d(const std::string& name, Index channels)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean(name + ".running_mean", {channels}, false),
      running_var(name + ".running_var", {channels}, false),
      updates(name + ".updates", {1}, false),
      channels_(channels) {
  gamma.value.setOnes();
  running_var.value.setOnes();
}

Batch BatchNorm1d::forward(const Batch& x, Mode mode) {
  mode_ = mode;
  const Vector g = gamma.value.matrix(), b = beta.value.matrix();
  if (mode == Mode::Train) {
    Vector mean, var;
    Batch out = batchnorm1d_train_forward(x, g, b, kBatchNormEps, cache_, mean, var);
    const double t = updates.value[0];
    const double m = std::min(kBatchNormMomentum, t / (t + 1.0));
    running_mean.value = m * running_mean.value + (1.0 - m) * mean.array();
    running_var.value = m * running_var.value + (1.0 - m) * var.array();
    updates.value[0] = t + 1.0;
    return out;
  }
  check_bn_batch(x, channels_, "batchnorm1d");
  saved_ = x;
  const Vector rm = running_mean.value.matrix(), rv = running_var.value.matrix();
  Batch out;
  out.reserve(x.size());
  for (const auto& t : x) out.push_back(batchnorm1d_infer_forward(t, g, b, rm, rv, kBatchNormEps));
  return out;
}

Batch BatchNorm1d::backward(const Batch& grad_out) {
  const Vector g = gamma.value.matrix();
  if (mode_ == Mode::Train) {
    auto grads = batchnorm1d_train_backward(grad_out, cache_, g);
    gamma.grad += grads.gamma.array();
    beta.grad += grads.beta.array();
    return std::move(grads.input);
  }
  check_same_size(grad_out, saved_, "batchnorm1d_backward");
  const Eigen::ArrayXd inv_std = (running_var.value + kBatchNormEps).rsqrt();
  const Eigen::ArrayXd scale = gamma.value * inv_std;
  Batch grad_in;
  grad_in.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) {
    const Tensor xhat = (saved_[b].array().colwise() - running_mean.value).colwise() * inv_std;
    gamma.grad += grad_out[b].cwiseProduct(xhat).rowwise().sum().array();
    beta.grad += grad_out[b].rowwise().sum().array();
    grad_in.push_back(grad_out[b].array().colwise() * scale);
  }
  return grad_in;
}

void BatchNorm1d::collect(ParamList& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
  out.push_back(&running_mean);
  out.push_back(&running_var);
  out.push_back(&updates);
}

ConvBnRelu::ConvBnRelu(const std::string& name, Index in_channels, Index out_channels, Index kernel)
    : conv(name + ".conv", in_channels, out_channels, kernel, false), bn(name + ".bn", out_channels) {}

Batch ConvBnRelu::forward(const Batch& x, Mode mode) {
  pre_activation_ = bn.forward(conv.forward(x), mode);
  Batch out;
  out.reserve(pre_activation_.size());
  for (const auto& t : pre_activation_) out.push_back(relu_forward(t));
  return out;
}

Batch ConvBnRelu::backward(const Batch& grad_out) {
  check_same_size(grad_out, pre_activation_, "conv_bn_relu_backward");
  Batch g;
  g.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) g.push_back(relu_backward(grad_out[b], pre_activation_[b]));
  return conv.backward(bn.backward(g));
}

void ConvBnRelu::collect(ParamList& out) {
  conv.collect(out);
  bn.collect(out);
}

Batch concat(const Batch& a, const Batch& b) {
  check_same_size(a, b, "concat");
  Batch out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(concat_channels(a[i], b[i]));
  return out;
}

std::pair<Batch, Batch> split(const Batch& grad, Index first_channels) {
  Batch a, b;
  a.reserve(grad.size());
  b.reserve(grad.size());
  for (const auto& t : grad) {
    auto [x, y] = split_channels(t, first_channels);
    a.push_back(std::move(x));
    b.push_back(std::move(y));
  }
  return {std::move(a), std::move(b)};
}

Batch add(const Batch& a, const Batch& b) {
  check_same_size(a, b, "add");
  Batch out;
  out.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) throw ShapeError("add: shape mismatch");
    out.push_back(a[i] + b[i]);
  }
  return out;
}

Batch MaxPool1d::forward(const Batch& x) {
  argmax_.clear();
  Batch out;
  out.reserve(x.size());
  for (const auto& t : x) {
    auto r = maxpool1d_forward(t, window_);
    input_length_ = t.cols();
    argmax_.push_back(std::move(r.argmax));
    out.push_back(std::move(r.output));
  }
  return out;
}

Batch MaxPool1d::backward(const Batch& grad_out) {
  if (grad_out.size() != argmax_.size()) throw ShapeError("maxpool1d_backward: batch size mismatch");
  Batch g;
  g.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b)
    g.push_back(maxpool1d_backward(grad_out[b], argmax_[b], input_length_));
  return g;
}

Batch Relu::forward(const Batch& x) {
  saved_ = x;
  Batch out;
  out.reserve(x.size());
  for (const auto& t : x) out.push_back(relu_forward(t));
  return out;
}

Batch Relu::backward(const Batch& grad_out) {
  check_same_size(grad_out, saved_, "relu_backward");
  Batch g;
  g.reserve(grad_out.size());
  for (std::size_t b = 0; b < grad_out.size(); ++b) g.push_back(relu_backward(grad_out[b], saved_[b]));
  return g;
}

OutputScaling::OutputScaling(const std::string& name, double off, double sc)
    : offset(name + ".offset", {1}, false), scale(name + ".scale", {1}, false) {
  offset.value[0] = off;
  scale.value[0] = sc;
}

Tensor OutputScaling::forward(const Tensor& z) const {
  return (z.array() * scale.value[0] + offset.value[0]).matrix();
}

Tensor OutputScaling::backward(const Tensor& grad_out) const { return grad_out * scale.value[0]; }

void OutputScaling::collect(ParamList& out) {
  out.push_back(&offset);
  out.push_back(&scale);
}

}  // namespace ppg2abp::tensorops
