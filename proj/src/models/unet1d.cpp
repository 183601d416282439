#include "ppg2abp/models/unet1d.hpp"

#include <cmath>

namespace ppg2abp::models {

namespace {

Batch apply_scaling(const tensorops::OutputScaling& s, const Batch& z) {
  Batch out;
  out.reserve(z.size());
  for (const auto& t : z) out.push_back(s.forward(t));
  return out;
}

Batch unscale_grad(const tensorops::OutputScaling& s, const Batch& g) {
  Batch out;
  out.reserve(g.size());
  for (const auto& t : g) out.push_back(s.backward(t));
  return out;
}

void accumulate(Batch& into, const Batch& g) {
  for (std::size_t b = 0; b < into.size(); ++b) into[b] += g[b];
}

}  // namespace

void UNet1DConfig::validate() const {
  if (depth < 2) throw ShapeError("unet1d: depth must be at least 2");
  if (filters.size() != static_cast<std::size_t>(depth)) throw ShapeError("unet1d: need one filter count per level");
  for (Index f : filters)
    if (f < 1) throw ShapeError("unet1d: filter counts must be positive");
  if (!(width_multiplier > 0.0)) throw ShapeError("unet1d: width multiplier must be positive");
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ShapeError("unet1d: kernel size must be odd");
  const Index block = Index{1} << (depth - 1);
  if (input_length < block || input_length % block != 0)
    throw ShapeError("unet1d: input length must be divisible by 2^(depth-1)");
  if (deep_supervision_weights.size() != static_cast<std::size_t>(depth))
    throw ShapeError("unet1d: need one deep-supervision weight per level");
  if (deep_supervision_weights.front() != 1.0) throw ShapeError("unet1d: the final output weight must be 1");
  for (std::size_t i = 1; i < deep_supervision_weights.size(); ++i)
    if (!(deep_supervision_weights[i] < deep_supervision_weights[i - 1]))
      throw ShapeError("unet1d: deep-supervision weights must be strictly decreasing");
  if (!(output_scale != 0.0) || !std::isfinite(output_scale) || !std::isfinite(output_offset))
    throw ShapeError("unet1d: output scaling must be finite with a non-zero scale");
}

std::vector<Index> UNet1DConfig::scaled_filters() const {
  std::vector<Index> out;
  for (Index f : filters)
    out.push_back(std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(f) * width_multiplier))));
  return out;
}

UNet1D::UNet1D(const UNet1DConfig& config) : config_(config) {
  config_.validate();
  const auto f = config_.scaled_filters();
  const Index k = config_.kernel_size;
  const int levels = config_.depth - 1;
  Index in = 1;
  for (int l = 0; l < levels; ++l) {
    const std::string name = "enc" + std::to_string(l);
    encoder_.push_back({tensorops::ConvBnRelu(name + ".0", in, f[l], k), tensorops::ConvBnRelu(name + ".1", f[l], f[l], k)});
    pools_.emplace_back(2);
    in = f[l];
  }
  bottleneck_ = {tensorops::ConvBnRelu("bottleneck.0", in, f[levels], k),
                 tensorops::ConvBnRelu("bottleneck.1", f[levels], f[levels], k)};
  for (int l = 0; l < levels; ++l) {
    const std::string name = "dec" + std::to_string(l);
    up_.emplace_back(name + ".up", f[l + 1], f[l], 2, 2);
    decoder_.push_back({tensorops::ConvBnRelu(name + ".0", 2 * f[l], f[l], k),
                        tensorops::ConvBnRelu(name + ".1", f[l], f[l], k)});
    aux_heads_.emplace_back("aux" + std::to_string(l + 1), f[l + 1], 1, 1, true);
  }
  head_ = tensorops::Conv1d("head", f[0], 1, 1, true);
  scaling_ = tensorops::OutputScaling("output", config_.output_offset, config_.output_scale);

  Rng rng(config_.seed);
  for (auto& s : encoder_) {
    s.first.initialize(rng);
    s.second.initialize(rng);
  }
  bottleneck_.first.initialize(rng);
  bottleneck_.second.initialize(rng);
  for (int l = 0; l < levels; ++l) {
    up_[l].initialize(rng);
    decoder_[l].first.initialize(rng);
    decoder_[l].second.initialize(rng);
    aux_heads_[l].initialize(rng);
  }
  head_.initialize(rng);
}

BatchOutput UNet1D::forward(const Batch& x, Mode mode) {
  for (const auto& t : x)
    if (t.rows() != 1 || t.cols() != config_.input_length)
      throw ShapeError("unet1d: expected input 1x" + std::to_string(config_.input_length) + ", got " +
                       std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  const int levels = config_.depth - 1;
  std::vector<Batch> skips(static_cast<std::size_t>(levels));
  Batch h = x;
  for (int l = 0; l < levels; ++l) {
    h = encoder_[l].second.forward(encoder_[l].first.forward(h, mode), mode);
    skips[l] = h;
    h = pools_[l].forward(h);
  }
  h = bottleneck_.second.forward(bottleneck_.first.forward(h, mode), mode);

  BatchOutput out;
  out.auxiliaries.resize(static_cast<std::size_t>(levels));
  for (int l = levels - 1; l >= 0; --l) {
    out.auxiliaries[l] = apply_scaling(scaling_, aux_heads_[l].forward(h));
    h = tensorops::concat(up_[l].forward(h), skips[l]);
    h = decoder_[l].second.forward(decoder_[l].first.forward(h, mode), mode);
  }
  out.final = apply_scaling(scaling_, head_.forward(h));
  return out;
}

Batch UNet1D::backward(const BatchOutput& grad) {
  const int levels = config_.depth - 1;
  if (!grad.auxiliaries.empty() && grad.auxiliaries.size() != static_cast<std::size_t>(levels))
    throw ShapeError("unet1d_backward: wrong number of auxiliary gradients");
  const auto f = config_.scaled_filters();
  std::vector<Batch> skip_grads(static_cast<std::size_t>(levels));
  Batch g = head_.backward(unscale_grad(scaling_, grad.final));
  for (int l = 0; l < levels; ++l) {
    g = decoder_[l].first.backward(decoder_[l].second.backward(g));
    auto [g_up, g_skip] = tensorops::split(g, f[l]);
    skip_grads[l] = std::move(g_skip);
    g = up_[l].backward(g_up);
    if (!grad.auxiliaries.empty() && !grad.auxiliaries[l].empty())
      accumulate(g, aux_heads_[l].backward(unscale_grad(scaling_, grad.auxiliaries[l])));
  }
  g = bottleneck_.first.backward(bottleneck_.second.backward(g));
  for (int l = levels - 1; l >= 0; --l) {
    g = pools_[l].backward(g);
    accumulate(g, skip_grads[l]);
    g = encoder_[l].first.backward(encoder_[l].second.backward(g));
  }
  return g;
}

ParamList UNet1D::parameters() {
  ParamList p;
  for (auto& s : encoder_) {
    s.first.collect(p);
    s.second.collect(p);
  }
  bottleneck_.first.collect(p);
  bottleneck_.second.collect(p);
  for (std::size_t l = 0; l < up_.size(); ++l) {
    up_[l].collect(p);
    decoder_[l].first.collect(p);
    decoder_[l].second.collect(p);
    aux_heads_[l].collect(p);
  }
  head_.collect(p);
  scaling_.collect(p);
  return p;
}

UNet1D build_unet1d(const UNet1DConfig& config) { return UNet1D(config); }

}  // namespace ppg2abp::models
