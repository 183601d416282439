#include "ppg2abp/models/multiresunet1d.hpp"

#include <cmath>

namespace ppg2abp::models {

namespace {

void accumulate(Batch& into, const Batch& g) {
  for (std::size_t b = 0; b < into.size(); ++b) into[b] += g[b];
}

}  // namespace

MultiResSplit multires_split(Index width) {
  if (width < 6) throw ShapeError("multires block: width " + std::to_string(width) + " is below 6");
  return {width / 6, width / 3, width / 2};
}

void MultiResUNet1DConfig::validate() const {
  if (depth < 2) throw ShapeError("multiresunet1d: depth must be at least 2");
  if (!(alpha > 0.0)) throw ShapeError("multiresunet1d: alpha must be positive");
  if (base_widths.size() != static_cast<std::size_t>(depth))
    throw ShapeError("multiresunet1d: need one base width per level");
  if (res_path_lengths.size() != static_cast<std::size_t>(depth - 1))
    throw ShapeError("multiresunet1d: need one res-path length per skip connection");
  for (int len : res_path_lengths)
    if (len < 1) throw ShapeError("multiresunet1d: res-path lengths must be positive");
  for (Index u : base_widths)
    if (u < 1) throw ShapeError("multiresunet1d: base widths must be positive");
  if (!(width_multiplier > 0.0)) throw ShapeError("multiresunet1d: width multiplier must be positive");
  const Index block = Index{1} << (depth - 1);
  if (input_length < block || input_length % block != 0)
    throw ShapeError("multiresunet1d: input length must be divisible by 2^(depth-1)");
  if (!(output_scale != 0.0) || !std::isfinite(output_scale) || !std::isfinite(output_offset))
    throw ShapeError("multiresunet1d: output scaling must be finite with a non-zero scale");
}

std::vector<Index> MultiResUNet1DConfig::scaled_widths() const {
  std::vector<Index> out;
  for (Index u : base_widths)
    out.push_back(std::max<Index>(1, static_cast<Index>(std::llround(static_cast<double>(u) * width_multiplier))));
  return out;
}

std::vector<Index> MultiResUNet1DConfig::block_widths() const {
  std::vector<Index> out;
  for (Index u : scaled_widths())
    out.push_back(std::max<Index>(6, static_cast<Index>(std::floor(alpha * static_cast<double>(u)))));
  return out;
}

MultiResBlock::MultiResBlock(const std::string& name, Index in_channels, Index width)
    : split_(multires_split(width)),
      shortcut_(name + ".shortcut", in_channels, split_.total(), 1, false),
      shortcut_bn_(name + ".shortcut_bn", split_.total()),
      stage1_(name + ".s1", in_channels, split_.first, 3),
      stage2_(name + ".s2", split_.first, split_.second, 3),
      stage3_(name + ".s3", split_.second, split_.third, 3),
      concat_bn_(name + ".concat_bn", split_.total()),
      out_bn_(name + ".out_bn", split_.total()) {}

void MultiResBlock::initialize(Rng& rng) {
  shortcut_.initialize(rng);
  stage1_.initialize(rng);
  stage2_.initialize(rng);
  stage3_.initialize(rng);
}

Batch MultiResBlock::forward(const Batch& x, Mode mode) {
  const Batch sc = shortcut_bn_.forward(shortcut_.forward(x), mode);
  const Batch a = stage1_.forward(x, mode);
  const Batch b = stage2_.forward(a, mode);
  const Batch c = stage3_.forward(b, mode);
  const Batch cat = concat_bn_.forward(tensorops::concat(tensorops::concat(a, b), c), mode);
  return out_bn_.forward(relu_.forward(tensorops::add(cat, sc)), mode);
}

Batch MultiResBlock::backward(const Batch& grad_out) {
  const Batch g = relu_.backward(out_bn_.backward(grad_out));
  Batch g_cat = concat_bn_.backward(g);
  auto [g_ab, g_c] = tensorops::split(g_cat, split_.first + split_.second);
  auto [g_a, g_b] = tensorops::split(g_ab, split_.first);
  accumulate(g_b, stage3_.backward(g_c));
  accumulate(g_a, stage2_.backward(g_b));
  Batch g_x = stage1_.backward(g_a);
  accumulate(g_x, shortcut_.backward(shortcut_bn_.backward(g)));
  return g_x;
}

void MultiResBlock::collect(ParamList& out) {
  shortcut_.collect(out);
  shortcut_bn_.collect(out);
  stage1_.collect(out);
  stage2_.collect(out);
  stage3_.collect(out);
  concat_bn_.collect(out);
  out_bn_.collect(out);
}

ResPath::ResPath(const std::string& name, Index in_channels, Index filters, int length) {
  if (length < 1) throw ShapeError(name + ": res path length must be positive");
  Index in = in_channels;
  for (int i = 0; i < length; ++i) {
    const std::string unit = name + "." + std::to_string(i);
    units_.push_back(Unit{tensorops::Conv1d(unit + ".shortcut", in, filters, 1, false),
                          tensorops::BatchNorm1d(unit + ".shortcut_bn", filters),
                          tensorops::ConvBnRelu(unit + ".main", in, filters, 3), tensorops::Relu(),
                          tensorops::BatchNorm1d(unit + ".out_bn", filters)});
    in = filters;
  }
}

void ResPath::initialize(Rng& rng) {
  for (auto& u : units_) {
    u.shortcut.initialize(rng);
    u.main.initialize(rng);
  }
}

Batch ResPath::forward(const Batch& x, Mode mode) {
  Batch h = x;
  for (auto& u : units_) {
    const Batch sc = u.shortcut_bn.forward(u.shortcut.forward(h), mode);
    h = u.out_bn.forward(u.relu.forward(tensorops::add(u.main.forward(h, mode), sc)), mode);
  }
  return h;
}

Batch ResPath::backward(const Batch& grad_out) {
  Batch g = grad_out;
  for (auto it = units_.rbegin(); it != units_.rend(); ++it) {
    const Batch gs = it->relu.backward(it->out_bn.backward(g));
    g = it->main.backward(gs);
    accumulate(g, it->shortcut.backward(it->shortcut_bn.backward(gs)));
  }
  return g;
}

void ResPath::collect(ParamList& out) {
  for (auto& u : units_) {
    u.shortcut.collect(out);
    u.shortcut_bn.collect(out);
    u.main.collect(out);
    u.out_bn.collect(out);
  }
}

MultiResUNet1D::MultiResUNet1D(const MultiResUNet1DConfig& config) : config_(config) {
  config_.validate();
  const auto u = config_.scaled_widths();
  const auto w = config_.block_widths();
  const int levels = config_.depth - 1;
  Index in = 1;
  for (int l = 0; l < levels; ++l) {
    encoder_.emplace_back("enc" + std::to_string(l), in, w[l]);
    const Index ch = encoder_.back().out_channels();
    res_paths_.emplace_back("respath" + std::to_string(l), ch, u[l], config_.res_path_lengths[l]);
    pools_.emplace_back(2);
    in = ch;
  }
  bottleneck_ = MultiResBlock("bottleneck", in, w[levels]);
  Index below = bottleneck_.out_channels();
  up_.resize(static_cast<std::size_t>(levels));
  decoder_.resize(static_cast<std::size_t>(levels));
  for (int l = levels - 1; l >= 0; --l) {
    const std::string name = "dec" + std::to_string(l);
    up_[l] = tensorops::ConvTranspose1d(name + ".up", below, u[l], 2, 2);
    decoder_[l] = MultiResBlock(name, 2 * u[l], w[l]);
    below = decoder_[l].out_channels();
  }
  head_ = tensorops::Conv1d("head", below, 1, 1, true);
  scaling_ = tensorops::OutputScaling("output", config_.output_offset, config_.output_scale);

  Rng rng(config_.seed);
  for (int l = 0; l < levels; ++l) {
    encoder_[l].initialize(rng);
    res_paths_[l].initialize(rng);
  }
  bottleneck_.initialize(rng);
  for (int l = levels - 1; l >= 0; --l) {
    up_[l].initialize(rng);
    decoder_[l].initialize(rng);
  }
  head_.initialize(rng);
  if (config_.residual_output) head_.weight.value.setZero();
}

BatchOutput MultiResUNet1D::forward(const Batch& x, Mode mode) {
  for (const auto& t : x)
    if (t.rows() != 1 || t.cols() != config_.input_length)
      throw ShapeError("multiresunet1d: expected input 1x" + std::to_string(config_.input_length) + ", got " +
                       std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
  const int levels = config_.depth - 1;
  std::vector<Batch> skips(static_cast<std::size_t>(levels));
  Batch h = x;
  for (int l = 0; l < levels; ++l) {
    h = encoder_[l].forward(h, mode);
    skips[l] = res_paths_[l].forward(h, mode);
    h = pools_[l].forward(h);
  }
  h = bottleneck_.forward(h, mode);
  for (int l = levels - 1; l >= 0; --l) h = decoder_[l].forward(tensorops::concat(up_[l].forward(h), skips[l]), mode);
  BatchOutput out;
  Batch z = head_.forward(h);
  out.final.reserve(z.size());
  for (std::size_t b = 0; b < z.size(); ++b) {
    out.final.push_back(scaling_.forward(z[b]));
    if (config_.residual_output) out.final.back() += x[b];
  }
  return out;
}

Batch MultiResUNet1D::backward(const BatchOutput& grad) {
  const int levels = config_.depth - 1;
  const auto u = config_.scaled_widths();
  Batch g;
  g.reserve(grad.final.size());
  for (const auto& t : grad.final) g.push_back(scaling_.backward(t));
  g = head_.backward(g);
  std::vector<Batch> skip_grads(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    auto [g_up, g_skip] = tensorops::split(decoder_[l].backward(g), u[l]);
    skip_grads[l] = std::move(g_skip);
    g = up_[l].backward(g_up);
  }
  g = bottleneck_.backward(g);
  for (int l = levels - 1; l >= 0; --l) {
    g = pools_[l].backward(g);
    accumulate(g, res_paths_[l].backward(skip_grads[l]));
    g = encoder_[l].backward(g);
  }
  if (config_.residual_output) accumulate(g, grad.final);
  return g;
}

ParamList MultiResUNet1D::parameters() {
  ParamList p;
  const int levels = config_.depth - 1;
  for (int l = 0; l < levels; ++l) {
    encoder_[l].collect(p);
    res_paths_[l].collect(p);
  }
  bottleneck_.collect(p);
  for (int l = levels - 1; l >= 0; --l) {
    up_[l].collect(p);
    decoder_[l].collect(p);
  }
  head_.collect(p);
  scaling_.collect(p);
  return p;
}

MultiResUNet1D build_multiresunet1d(const MultiResUNet1DConfig& config) { return MultiResUNet1D(config); }

}  // namespace ppg2abp::models
